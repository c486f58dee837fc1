#include "manifest.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <memory>

#include "fmt/core.h"
#include "json.hpp"
#include "openssl/evp.h"

#include "covsim/types.hpp"

namespace covsim::cli {

namespace fs = std::filesystem;

std::string sha256_file(fs::path const& path) {
  std::ifstream in{path, std::ios::binary};
  if (!in) {
    throw error{fmt::format("cannot read '{}' for hashing", path.string())};
  }
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(),
                                                              EVP_MD_CTX_free};
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw error{"cannot initialise SHA-256"};
  }
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) {
      EVP_DigestUpdate(ctx.get(), buf.data(),
                       static_cast<std::size_t>(in.gcount()));
    }
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += fmt::format("{:02x}", md[i]);
  }
  return hex;
}

void run_manifest::add_input(fs::path const& path) {
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (auto const& e : fs::recursive_directory_iterator{path}) {
      if (e.is_regular_file()) {
        files.push_back(e.path());
      }
    }
    std::sort(begin(files), end(files));
    for (auto const& f : files) {
      inputs_.emplace_back(f.generic_string(), sha256_file(f));
    }
    return;
  }
  inputs_.emplace_back(path.generic_string(), sha256_file(path));
}

void run_manifest::add_output(fs::path const& path) {
  outputs_.emplace_back(path.generic_string(), sha256_file(path));
}

std::string run_manifest::to_json() const {
  auto const as_object = [](auto const& pairs) {
    nlohmann::json o = nlohmann::json::object();
    for (auto const& [k, v] : pairs) {
      o[k] = v;
    }
    return o;
  };
  nlohmann::json stages = nlohmann::json::array();
  for (auto const& [name, s] : stages_) {
    stages.push_back({{"stage", name}, {"seconds", s}});
  }
  nlohmann::json doc = {{"tool", "covsim"},
                        {"version", COVSIM_VERSION},
                        {"command", command_},
                        {"seed", seed_},
                        {"inputs", as_object(inputs_)},
                        {"outputs", as_object(outputs_)},
                        {"stages", stages}};
  return doc.dump(2);
}

void run_manifest::write(fs::path const& path) const {
  std::ofstream out{path, std::ios::binary};
  if (!out) {
    throw error{fmt::format("cannot write '{}'", path.string())};
  }
  out << to_json() << '\n';
}

}  // namespace covsim::cli
