#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace covsim::cli {

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(std::filesystem::path const&);

class run_manifest {
public:
  explicit run_manifest(std::string command) : command_{std::move(command)} {}

  void set_seed(std::uint64_t seed) { seed_ = seed; }
  // Records a consumed file; directories are walked recursively.
  void add_input(std::filesystem::path const&);
  void add_output(std::filesystem::path const&);
  void stage(std::string name, double seconds) {
    stages_.emplace_back(std::move(name), seconds);
  }

  std::string to_json() const;
  void write(std::filesystem::path const&) const;

private:
  std::string command_;
  std::uint64_t seed_{0};
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::pair<std::string, std::string>> outputs_;
  std::vector<std::pair<std::string, double>> stages_;
};

// Measures wall time of a stage.
class stage_timer {
public:
  stage_timer() : start_{std::chrono::steady_clock::now()} {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace covsim::cli
