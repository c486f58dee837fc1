#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace covsim {

// Seconds from midnight of the simulated day.
using seconds_t = std::int32_t;

constexpr seconds_t kDayEnd = 24 * 3600;
constexpr seconds_t kMaxSimTime = 30 * 3600;

enum class mode : std::uint8_t { car, transit, walk, bike, ridehail, bikeshare };

constexpr std::array<mode, 6> kAllModes = {mode::car,  mode::transit,
                                           mode::walk, mode::bike,
                                           mode::ridehail, mode::bikeshare};
constexpr std::size_t kModeCount = kAllModes.size();

constexpr std::size_t index_of(mode m) { return static_cast<std::size_t>(m); }

std::string_view to_string(mode m);
std::optional<mode> parse_mode(std::string_view s);

// Thrown for anything a user can fix by changing inputs.
class error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; carries the 1-based line number when known.
class parse_error : public error {
public:
  parse_error(std::string file, std::size_t line, std::string const& what);
  parse_error(std::string file, std::string const& what);

  std::string const& file() const { return file_; }
  std::size_t line() const { return line_; }

private:
  std::string file_;
  std::size_t line_{0};
};

}  // namespace covsim
