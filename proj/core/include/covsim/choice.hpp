#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "covsim/random.hpp"
#include "covsim/types.hpp"

namespace covsim {

class mode_set {
public:
  constexpr mode_set() = default;
  constexpr mode_set(std::initializer_list<mode> modes) {
    for (auto const m : modes) {
      insert(m);
    }
  }
  static constexpr mode_set all() {
    mode_set s;
    s.bits_ = (1U << kModeCount) - 1U;
    return s;
  }

  constexpr void insert(mode m) { bits_ |= bit(m); }
  constexpr void erase(mode m) { bits_ &= static_cast<std::uint8_t>(~bit(m)); }
  constexpr bool contains(mode m) const { return (bits_ & bit(m)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::size_t size() const {
    std::size_t n = 0;
    for (auto const m : kAllModes) {
      n += contains(m) ? 1U : 0U;
    }
    return n;
  }
  constexpr mode_set operator&(mode_set o) const {
    mode_set s;
    s.bits_ = bits_ & o.bits_;
    return s;
  }
  constexpr bool operator==(mode_set const&) const = default;

private:
  static constexpr std::uint8_t bit(mode m) {
    return static_cast<std::uint8_t>(1U << index_of(m));
  }
  std::uint8_t bits_{0};
};

// Values per mode, indexed by index_of(mode).
using mode_values = std::array<double, kModeCount>;

struct mnl_params {
  mode_values asc{};
  double beta_time{0.0};  // utils per hour
  double beta_cost{0.0};  // utils per currency unit
  mode reference_mode{mode::car};

  double asc_of(mode m) const { return asc[index_of(m)]; }
  double& asc_of(mode m) { return asc[index_of(m)]; }

  bool operator==(mnl_params const&) const = default;
};

// Throws error if asc[reference] != 0 or a beta is positive.
void check_params(mnl_params const&);

std::string mnl_params_to_json(mnl_params const&);
mnl_params mnl_params_from_json(std::string const& text,
                                std::string const& source = "<memory>");

struct trip_context {
  mode_values time_h{};
  mode_values cost{};
  mode_set available;
};

double utility(mode, trip_context const&, mnl_params const&);

// Softmax over the available modes; unavailable modes get 0.
mode_values mnl_probabilities(trip_context const&, mnl_params const&);

struct nest {
  std::string name;
  mode_set modes;
  double mu{1.0};  // scale in (0, 1]
};

struct nested_params {
  std::vector<nest> nests;
  mnl_params base;
};

// Throws error unless nests partition all modes with 0 < mu <= 1.
void check_nested(nested_params const&);

mode_values nested_probabilities(trip_context const&, nested_params const&);

// Average predicted shares over a sample.
mode_values average_mnl_shares(std::span<trip_context const>,
                               mnl_params const&);
mode_values average_nested_shares(std::span<trip_context const>,
                                  nested_params const&);

struct flatten_options {
  double tol_pp{0.05};
  int max_iter{200};
};

// Trip-level MNL whose average shares over `sample` reproduce the nested
// model's, found by ASC adjustment with the betas held fixed.
mnl_params flatten_nested(nested_params const&,
                          std::span<trip_context const> sample,
                          flatten_options const& = {});

mode choose_mode(trip_context const&, mnl_params const&, rng_t&);

// Trip counts per mode divided by the total. Throws on an empty list.
mode_values mode_share(std::span<mode const> trips);

}  // namespace covsim
