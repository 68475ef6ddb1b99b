#pragma once

// Radar waveform actions: contiguous sub-channel intervals, scored against
// the sensed cellular occupancy by collisions and missed opportunities.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coexist/common.hpp"

namespace coexist {

struct Action {
  int lo = 0;
  int hi = 0;
  int S = 1;

  Action() = default;
  Action(int lo_, int hi_, int S_) : lo(lo_), hi(hi_), S(S_) {
    require(0 <= lo && lo <= hi && hi < S, "invalid action interval");
  }

  int bandwidth() const { return hi - lo + 1; }
  bool covers(int j) const { return lo <= j && j <= hi; }

  std::vector<std::uint8_t> as_vector() const {
    std::vector<std::uint8_t> v(static_cast<std::size_t>(S), 0);
    for (int j = lo; j <= hi; ++j) v[static_cast<std::size_t>(j)] = 1;
    return v;
  }

  std::string label() const { return std::to_string(lo) + "-" + std::to_string(hi); }
  double bandwidth_mhz(double channel_width_mhz) const { return bandwidth() * channel_width_mhz; }

  friend bool operator==(const Action&, const Action&) = default;
};

using ActionSpace = std::vector<Action>;

struct RewardParams {
  double eta1 = 10.0;
  double eta2 = 11.0;

  void validate() const {
    require(eta2 > 0.0, "eta2 must be > 0");
    require(eta1 >= 0.0, "eta1 must be >= 0");
    require(eta1 / eta2 <= 1.0, "eta1 / eta2 must be <= 1");
  }
};

struct StepOutcome {
  int n_collisions = 0;
  int n_missed = 0;
  double reward = 0.0;
};

// All S(S+1)/2 contiguous intervals, ordered by (lo, hi).
inline ActionSpace enumerate_actions(int S) {
  require(S >= 1, "enumerate_actions: S must be >= 1");
  ActionSpace out;
  out.reserve(static_cast<std::size_t>(S * (S + 1) / 2));
  for (int lo = 0; lo < S; ++lo)
    for (int hi = lo; hi < S; ++hi) out.emplace_back(lo, hi, S);
  return out;
}

inline std::optional<std::size_t> find_action(const ActionSpace& space, const Action& a) {
  for (std::size_t k = 0; k < space.size(); ++k)
    if (space[k] == a) return k;
  return std::nullopt;
}

namespace detail {
inline void check_length(const Action& a, std::span<const std::uint8_t> occupancy) {
  require(occupancy.size() == static_cast<std::size_t>(a.S), "occupancy length does not match S");
}
}  // namespace detail

inline int collisions(const Action& a, std::span<const std::uint8_t> occupancy) {
  detail::check_length(a, occupancy);
  int n = 0;
  for (int j = a.lo; j <= a.hi; ++j) n += occupancy[static_cast<std::size_t>(j)] ? 1 : 0;
  return n;
}

// Largest contiguous run of free sub-channels; the lowest-index run wins
// ties. Empty when every sub-channel is occupied.
inline std::optional<Action> largest_free_block(std::span<const std::uint8_t> occupancy) {
  const int S = static_cast<int>(occupancy.size());
  int best_lo = -1, best_len = 0;
  int run_lo = 0;
  for (int j = 0; j <= S; ++j) {
    const bool free = j < S && !occupancy[static_cast<std::size_t>(j)];
    if (free) continue;
    const int len = j - run_lo;
    if (len > best_len) {
      best_len = len;
      best_lo = run_lo;
    }
    run_lo = j + 1;
  }
  if (best_len == 0) return std::nullopt;
  return Action(best_lo, best_lo + best_len - 1, S);
}

// Channels of the best free block the action leaves unused.
inline int missed_opportunities(const Action& a, std::span<const std::uint8_t> occupancy) {
  detail::check_length(a, occupancy);
  const auto best = largest_free_block(occupancy);
  if (!best) return 0;
  const int lo = std::max(a.lo, best->lo);
  const int hi = std::min(a.hi, best->hi);
  const int overlap = hi >= lo ? hi - lo + 1 : 0;
  return best->bandwidth() - overlap;
}

inline double reward(int n_c, int n_mo, const RewardParams& params) {
  require(n_c >= 0 && n_mo >= 0, "reward: counts must be nonnegative");
  if (n_c > 0) return 0.0;
  if (n_mo > 0) return params.eta1 / (params.eta2 * n_mo);
  return 1.0;
}

inline StepOutcome evaluate(const Action& a, std::span<const std::uint8_t> occupancy,
                            const RewardParams& params) {
  StepOutcome o;
  o.n_collisions = collisions(a, occupancy);
  o.n_missed = missed_opportunities(a, occupancy);
  o.reward = reward(o.n_collisions, o.n_missed, params);
  return o;
}

// Index of the reward-maximizing action. Ties go to the wider action, then
// the lower start index.
inline std::size_t best_action_index(std::span<const std::uint8_t> occupancy,
                                     const ActionSpace& space, const RewardParams& params) {
  require(!space.empty(), "best_action: empty action space");
  std::size_t best = 0;
  double best_r = -1.0;
  for (std::size_t k = 0; k < space.size(); ++k) {
    const double r = evaluate(space[k], occupancy, params).reward;
    const auto& a = space[k];
    const auto& b = space[best];
    const bool better = r > best_r ||
        (r == best_r && (a.bandwidth() > b.bandwidth() ||
                         (a.bandwidth() == b.bandwidth() && a.lo < b.lo)));
    if (better) {
      best = k;
      best_r = r;
    }
  }
  return best;
}

inline Action best_action(std::span<const std::uint8_t> occupancy, const ActionSpace& space,
                          const RewardParams& params) {
  return space[best_action_index(occupancy, space, params)];
}

inline int hamming(const Action& a, const Action& b) {
  require(a.S == b.S, "hamming: actions have different S");
  int d = 0;
  for (int j = 0; j < a.S; ++j) d += a.covers(j) != b.covers(j) ? 1 : 0;
  return d;
}

}  // namespace coexist
