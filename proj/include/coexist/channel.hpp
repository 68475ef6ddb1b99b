#pragma once

// Cellular interference process seen by the radar: lognormal-shadowed path
// loss per base station with one-factor spatial correlation, ALOHA activity,
// and block fading over a coherence time.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "coexist/common.hpp"

namespace coexist {

struct BaseStation {
  double power = 1.0;     // W
  double distance = 1.0;  // m
  double mu = 0.0;        // shadowing log-mean, nepers
  double sigma = 0.0;     // shadowing log-std, nepers
  double zeta = 0.0;      // correlation loading, pairwise rho_ij = zeta_i * zeta_j

  void validate() const {
    require(power > 0.0, "station power must be > 0");
    require(distance > 0.0, "station distance must be > 0");
    require(sigma >= 0.0, "station sigma must be >= 0");
    require(std::abs(zeta) <= 1.0, "station zeta must lie in [-1, 1]");
  }

  // Deterministic path-loss gain term P * d^-alpha.
  double mean_gain(double alpha) const { return power * std::pow(distance, -alpha); }
};

struct ChannelParams {
  double alpha = 4.0;
  double p_activity = 1.0;
  int coherence_time = 1;
  int n_subchannels = 10;
  double sense_threshold = 0.0;  // W
  double noise_power = 0.0;      // W
  std::vector<int> comm_band{1, 2};

  void validate() const {
    require(alpha > 0.0, "alpha must be > 0");
    require(p_activity >= 0.0 && p_activity <= 1.0, "p_activity must lie in [0, 1]");
    require(coherence_time >= 1, "coherence_time must be >= 1");
    require(n_subchannels >= 1, "n_subchannels must be >= 1");
    for (int j : comm_band)
      require(j >= 0 && j < n_subchannels, "comm_band index out of range");
  }
};

struct ChannelState {
  std::vector<double> shadowing;        // X_i, nepers
  std::vector<std::uint8_t> active;     // ALOHA flags
  std::vector<double> subchannel_power; // W, length S
  std::vector<std::uint8_t> occupancy;  // s_com, length S
  std::int64_t block_index = -1;        // -1 until the first draw
};

struct LognormalFit {
  double mean_agg = 0.0;
  double var_agg = 0.0;
  double mu_log = 0.0;
  double sigma_log = 0.0;
};

// Maps a time step to its coherence block. Supports one mid-run change of
// coherence time; a fresh block always starts at the switch step.
struct CoherenceSchedule {
  int tc_before = 1;
  int tc_after = 1;
  std::int64_t switch_step = -1;  // < 0: no switch

  static CoherenceSchedule fixed(int tc) { return {tc, tc, -1}; }

  bool switches() const { return switch_step >= 0; }

  int tc_at(std::int64_t t) const {
    return (switches() && t >= switch_step) ? tc_after : tc_before;
  }

  std::int64_t block(std::int64_t t) const {
    if (!switches() || t < switch_step) return t / tc_before;
    const std::int64_t blocks_before = switch_step == 0 ? 0 : (switch_step - 1) / tc_before + 1;
    return blocks_before + (t - switch_step) / tc_after;
  }
};

inline std::vector<double> sample_shadowing(std::span<const BaseStation> stations, Rng& rng) {
  require(!stations.empty(), "no stations");
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double common = gauss(rng);
  std::vector<double> x;
  x.reserve(stations.size());
  for (const auto& bs : stations) {
    const double own = gauss(rng);
    const double loading = std::sqrt(std::max(0.0, 1.0 - bs.zeta * bs.zeta));
    x.push_back(bs.mu + bs.sigma * (bs.zeta * common + loading * own));
  }
  return x;
}

inline double station_interference(const BaseStation& bs, double x, double alpha) {
  return bs.mean_gain(alpha) * std::exp(x);
}

inline double aggregate_interference(std::span<const BaseStation> stations,
                                     std::span<const double> shadowing,
                                     std::span<const std::uint8_t> active, double alpha) {
  require(stations.size() == shadowing.size() && stations.size() == active.size(),
          "aggregate_interference: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < stations.size(); ++i)
    if (active[i]) total += station_interference(stations[i], shadowing[i], alpha);
  return total;
}

// Fenton-Wilkinson fit of I_agg = sum_i I_i with every station transmitting.
// Second moment uses E[e^{X_i + X_j}] = e^{mu_i + mu_j + (s_i^2 + s_j^2)/2 + rho_ij s_i s_j}.
inline LognormalFit lognormal_limit_fit(std::span<const BaseStation> stations, double alpha) {
  require(!stations.empty(), "no stations");
  const std::size_t n = stations.size();
  std::vector<double> mean_i(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = stations[i];
    mean_i[i] = s.mean_gain(alpha) * std::exp(s.mu + 0.5 * s.sigma * s.sigma);
  }
  double mean = 0.0;
  for (double m : mean_i) mean += m;

  // Var = sum_ij m_i m_j (e^{cov_ij} - 1), accumulated directly to avoid
  // cancellation between E[I^2] and mean^2.
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double rho = (i == j) ? 1.0 : stations[i].zeta * stations[j].zeta;
      const double cov = rho * stations[i].sigma * stations[j].sigma;
      var += mean_i[i] * mean_i[j] * std::expm1(cov);
    }
  }
  var = std::max(0.0, var);

  LognormalFit fit;
  fit.mean_agg = mean;
  fit.var_agg = var;
  const double s2 = std::log1p(var / (mean * mean));
  fit.sigma_log = std::sqrt(s2);
  fit.mu_log = std::log(mean) - 0.5 * s2;
  return fit;
}

// P(I_agg > threshold) under the fitted lognormal.
inline double outage_probability(double threshold, const LognormalFit& fit) {
  require(threshold > 0.0, "outage_probability: threshold must be > 0");
  if (fit.sigma_log == 0.0) return fit.mean_agg > threshold ? 1.0 : 0.0;
  return 1.0 - normal_cdf((std::log(threshold) - fit.mu_log) / fit.sigma_log);
}

inline ChannelState initial_channel_state(std::size_t n_stations, int n_subchannels) {
  ChannelState s;
  s.shadowing.assign(n_stations, 0.0);
  s.active.assign(n_stations, 0);
  s.subchannel_power.assign(static_cast<std::size_t>(n_subchannels), 0.0);
  s.occupancy.assign(static_cast<std::size_t>(n_subchannels), 0);
  return s;
}

// Occupancy is re-derived from powers only; it never carries extra state.
inline std::vector<std::uint8_t> derive_occupancy(std::span<const double> power, double threshold) {
  std::vector<std::uint8_t> occ(power.size());
  for (std::size_t j = 0; j < power.size(); ++j) occ[j] = power[j] > threshold ? 1 : 0;
  return occ;
}

inline ChannelState channel_step(ChannelState state, std::int64_t t, const ChannelParams& params,
                                 std::span<const BaseStation> stations, Rng& rng,
                                 const CoherenceSchedule& schedule) {
  require(t >= 0, "channel_step: t must be >= 0");
  const std::size_t n = stations.size();
  const auto S = static_cast<std::size_t>(params.n_subchannels);
  if (state.shadowing.size() != n || state.subchannel_power.size() != S)
    state = initial_channel_state(n, params.n_subchannels);

  const std::int64_t block = schedule.block(t);
  if (block > state.block_index) {
    state.shadowing = sample_shadowing(stations, rng);
    state.block_index = block;
  }

  std::bernoulli_distribution transmit(params.p_activity);
  bool any_active = false;
  for (std::size_t i = 0; i < n; ++i) {
    state.active[i] = transmit(rng) ? 1 : 0;
    any_active = any_active || state.active[i];
  }

  const double agg = any_active
      ? aggregate_interference(stations, state.shadowing, state.active, params.alpha)
      : 0.0;
  std::fill(state.subchannel_power.begin(), state.subchannel_power.end(), 0.0);
  if (any_active)
    for (int j : params.comm_band) state.subchannel_power[static_cast<std::size_t>(j)] = agg;
  state.occupancy = derive_occupancy(state.subchannel_power, params.sense_threshold);
  return state;
}

inline ChannelState channel_step(ChannelState state, std::int64_t t, const ChannelParams& params,
                                 std::span<const BaseStation> stations, Rng& rng) {
  return channel_step(std::move(state), t, params, stations, rng,
                      CoherenceSchedule::fixed(params.coherence_time));
}

// Per-station interference of the currently transmitting stations.
inline std::vector<double> active_station_powers(std::span<const BaseStation> stations,
                                                 const ChannelState& state, double alpha) {
  std::vector<double> out;
  for (std::size_t i = 0; i < stations.size(); ++i)
    if (state.active[i]) out.push_back(station_interference(stations[i], state.shadowing[i], alpha));
  return out;
}

// Random station population: distances and powers uniform in the given
// ranges, shared shadowing parameters.
struct PopulationSpec {
  int count = 120;
  double power_dbm_min = 40.0;
  double power_dbm_max = 46.5;
  double distance_km_min = 4.0;
  double distance_km_max = 6.0;
  double mu = 0.0;
  double sigma = 1.0;
  double zeta = 0.5;
  std::uint64_t seed = 1;
};

inline std::vector<BaseStation> synthesize_stations(const PopulationSpec& spec) {
  require(spec.count >= 1, "station count must be >= 1");
  require(spec.power_dbm_min <= spec.power_dbm_max, "power range is inverted");
  require(spec.distance_km_min > 0.0 && spec.distance_km_min <= spec.distance_km_max,
          "distance range must be positive and ordered");
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<BaseStation> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) {
    BaseStation bs;
    const double km = spec.distance_km_min + (spec.distance_km_max - spec.distance_km_min) * unit(rng);
    const double dbm = spec.power_dbm_min + (spec.power_dbm_max - spec.power_dbm_min) * unit(rng);
    bs.distance = km * 1000.0;
    bs.power = dbm_to_watts(dbm);
    bs.mu = spec.mu;
    bs.sigma = spec.sigma;
    bs.zeta = spec.zeta;
    bs.validate();
    out.push_back(bs);
  }
  return out;
}

}  // namespace coexist
