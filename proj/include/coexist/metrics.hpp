#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "coexist/actions.hpp"
#include "coexist/common.hpp"

namespace coexist {

struct SinrParams {
  double radar_return_power = 1.0;  // W
  double noise_power = 0.01;        // W
  double psi_mu = 0.0;              // nepers
  double psi_sigma = 0.5;           // nepers

  void validate() const {
    require(radar_return_power > 0.0, "sinr.radar_return_power must be > 0");
    require(noise_power > 0.0, "sinr.noise_power must be > 0");
    require(psi_sigma >= 0.0, "sinr.psi_sigma must be >= 0");
  }
};

struct Sinr {
  double linear = 0.0;
  double db = 0.0;
};

// SINR for a given target fluctuation psi (nepers).
inline Sinr sinr_given_psi(const SinrParams& p, std::span<const double> colliding, double psi) {
  double interference = 0.0;
  for (double w : colliding) interference += w;
  Sinr s;
  s.linear = p.radar_return_power * std::exp(-psi) / (p.noise_power + interference);
  s.db = linear_to_db(s.linear);
  return s;
}

inline Sinr sinr(const SinrParams& p, std::span<const double> colliding, Rng& rng) {
  std::normal_distribution<double> psi(p.psi_mu, p.psi_sigma);
  const double draw = p.psi_sigma > 0.0 ? psi(rng) : p.psi_mu;
  return sinr_given_psi(p, colliding, draw);
}

// Right-continuous step CDF of a sample.
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> samples) : sorted_(std::move(samples)) {
    require(!sorted_.empty(), "empirical_cdf: empty sample");
    std::sort(sorted_.begin(), sorted_.end());
  }

  double operator()(double x) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
  }

  // Smallest sample value v with F(v) >= q.
  double quantile(double q) const {
    const auto n = static_cast<double>(sorted_.size());
    auto idx = static_cast<std::size_t>(std::ceil(q * n));
    idx = std::clamp<std::size_t>(idx, 1, sorted_.size());
    return sorted_[idx - 1];
  }

  const std::vector<double>& support() const { return sorted_; }
  std::size_t size() const { return sorted_.size(); }

 private:
  std::vector<double> sorted_;
};

inline EmpiricalCdf empirical_cdf(std::vector<double> samples) { return EmpiricalCdf(std::move(samples)); }

struct TraceRecord {
  std::int64_t t = 0;
  Action action;
  Action best;
  std::vector<std::uint8_t> occupancy;
  int n_c = 0;
  int n_mo = 0;
  double reward = 0.0;
  double best_reward = 0.0;
  double regret = 0.0;
  double sinr_db = 0.0;
  int tc = 1;  // coherence time in effect at this step
};

struct RunTrace {
  std::uint64_t seed = 0;
  std::string algo;
  int tc = 1;
  int tc_after = 1;
  std::int64_t switch_step = -1;
  std::vector<TraceRecord> records;
};

struct RunSummary {
  double avg_regret = 0.0;
  std::vector<double> cumulative_regret;
  double opt_rate = 0.0;

  double final_cumulative() const { return cumulative_regret.empty() ? 0.0 : cumulative_regret.back(); }
};

// Optimal-action rate over records [from, to).
inline double optimal_rate(const RunTrace& trace, std::size_t from, std::size_t to) {
  to = std::min(to, trace.records.size());
  if (from >= to) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = from; i < to; ++i) hits += trace.records[i].action == trace.records[i].best ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(to - from);
}

inline RunSummary summarize(const RunTrace& trace) {
  require(!trace.records.empty(), "summarize: empty trace");
  RunSummary s;
  s.cumulative_regret.reserve(trace.records.size());
  double run = 0.0;
  for (const auto& r : trace.records) {
    run += r.regret;
    s.cumulative_regret.push_back(run);
  }
  s.avg_regret = run / static_cast<double>(trace.records.size());
  s.opt_rate = optimal_rate(trace, 0, trace.records.size());
  return s;
}

}  // namespace coexist
