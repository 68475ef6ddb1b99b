#pragma once

// Online agents for waveform selection: contextual Thompson sampling over a
// linear reward model with discounted per-arm context, plus UCB1, decaying
// epsilon-greedy and a fixed full-band baseline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coexist/actions.hpp"
#include "coexist/common.hpp"

namespace coexist {

using FeatureVector = Eigen::VectorXd;

inline constexpr int kContextDim = 3;

// Context for an arm with no retained plays (and the variance term with
// fewer than two plays): neutral mean, maximal variance for [0,1] rewards.
inline constexpr double kDefaultMean = 0.5;
inline constexpr double kDefaultVariance = 0.25;
inline constexpr double kDefaultLast = 0.5;

// Per-arm (time, reward) records. Only records at most `window` steps old
// contribute to features; `discount` weighs a record k steps old by discount^k.
class HistoryBuffer {
 public:
  struct Record {
    std::int64_t t;
    double reward;
  };

  HistoryBuffer(std::size_t n_arms, std::int64_t window, double discount)
      : arms_(n_arms), window_(window), discount_(discount) {
    require(window >= 1, "history window must be >= 1");
    require(discount > 0.0 && discount <= 1.0, "discount must lie in (0, 1]");
  }

  void record(std::size_t arm, std::int64_t t, double r) { arms_.at(arm).push_back({t, r}); }

  // Drops records that fell outside the window as of `now`.
  void prune(std::int64_t now) {
    for (auto& q : arms_)
      while (!q.empty() && now - q.front().t > window_) q.pop_front();
  }

  bool retained(const Record& rec, std::int64_t now) const { return now - rec.t <= window_; }

  std::size_t play_count(std::size_t arm, std::int64_t now) const {
    std::size_t n = 0;
    for (const auto& rec : arms_.at(arm)) n += retained(rec, now) ? 1 : 0;
    return n;
  }

  const std::deque<Record>& records(std::size_t arm) const { return arms_.at(arm); }
  std::size_t n_arms() const { return arms_.size(); }
  std::int64_t window() const { return window_; }
  double discount() const { return discount_; }

 private:
  std::vector<std::deque<Record>> arms_;
  std::int64_t window_;
  double discount_;
};

// (weighted mean, weighted variance with n/(n-1) correction, last reward).
inline FeatureVector assemble_context(const HistoryBuffer& history, std::size_t arm, std::int64_t now) {
  require(now >= 0, "assemble_context: now must be >= 0");
  double w_sum = 0.0, wr_sum = 0.0;
  std::size_t n = 0;
  double last = kDefaultLast;
  std::int64_t last_t = std::numeric_limits<std::int64_t>::min();
  const auto& recs = history.records(arm);
  for (const auto& rec : recs) {
    if (!history.retained(rec, now)) continue;
    const double w = std::pow(history.discount(), static_cast<double>(now - rec.t));
    w_sum += w;
    wr_sum += w * rec.reward;
    ++n;
    if (rec.t >= last_t) {
      last_t = rec.t;
      last = rec.reward;
    }
  }

  FeatureVector x(kContextDim);
  if (n == 0) {
    x << kDefaultMean, kDefaultVariance, kDefaultLast;
    return x;
  }
  const double mean = wr_sum / w_sum;
  double var = kDefaultVariance;
  if (n >= 2) {
    double wd = 0.0;
    for (const auto& rec : recs) {
      if (!history.retained(rec, now)) continue;
      const double w = std::pow(history.discount(), static_cast<double>(now - rec.t));
      wd += w * (rec.reward - mean) * (rec.reward - mean);
    }
    const auto nd = static_cast<double>(n);
    var = (wd / w_sum) * nd / (nd - 1.0);
  }
  x << mean, var, last;
  return x;
}

// Gaussian belief over the linear reward parameter: theta ~ N(theta_hat, v^2 B^-1).
class LinearPosterior {
 public:
  LinearPosterior(int d, double v)
      : B_(Eigen::MatrixXd::Identity(d, d)),
        B_inv_(Eigen::MatrixXd::Identity(d, d)),
        f_(Eigen::VectorXd::Zero(d)),
        theta_hat_(Eigen::VectorXd::Zero(d)),
        v_(v) {
    require(d >= 1, "posterior dimension must be >= 1");
    require(v >= 0.0, "exploration scale v must be >= 0");
  }

  // Rank-one update; the inverse is maintained with Sherman-Morrison:
  // (B + x x^T)^-1 = B^-1 - (B^-1 x)(B^-1 x)^T / (1 + x^T B^-1 x).
  void update(const FeatureVector& x, double r) {
    require(x.size() == dim(), "update: feature dimension mismatch");
    require(x.allFinite() && std::isfinite(r), "update: non-finite context or reward");
    const Eigen::VectorXd Bx = B_inv_ * x;
    const double denom = 1.0 + x.dot(Bx);
    B_.noalias() += x * x.transpose();
    B_inv_.noalias() -= (Bx * Bx.transpose()) / denom;
    B_inv_ = 0.5 * (B_inv_ + B_inv_.transpose()).eval();
    f_.noalias() += x * r;
    theta_hat_.noalias() = B_inv_ * f_;
  }

  // theta_hat + v * L z, L the lower Cholesky factor of B^-1.
  Eigen::VectorXd sample(Rng& rng) const {
    Eigen::LLT<Eigen::MatrixXd> llt(B_inv_);
    if (llt.info() != Eigen::Success) {
      llt.compute(B_inv_ + 1e-10 * Eigen::MatrixXd::Identity(dim(), dim()));
      if (llt.info() != Eigen::Success) throw Error("sample_theta: posterior covariance is not positive definite");
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd z(dim());
    for (int i = 0; i < dim(); ++i) z[i] = gauss(rng);
    const Eigen::VectorXd Lz = llt.matrixL() * z;
    return theta_hat_ + v_ * Lz;
  }

  int dim() const { return static_cast<int>(f_.size()); }
  double v() const { return v_; }
  const Eigen::MatrixXd& precision() const { return B_; }
  const Eigen::MatrixXd& covariance_factor() const { return B_inv_; }
  const Eigen::VectorXd& response() const { return f_; }
  const Eigen::VectorXd& theta_hat() const { return theta_hat_; }

 private:
  Eigen::MatrixXd B_;
  Eigen::MatrixXd B_inv_;
  Eigen::VectorXd f_;
  Eigen::VectorXd theta_hat_;
  double v_;
};

inline Eigen::VectorXd sample_theta(const LinearPosterior& post, Rng& rng) { return post.sample(rng); }

inline void update_posterior(LinearPosterior& post, const FeatureVector& x, double r) { post.update(x, r); }

// Arms whose predicted reward x^T theta_hat exceeds r_hat. Falls back to
// every arm when the threshold is disabled or nothing qualifies.
inline std::vector<std::size_t> constrain_actions(std::span<const FeatureVector> contexts,
                                                  const Eigen::VectorXd& theta_hat,
                                                  std::optional<double> r_hat) {
  std::vector<std::size_t> all(contexts.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  if (!r_hat) return all;
  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < contexts.size(); ++k)
    if (contexts[k].dot(theta_hat) > *r_hat) kept.push_back(k);
  return kept.empty() ? all : kept;
}

// argmax_k x_k^T theta over the allowed arms; lowest index wins ties.
inline std::size_t argmax_score(std::span<const FeatureVector> contexts, const Eigen::VectorXd& theta,
                                std::span<const std::size_t> allowed) {
  require(!allowed.empty(), "argmax_score: no allowed arms");
  std::size_t best = allowed.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t k : allowed) {
    const double s = contexts[k].dot(theta);
    if (s > best_score) {
      best_score = s;
      best = k;
    }
  }
  return best;
}

inline std::vector<FeatureVector> assemble_all_contexts(const HistoryBuffer& history, std::int64_t now) {
  std::vector<FeatureVector> xs;
  xs.reserve(history.n_arms());
  for (std::size_t k = 0; k < history.n_arms(); ++k) xs.push_back(assemble_context(history, k, now));
  return xs;
}

// One Thompson step: a single theta draw shared by every arm.
inline std::size_t ts_select(const LinearPosterior& post, const HistoryBuffer& history,
                             std::int64_t now, Rng& rng, std::optional<double> r_hat,
                             std::vector<FeatureVector>* contexts_out = nullptr) {
  require(history.n_arms() > 0, "ts_select: empty action space");
  auto contexts = assemble_all_contexts(history, now);
  const Eigen::VectorXd theta = sample_theta(post, rng);
  const auto allowed = constrain_actions(contexts, post.theta_hat(), r_hat);
  const std::size_t k = argmax_score(contexts, theta, allowed);
  if (contexts_out) *contexts_out = std::move(contexts);
  return k;
}

// Per-arm play statistics for UCB1 over the whole run.
struct ArmStats {
  std::vector<std::int64_t> plays;
  std::vector<double> reward_sum;

  explicit ArmStats(std::size_t n_arms) : plays(n_arms, 0), reward_sum(n_arms, 0.0) {}

  void record(std::size_t arm, double r) {
    ++plays.at(arm);
    reward_sum.at(arm) += r;
  }
  double mean(std::size_t arm) const {
    return plays[arm] ? reward_sum[arm] / static_cast<double>(plays[arm]) : 0.0;
  }
};

inline double ucb1_radius(std::int64_t t, std::int64_t n_k) {
  return std::sqrt(2.0 * std::log(static_cast<double>(t)) / static_cast<double>(n_k));
}

// t is the 1-based round. Unplayed arms go first, lowest index first.
inline std::size_t ucb1_select(const ArmStats& stats, std::int64_t t) {
  require(t >= 1, "ucb1_select: t must be >= 1");
  require(!stats.plays.empty(), "ucb1_select: empty action space");
  for (std::size_t k = 0; k < stats.plays.size(); ++k)
    if (stats.plays[k] == 0) return k;
  std::size_t best = 0;
  double best_index = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < stats.plays.size(); ++k) {
    const double index = stats.mean(k) + ucb1_radius(t, stats.plays[k]);
    if (index > best_index) {
      best_index = index;
      best = k;
    }
  }
  return best;
}

// Exploration probability with linear decay to a floor.
class EpsilonSchedule {
 public:
  EpsilonSchedule(double eps0, double decay, double floor) : eps0_(eps0), decay_(decay), floor_(floor) {
    require(eps0 >= 0.0 && eps0 <= 1.0, "eps0 must lie in [0, 1]");
    require(floor >= 0.0 && floor <= 1.0, "eps_floor must lie in [0, 1]");
    require(decay >= 0.0, "eps_decay must be >= 0");
  }

  // Closed form of eps_{t+1} = max(eps_t - decay, floor); snapped to the
  // floor so accumulated rounding cannot leave a residual epsilon.
  double at(std::int64_t step) const {
    const double e = eps0_ - decay_ * static_cast<double>(step);
    return e <= floor_ + 1e-12 ? floor_ : e;
  }

 private:
  double eps0_, decay_, floor_;
};

inline std::size_t greedy_discounted(const HistoryBuffer& history, std::int64_t now) {
  std::size_t best = 0;
  double best_mean = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < history.n_arms(); ++k) {
    const double m = assemble_context(history, k, now)[0];
    if (m > best_mean) {
      best_mean = m;
      best = k;
    }
  }
  return best;
}

inline std::size_t eps_greedy_select(const HistoryBuffer& history, std::int64_t now, double eps, Rng& rng) {
  require(history.n_arms() > 0, "eps_greedy_select: empty action space");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (eps > 0.0 && coin(rng) < eps) {
    std::uniform_int_distribution<std::size_t> pick(0, history.n_arms() - 1);
    return pick(rng);
  }
  return greedy_discounted(history, now);
}

inline double regret(double r_best, double r_taken) { return r_best - r_taken; }

enum class AgentKind { thompson, ucb1, eps_greedy, fixed_full_band };

inline std::string to_string(AgentKind k) {
  switch (k) {
    case AgentKind::thompson: return "thompson";
    case AgentKind::ucb1: return "ucb1";
    case AgentKind::eps_greedy: return "eps_greedy";
    case AgentKind::fixed_full_band: return "fixed_full_band";
  }
  return "unknown";
}

inline AgentKind parse_agent_kind(const std::string& s) {
  if (s == "thompson") return AgentKind::thompson;
  if (s == "ucb1") return AgentKind::ucb1;
  if (s == "eps_greedy") return AgentKind::eps_greedy;
  if (s == "fixed_full_band") return AgentKind::fixed_full_band;
  throw Error("unknown algo '" + s + "'");
}

struct AgentConfig {
  AgentKind kind = AgentKind::thompson;
  double v = 0.5;
  double gamma = 0.99;
  std::int64_t tau = 500;
  std::optional<double> r_hat;
  double eps0 = 0.95;
  double eps_decay = 0.001;
  double eps_floor = 0.0;
  // TS plays every arm once before sampling, as UCB1 does. Without it the
  // shared-parameter posterior can lock onto a neighbour of the best arm.
  bool initial_sweep = true;

  void validate() const {
    require(v > 0.0, "agent.v must be > 0");
    require(gamma > 0.0 && gamma <= 1.0, "agent.gamma must lie in (0, 1]");
    require(tau >= 1, "agent.tau must be >= 1");
    require(eps0 >= 0.0 && eps0 <= 1.0, "agent.eps0 must lie in [0, 1]");
    require(eps_floor >= 0.0 && eps_floor <= 1.0, "agent.eps_floor must lie in [0, 1]");
    require(eps_decay >= 0.0, "agent.eps_decay must be >= 0");
  }
};

// Step-loop interface shared by every learner. `t` is the 0-based step.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::size_t select(std::int64_t t, Rng& rng) = 0;
  virtual void observe(std::size_t arm, double reward, std::int64_t t) = 0;
  virtual AgentKind kind() const = 0;
};

class ThompsonAgent final : public Agent {
 public:
  ThompsonAgent(std::size_t n_arms, const AgentConfig& cfg)
      : history_(n_arms, cfg.tau, cfg.gamma),
        posterior_(kContextDim, cfg.v),
        r_hat_(cfg.r_hat),
        sweep_left_(cfg.initial_sweep ? n_arms : 0) {}

  std::size_t select(std::int64_t t, Rng& rng) override {
    history_.prune(t);
    if (sweep_left_ > 0) {
      contexts_ = assemble_all_contexts(history_, t);
      return history_.n_arms() - sweep_left_--;
    }
    return ts_select(posterior_, history_, t, rng, r_hat_, &contexts_);
  }

  void observe(std::size_t arm, double reward, std::int64_t t) override {
    posterior_.update(contexts_.at(arm), reward);
    history_.record(arm, t, reward);
  }

  AgentKind kind() const override { return AgentKind::thompson; }
  const LinearPosterior& posterior() const { return posterior_; }
  const HistoryBuffer& history() const { return history_; }

 private:
  HistoryBuffer history_;
  LinearPosterior posterior_;
  std::optional<double> r_hat_;
  std::vector<FeatureVector> contexts_;
  std::size_t sweep_left_;
};

class Ucb1Agent final : public Agent {
 public:
  explicit Ucb1Agent(std::size_t n_arms) : stats_(n_arms) {}

  std::size_t select(std::int64_t t, Rng&) override { return ucb1_select(stats_, t + 1); }
  void observe(std::size_t arm, double reward, std::int64_t) override { stats_.record(arm, reward); }
  AgentKind kind() const override { return AgentKind::ucb1; }

 private:
  ArmStats stats_;
};

class EpsGreedyAgent final : public Agent {
 public:
  EpsGreedyAgent(std::size_t n_arms, const AgentConfig& cfg)
      : history_(n_arms, cfg.tau, cfg.gamma), schedule_(cfg.eps0, cfg.eps_decay, cfg.eps_floor) {}

  std::size_t select(std::int64_t t, Rng& rng) override {
    history_.prune(t);
    return eps_greedy_select(history_, t, schedule_.at(t), rng);
  }
  void observe(std::size_t arm, double reward, std::int64_t t) override { history_.record(arm, t, reward); }
  AgentKind kind() const override { return AgentKind::eps_greedy; }

 private:
  HistoryBuffer history_;
  EpsilonSchedule schedule_;
};

class FixedFullBandAgent final : public Agent {
 public:
  explicit FixedFullBandAgent(const ActionSpace& space) {
    require(!space.empty(), "fixed_full_band: empty action space");
    const int S = space.front().S;
    const auto k = find_action(space, Action(0, S - 1, S));
    require(k.has_value(), "fixed_full_band: full-band action missing from space");
    arm_ = *k;
  }

  std::size_t select(std::int64_t, Rng&) override { return arm_; }
  void observe(std::size_t, double, std::int64_t) override {}
  AgentKind kind() const override { return AgentKind::fixed_full_band; }

 private:
  std::size_t arm_ = 0;
};

inline std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, const ActionSpace& space) {
  switch (cfg.kind) {
    case AgentKind::thompson: return std::make_unique<ThompsonAgent>(space.size(), cfg);
    case AgentKind::ucb1: return std::make_unique<Ucb1Agent>(space.size());
    case AgentKind::eps_greedy: return std::make_unique<EpsGreedyAgent>(space.size(), cfg);
    case AgentKind::fixed_full_band: return std::make_unique<FixedFullBandAgent>(space);
  }
  throw Error("make_agent: unknown kind");
}

}  // namespace coexist
