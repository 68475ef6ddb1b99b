#pragma once

// Experiment orchestration: JSON configuration, seeded episodes, scenario
// cross-products and CSV/JSON output.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "coexist/actions.hpp"
#include "coexist/channel.hpp"
#include "coexist/common.hpp"
#include "coexist/learners.hpp"
#include "coexist/metrics.hpp"

namespace coexist {

enum class ScenarioKind { single_run, coherence_sweep, sinr_cdf, coherence_switch };

inline std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::single_run: return "single_run";
    case ScenarioKind::coherence_sweep: return "coherence_sweep";
    case ScenarioKind::sinr_cdf: return "sinr_cdf";
    case ScenarioKind::coherence_switch: return "coherence_switch";
  }
  return "unknown";
}

inline ScenarioKind parse_scenario_kind(const std::string& s) {
  if (s == "single_run") return ScenarioKind::single_run;
  if (s == "coherence_sweep") return ScenarioKind::coherence_sweep;
  if (s == "sinr_cdf") return ScenarioKind::sinr_cdf;
  if (s == "coherence_switch") return ScenarioKind::coherence_switch;
  throw Error("unknown scenario '" + s + "'");
}

struct ChannelSection {
  int n_subchannels = 10;
  double channel_width_mhz = 10.0;
  std::vector<int> comm_band{1, 2};
  double alpha = 4.0;
  double p_activity = 0.9;
  int coherence_time = 10;
  double noise_power_dbm = -99.0;
  double sense_threshold_dbm = -99.0;
  PopulationSpec stations;
  // Forces the sensed occupancy to a fixed pattern (empty: simulate).
  std::vector<std::uint8_t> static_occupancy;
};

struct RunSection {
  ScenarioKind scenario = ScenarioKind::single_run;
  std::int64_t steps = 10000;
  std::vector<std::uint64_t> seeds;
  std::vector<int> tc_values{2, 5, 8, 10, 14};
  std::vector<AgentKind> algos{AgentKind::thompson, AgentKind::ucb1, AgentKind::eps_greedy};
  std::vector<AgentKind> sinr_algos{AgentKind::thompson, AgentKind::ucb1, AgentKind::eps_greedy,
                                    AgentKind::fixed_full_band};
  int tc_before = 14;
  int tc_after = 4;
  int threads = 0;  // 0: hardware concurrency
};

struct SinrSection {
  double snr_db = 20.0;  // collision-free SNR at psi = 0
  double psi_mu = 0.0;
  double psi_sigma = 0.5;
};

struct SimConfig {
  ChannelSection channel;
  RewardParams reward;
  AgentConfig agent;
  RunSection run;
  SinrSection sinr;
  std::vector<std::string> defaults_applied;  // field paths filled from defaults

  ChannelParams channel_params() const {
    ChannelParams p;
    p.alpha = channel.alpha;
    p.p_activity = channel.p_activity;
    p.coherence_time = channel.coherence_time;
    p.n_subchannels = channel.n_subchannels;
    p.noise_power = dbm_to_watts(channel.noise_power_dbm);
    p.sense_threshold = dbm_to_watts(channel.sense_threshold_dbm);
    p.comm_band = channel.comm_band;
    return p;
  }

  SinrParams sinr_params() const {
    SinrParams p;
    p.noise_power = dbm_to_watts(channel.noise_power_dbm);
    p.radar_return_power = p.noise_power * db_to_linear(sinr.snr_db);
    p.psi_mu = sinr.psi_mu;
    p.psi_sigma = sinr.psi_sigma;
    return p;
  }
};

namespace detail {

using nlohmann::json;

class ConfigReader {
 public:
  ConfigReader(const json& root, std::vector<std::string>& defaults) : root_(root), defaults_(defaults) {}

  const json* section(const std::string& name) {
    if (!root_.contains(name)) {
      sections_seen_.insert(name);
      return nullptr;
    }
    const json& s = root_.at(name);
    if (!s.is_object()) fail(name, "must be an object");
    sections_seen_.insert(name);
    return &s;
  }

  template <typename T>
  T get(const json* sec, const std::string& path, const std::string& key, const T& fallback) {
    const std::string full = path + "." + key;
    seen_[path].insert(key);
    if (!sec || !sec->contains(key)) {
      defaults_.push_back(full);
      return fallback;
    }
    try {
      return sec->at(key).get<T>();
    } catch (const json::exception&) {
      fail(full, "has the wrong type");
    }
  }

  bool has(const json* sec, const std::string& key) const { return sec && sec->contains(key); }

  void mark(const std::string& path, const std::string& key) { seen_[path].insert(key); }

  void reject_unknown(const json* sec, const std::string& path) {
    if (!sec) return;
    for (auto it = sec->begin(); it != sec->end(); ++it)
      if (!seen_[path].count(it.key())) fail(path + "." + it.key(), "unknown key");
  }

  void reject_unknown_sections() {
    for (auto it = root_.begin(); it != root_.end(); ++it)
      if (!sections_seen_.count(it.key())) fail(it.key(), "unknown key");
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw Error("config: " + path + ": " + what);
  }

  static void check(bool cond, const std::string& path, const std::string& what) {
    if (!cond) fail(path, what);
  }

 private:
  const json& root_;
  std::vector<std::string>& defaults_;
  std::map<std::string, std::set<std::string>> seen_;
  std::set<std::string> sections_seen_;
};

inline std::vector<std::uint64_t> default_seeds(int n) {
  std::vector<std::uint64_t> s;
  for (int i = 1; i <= n; ++i) s.push_back(static_cast<std::uint64_t>(i));
  return s;
}

inline std::vector<AgentKind> parse_algos(const std::vector<std::string>& names, const std::string& path) {
  std::vector<AgentKind> out;
  for (const auto& n : names) {
    try {
      out.push_back(parse_agent_kind(n));
    } catch (const Error& e) {
      ConfigReader::fail(path, e.what());
    }
  }
  ConfigReader::check(!out.empty(), path, "must list at least one algo");
  return out;
}

inline std::vector<std::string> algo_names(const std::vector<AgentKind>& ks) {
  std::vector<std::string> out;
  for (auto k : ks) out.push_back(to_string(k));
  return out;
}

}  // namespace detail

inline SimConfig parse_config(const nlohmann::json& root) {
  using detail::ConfigReader;
  using nlohmann::json;
  if (!root.is_object()) ConfigReader::fail("<root>", "must be an object");
  SimConfig c;
  ConfigReader r(root, c.defaults_applied);
  const SimConfig d;

  // channel
  {
    const json* s = r.section("channel");
    auto& ch = c.channel;
    ch.n_subchannels = r.get(s, "channel", "n_subchannels", d.channel.n_subchannels);
    ch.channel_width_mhz = r.get(s, "channel", "channel_width_mhz", d.channel.channel_width_mhz);
    ch.comm_band = r.get(s, "channel", "comm_band", d.channel.comm_band);
    ch.alpha = r.get(s, "channel", "alpha", d.channel.alpha);
    ch.p_activity = r.get(s, "channel", "p_activity", d.channel.p_activity);
    ch.coherence_time = r.get(s, "channel", "coherence_time", d.channel.coherence_time);
    ch.noise_power_dbm = r.get(s, "channel", "noise_power_dbm", d.channel.noise_power_dbm);
    ch.sense_threshold_dbm = r.get(s, "channel", "sense_threshold_dbm", ch.noise_power_dbm);
    std::vector<int> occ = r.get(s, "channel", "static_occupancy", std::vector<int>{});
    for (int v : occ) {
      ConfigReader::check(v == 0 || v == 1, "channel.static_occupancy", "entries must be 0 or 1");
      ch.static_occupancy.push_back(static_cast<std::uint8_t>(v));
    }

    ConfigReader::check(ch.n_subchannels >= 1 && ch.n_subchannels <= 64, "channel.n_subchannels",
                        "must lie in [1, 64]");
    ConfigReader::check(ch.channel_width_mhz > 0.0, "channel.channel_width_mhz", "must be > 0");
    for (int j : ch.comm_band)
      ConfigReader::check(j >= 0 && j < ch.n_subchannels, "channel.comm_band", "index out of range");
    ConfigReader::check(ch.alpha > 0.0, "channel.alpha", "must be > 0");
    ConfigReader::check(ch.p_activity >= 0.0 && ch.p_activity <= 1.0, "channel.p_activity",
                        "must lie in [0, 1]");
    ConfigReader::check(ch.coherence_time >= 1, "channel.coherence_time", "must be >= 1");
    ConfigReader::check(ch.static_occupancy.empty() ||
                            ch.static_occupancy.size() == static_cast<std::size_t>(ch.n_subchannels),
                        "channel.static_occupancy", "length must equal n_subchannels");

    r.mark("channel", "stations");
    const json* st = nullptr;
    if (r.has(s, "stations")) {
      st = &s->at("stations");
      if (!st->is_object()) ConfigReader::fail("channel.stations", "must be an object");
    }
    auto& p = ch.stations;
    const std::string sp = "channel.stations";
    p.count = r.get(st, sp, "count", d.channel.stations.count);
    auto pw = r.get(st, sp, "power_dbm",
                    std::vector<double>{d.channel.stations.power_dbm_min, d.channel.stations.power_dbm_max});
    auto dk = r.get(st, sp, "distance_km",
                    std::vector<double>{d.channel.stations.distance_km_min, d.channel.stations.distance_km_max});
    ConfigReader::check(pw.size() == 2 && pw[0] <= pw[1], sp + ".power_dbm", "must be an ordered [min, max] pair");
    ConfigReader::check(dk.size() == 2 && dk[0] > 0.0 && dk[0] <= dk[1], sp + ".distance_km",
                        "must be an ordered positive [min, max] pair");
    p.power_dbm_min = pw[0];
    p.power_dbm_max = pw[1];
    p.distance_km_min = dk[0];
    p.distance_km_max = dk[1];
    p.mu = r.get(st, sp, "mu", d.channel.stations.mu);
    p.sigma = r.get(st, sp, "sigma", d.channel.stations.sigma);
    p.zeta = r.get(st, sp, "zeta", d.channel.stations.zeta);
    p.seed = r.get(st, sp, "seed", d.channel.stations.seed);
    ConfigReader::check(p.count >= 1, sp + ".count", "must be >= 1");
    ConfigReader::check(p.sigma >= 0.0, sp + ".sigma", "must be >= 0");
    ConfigReader::check(std::abs(p.zeta) <= 1.0, sp + ".zeta", "must lie in [-1, 1]");
    r.reject_unknown(st, sp);
    r.reject_unknown(s, "channel");
  }

  // reward
  {
    const json* s = r.section("reward");
    c.reward.eta1 = r.get(s, "reward", "eta1", d.reward.eta1);
    c.reward.eta2 = r.get(s, "reward", "eta2", d.reward.eta2);
    ConfigReader::check(c.reward.eta2 > 0.0, "reward.eta2", "must be > 0");
    ConfigReader::check(c.reward.eta1 >= 0.0, "reward.eta1", "must be >= 0");
    ConfigReader::check(c.reward.eta1 / c.reward.eta2 <= 1.0, "reward.eta1", "eta1 / eta2 must be <= 1");
    r.reject_unknown(s, "reward");
  }

  // agent
  {
    const json* s = r.section("agent");
    auto& a = c.agent;
    const std::string algo = r.get(s, "agent", "algo", to_string(d.agent.kind));
    try {
      a.kind = parse_agent_kind(algo);
    } catch (const Error& e) {
      ConfigReader::fail("agent.algo", e.what());
    }
    a.v = r.get(s, "agent", "v", d.agent.v);
    a.gamma = r.get(s, "agent", "gamma", d.agent.gamma);
    a.tau = r.get(s, "agent", "tau", d.agent.tau);
    r.mark("agent", "r_hat");
    if (r.has(s, "r_hat") && !s->at("r_hat").is_null()) {
      if (!s->at("r_hat").is_number()) ConfigReader::fail("agent.r_hat", "must be a number or null");
      a.r_hat = s->at("r_hat").get<double>();
    } else if (!r.has(s, "r_hat")) {
      c.defaults_applied.push_back("agent.r_hat");
    }
    a.eps0 = r.get(s, "agent", "eps0", d.agent.eps0);
    a.eps_decay = r.get(s, "agent", "eps_decay", d.agent.eps_decay);
    a.eps_floor = r.get(s, "agent", "eps_floor", d.agent.eps_floor);
    a.initial_sweep = r.get(s, "agent", "initial_sweep", d.agent.initial_sweep);
    ConfigReader::check(a.v > 0.0, "agent.v", "must be > 0");
    ConfigReader::check(a.gamma > 0.0 && a.gamma <= 1.0, "agent.gamma", "must lie in (0, 1]");
    ConfigReader::check(a.tau >= 1, "agent.tau", "must be >= 1");
    ConfigReader::check(a.eps0 >= 0.0 && a.eps0 <= 1.0, "agent.eps0", "must lie in [0, 1]");
    ConfigReader::check(a.eps_decay >= 0.0, "agent.eps_decay", "must be >= 0");
    ConfigReader::check(a.eps_floor >= 0.0 && a.eps_floor <= 1.0, "agent.eps_floor", "must lie in [0, 1]");
    r.reject_unknown(s, "agent");
  }

  // run
  {
    const json* s = r.section("run");
    auto& run = c.run;
    const std::string kind = r.get(s, "run", "scenario", to_string(d.run.scenario));
    try {
      run.scenario = parse_scenario_kind(kind);
    } catch (const Error& e) {
      ConfigReader::fail("run.scenario", e.what());
    }
    run.steps = r.get(s, "run", "steps", d.run.steps);
    ConfigReader::check(!(r.has(s, "seeds") && r.has(s, "n_seeds")), "run.seeds",
                        "give either seeds or n_seeds, not both");
    r.mark("run", "n_seeds");
    if (r.has(s, "n_seeds")) {
      const int n = s->at("n_seeds").get<int>();
      ConfigReader::check(n >= 1, "run.n_seeds", "must be >= 1");
      run.seeds = detail::default_seeds(n);
      r.mark("run", "seeds");
    } else {
      run.seeds = r.get(s, "run", "seeds", detail::default_seeds(20));
    }
    run.tc_values = r.get(s, "run", "tc_values", d.run.tc_values);
    run.algos = detail::parse_algos(r.get(s, "run", "algos", detail::algo_names(d.run.algos)), "run.algos");
    run.sinr_algos =
        detail::parse_algos(r.get(s, "run", "sinr_algos", detail::algo_names(d.run.sinr_algos)), "run.sinr_algos");
    run.tc_before = r.get(s, "run", "tc_before", d.run.tc_before);
    run.tc_after = r.get(s, "run", "tc_after", d.run.tc_after);
    run.threads = r.get(s, "run", "threads", d.run.threads);
    ConfigReader::check(run.steps >= 1, "run.steps", "must be >= 1");
    ConfigReader::check(!run.seeds.empty(), "run.seeds", "must list at least one seed");
    ConfigReader::check(!run.tc_values.empty(), "run.tc_values", "must list at least one value");
    for (int tc : run.tc_values) ConfigReader::check(tc >= 1, "run.tc_values", "entries must be >= 1");
    ConfigReader::check(run.tc_before >= 1, "run.tc_before", "must be >= 1");
    ConfigReader::check(run.tc_after >= 1, "run.tc_after", "must be >= 1");
    ConfigReader::check(run.threads >= 0, "run.threads", "must be >= 0");
    r.reject_unknown(s, "run");
  }

  // sinr
  {
    const json* s = r.section("sinr");
    c.sinr.snr_db = r.get(s, "sinr", "snr_db", d.sinr.snr_db);
    c.sinr.psi_mu = r.get(s, "sinr", "psi_mu", d.sinr.psi_mu);
    c.sinr.psi_sigma = r.get(s, "sinr", "psi_sigma", d.sinr.psi_sigma);
    ConfigReader::check(c.sinr.psi_sigma >= 0.0, "sinr.psi_sigma", "must be >= 0");
    r.reject_unknown(s, "sinr");
  }

  r.reject_unknown_sections();
  return c;
}

inline SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot open '" + path.string() + "'");
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("config: parse error in '" + path.string() + "': " + e.what());
  }
  return parse_config(root);
}

inline nlohmann::json to_json(const SimConfig& c) {
  using nlohmann::json;
  json j;
  const auto& ch = c.channel;
  std::vector<int> occ(ch.static_occupancy.begin(), ch.static_occupancy.end());
  j["channel"] = {
      {"n_subchannels", ch.n_subchannels},
      {"channel_width_mhz", ch.channel_width_mhz},
      {"comm_band", ch.comm_band},
      {"alpha", ch.alpha},
      {"p_activity", ch.p_activity},
      {"coherence_time", ch.coherence_time},
      {"noise_power_dbm", ch.noise_power_dbm},
      {"sense_threshold_dbm", ch.sense_threshold_dbm},
      {"static_occupancy", occ},
      {"stations",
       {{"count", ch.stations.count},
        {"power_dbm", {ch.stations.power_dbm_min, ch.stations.power_dbm_max}},
        {"distance_km", {ch.stations.distance_km_min, ch.stations.distance_km_max}},
        {"mu", ch.stations.mu},
        {"sigma", ch.stations.sigma},
        {"zeta", ch.stations.zeta},
        {"seed", ch.stations.seed}}}};
  j["reward"] = {{"eta1", c.reward.eta1}, {"eta2", c.reward.eta2}};
  j["agent"] = {{"algo", to_string(c.agent.kind)}, {"v", c.agent.v},          {"gamma", c.agent.gamma},
                {"tau", c.agent.tau},               {"eps0", c.agent.eps0},    {"eps_decay", c.agent.eps_decay},
                {"eps_floor", c.agent.eps_floor},   {"initial_sweep", c.agent.initial_sweep}};
  j["agent"]["r_hat"] = c.agent.r_hat ? json(*c.agent.r_hat) : json(nullptr);
  j["run"] = {{"scenario", to_string(c.run.scenario)},
              {"steps", c.run.steps},
              {"seeds", c.run.seeds},
              {"tc_values", c.run.tc_values},
              {"algos", detail::algo_names(c.run.algos)},
              {"sinr_algos", detail::algo_names(c.run.sinr_algos)},
              {"tc_before", c.run.tc_before},
              {"tc_after", c.run.tc_after},
              {"threads", c.run.threads}};
  j["sinr"] = {{"snr_db", c.sinr.snr_db}, {"psi_mu", c.sinr.psi_mu}, {"psi_sigma", c.sinr.psi_sigma}};
  return j;
}

// Independent generator streams for one run, all derived from the run seed.
// The channel stream does not depend on the agent, so every algorithm run
// with the same seed faces the same interference realization.
struct RunStreams {
  Rng channel;
  Rng agent;
  Rng sinr;

  explicit RunStreams(std::uint64_t seed)
      : channel(make(seed, 0x63686e6cULL)), agent(make(seed, 0x6167656eULL)), sinr(make(seed, 0x73696e72ULL)) {}

 private:
  static Rng make(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag)};
    return Rng(seq);
  }
};

// Reward table per occupancy pattern: outcome of every action plus the best index.
class OutcomeCache {
 public:
  OutcomeCache(const ActionSpace& space, const RewardParams& params) : space_(space), params_(params) {}

  struct Entry {
    std::vector<StepOutcome> outcomes;
    std::size_t best = 0;
  };

  const Entry& lookup(std::span<const std::uint8_t> occupancy) {
    std::uint64_t key = 0;
    for (std::size_t j = 0; j < occupancy.size(); ++j)
      if (occupancy[j]) key |= (std::uint64_t{1} << j);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Entry e;
    e.outcomes.reserve(space_.size());
    for (const auto& a : space_) e.outcomes.push_back(evaluate(a, occupancy, params_));
    e.best = best_action_index(occupancy, space_, params_);
    return cache_.emplace(key, std::move(e)).first->second;
  }

 private:
  const ActionSpace& space_;
  RewardParams params_;
  std::unordered_map<std::uint64_t, Entry> cache_;
};

// Sense -> select -> reward -> update loop for one (seed, algo, schedule).
inline RunTrace run_episode(const SimConfig& cfg, std::uint64_t seed, AgentKind algo,
                            const CoherenceSchedule& schedule) {
  const auto params = cfg.channel_params();
  const auto sinr_params = cfg.sinr_params();
  const auto stations = synthesize_stations(cfg.channel.stations);
  const auto space = enumerate_actions(params.n_subchannels);
  AgentConfig acfg = cfg.agent;
  acfg.kind = algo;
  auto agent = make_agent(acfg, space);
  RunStreams streams(seed);
  OutcomeCache outcomes(space, cfg.reward);

  RunTrace trace;
  trace.seed = seed;
  trace.algo = to_string(algo);
  trace.tc = schedule.tc_before;
  trace.tc_after = schedule.tc_after;
  trace.switch_step = schedule.switch_step;
  trace.records.reserve(static_cast<std::size_t>(cfg.run.steps));

  const bool forced = !cfg.channel.static_occupancy.empty();
  auto state = initial_channel_state(stations.size(), params.n_subchannels);
  for (std::int64_t t = 0; t < cfg.run.steps; ++t) {
    state = channel_step(std::move(state), t, params, stations, streams.channel, schedule);
    if (forced) state.occupancy = cfg.channel.static_occupancy;

    const std::size_t k = agent->select(t, streams.agent);
    const auto& entry = outcomes.lookup(state.occupancy);
    const StepOutcome& out = entry.outcomes[k];
    const double best_r = entry.outcomes[entry.best].reward;

    std::vector<double> colliders;
    if (out.n_collisions > 0 && !forced) colliders = active_station_powers(stations, state, params.alpha);
    const Sinr s = sinr(sinr_params, colliders, streams.sinr);

    agent->observe(k, out.reward, t);

    TraceRecord rec;
    rec.t = t;
    rec.action = space[k];
    rec.best = space[entry.best];
    rec.occupancy = state.occupancy;
    rec.n_c = out.n_collisions;
    rec.n_mo = out.n_missed;
    rec.reward = out.reward;
    rec.best_reward = best_r;
    rec.regret = regret(best_r, out.reward);
    rec.sinr_db = s.db;
    rec.tc = schedule.tc_at(t);
    trace.records.push_back(std::move(rec));
  }
  return trace;
}

inline RunTrace run_episode(const SimConfig& cfg, std::uint64_t seed, AgentKind algo, int tc) {
  return run_episode(cfg, seed, algo, CoherenceSchedule::fixed(tc));
}

// ---------------------------------------------------------------------------
// Output

namespace detail {
inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}
}  // namespace detail

inline void write_trace_csv(std::ostream& os, const RunTrace& trace) {
  using detail::fmt_double;
  os << "t,algo,seed,Tc,action_lo,action_hi,n_c,n_mo,reward,best_reward,regret,sinr_db\n";
  for (const auto& r : trace.records) {
    os << r.t << ',' << trace.algo << ',' << trace.seed << ',' << r.tc << ',' << r.action.lo << ','
       << r.action.hi << ',' << r.n_c << ',' << r.n_mo << ',' << fmt_double(r.reward) << ','
       << fmt_double(r.best_reward) << ',' << fmt_double(r.regret) << ',' << fmt_double(r.sinr_db) << '\n';
  }
}

inline const char* kSummaryHeader = "algo,seed,Tc,avg_regret,cum_regret_final,opt_rate\n";

inline void write_summary_row(std::ostream& os, const RunTrace& trace, const RunSummary& s) {
  using detail::fmt_double;
  os << trace.algo << ',' << trace.seed << ',' << trace.tc << ',' << fmt_double(s.avg_regret) << ','
     << fmt_double(s.final_cumulative()) << ',' << fmt_double(s.opt_rate) << '\n';
}

struct ScenarioCell {
  AgentKind algo;
  std::uint64_t seed;
  CoherenceSchedule schedule;
};

struct ScenarioResult {
  std::vector<std::filesystem::path> files;
  std::vector<RunTrace> traces;  // only filled when requested
};

inline std::vector<ScenarioCell> scenario_cells(const SimConfig& cfg) {
  std::vector<ScenarioCell> cells;
  const auto& run = cfg.run;
  switch (run.scenario) {
    case ScenarioKind::single_run:
      for (auto seed : run.seeds) cells.push_back({cfg.agent.kind, seed, CoherenceSchedule::fixed(cfg.channel.coherence_time)});
      break;
    case ScenarioKind::coherence_sweep:
      for (int tc : run.tc_values)
        for (auto algo : run.algos)
          for (auto seed : run.seeds) cells.push_back({algo, seed, CoherenceSchedule::fixed(tc)});
      break;
    case ScenarioKind::sinr_cdf:
      for (auto algo : run.sinr_algos)
        for (auto seed : run.seeds) cells.push_back({algo, seed, CoherenceSchedule::fixed(cfg.channel.coherence_time)});
      break;
    case ScenarioKind::coherence_switch: {
      const CoherenceSchedule sched{run.tc_before, run.tc_after, run.steps / 2};
      for (auto algo : run.algos)
        for (auto seed : run.seeds) cells.push_back({algo, seed, sched});
      break;
    }
  }
  return cells;
}

inline std::string trace_file_name(const ScenarioCell& c) {
  std::string tc = "tc" + std::to_string(c.schedule.tc_before);
  if (c.schedule.switches()) tc += "to" + std::to_string(c.schedule.tc_after);
  return "trace_" + to_string(c.algo) + "_" + tc + "_seed" + std::to_string(c.seed) + ".csv";
}

// Runs every cell (in parallel across worker threads), then writes traces,
// summary.csv, metadata.json and, for sinr_cdf, one SINR sample file per algo.
inline ScenarioResult run_scenario(const SimConfig& cfg, const std::filesystem::path& out_dir,
                                   bool keep_traces = false) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "traces", ec);
  if (ec || !fs::is_directory(out_dir / "traces"))
    throw Error("cannot create output directory '" + out_dir.string() + "'");

  const auto cells = scenario_cells(cfg);
  std::vector<RunTrace> traces(cells.size());
  std::vector<RunSummary> summaries(cells.size());
  std::vector<std::string> errors(cells.size());
  const bool want_sinr = cfg.run.scenario == ScenarioKind::sinr_cdf;
  std::vector<std::vector<double>> sinr_db(want_sinr ? cells.size() : 0);

  unsigned n_threads = cfg.run.threads > 0 ? static_cast<unsigned>(cfg.run.threads)
                                           : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(cells.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        traces[i] = run_episode(cfg, cells[i].seed, cells[i].algo, cells[i].schedule);
        summaries[i] = summarize(traces[i]);
        std::ofstream f(out_dir / "traces" / trace_file_name(cells[i]), std::ios::binary);
        if (!f) throw Error("cannot write trace file in '" + out_dir.string() + "'");
        write_trace_csv(f, traces[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
      if (want_sinr)
        for (const auto& r : traces[i].records) sinr_db[i].push_back(r.sinr_db);
      if (!keep_traces) traces[i].records.clear();
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < n_threads; ++w) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors)
    if (!e.empty()) throw Error(e);

  ScenarioResult result;
  for (const auto& c : cells) result.files.push_back(out_dir / "traces" / trace_file_name(c));

  {
    std::ofstream f(out_dir / "summary.csv", std::ios::binary);
    if (!f) throw Error("cannot write summary in '" + out_dir.string() + "'");
    f << kSummaryHeader;
    for (std::size_t i = 0; i < cells.size(); ++i) write_summary_row(f, traces[i], summaries[i]);
    result.files.push_back(out_dir / "summary.csv");
  }

  if (want_sinr) {
    std::map<std::string, std::vector<std::size_t>> by_algo;
    for (std::size_t i = 0; i < cells.size(); ++i) by_algo[to_string(cells[i].algo)].push_back(i);
    for (const auto& [algo, idx] : by_algo) {
      const auto path = out_dir / ("sinr_" + algo + ".csv");
      std::ofstream f(path, std::ios::binary);
      if (!f) throw Error("cannot write SINR samples in '" + out_dir.string() + "'");
      f << "algo,seed,t,sinr_db\n";
      for (std::size_t i : idx)
        for (std::size_t t = 0; t < sinr_db[i].size(); ++t)
          f << algo << ',' << cells[i].seed << ',' << t << ',' << detail::fmt_double(sinr_db[i][t]) << '\n';
      result.files.push_back(path);
    }
  }

  {
    nlohmann::json meta;
    meta["scenario"] = to_string(cfg.run.scenario);
    meta["config"] = to_json(cfg);
    meta["defaults_applied"] = cfg.defaults_applied;
    meta["n_runs"] = cells.size();
    meta["n_actions"] = cfg.channel.n_subchannels * (cfg.channel.n_subchannels + 1) / 2;
    if (cfg.run.scenario == ScenarioKind::coherence_switch) {
      meta["tc_before"] = cfg.run.tc_before;
      meta["tc_after"] = cfg.run.tc_after;
      meta["switch_step"] = cfg.run.steps / 2;
    }
    std::ofstream f(out_dir / "metadata.json", std::ios::binary);
    if (!f) throw Error("cannot write metadata in '" + out_dir.string() + "'");
    f << meta.dump(2) << '\n';
    result.files.push_back(out_dir / "metadata.json");
  }

  if (keep_traces) result.traces = std::move(traces);
  return result;
}

}  // namespace coexist
