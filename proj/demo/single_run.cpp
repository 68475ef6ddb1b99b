// Runs Thompson sampling against UCB1 on one seed and prints the summaries.
//   demo_single_run [config.json] [tc]

#include <cstdio>
#include <cstdlib>

#include "coexist/harness.hpp"

int main(int argc, char** argv) {
  using namespace coexist;
  try {
    const SimConfig cfg = argc > 1 ? load_config(argv[1]) : parse_config(nlohmann::json::object());
    const int tc = argc > 2 ? std::atoi(argv[2]) : cfg.channel.coherence_time;
    for (auto algo : {AgentKind::thompson, AgentKind::ucb1}) {
      const RunTrace trace = run_episode(cfg, 1, algo, tc);
      const RunSummary s = summarize(trace);
      std::printf("%-10s Tc=%-3d avg regret %.4f  cumulative %.1f  optimal %.3f\n", trace.algo.c_str(), tc,
                  s.avg_regret, s.final_cumulative(), s.opt_rate);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
