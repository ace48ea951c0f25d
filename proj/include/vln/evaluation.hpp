#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vln/agent.hpp"
#include "vln/world.hpp"

namespace vln {

inline constexpr double kSuccessThreshold = 3.0;

struct EpisodeResult {
  std::string path_id;
  std::vector<NodeId> nodes;
  double tl = 0.0;        // trajectory length
  double ne = 0.0;        // shortest-path distance from the final node to the goal
  double shortest = 0.0;  // shortest-path length from start to goal
  bool success = false;   // ne < threshold
  double spl_term = 0.0;  // success * shortest / max(tl, shortest); success when shortest == 0
};

// CorruptLogError when the trajectory does not start at the episode start, or
// names a node outside the graph or a hop that is not an edge.
EpisodeResult score_episode(const Trajectory& traj, const EpisodeSpec& episode,
                            const NavGraph& graph, double threshold = kSuccessThreshold);

// Mean of a short list summed in extended precision: M copies of x give
// exactly x, and the result is monotone in every input.
double exact_mean(std::span<const double> xs);

struct SplitReport {
  std::string split;
  Setting setting = Setting::S;
  double tl = 0.0;
  double ne = 0.0;
  double sr = 0.0;   // percent
  double spl = 0.0;  // percent
  std::size_t episodes = 0;
};

// One evaluated episode: the rollouts (M in the S setting, one in the M
// setting), their scores, and the per-episode means.
struct EpisodeEval {
  std::string path_id;
  std::vector<Trajectory> rollouts;
  std::vector<EpisodeResult> results;
  double tl = 0.0;
  double ne = 0.0;
  double success = 0.0;
  double spl = 0.0;
};

struct Evaluation {
  SplitReport report;
  std::vector<EpisodeEval> episodes;
};

struct EvalOptions {
  std::size_t max_steps = kDefaultMaxSteps;
  std::size_t workers = 1;
  double threshold = kSuccessThreshold;
};

// Greedy evaluation. S: one rollout per instruction, metrics averaged over the
// M rollouts of each episode; M: one rollout with all instructions. Split means
// are sums over episodes in split order divided by the episode count, so the
// result does not depend on the number of workers.
Evaluation evaluate(const AgentModel& model, const Environments& envs,
                    std::span<const EpisodeSpec> episodes, Setting setting,
                    const std::string& split_name, const EvalOptions& options = {});

// Reduces per-episode means into a report.
SplitReport summarize(std::span<const EpisodeEval> episodes, Setting setting,
                      const std::string& split_name);

// Seen minus unseen, in percentage points: (delta SR, delta SPL).
// UsageError when the settings differ.
std::pair<double, double> generalization_gap(const SplitReport& seen, const SplitReport& unseen);

// Plain-text table with one decimal place.
std::string format_reports(std::span<const SplitReport> reports);
std::string report_json(const SplitReport& report);  // one JSON object
SplitReport report_from_json(const std::string& text);

// Trajectory log: one JSON line per episode with its rollouts and metrics.
std::string trajectory_log(const Evaluation& eval);

}  // namespace vln
