#include "vln/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "vln/errors.hpp"

namespace vln {

static_assert(std::numeric_limits<long double>::digits >= 64,
              "exact_mean needs an extended-precision long double");

EpisodeResult score_episode(const Trajectory& traj, const EpisodeSpec& episode,
                            const NavGraph& graph, double threshold) {
  if (traj.nodes.empty() || traj.nodes.front() != episode.start) {
    throw CorruptLogError("trajectory of " + episode.path_id + " does not start at node " +
                          std::to_string(episode.start));
  }
  for (std::size_t i = 0; i < traj.nodes.size(); ++i) {
    const NodeId n = traj.nodes[i];
    if (!graph.has_node(n)) {
      throw CorruptLogError("trajectory of " + episode.path_id + " visits unknown node " +
                            std::to_string(n));
    }
    if (i > 0) {
      const auto& nb = graph.adjacency[traj.nodes[i - 1]];
      if (!std::binary_search(nb.begin(), nb.end(), n)) {
        throw CorruptLogError("trajectory of " + episode.path_id + " jumps from " +
                              std::to_string(traj.nodes[i - 1]) + " to " + std::to_string(n));
      }
    }
  }
  EpisodeResult r;
  r.path_id = episode.path_id;
  r.nodes = traj.nodes;
  r.tl = path_length(graph, traj.nodes);
  r.ne = distances_to(graph, episode.goal)[traj.nodes.back()];
  const PathResult best = shortest_path(graph, episode.start, episode.goal);
  r.shortest = path_length(graph, best.path);
  r.success = r.ne < threshold;
  if (!r.success) {
    r.spl_term = 0.0;
  } else if (r.shortest == 0.0) {
    r.spl_term = 1.0;
  } else {
    r.spl_term = r.shortest / std::max(r.tl, r.shortest);
  }
  return r;
}

double exact_mean(std::span<const double> xs) {
  if (xs.empty()) throw UsageError("mean of an empty list");
  long double s = 0.0L;
  for (double x : xs) s += static_cast<long double>(x);
  return static_cast<double>(s / static_cast<long double>(xs.size()));
}

namespace {

EpisodeEval evaluate_episode(const AgentModel& model, const Environments& envs,
                             const EpisodeSpec& ep, Setting setting, const EvalOptions& opt) {
  auto it = envs.find(ep.graph_id);
  if (it == envs.end()) throw LookupError("no environment for graph '" + ep.graph_id + "'");
  const Environment& env = it->second;
  EpisodeEval out;
  out.path_id = ep.path_id;
  std::span<const TokenSeq> all(ep.instructions);
  if (setting == Setting::S) {
    for (std::size_t i = 0; i < all.size(); ++i) {
      out.rollouts.push_back(
          rollout(model, ep, env, all.subspan(i, 1), PolicyMode::Greedy, opt.max_steps));
    }
  } else {
    out.rollouts.push_back(rollout(model, ep, env, all, PolicyMode::Greedy, opt.max_steps));
  }
  std::vector<double> tl, ne, succ, spl;
  for (const Trajectory& t : out.rollouts) {
    EpisodeResult r = score_episode(t, ep, env.graph(), opt.threshold);
    tl.push_back(r.tl);
    ne.push_back(r.ne);
    succ.push_back(r.success ? 1.0 : 0.0);
    spl.push_back(r.spl_term);
    out.results.push_back(std::move(r));
  }
  out.tl = exact_mean(tl);
  out.ne = exact_mean(ne);
  out.success = exact_mean(succ);
  out.spl = exact_mean(spl);
  return out;
}

}  // namespace

Evaluation evaluate(const AgentModel& model, const Environments& envs,
                    std::span<const EpisodeSpec> episodes, Setting setting,
                    const std::string& split_name, const EvalOptions& options) {
  if (episodes.empty()) throw UsageError("cannot evaluate an empty split");
  Evaluation ev;
  ev.episodes.resize(episodes.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, episodes.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < episodes.size(); ++i) {
      ev.episodes[i] = evaluate_episode(model, envs, episodes[i], setting, options);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    auto work = [&] {
      for (std::size_t i = next++; i < episodes.size(); i = next++) {
        try {
          ev.episodes[i] = evaluate_episode(model, envs, episodes[i], setting, options);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  ev.report = summarize(ev.episodes, setting, split_name);
  return ev;
}

SplitReport summarize(std::span<const EpisodeEval> episodes, Setting setting,
                      const std::string& split_name) {
  if (episodes.empty()) throw UsageError("cannot summarize an empty split");
  SplitReport r;
  r.split = split_name;
  r.setting = setting;
  r.episodes = episodes.size();
  double tl = 0.0, ne = 0.0, succ = 0.0, spl = 0.0;
  for (const EpisodeEval& e : episodes) {
    tl += e.tl;
    ne += e.ne;
    succ += e.success;
    spl += e.spl;
  }
  const double n = static_cast<double>(episodes.size());
  r.tl = tl / n;
  r.ne = ne / n;
  r.sr = 100.0 * (succ / n);
  r.spl = 100.0 * (spl / n);
  return r;
}

std::pair<double, double> generalization_gap(const SplitReport& seen, const SplitReport& unseen) {
  if (seen.setting != unseen.setting) {
    throw UsageError("generalization gap needs reports from the same setting");
  }
  return {seen.sr - unseen.sr, seen.spl - unseen.spl};
}

std::string format_reports(std::span<const SplitReport> reports) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %-7s %8s %8s %8s %8s %8s\n", "split", "setting", "TL",
                "NE", "SR", "SPL", "episodes");
  out += buf;
  for (const SplitReport& r : reports) {
    std::snprintf(buf, sizeof buf, "%-12s %-7s %8.1f %8.1f %8.1f %8.1f %8zu\n", r.split.c_str(),
                  std::string(setting_name(r.setting)).c_str(), r.tl, r.ne, r.sr, r.spl,
                  r.episodes);
    out += buf;
  }
  return out;
}

std::string report_json(const SplitReport& r) {
  nlohmann::json j;
  j["split"] = r.split;
  j["setting"] = std::string(setting_name(r.setting));
  j["tl"] = r.tl;
  j["ne"] = r.ne;
  j["sr"] = r.sr;
  j["spl"] = r.spl;
  j["episodes"] = r.episodes;
  return j.dump();
}

SplitReport report_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SplitReport r;
    r.split = j.at("split").get<std::string>();
    r.setting = parse_setting(j.at("setting").get<std::string>());
    r.tl = j.at("tl").get<double>();
    r.ne = j.at("ne").get<double>();
    r.sr = j.at("sr").get<double>();
    r.spl = j.at("spl").get<double>();
    r.episodes = j.at("episodes").get<std::size_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed report: ") + e.what());
  }
}

std::string trajectory_log(const Evaluation& eval) {
  std::string out;
  const bool single = eval.report.setting == Setting::S;
  for (const EpisodeEval& e : eval.episodes) {
    nlohmann::json j;
    j["path_id"] = e.path_id;
    j["split"] = eval.report.split;
    j["setting"] = std::string(setting_name(eval.report.setting));
    nlohmann::json rollouts = nlohmann::json::array();
    for (std::size_t k = 0; k < e.rollouts.size(); ++k) {
      const Trajectory& t = e.rollouts[k];
      const EpisodeResult& r = e.results[k];
      nlohmann::json rj;
      if (single) {
        rj["instruction"] = k;
      } else {
        rj["instruction"] = "all";
      }
      rj["nodes"] = t.nodes;
      rj["actions"] = t.actions;
      rj["alpha"] = t.alpha;
      rj["gamma"] = t.gamma;
      rj["truncated"] = t.truncated;
      rj["metrics"] = {{"tl", r.tl},
                       {"ne", r.ne},
                       {"shortest", r.shortest},
                       {"success", r.success},
                       {"spl_term", r.spl_term}};
      rollouts.push_back(std::move(rj));
    }
    j["rollouts"] = std::move(rollouts);
    j["metrics"] = {{"tl", e.tl}, {"ne", e.ne}, {"success", e.success}, {"spl", e.spl}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace vln
