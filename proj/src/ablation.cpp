#include "vln/ablation.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "vln/errors.hpp"
#include "vln/experiment.hpp"

namespace vln {
namespace {

namespace fs = std::filesystem;

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_atomic(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  write_file(tmp.string(), bytes);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

// Everything that influences a cell's result besides its coordinates.
std::string fingerprint(const World& world, const AblationSpec& spec) {
  std::string s = fnv1a_hex(world_to_json(world));
  s += train_config_json(spec.train);
  s += pretrain_config_json(spec.pretrain);
  s += std::to_string(spec.agent.text_hidden) + "/" + std::to_string(spec.agent.hidden) + "/" +
       std::to_string(spec.agent.attn_dim);
  s += setting_name(spec.setting);
  s += spec.include_test ? "+test" : "";
  return fnv1a_hex(s);
}

std::string cell_payload(const std::string& id, const std::string& fp,
                         const std::vector<SplitReport>& reports) {
  std::string s = id + "\n" + fp + "\n";
  for (const auto& r : reports) s += report_json(r) + "\n";
  return s;
}

std::optional<std::vector<SplitReport>> load_cell(const fs::path& path, const std::string& id,
                                                  const std::string& fp) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(read_file(path.string()));
    if (j.at("id").get<std::string>() != id || j.at("fingerprint").get<std::string>() != fp) {
      return std::nullopt;
    }
    std::vector<SplitReport> reports;
    for (const auto& r : j.at("reports")) reports.push_back(report_from_json(r.get<std::string>()));
    if (fnv1a_hex(cell_payload(id, fp, reports)) != j.at("checksum").get<std::string>()) {
      return std::nullopt;
    }
    return reports;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void store_cell(const fs::path& path, const std::string& id, const std::string& fp,
                const std::vector<SplitReport>& reports) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["fingerprint"] = fp;
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) arr.push_back(report_json(r));
  j["reports"] = arr;
  j["checksum"] = fnv1a_hex(cell_payload(id, fp, reports));
  write_atomic(path, j.dump(2) + "\n");
}

}  // namespace

SplitReport median_report(std::span<const SplitReport> reports) {
  if (reports.empty()) throw UsageError("median of no reports");
  SplitReport m = reports[0];
  std::vector<double> tl, ne, sr, spl;
  for (const auto& r : reports) {
    tl.push_back(r.tl);
    ne.push_back(r.ne);
    sr.push_back(r.sr);
    spl.push_back(r.spl);
  }
  m.tl = median_of(tl);
  m.ne = median_of(ne);
  m.sr = median_of(sr);
  m.spl = median_of(spl);
  return m;
}

std::string cell_id(EncoderKind encoder, const StrategyConfig& strategy, std::uint64_t seed) {
  char eps[32];
  std::snprintf(eps, sizeof eps, "%g", strategy.effective_epsilon());
  return std::string(encoder_name(encoder)) + "-" + std::string(strategy_name(strategy.kind)) +
         "-e" + eps + "-seed" + std::to_string(seed);
}

LMModel pretrained_lm(const World& world, EncoderKind kind, const PretrainConfig& cfg,
                      std::uint64_t seed, const std::string& cache_dir) {
  fs::path path;
  if (!cache_dir.empty()) {
    const std::string key = fnv1a_hex(fnv1a_hex(world_to_json(world)) + pretrain_config_json(cfg));
    path = fs::path(cache_dir) / ("lm-" + std::string(encoder_name(kind)) + "-" + hex64(seed) +
                                  "-" + key + ".ckpt");
    if (fs::exists(path)) {
      try {
        LMModel m = LMModel::from_checkpoint(load_checkpoint(path.string()));
        if (m.kind() == kind) return m;
      } catch (const Error&) {
        // Unreadable cache entry: pretrain again below.
      }
    }
  }
  const std::vector<TokenSeq> corpus = split_corpus(world.split.train_seen);
  PretrainResult r = pretrain(corpus, kind, world.vocab.size(), cfg, seed);
  if (!path.empty()) {
    fs::create_directories(path.parent_path());
    write_atomic(path, encode_checkpoint(r.model.to_checkpoint()));
  }
  return std::move(r.model);
}

AblationTable ablation_grid(const World& world, const AblationSpec& spec) {
  if (spec.encoders.empty() || spec.strategies.empty() || spec.seeds.empty()) {
    throw UsageError("ablation axes must be non-empty");
  }
  const Environments envs = make_environments(world);
  const std::string fp = spec.cache_dir.empty() ? std::string() : fingerprint(world, spec);
  std::map<std::pair<EncoderKind, std::uint64_t>, LMModel> lms;
  auto note = [&](const std::string& msg) {
    if (spec.progress) spec.progress(msg);
  };

  AblationTable table;
  for (EncoderKind enc : spec.encoders) {
    for (const StrategyConfig& strat : spec.strategies) {
      AblationRow row;
      row.encoder = enc;
      row.strategy = strat;
      for (std::uint64_t seed : spec.seeds) {
        const std::string id = cell_id(enc, strat, seed);
        AblationCell cell;
        cell.encoder = enc;
        cell.strategy = strat;
        cell.seed = seed;
        fs::path cell_path;
        if (!spec.cache_dir.empty()) {
          cell_path = fs::path(spec.cache_dir) / "cells" / (id + ".json");
          if (auto cached = load_cell(cell_path, id, fp)) {
            cell.reports = std::move(*cached);
            cell.reused = true;
            note("cell " + id + ": reused");
            row.cells.push_back(std::move(cell));
            continue;
          }
          if (fs::exists(cell_path)) note("cell " + id + ": cached result invalid, re-running");
        }
        try {
          const RunSeeds rs = run_seeds(seed);
          const LMModel* lm = nullptr;
          if (enc != EncoderKind::Scratch) {
            auto key = std::make_pair(enc, seed);
            auto it = lms.find(key);
            if (it == lms.end()) {
              note("pretraining " + std::string(encoder_name(enc)) + " seed " + std::to_string(seed));
              it = lms.emplace(key, pretrained_lm(world, enc, spec.pretrain, rs.pretrain,
                                                  spec.cache_dir))
                       .first;
            }
            lm = &it->second;
          }
          AgentModel model = make_agent(world, enc, lm, spec.agent, rs.init);
          StrategyConfig sc = strat;
          sc.rng_seed = rs.train;
          train(model, world, envs, sc, spec.train);
          EvalOptions eo;
          eo.max_steps = spec.train.max_steps;
          eo.workers = spec.train.eval_workers;
          std::vector<SplitName> splits{SplitName::ValSeen, SplitName::ValUnseen};
          if (spec.include_test) splits.push_back(SplitName::TestUnseen);
          for (SplitName s : splits) {
            cell.reports.push_back(evaluate(model, envs, split_episodes(world.split, s),
                                            spec.setting, std::string(split_name(s)), eo)
                                       .report);
          }
        } catch (const Error& e) {
          throw TrainingError("cell " + id + ": " + e.what());
        }
        if (!cell_path.empty()) {
          fs::create_directories(cell_path.parent_path());
          store_cell(cell_path, id, fp, cell.reports);
        }
        note("cell " + id + ": done");
        row.cells.push_back(std::move(cell));
      }
      for (std::size_t k = 0; k < row.cells.front().reports.size(); ++k) {
        std::vector<SplitReport> per_seed;
        for (const auto& c : row.cells) per_seed.push_back(c.reports.at(k));
        row.median.push_back(median_report(per_seed));
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

std::string format_ablation(const AblationTable& table) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-8s %-4s %5s %-11s %6s %6s %6s %6s   %s\n", "encoder", "strat",
                "eps", "split", "TL", "NE", "SR", "SPL", "SR per seed");
  out += buf;
  for (const AblationRow& row : table.rows) {
    for (std::size_t k = 0; k < row.median.size(); ++k) {
      const SplitReport& m = row.median[k];
      std::string raw;
      for (const auto& c : row.cells) {
        char v[32];
        std::snprintf(v, sizeof v, "%s%.1f", raw.empty() ? "" : " ", c.reports.at(k).sr);
        raw += v;
      }
      std::snprintf(buf, sizeof buf, "%-8s %-4s %5.2f %-11s %6.1f %6.1f %6.1f %6.1f   %s\n",
                    std::string(encoder_name(row.encoder)).c_str(),
                    std::string(strategy_name(row.strategy.kind)).c_str(),
                    row.strategy.effective_epsilon(), m.split.c_str(), m.tl, m.ne, m.sr, m.spl,
                    raw.c_str());
      out += buf;
    }
  }
  return out;
}

std::string ablation_json(const AblationTable& table) {
  auto report = [](const SplitReport& r) {
    return nlohmann::ordered_json{{"split", r.split},
                                  {"setting", std::string(setting_name(r.setting))},
                                  {"tl", r.tl},
                                  {"ne", r.ne},
                                  {"sr", r.sr},
                                  {"spl", r.spl},
                                  {"episodes", r.episodes}};
  };
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const AblationRow& row : table.rows) {
    nlohmann::ordered_json j;
    j["encoder"] = std::string(encoder_name(row.encoder));
    j["strategy"] = std::string(strategy_name(row.strategy.kind));
    j["epsilon"] = row.strategy.effective_epsilon();
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const auto& c : row.cells) {
      nlohmann::ordered_json cj;
      cj["seed"] = c.seed;
      nlohmann::ordered_json reps = nlohmann::ordered_json::array();
      for (const auto& r : c.reports) reps.push_back(report(r));
      cj["reports"] = reps;
      cells.push_back(cj);
    }
    j["cells"] = cells;
    nlohmann::ordered_json med = nlohmann::ordered_json::array();
    for (const auto& r : row.median) med.push_back(report(r));
    j["median"] = med;
    rows.push_back(j);
  }
  return nlohmann::ordered_json{{"rows", rows}}.dump(2) + "\n";
}

}  // namespace vln
