#include "biastracer/pipeline.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

#include "biastracer/artifacts.hpp"
#include "biastracer/error.hpp"
#include "biastracer/stages.hpp"

namespace bt {

namespace fs = std::filesystem;

namespace {

using ojson = nlohmann::ordered_json;

struct PreviousStage {
  std::string cache_key;
  std::vector<std::pair<std::string, std::string>> outputs;
};

std::map<std::string, PreviousStage> read_previous(const fs::path& manifest) {
  std::map<std::string, PreviousStage> out;
  if (!fs::exists(manifest)) return out;
  try {
    const auto j = nlohmann::json::parse(read_text_file(manifest));
    for (const auto& s : j.at("stages")) {
      PreviousStage p;
      p.cache_key = s.at("cache_key").get<std::string>();
      for (const auto& o : s.at("outputs")) {
        p.outputs.emplace_back(o.at("path").get<std::string>(), o.at("sha256").get<std::string>());
      }
      out[s.at("stage").get<std::string>()] = std::move(p);
    }
  } catch (const std::exception&) {
    out.clear();  // unreadable manifest: everything re-runs
  }
  return out;
}

bool still_valid(const fs::path& out_dir, const PreviousStage& p) {
  for (const auto& [rel, sha] : p.outputs) {
    const auto path = out_dir / rel;
    if (!fs::is_regular_file(path) || sha256_file(path) != sha) return false;
  }
  return true;
}

void write_manifest(const fs::path& path, const ConfigFile& cfg, const std::vector<StageRecord>& stages) {
  ojson j;
  j["artifact"] = "manifest";
  j["tool_version"] = tool_version();
  j["config_hash"] = section_hash(cfg, {"data.", "attribution.", "selection.", "erasure.", "tasks."});
  j["seed"] = cfg.get_u64("seed", 1);
  ojson arr = ojson::array();
  for (const auto& s : stages) {
    ojson e;
    e["stage"] = s.stage;
    e["cache_key"] = s.cache_key;
    ojson outs = ojson::array();
    for (const auto& [rel, sha] : s.outputs) outs.push_back({{"path", rel}, {"sha256", sha}});
    e["outputs"] = std::move(outs);
    arr.push_back(std::move(e));
  }
  j["stages"] = std::move(arr);
  write_text_file(path, j.dump(2) + "\n");
}

struct StageDef {
  std::string name;
  std::vector<std::string> sections;
  std::vector<std::string> inputs;   // files or directories whose content keys the cache
  std::vector<std::string> outputs;  // relative to out_dir
  std::function<void()> run;
};

}  // namespace

std::string hash_directory(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string text;
  for (const auto& f : files) {
    text += fs::relative(f, dir).generic_string() + "\t" + sha256_file(f) + "\n";
  }
  return sha256_hex(text);
}

PipelineResult run_pipeline(const ConfigFile& cfg, bool force) {
  require_input(cfg, "path.ckpt", false);
  require_input(cfg, "path.relations", false);
  require_input(cfg, "path.prompts", false);
  require_input(cfg, "path.tasks", true);
  const fs::path out_dir = cfg.require("path.out_dir");
  const auto paper_ref = cfg.find("path.paper_ref");
  const bool have_ref = paper_ref && !paper_ref->empty();
  if (have_ref) require_input(cfg, "path.paper_ref", false);
  // Fail on malformed values now rather than halfway through.
  (void)attribution_config_from(cfg);
  (void)selection_config_from(cfg);
  (void)erasure_config_from(cfg);
  (void)head_hyperparams_from(cfg);

  fs::create_directories(out_dir);
  PipelineResult result;
  result.out_dir = out_dir;
  result.manifest = out_dir / "manifest.json";
  const auto previous = read_previous(result.manifest);

  auto at = [&](const std::string& rel) { return (out_dir / rel).string(); };
  auto with = [&](std::initializer_list<std::pair<const char*, std::string>> kv) {
    ConfigFile c = cfg;
    for (const auto& [k, v] : kv) c.set(k, v);
    return c;
  };

  const std::string ckpt = cfg.require("path.ckpt");
  const std::string relations = cfg.require("path.relations");
  const std::string prompts = cfg.require("path.prompts");
  const std::string tasks = cfg.require("path.tasks");

  std::vector<StageDef> defs;
  defs.push_back({"dataset", {"data."}, {relations, prompts}, {"dataset.json", "dataset.csv"},
                  [&] { cmd_dataset_validate(with({{"path.out", at("dataset.json")}})); }});
  defs.push_back({"trace",
                  {"attribution.", "data."},
                  {ckpt, relations, prompts},
                  {"attr_ig.jsonl", "attr_ig.csv", "attr_baseline.jsonl", "attr_baseline.csv"},
                  [&] {
                    cmd_trace(with({{"path.out", at("attr_ig.jsonl")}, {"attribution.method", "ig"}}));
                    cmd_trace(with({{"path.out", at("attr_baseline.jsonl")}, {"attribution.method", "baseline"}}));
                  }});
  defs.push_back({"select",
                  {"selection."},
                  {at("attr_ig.jsonl"), at("attr_baseline.jsonl")},
                  {"sets_ig.jsonl", "sets_ig.csv", "sets_baseline.jsonl", "sets_baseline.csv"},
                  [&] {
                    cmd_select(with({{"path.attr", at("attr_ig.jsonl")}, {"path.out", at("sets_ig.jsonl")}}));
                    cmd_select(with({{"path.attr", at("attr_baseline.jsonl")}, {"path.out", at("sets_baseline.jsonl")}}));
                  }});
  defs.push_back({"erase",
                  {"erasure.", "data."},
                  {ckpt, relations, prompts, at("sets_ig.jsonl")},
                  {"erasure.jsonl", "erasure.csv", "erasure.summary.csv"},
                  [&] {
                    auto c = with({{"path.sets", at("sets_ig.jsonl")}, {"path.out", at("erasure.jsonl")}});
                    c.erase("path.bake");
                    cmd_erase(c);
                  }});
  defs.push_back({"stats",
                  {},
                  {at("erasure.jsonl"), at("sets_ig.jsonl")},
                  {"stats.json", "stats.txt"},
                  [&] {
                    cmd_stats(with({{"path.erasure", at("erasure.jsonl")},
                                    {"path.sets", at("sets_ig.jsonl")},
                                    {"path.out", at("stats.json")}}));
                  }});
  defs.push_back({"eval-tasks",
                  {"tasks."},
                  {ckpt, tasks, at("sets_ig.jsonl")},
                  {"rq3.jsonl", "rq3.csv"},
                  [&] {
                    cmd_eval_tasks(with({{"path.sets", at("sets_ig.jsonl")}, {"path.out", at("rq3.jsonl")}}));
                  }});
  {
    std::vector<std::string> inputs{at("dataset.json"), at("sets_ig.jsonl"), at("sets_baseline.jsonl"),
                                    at("erasure.jsonl"), at("stats.json"),   at("rq3.jsonl")};
    if (have_ref) inputs.push_back(*paper_ref);
    defs.push_back({"report", {}, inputs, {"report.md"}, [&] {
                      cmd_report(with({{"path.dataset", at("dataset.json")},
                                       {"path.rq1", at("sets_ig.jsonl") + "," + at("sets_baseline.jsonl")},
                                       {"path.rq2", at("erasure.jsonl")},
                                       {"path.stats", at("stats.json")},
                                       {"path.rq3", at("rq3.jsonl")},
                                       {"path.paper_ref", have_ref ? *paper_ref : std::string()},
                                       {"path.out", at("report.md")}}));
                    }});
  }

  for (const auto& def : defs) {
    StageRecord rec;
    rec.stage = def.name;
    try {
      std::string key_text = "stage " + def.name + "\ntool " + tool_version() + "\nconfig " +
                             section_hash(cfg, def.sections) + "\n";
      for (const auto& in : def.inputs) {
        key_text += "input " + (fs::is_directory(in) ? hash_directory(in) : sha256_file(in)) + "\n";
      }
      rec.cache_key = sha256_hex(key_text);
      const auto prev = previous.find(def.name);
      if (!force && prev != previous.end() && prev->second.cache_key == rec.cache_key &&
          still_valid(out_dir, prev->second)) {
        rec.outputs = prev->second.outputs;
        rec.cached = true;
      } else {
        def.run();
        for (const auto& rel : def.outputs) rec.outputs.emplace_back(rel, sha256_file(out_dir / rel));
      }
    } catch (const Error& e) {
      throw Error(e.code(), "stage '" + def.name + "' failed: " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::StageFailed, "stage '" + def.name + "' failed: " + e.what());
    }
    result.text += fmt::format("{:<11}{}\n", rec.stage, rec.cached ? "cached" : "ran");
    result.stages.push_back(std::move(rec));
    write_manifest(result.manifest, cfg, result.stages);
  }
  result.text += "manifest: " + result.manifest.string() + "\n";
  return result;
}

}  // namespace bt
