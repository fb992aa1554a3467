#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "biastracer/config_file.hpp"

namespace bt {

// Seven stages, run in order, each writing its artifacts under path.out_dir:
//   dataset     dataset.json, dataset.csv
//   trace       attr_ig.{jsonl,csv}, attr_baseline.{jsonl,csv}
//   select      sets_ig.{jsonl,csv}, sets_baseline.{jsonl,csv}
//   erase       erasure.jsonl, erasure.csv, erasure.summary.csv
//   stats       stats.json, stats.txt
//   eval-tasks  rq3.jsonl, rq3.csv
//   report      report.md
// manifest.json lists every stage with its cache key and the SHA-256 of each
// output. A stage whose cache key matches the previous manifest and whose
// outputs still hash the same is not re-run unless force is set.
struct StageRecord {
  std::string stage;
  std::string cache_key;
  std::vector<std::pair<std::string, std::string>> outputs;  // (path relative to out_dir, sha256)
  bool cached = false;  // not written to the manifest
};

struct PipelineResult {
  std::filesystem::path out_dir;
  std::filesystem::path manifest;
  std::vector<StageRecord> stages;
  std::string text;
};

inline constexpr const char* kPipelineStages[] = {"dataset", "trace",      "select", "erase",
                                                  "stats",   "eval-tasks", "report"};

// Required fields: path.ckpt, path.relations, path.prompts, path.tasks,
// path.out_dir. path.paper_ref is optional. Throws InvalidArgument naming a
// missing or unresolvable field before any stage runs; a failing stage throws
// with its name in the message.
PipelineResult run_pipeline(const ConfigFile& cfg, bool force);

// Order-independent hash over every regular file below dir (relative names and contents).
std::string hash_directory(const std::filesystem::path& dir);

}  // namespace bt
