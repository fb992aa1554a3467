#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biastracer/attribution.hpp"
#include "biastracer/downstream.hpp"
#include "biastracer/intervention.hpp"
#include "biastracer/relation_store.hpp"
#include "biastracer/selection.hpp"
#include "biastracer/stats.hpp"

namespace bt {

// Every artifact starts with a meta record: {"type":"meta", "artifact", "tool_version",
// "config_hash", "seed"}. CSV files carry the same fields in a leading "#" line.
struct ArtifactMeta {
  std::string artifact;  // "attr", "sets", "erasure", "rq3", "stats", "dataset"
  std::string tool_version;
  std::string config_hash;
  std::uint64_t seed = 0;
};

std::string tool_version();
ArtifactMeta make_meta(std::string artifact, std::string config_hash, std::uint64_t seed);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// First 16 hex digits of the SHA-256 of a canonical config text.
std::string config_hash(std::string_view canonical_config);

// Writes text to path atomically (temp file + rename), creating parent dirs.
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

// ---- attr.jsonl ------------------------------------------------------------

struct AttrNeuron {
  NeuronId id;
  double score = 0.0;
  double activation = 0.0;
};

// One prompt's attribution with only the neurons worth storing: those with
// score >= write_threshold * max_score, plus the write_top best. Selection
// from a stored record is exact for RelativeThreshold(t >= write_threshold)
// and TopK(k <= write_top).
struct PromptAttribution {
  std::string prompt_id;
  std::string relation_id;
  std::string category;
  std::string method;  // "ig" or "baseline"
  double probability = 0.0;
  double max_score = 0.0;
  double write_threshold = 0.05;
  int write_top = 64;
  std::vector<AttrNeuron> neurons;  // descending score, ties by (layer, index)

  std::vector<ScoredNeuron> scored() const;
};

PromptAttribution compact_attribution(const AttributionMap& map, std::string relation_id,
                                      std::string category, std::string method,
                                      double write_threshold = 0.05, int write_top = 64);

struct AttrFile {
  ArtifactMeta meta;
  std::vector<PromptAttribution> prompts;
};

void write_attr_jsonl(const std::filesystem::path& path, const ArtifactMeta& meta,
                      std::span<const PromptAttribution> prompts);
AttrFile read_attr_jsonl(const std::filesystem::path& path);

// ---- sets.jsonl ------------------------------------------------------------

struct SetsFile {
  ArtifactMeta meta;
  std::string method;
  SelectionConfig selection;
  std::vector<NeuronSet> sets;
  SelectionSummary summary;
};

void write_sets_jsonl(const std::filesystem::path& path, const SetsFile& file);
SetsFile read_sets_jsonl(const std::filesystem::path& path);

// ---- erasure.jsonl ---------------------------------------------------------

struct ErasureFile {
  ArtifactMeta meta;
  Rq2Report report;
};

void write_erasure_jsonl(const std::filesystem::path& path, const ErasureFile& file);
ErasureFile read_erasure_jsonl(const std::filesystem::path& path);
std::string erasure_csv(const ErasureFile& file);

// ---- rq3.jsonl -------------------------------------------------------------

struct Rq3File {
  ArtifactMeta meta;
  std::vector<EvalRecord> records;
  Rq3Summary summary;
};

void write_rq3_jsonl(const std::filesystem::path& path, const Rq3File& file);
Rq3File read_rq3_jsonl(const std::filesystem::path& path);
std::string rq3_csv(const Rq3File& file);

// ---- stats.json ------------------------------------------------------------

struct Rq2Stats {
  ArtifactMeta meta;
  std::size_t relations = 0;          // non-skipped relations tested
  std::optional<WilcoxonResult> wilcoxon;  // absent when every difference is zero
  std::optional<double> cliffs_delta;      // after vs before: positive = perplexity rose
  std::optional<double> cliffs_delta_paired;
  std::optional<TestResult> size_vs_ratio_target;  // Spearman (a)
  std::optional<TestResult> inner_vs_ratio_ctrl;   // Spearman (b), needs sets
  std::vector<std::string> notes;                  // why a statistic is absent
};

void write_stats_json(const std::filesystem::path& path, const Rq2Stats& stats);
Rq2Stats read_stats_json(const std::filesystem::path& path);
// "key = value" lines.
std::string stats_text(const Rq2Stats& stats);

// ---- dataset summary -------------------------------------------------------

struct DatasetFile {
  ArtifactMeta meta;
  std::vector<CategorySummary> rows;
};

void write_dataset_json(const std::filesystem::path& path, const DatasetFile& file);
DatasetFile read_dataset_json(const std::filesystem::path& path);

// Leading "# artifact=... tool_version=... config_hash=... seed=..." line.
std::string csv_meta_line(const ArtifactMeta& meta);

}  // namespace bt
