#include "biastracer/artifacts.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "biastracer/error.hpp"

namespace bt {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;
namespace fs = std::filesystem;

std::string tool_version() { return BT_VERSION_STRING; }

ArtifactMeta make_meta(std::string artifact, std::string config_hash, std::uint64_t seed) {
  return {std::move(artifact), tool_version(), std::move(config_hash), seed};
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Internal, "SHA-256 failed");
  }
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text_file(path)); }

std::string config_hash(std::string_view canonical_config) {
  return sha256_hex(canonical_config).substr(0, 16);
}

void write_text_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

ojson meta_json(const ArtifactMeta& m) {
  ojson j;
  j["type"] = "meta";
  j["artifact"] = m.artifact;
  j["tool_version"] = m.tool_version;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  return j;
}

// Parsed JSONL with line numbers for error messages.
struct Line {
  std::size_t number;
  json value;
};

std::vector<Line> parse_jsonl(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<Line> out;
  std::string text;
  std::size_t n = 0;
  while (std::getline(in, text)) {
    ++n;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back({n, json::parse(text)});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, fmt::format("{}:{}: {}", path.string(), n, e.what()));
    }
  }
  return out;
}

// Runs fn over the records after the meta header, translating JSON access
// errors into MalformedRecord with a file position.
template <class F>
ArtifactMeta walk(const fs::path& path, const std::string& artifact, F&& fn) {
  const auto lines = parse_jsonl(path);
  if (lines.empty()) throw Error(ErrorCode::MalformedRecord, path.string() + ": empty artifact");
  ArtifactMeta meta;
  for (const auto& line : lines) {
    try {
      const auto& v = line.value;
      const auto type = v.at("type").get<std::string>();
      if (&line == &lines.front()) {
        if (type != "meta") throw Error(ErrorCode::MalformedRecord, "first record must be the meta record");
        meta.artifact = v.at("artifact").get<std::string>();
        meta.tool_version = v.at("tool_version").get<std::string>();
        meta.config_hash = v.at("config_hash").get<std::string>();
        meta.seed = v.at("seed").get<std::uint64_t>();
        if (meta.artifact != artifact) {
          throw Error(ErrorCode::MalformedRecord, "expected a '" + artifact + "' artifact, found '" + meta.artifact + "'");
        }
        continue;
      }
      fn(type, v);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, fmt::format("{}:{}: {}", path.string(), line.number, e.what()));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MalformedRecord) throw;
      throw Error(ErrorCode::MalformedRecord, fmt::format("{}:{}: {}", path.string(), line.number, e.what()));
    }
  }
  return meta;
}

std::string jsonl(const std::vector<ojson>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

ojson neuron_list(const std::vector<NeuronId>& ns) {
  ojson a = ojson::array();
  for (const auto& n : ns) a.push_back({n.layer, n.index});
  return a;
}

std::vector<NeuronId> parse_neurons(const json& a) {
  std::vector<NeuronId> out;
  for (const auto& p : a) out.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
  return out;
}

// NaN/inf do not exist in JSON; they are stored as null and read back as NaN.
ojson num(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }
double get_num(const json& v) {
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

std::string fmt_num(double v) { return fmt::format("{}", v); }

}  // namespace

std::string csv_meta_line(const ArtifactMeta& meta) {
  return fmt::format("# artifact={} tool_version={} config_hash={} seed={}\n", meta.artifact,
                     meta.tool_version, meta.config_hash, meta.seed);
}

// ---- attr ------------------------------------------------------------------

std::vector<ScoredNeuron> PromptAttribution::scored() const {
  std::vector<ScoredNeuron> out;
  out.reserve(neurons.size());
  for (const auto& n : neurons) out.push_back({n.id, n.score});
  return out;
}

PromptAttribution compact_attribution(const AttributionMap& map, std::string relation_id,
                                      std::string category, std::string method,
                                      double write_threshold, int write_top) {
  PromptAttribution p;
  p.prompt_id = map.prompt_id;
  p.relation_id = std::move(relation_id);
  p.category = std::move(category);
  p.method = std::move(method);
  p.probability = map.probability;
  p.max_score = map.max_score();
  p.write_threshold = write_threshold;
  p.write_top = write_top;
  auto all = scored_neurons(map);
  std::stable_sort(all.begin(), all.end(), [](const ScoredNeuron& a, const ScoredNeuron& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  for (std::size_t i = 0; i < all.size(); ++i) {
    const bool top = static_cast<int>(i) < write_top;
    const bool salient = p.max_score > 0.0 && all[i].score >= write_threshold * p.max_score;
    if (!top && !salient) break;  // sorted, so nothing later qualifies either
    const auto& id = all[i].id;
    p.neurons.push_back({id, all[i].score,
                         map.observed[static_cast<std::size_t>(id.layer)](id.index)});
  }
  return p;
}

void write_attr_jsonl(const fs::path& path, const ArtifactMeta& meta,
                      std::span<const PromptAttribution> prompts) {
  std::vector<ojson> out{meta_json(meta)};
  for (const auto& p : prompts) {
    ojson h;
    h["type"] = "prompt";
    h["prompt_id"] = p.prompt_id;
    h["relation_id"] = p.relation_id;
    h["category"] = p.category;
    h["method"] = p.method;
    h["probability"] = num(p.probability);
    h["max_score"] = num(p.max_score);
    h["write_threshold"] = p.write_threshold;
    h["write_top"] = p.write_top;
    h["n_written"] = p.neurons.size();
    out.push_back(std::move(h));
    for (const auto& n : p.neurons) {
      ojson r;
      r["type"] = "neuron";
      r["prompt_id"] = p.prompt_id;
      r["layer"] = n.id.layer;
      r["index"] = n.id.index;
      r["score"] = num(n.score);
      r["activation"] = num(n.activation);
      out.push_back(std::move(r));
    }
  }
  write_text_file(path, jsonl(out));
}

AttrFile read_attr_jsonl(const fs::path& path) {
  AttrFile f;
  std::map<std::string, std::size_t> index;
  f.meta = walk(path, "attr", [&](const std::string& type, const json& v) {
    if (type == "prompt") {
      PromptAttribution p;
      p.prompt_id = v.at("prompt_id").get<std::string>();
      p.relation_id = v.at("relation_id").get<std::string>();
      p.category = v.at("category").get<std::string>();
      p.method = v.at("method").get<std::string>();
      p.probability = get_num(v.at("probability"));
      p.max_score = get_num(v.at("max_score"));
      p.write_threshold = v.at("write_threshold").get<double>();
      p.write_top = v.at("write_top").get<int>();
      if (!index.emplace(p.prompt_id, f.prompts.size()).second) {
        throw Error(ErrorCode::MalformedRecord, "duplicate prompt '" + p.prompt_id + "'");
      }
      f.prompts.push_back(std::move(p));
    } else if (type == "neuron") {
      const auto id = v.at("prompt_id").get<std::string>();
      auto it = index.find(id);
      if (it == index.end()) throw Error(ErrorCode::MalformedRecord, "neuron record before its prompt '" + id + "'");
      f.prompts[it->second].neurons.push_back(
          {{v.at("layer").get<int>(), v.at("index").get<int>()}, get_num(v.at("score")), get_num(v.at("activation"))});
    } else {
      throw Error(ErrorCode::MalformedRecord, "unknown record type '" + type + "'");
    }
  });
  return f;
}

// ---- sets ------------------------------------------------------------------

void write_sets_jsonl(const fs::path& path, const SetsFile& file) {
  std::vector<ojson> out{meta_json(file.meta)};
  ojson sel;
  sel["type"] = "selection";
  sel["method"] = file.method;
  sel["mode"] = file.selection.mode == SelectionConfig::Mode::TopK ? "topk" : "threshold";
  sel["t"] = file.selection.threshold;
  sel["k"] = file.selection.top_k;
  sel["share"] = file.selection.share;
  sel["adaptive"] = file.selection.adaptive;
  out.push_back(std::move(sel));
  for (const auto& s : file.sets) {
    ojson r;
    r["type"] = "set";
    r["relation_id"] = s.relation_id;
    r["category"] = s.category;
    r["n_neurons"] = s.neurons.size();
    r["neurons"] = neuron_list(s.neurons);
    r["effective_share"] = s.effective_share;
    r["non_positive_prompts"] = s.non_positive_prompts;
    r["inner"] = s.inner;
    ojson pp = ojson::array();
    for (const auto& p : s.per_prompt_sets) pp.push_back(neuron_list(p));
    r["per_prompt"] = std::move(pp);
    out.push_back(std::move(r));
  }
  ojson sum;
  sum["type"] = "summary";
  sum["relations"] = file.summary.relations;
  sum["avg_neurons"] = file.summary.avg_neurons;
  sum["avg_inner"] = file.summary.avg_inner;
  sum["inter"] = file.summary.inter;
  sum["empty_sets"] = file.summary.empty_sets;
  out.push_back(std::move(sum));
  write_text_file(path, jsonl(out));
}

SetsFile read_sets_jsonl(const fs::path& path) {
  SetsFile f;
  bool have_summary = false;
  f.meta = walk(path, "sets", [&](const std::string& type, const json& v) {
    if (type == "selection") {
      f.method = v.at("method").get<std::string>();
      const auto mode = v.at("mode").get<std::string>();
      if (mode != "topk" && mode != "threshold") throw Error(ErrorCode::MalformedRecord, "unknown mode '" + mode + "'");
      f.selection.mode = mode == "topk" ? SelectionConfig::Mode::TopK : SelectionConfig::Mode::RelativeThreshold;
      f.selection.threshold = v.at("t").get<double>();
      f.selection.top_k = v.at("k").get<int>();
      f.selection.share = v.at("share").get<double>();
      f.selection.adaptive = v.at("adaptive").get<bool>();
    } else if (type == "set") {
      NeuronSet s;
      s.relation_id = v.at("relation_id").get<std::string>();
      s.category = v.at("category").get<std::string>();
      s.neurons = parse_neurons(v.at("neurons"));
      s.effective_share = v.at("effective_share").get<double>();
      s.non_positive_prompts = v.at("non_positive_prompts").get<std::size_t>();
      s.inner = v.at("inner").get<double>();
      for (const auto& p : v.at("per_prompt")) s.per_prompt_sets.push_back(parse_neurons(p));
      f.sets.push_back(std::move(s));
    } else if (type == "summary") {
      f.summary.relations = v.at("relations").get<std::size_t>();
      f.summary.avg_neurons = v.at("avg_neurons").get<double>();
      f.summary.avg_inner = v.at("avg_inner").get<double>();
      f.summary.inter = v.at("inter").get<double>();
      f.summary.empty_sets = v.at("empty_sets").get<std::size_t>();
      have_summary = true;
    } else {
      throw Error(ErrorCode::MalformedRecord, "unknown record type '" + type + "'");
    }
  });
  if (!have_summary) f.summary = summarize_sets(f.sets);
  return f;
}

// ---- erasure ---------------------------------------------------------------

namespace {

ojson aggregate_json(const Rq2Aggregate& a, const char* scope) {
  ojson j;
  j["type"] = "aggregate";
  j["scope"] = scope;
  j["label"] = a.label;
  j["relations"] = a.relations;
  j["n_suppressed"] = a.n_suppressed;
  j["ratio_target"] = num(a.ratio_target);
  j["ratio_ctrl"] = num(a.ratio_ctrl);
  j["selectivity"] = num(a.selectivity);
  return j;
}

Rq2Aggregate parse_aggregate(const json& v) {
  Rq2Aggregate a;
  a.label = v.at("label").get<std::string>();
  a.relations = v.at("relations").get<std::size_t>();
  a.n_suppressed = v.at("n_suppressed").get<double>();
  a.ratio_target = get_num(v.at("ratio_target"));
  a.ratio_ctrl = get_num(v.at("ratio_ctrl"));
  a.selectivity = get_num(v.at("selectivity"));
  return a;
}

}  // namespace

void write_erasure_jsonl(const fs::path& path, const ErasureFile& file) {
  std::vector<ojson> out{meta_json(file.meta)};
  for (const auto& r : file.report.results) {
    ojson j;
    j["type"] = "result";
    j["relation_id"] = r.relation_id;
    j["category"] = r.category;
    j["mode"] = r.mode;
    j["factor"] = r.factor;
    j["n_suppressed"] = r.n_suppressed;
    j["ppl_target_before"] = num(r.ppl_target_before);
    j["ppl_target_after"] = num(r.ppl_target_after);
    j["ppl_ctrl_before"] = num(r.ppl_ctrl_before);
    j["ppl_ctrl_after"] = num(r.ppl_ctrl_after);
    j["ratio_target"] = num(r.ratio_target);
    j["ratio_ctrl"] = num(r.ratio_ctrl);
    j["selectivity"] = num(r.selectivity);
    j["skipped"] = r.skipped;
    j["ctrl_shortfall"] = r.ctrl_shortfall;
    j["n_target_prompts"] = r.n_target_prompts;
    j["n_ctrl_prompts"] = r.n_ctrl_prompts;
    out.push_back(std::move(j));
  }
  for (const auto& a : file.report.per_category) out.push_back(aggregate_json(a, "category"));
  out.push_back(aggregate_json(file.report.overall, "overall"));
  write_text_file(path, jsonl(out));
}

ErasureFile read_erasure_jsonl(const fs::path& path) {
  ErasureFile f;
  f.meta = walk(path, "erasure", [&](const std::string& type, const json& v) {
    if (type == "result") {
      ErasureResult r;
      r.relation_id = v.at("relation_id").get<std::string>();
      r.category = v.at("category").get<std::string>();
      r.mode = v.at("mode").get<std::string>();
      r.factor = v.at("factor").get<double>();
      r.n_suppressed = v.at("n_suppressed").get<std::size_t>();
      r.ppl_target_before = get_num(v.at("ppl_target_before"));
      r.ppl_target_after = get_num(v.at("ppl_target_after"));
      r.ppl_ctrl_before = get_num(v.at("ppl_ctrl_before"));
      r.ppl_ctrl_after = get_num(v.at("ppl_ctrl_after"));
      r.ratio_target = get_num(v.at("ratio_target"));
      r.ratio_ctrl = get_num(v.at("ratio_ctrl"));
      r.selectivity = get_num(v.at("selectivity"));
      r.skipped = v.at("skipped").get<bool>();
      r.ctrl_shortfall = v.at("ctrl_shortfall").get<bool>();
      r.n_target_prompts = v.at("n_target_prompts").get<std::size_t>();
      r.n_ctrl_prompts = v.at("n_ctrl_prompts").get<std::size_t>();
      f.report.results.push_back(std::move(r));
    } else if (type == "aggregate") {
      const auto scope = v.at("scope").get<std::string>();
      if (scope == "overall") {
        f.report.overall = parse_aggregate(v);
      } else {
        f.report.per_category.push_back(parse_aggregate(v));
      }
    } else {
      throw Error(ErrorCode::MalformedRecord, "unknown record type '" + type + "'");
    }
  });
  return f;
}

std::string erasure_csv(const ErasureFile& file) {
  std::string out = csv_meta_line(file.meta);
  out +=
      "relation_id,category,mode,factor,n_suppressed,ppl_target_before,ppl_target_after,"
      "ppl_ctrl_before,ppl_ctrl_after,ratio_target,ratio_ctrl,selectivity,skipped\n";
  for (const auto& r : file.report.results) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.relation_id, r.category, r.mode,
                       fmt_num(r.factor), r.n_suppressed, fmt_num(r.ppl_target_before),
                       fmt_num(r.ppl_target_after), fmt_num(r.ppl_ctrl_before), fmt_num(r.ppl_ctrl_after),
                       fmt_num(r.ratio_target), fmt_num(r.ratio_ctrl), fmt_num(r.selectivity),
                       r.skipped ? 1 : 0);
  }
  return out;
}

// ---- rq3 -------------------------------------------------------------------

namespace {

EncoderVariant parse_variant(const std::string& s) {
  if (s == "raw") return EncoderVariant::Raw;
  if (s == "finetuned") return EncoderVariant::FineTuned;
  throw Error(ErrorCode::MalformedRecord, "unknown encoder variant '" + s + "'");
}

ojson cells_json(const std::vector<Rq3Cell>& cells) {
  ojson a = ojson::array();
  for (const auto& c : cells) {
    ojson j;
    j["metric"] = c.metric;
    j["mean_absolute"] = num(c.mean_absolute);
    j["mean_relative_pct"] = c.mean_relative_pct ? num(*c.mean_relative_pct) : ojson(nullptr);
    j["worst_absolute"] = num(c.worst_absolute);
    j["records"] = c.records;
    a.push_back(std::move(j));
  }
  return a;
}

std::vector<Rq3Cell> parse_cells(const json& a) {
  std::vector<Rq3Cell> out;
  for (const auto& j : a) {
    Rq3Cell c;
    c.metric = j.at("metric").get<std::string>();
    c.mean_absolute = get_num(j.at("mean_absolute"));
    if (!j.at("mean_relative_pct").is_null()) c.mean_relative_pct = j.at("mean_relative_pct").get<double>();
    c.worst_absolute = get_num(j.at("worst_absolute"));
    c.records = j.at("records").get<std::size_t>();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

void write_rq3_jsonl(const fs::path& path, const Rq3File& file) {
  std::vector<ojson> out{meta_json(file.meta)};
  for (const auto& r : file.records) {
    ojson j;
    j["type"] = "record";
    j["task_id"] = r.task_id;
    j["variant"] = encoder_variant_name(r.variant);
    j["condition"] = r.condition;
    j["n_suppressed"] = r.n_suppressed;
    ojson m;
    for (const auto& [k, v] : r.metrics.entries()) m[k] = num(v);
    j["metrics"] = std::move(m);
    ojson d;
    for (const auto& [k, delta] : r.deltas) {
      d[k] = {{"absolute", num(delta.absolute)},
              {"relative_pct", delta.relative_pct ? num(*delta.relative_pct) : ojson(nullptr)}};
    }
    j["deltas"] = std::move(d);
    out.push_back(std::move(j));
  }
  for (const auto& row : file.summary.per_task) {
    out.push_back({{"type", "summary_task"}, {"task_id", row.task_id},
                   {"variant", encoder_variant_name(row.variant)}, {"cells", cells_json(row.cells)}});
  }
  for (const auto& row : file.summary.per_condition) {
    out.push_back({{"type", "summary_condition"}, {"condition", row.condition},
                   {"variant", encoder_variant_name(row.variant)}, {"cells", cells_json(row.cells)}});
  }
  for (const auto& row : file.summary.per_variant) {
    out.push_back({{"type", "summary_variant"}, {"variant", encoder_variant_name(row.variant)},
                   {"cells", cells_json(row.cells)}});
  }
  write_text_file(path, jsonl(out));
}

Rq3File read_rq3_jsonl(const fs::path& path) {
  Rq3File f;
  f.meta = walk(path, "rq3", [&](const std::string& type, const json& v) {
    if (type == "record") {
      EvalRecord r;
      r.task_id = v.at("task_id").get<std::string>();
      r.variant = parse_variant(v.at("variant").get<std::string>());
      r.condition = v.at("condition").get<std::string>();
      r.n_suppressed = v.at("n_suppressed").get<std::size_t>();
      const auto& m = v.at("metrics");
      r.metrics.accuracy = get_num(m.at("accuracy"));
      if (m.contains("macro_f1")) r.metrics.macro_f1 = get_num(m.at("macro_f1"));
      if (m.contains("perplexity")) r.metrics.perplexity = get_num(m.at("perplexity"));
      // Deltas follow the fixed metric order of TaskMetrics::entries().
      const auto& d = v.at("deltas");
      for (const auto& [name, _] : r.metrics.entries()) {
        if (!d.contains(name)) continue;
        Delta delta;
        delta.absolute = get_num(d.at(name).at("absolute"));
        if (!d.at(name).at("relative_pct").is_null()) delta.relative_pct = d.at(name).at("relative_pct").get<double>();
        r.deltas.emplace_back(name, delta);
      }
      f.records.push_back(std::move(r));
    } else if (type == "summary_task") {
      f.summary.per_task.push_back({v.at("task_id").get<std::string>(),
                                    parse_variant(v.at("variant").get<std::string>()),
                                    parse_cells(v.at("cells"))});
    } else if (type == "summary_condition") {
      f.summary.per_condition.push_back({v.at("condition").get<std::string>(),
                                         parse_variant(v.at("variant").get<std::string>()),
                                         parse_cells(v.at("cells"))});
    } else if (type == "summary_variant") {
      f.summary.per_variant.push_back({parse_variant(v.at("variant").get<std::string>()), parse_cells(v.at("cells"))});
    } else {
      throw Error(ErrorCode::MalformedRecord, "unknown record type '" + type + "'");
    }
  });
  return f;
}

std::string rq3_csv(const Rq3File& file) {
  std::string out = csv_meta_line(file.meta);
  out += "task_id,variant,condition,n_suppressed,metric,value,delta_absolute,delta_relative_pct\n";
  for (const auto& r : file.records) {
    for (const auto& [name, value] : r.metrics.entries()) {
      std::string abs, rel;
      for (const auto& [dn, d] : r.deltas) {
        if (dn != name) continue;
        abs = fmt_num(d.absolute);
        if (d.relative_pct) rel = fmt_num(*d.relative_pct);
      }
      out += fmt::format("{},{},{},{},{},{},{},{}\n", r.task_id, encoder_variant_name(r.variant), r.condition,
                         r.n_suppressed, name, fmt_num(value), abs, rel);
    }
  }
  return out;
}

// ---- stats -----------------------------------------------------------------

namespace {

ojson test_json(const TestResult& t) {
  ojson j;
  j["statistic"] = num(t.statistic);
  j["p_value"] = num(t.p_value);
  j["method"] = t.method_note;
  return j;
}

TestResult parse_test(const json& j) {
  TestResult t;
  t.statistic = get_num(j.at("statistic"));
  t.p_value = get_num(j.at("p_value"));
  t.method_note = j.at("method").get<std::string>();
  return t;
}

}  // namespace

void write_stats_json(const fs::path& path, const Rq2Stats& s) {
  ojson j;
  j["meta"] = meta_json(s.meta);
  j["relations"] = s.relations;
  if (s.wilcoxon) {
    const auto& w = *s.wilcoxon;
    j["wilcoxon"] = {{"w_plus", w.w_plus}, {"w_minus", w.w_minus}, {"w_min", w.w_min}, {"n", w.n},
                     {"p_value", num(w.p_value)}, {"exact", w.exact}, {"method", w.method_note}};
  } else {
    j["wilcoxon"] = nullptr;
  }
  j["cliffs_delta"] = s.cliffs_delta ? num(*s.cliffs_delta) : ojson(nullptr);
  j["cliffs_delta_paired"] = s.cliffs_delta_paired ? num(*s.cliffs_delta_paired) : ojson(nullptr);
  j["spearman_size_vs_ratio_target"] = s.size_vs_ratio_target ? test_json(*s.size_vs_ratio_target) : ojson(nullptr);
  j["spearman_inner_vs_ratio_ctrl"] = s.inner_vs_ratio_ctrl ? test_json(*s.inner_vs_ratio_ctrl) : ojson(nullptr);
  j["notes"] = s.notes;
  write_text_file(path, j.dump(2) + "\n");
}

Rq2Stats read_stats_json(const fs::path& path) {
  Rq2Stats s;
  try {
    const auto j = json::parse(read_text_file(path));
    const auto& m = j.at("meta");
    s.meta = {m.at("artifact").get<std::string>(), m.at("tool_version").get<std::string>(),
              m.at("config_hash").get<std::string>(), m.at("seed").get<std::uint64_t>()};
    if (s.meta.artifact != "stats") throw Error(ErrorCode::MalformedRecord, path.string() + ": not a stats artifact");
    s.relations = j.at("relations").get<std::size_t>();
    if (!j.at("wilcoxon").is_null()) {
      const auto& w = j.at("wilcoxon");
      WilcoxonResult r;
      r.w_plus = w.at("w_plus").get<double>();
      r.w_minus = w.at("w_minus").get<double>();
      r.w_min = w.at("w_min").get<double>();
      r.statistic = r.w_plus;
      r.n = w.at("n").get<std::size_t>();
      r.p_value = get_num(w.at("p_value"));
      r.exact = w.at("exact").get<bool>();
      r.method_note = w.at("method").get<std::string>();
      s.wilcoxon = r;
    }
    if (!j.at("cliffs_delta").is_null()) s.cliffs_delta = j.at("cliffs_delta").get<double>();
    if (!j.at("cliffs_delta_paired").is_null()) s.cliffs_delta_paired = j.at("cliffs_delta_paired").get<double>();
    if (!j.at("spearman_size_vs_ratio_target").is_null()) {
      s.size_vs_ratio_target = parse_test(j.at("spearman_size_vs_ratio_target"));
    }
    if (!j.at("spearman_inner_vs_ratio_ctrl").is_null()) {
      s.inner_vs_ratio_ctrl = parse_test(j.at("spearman_inner_vs_ratio_ctrl"));
    }
    s.notes = j.at("notes").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, path.string() + ": " + e.what());
  }
  return s;
}

std::string stats_text(const Rq2Stats& s) {
  std::string out;
  auto line = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  line("relations", std::to_string(s.relations));
  if (s.wilcoxon) {
    line("wilcoxon.w_plus", fmt_num(s.wilcoxon->w_plus));
    line("wilcoxon.w_min", fmt_num(s.wilcoxon->w_min));
    line("wilcoxon.n", std::to_string(s.wilcoxon->n));
    line("wilcoxon.p", fmt_num(s.wilcoxon->p_value));
    line("wilcoxon.method", s.wilcoxon->method_note);
  }
  if (s.cliffs_delta) line("cliffs_delta", fmt_num(*s.cliffs_delta));
  if (s.cliffs_delta_paired) line("cliffs_delta_paired", fmt_num(*s.cliffs_delta_paired));
  if (s.size_vs_ratio_target) {
    line("spearman.size_vs_ratio_target.rho", fmt_num(s.size_vs_ratio_target->statistic));
    line("spearman.size_vs_ratio_target.p", fmt_num(s.size_vs_ratio_target->p_value));
  }
  if (s.inner_vs_ratio_ctrl) {
    line("spearman.inner_vs_ratio_ctrl.rho", fmt_num(s.inner_vs_ratio_ctrl->statistic));
    line("spearman.inner_vs_ratio_ctrl.p", fmt_num(s.inner_vs_ratio_ctrl->p_value));
  }
  for (const auto& n : s.notes) line("note", n);
  return out;
}

// ---- dataset ---------------------------------------------------------------

void write_dataset_json(const fs::path& path, const DatasetFile& file) {
  ojson j;
  j["meta"] = meta_json(file.meta);
  ojson rows = ojson::array();
  for (const auto& r : file.rows) {
    rows.push_back({{"category", r.label}, {"relations", r.relations}, {"prompts", r.prompts},
                    {"groups", r.groups}, {"stereotypes", r.stereotypes}});
  }
  j["rows"] = std::move(rows);
  write_text_file(path, j.dump(2) + "\n");
}

DatasetFile read_dataset_json(const fs::path& path) {
  DatasetFile f;
  try {
    const auto j = json::parse(read_text_file(path));
    const auto& m = j.at("meta");
    f.meta = {m.at("artifact").get<std::string>(), m.at("tool_version").get<std::string>(),
              m.at("config_hash").get<std::string>(), m.at("seed").get<std::uint64_t>()};
    for (const auto& r : j.at("rows")) {
      f.rows.push_back({r.at("category").get<std::string>(), r.at("relations").get<std::size_t>(),
                        r.at("prompts").get<std::size_t>(), r.at("groups").get<std::size_t>(),
                        r.at("stereotypes").get<std::size_t>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, path.string() + ": " + e.what());
  }
  return f;
}

}  // namespace bt
