#include "biastracer/stages.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "biastracer/error.hpp"
#include "biastracer/parallel.hpp"
#include "biastracer/relation_store.hpp"
#include "biastracer/report.hpp"
#include "biastracer/tasks.hpp"

namespace bt {

namespace fs = std::filesystem;

namespace {

// Effective defaults of every non-path key; hashes are computed after these
// are filled in, so spelling out a default does not change a hash.
const std::vector<std::pair<std::string, std::string>>& defaults() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"seed", "1"},
      {"data.lenient", "false"},
      {"data.prompts_per_relation", "10"},
      {"corpus.relations", "30"},
      {"corpus.paraphrases", "10"},
      {"corpus.groups", "2"},
      {"corpus.scaffold_lines", "300"},
      {"corpus.task_train", "160"},
      {"corpus.task_test", "80"},
      {"model.n_layers", "4"},
      {"model.d_model", "64"},
      {"model.n_heads", "4"},
      {"model.d_ff", "128"},
      {"model.max_len", "32"},
      {"train.steps", "1500"},
      {"train.memorization_steps", "3000"},
      {"train.batch_size", "16"},
      {"train.learning_rate", "0.002"},
      {"train.memorization_learning_rate", "0.005"},
      {"train.memorization_share", "0.75"},
      {"train.ffn_only", "true"},
      {"attribution.method", "ig"},
      {"attribution.steps", "20"},
      {"attribution.write_threshold", "0.05"},
      {"attribution.write_top", "64"},
      {"selection.mode", "threshold"},
      {"selection.t", "0.2"},
      {"selection.k", "20"},
      {"selection.share", "0.7"},
      {"selection.adaptive", "true"},
      {"erasure.ctrl_n", "10"},
      {"erasure.pool_controls", "false"},
      {"erasure.amplify", "0"},
      {"tasks.variants", "raw,finetuned"},
      {"tasks.per_relation", "false"},
      {"tasks.head_steps", "400"},
      {"tasks.batch_size", "16"},
      {"tasks.head_lr", "0.01"},
      {"tasks.encoder_lr", "0.001"},
  };
  return table;
}

ConfigFile with_defaults(const ConfigFile& cfg) {
  ConfigFile out;
  for (const auto& [k, v] : defaults()) out.set(k, v);
  out.merge(cfg);
  return out;
}

int get_int(const ConfigFile& c, const std::string& key) { return static_cast<int>(c.get_int(key, 0)); }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    const auto b = cur.find_first_not_of(' ');
    const auto e = cur.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
  }
  return out;
}

RelationDataset load_dataset_from(const ConfigFile& c) {
  return load_dataset(require_input(c, "path.relations"), require_input(c, "path.prompts"),
                      !c.get_bool("data.lenient", false),
                      static_cast<std::size_t>(c.get_int("data.prompts_per_relation", 10)));
}

std::vector<NeuronSet> load_sets(const fs::path& path) { return read_sets_jsonl(path).sets; }

std::vector<ClozeExample> read_cloze(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<ClozeExample> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("text").get<std::string>(), j.at("answer").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, fmt::format("{}:{}: {}", path.string(), n, e.what()));
    }
  }
  return out;
}

std::string fill_mask(const std::string& text, const std::string& answer) {
  std::string out = text;
  const auto pos = out.find("[MASK]");
  if (pos != std::string::npos) out.replace(pos, 6, answer);
  return out;
}

std::string num(double v) { return fmt::format("{}", v); }

}  // namespace

// ---- config ----------------------------------------------------------------

ModelConfig model_config_from(const ConfigFile& cfg) {
  const auto c = with_defaults(cfg);
  ModelConfig m;
  m.n_layers = get_int(c, "model.n_layers");
  m.d_model = get_int(c, "model.d_model");
  m.n_heads = get_int(c, "model.n_heads");
  m.d_ff = get_int(c, "model.d_ff");
  m.max_len = get_int(c, "model.max_len");
  m.seed = c.get_u64("seed", 1);
  return m;
}

TrainHyperparams train_hyperparams_from(const ConfigFile& cfg) {
  const auto c = with_defaults(cfg);
  TrainHyperparams h;
  h.steps = get_int(c, "train.steps");
  h.memorization_steps = get_int(c, "train.memorization_steps");
  h.batch_size = get_int(c, "train.batch_size");
  h.learning_rate = c.get_double("train.learning_rate", 0);
  h.memorization_learning_rate = c.get_double("train.memorization_learning_rate", 0);
  h.memorization_share = c.get_double("train.memorization_share", 0);
  h.feed_forward_only_memorization = c.get_bool("train.ffn_only", true);
  if (h.steps < 0 || h.memorization_steps < 0 || h.batch_size < 1) {
    throw Error(ErrorCode::InvalidArgument, "train.steps and train.memorization_steps must be >= 0, train.batch_size >= 1");
  }
  return h;
}

SynthSpec synth_spec_from(const ConfigFile& cfg) {
  const auto c = with_defaults(cfg);
  SynthSpec s;
  s.relations = get_int(c, "corpus.relations");
  s.paraphrases = get_int(c, "corpus.paraphrases");
  s.groups_per_category = get_int(c, "corpus.groups");
  s.scaffold_lines = get_int(c, "corpus.scaffold_lines");
  s.task_train_size = get_int(c, "corpus.task_train");
  s.task_test_size = get_int(c, "corpus.task_test");
  s.seed = c.get_u64("seed", 1);
  return s;
}

AttributionConfig attribution_config_from(const ConfigFile& cfg) {
  const auto c = with_defaults(cfg);
  AttributionConfig a;
  a.method = parse_method(c.get_string("attribution.method", "ig"));
  a.steps = get_int(c, "attribution.steps");
  if (a.steps < 1) throw Error(ErrorCode::InvalidArgument, "attribution.steps must be >= 1");
  return a;
}

SelectionConfig selection_config_from(const ConfigFile& cfg) {
  const auto c = with_defaults(cfg);
  SelectionConfig s;
  const auto mode = c.get_string("selection.mode", "threshold");
  if (mode == "threshold") {
    s.mode = SelectionConfig::Mode::RelativeThreshold;
  } else if (mode == "topk") {
    s.mode = SelectionConfig::Mode::TopK;
  } else {
    throw Error(ErrorCode::InvalidArgument, "selection.mode must be 'threshold' or 'topk', got '" + mode + "'");
  }
  s.threshold = c.get_double("selection.t", 0.2);
  s.top_k = get_int(c, "selection.k");
  s.share = c.get_double("selection.share", 0.7);
  s.adaptive = c.get_bool("selection.adaptive", true);
  s.validate();
  return s;
}

ErasureConfig erasure_config_from(const ConfigFile& cfg) {
  const auto c = with_defaults(cfg);
  ErasureConfig e;
  const long n = c.get_int("erasure.ctrl_n", 10);
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "erasure.ctrl_n must be >= 1");
  e.ctrl_n = static_cast<std::size_t>(n);
  e.pool_controls = c.get_bool("erasure.pool_controls", false);
  e.seed = c.get_u64("seed", 1);
  return e;
}

HeadHyperparams head_hyperparams_from(const ConfigFile& cfg) {
  const auto c = with_defaults(cfg);
  HeadHyperparams h;
  h.steps = get_int(c, "tasks.head_steps");
  h.batch_size = get_int(c, "tasks.batch_size");
  h.head_learning_rate = c.get_double("tasks.head_lr", 0);
  h.encoder_learning_rate = c.get_double("tasks.encoder_lr", 0);
  if (h.steps < 0 || h.batch_size < 1) {
    throw Error(ErrorCode::InvalidArgument, "tasks.head_steps must be >= 0, tasks.batch_size >= 1");
  }
  return h;
}

std::string section_hash(const ConfigFile& cfg, const std::vector<std::string>& prefixes) {
  const auto c = with_defaults(cfg);
  std::string text = c.canonical("seed");
  for (const auto& p : prefixes) text += c.canonical(p);
  return config_hash(text);
}

ConfigFile load_run_config(const fs::path& path) {
  auto cfg = ConfigFile::load(path);
  const auto base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  const auto entries = cfg.entries();  // copy: cfg is modified in the loop
  for (const auto& [k, v] : entries) {
    if (k.rfind("path.", 0) != 0 || v.empty()) continue;
    if (k == "path.rq1") {
      std::string joined;
      for (const auto& item : split_list(v)) {
        const fs::path p(item);
        joined += (joined.empty() ? "" : ",") + (p.is_absolute() ? p : base / p).lexically_normal().string();
      }
      cfg.set(k, joined);
      continue;
    }
    const fs::path p(v);
    if (!p.is_absolute()) cfg.set(k, (base / p).lexically_normal().string());
  }
  return cfg;
}

fs::path require_input(const ConfigFile& cfg, const std::string& key, bool directory) {
  const fs::path v = cfg.require(key);
  const bool ok = directory ? fs::is_directory(v) : fs::is_regular_file(v);
  if (!ok) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("config field '{}': {} not found: {}", key, directory ? "directory" : "file", v.string()));
  }
  return v;
}

fs::path sibling(const fs::path& out, const std::string& extension) {
  fs::path p = out;
  p.replace_extension(extension);
  return p;
}

// ---- csv -------------------------------------------------------------------

std::string sets_csv(const SetsFile& file) {
  std::string out = csv_meta_line(file.meta);
  out += "relation_id,category,n_neurons,effective_share,non_positive_prompts,inner,neurons\n";
  for (const auto& s : file.sets) {
    std::string ns;
    for (const auto& n : s.neurons) ns += fmt::format("{}{}:{}", ns.empty() ? "" : " ", n.layer, n.index);
    out += fmt::format("{},{},{},{},{},{},{}\n", s.relation_id, s.category, s.neurons.size(), num(s.effective_share),
                       s.non_positive_prompts, num(s.inner), ns);
  }
  return out;
}

std::string attr_csv(const ArtifactMeta& meta, const std::vector<PromptAttribution>& prompts) {
  std::string out = csv_meta_line(meta);
  out += "prompt_id,relation_id,layer,index,score,activation\n";
  for (const auto& p : prompts) {
    for (const auto& n : p.neurons) {
      out += fmt::format("{},{},{},{},{},{}\n", p.prompt_id, p.relation_id, n.id.layer, n.id.index, num(n.score),
                         num(n.activation));
    }
  }
  return out;
}

std::string erasure_summary_csv(const ErasureFile& file) {
  std::string out = csv_meta_line(file.meta);
  out += "category,relations,avg_bn,ppl_ratio_bias,ppl_ratio_ctrl,selectivity\n";
  auto line = [&](const Rq2Aggregate& a) {
    out += fmt::format("{},{},{},{},{},{}\n", a.label, a.relations, num(a.n_suppressed), num(a.ratio_target),
                       num(a.ratio_ctrl), num(a.selectivity));
  };
  for (const auto& a : file.report.per_category) line(a);
  line(file.report.overall);
  return out;
}

// ---- in-memory stages ------------------------------------------------------

std::vector<PromptAttribution> trace_dataset(const ModelParams& params, const Vocab& vocab,
                                             const RelationDataset& dataset, const AttributionConfig& acfg,
                                             double write_threshold, int write_top) {
  struct Item {
    std::size_t prompt;
    const BiasedRelation* relation;
  };
  std::vector<Item> items;
  for (const auto& r : dataset.relations()) {
    for (const auto idx : dataset.prompt_indices(r.id)) items.push_back({idx, &r});
  }
  std::vector<PromptAttribution> out(items.size());
  const auto method = method_name(acfg.method);
  parallel_for(items.size(), [&](std::size_t i) {
    const auto& p = dataset.prompts()[items[i].prompt];
    const auto enc = encode_prompt(vocab, p.text, p.answer);
    auto map = attribute(params, enc.seq, enc.answer, acfg);
    map.prompt_id = dataset.prompt_id(items[i].prompt);
    out[i] = compact_attribution(map, items[i].relation->id, category_code(items[i].relation->category), method,
                                 write_threshold, write_top);
  });
  return out;
}

std::vector<NeuronSet> select_sets(const std::vector<PromptAttribution>& prompts, const SelectionConfig& scfg) {
  scfg.validate();
  std::vector<std::string> order;
  std::map<std::string, std::vector<const PromptAttribution*>> by_relation;
  for (const auto& p : prompts) {
    if (scfg.mode == SelectionConfig::Mode::RelativeThreshold && scfg.threshold < p.write_threshold) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("selection threshold {} is below the attribution write threshold {}; "
                              "re-run trace with a lower write threshold",
                              scfg.threshold, p.write_threshold));
    }
    if (scfg.mode == SelectionConfig::Mode::TopK && scfg.top_k > p.write_top) {
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("top-k {} exceeds the {} neurons stored per prompt; re-run trace with a larger write-top",
                              scfg.top_k, p.write_top));
    }
    auto& v = by_relation[p.relation_id];
    if (v.empty()) order.push_back(p.relation_id);
    v.push_back(&p);
  }
  std::vector<NeuronSet> sets;
  for (const auto& rel : order) {
    const auto& ps = by_relation[rel];
    std::vector<std::vector<NeuronId>> per_prompt;
    std::size_t non_positive = 0;
    for (const auto* p : ps) {
      const auto scored = p->scored();
      auto sel = select_per_prompt(scored, scfg);
      if (sel.all_non_positive) ++non_positive;
      per_prompt.push_back(std::move(sel.neurons));
    }
    sets.push_back(build_neuron_set(rel, ps.front()->category, std::move(per_prompt), scfg, non_positive));
  }
  return sets;
}

Rq2Stats compute_rq2_stats(const Rq2Report& report, const std::vector<NeuronSet>* sets) {
  Rq2Stats s;
  std::vector<double> before, after, size, ratio_t;
  std::vector<const ErasureResult*> used;
  for (const auto& r : report.results) {
    if (r.skipped) continue;
    used.push_back(&r);
    before.push_back(r.ppl_target_before);
    after.push_back(r.ppl_target_after);
    size.push_back(static_cast<double>(r.n_suppressed));
    ratio_t.push_back(r.ratio_target);
  }
  s.relations = used.size();
  auto attempt = [&](const char* what, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      s.notes.push_back(std::string(what) + ": " + error_code_name(e.code()) + ": " + e.what());
    }
  };
  attempt("wilcoxon", [&] { s.wilcoxon = wilcoxon_signed_rank(before, after); });
  attempt("cliffs_delta", [&] { s.cliffs_delta = cliffs_delta(after, before); });
  attempt("cliffs_delta_paired", [&] { s.cliffs_delta_paired = cliffs_delta_paired(after, before); });
  attempt("spearman size_vs_ratio_target", [&] { s.size_vs_ratio_target = spearman(size, ratio_t); });
  if (sets) {
    std::map<std::string, double> inner;
    for (const auto& set : *sets) inner[set.relation_id] = set.inner;
    std::vector<double> x, y;
    for (const auto* r : used) {
      auto it = inner.find(r->relation_id);
      if (it == inner.end()) continue;
      x.push_back(it->second);
      y.push_back(r->ratio_ctrl);
    }
    attempt("spearman inner_vs_ratio_ctrl", [&] { s.inner_vs_ratio_ctrl = spearman(x, y); });
  } else {
    s.notes.push_back("spearman inner_vs_ratio_ctrl: needs the sets artifact");
  }
  return s;
}

std::vector<EvalRecord> run_eval_tasks(const ModelParams& params, const Vocab& vocab,
                                       const std::vector<TaskData>& tasks, const std::vector<NeuronSet>& sets,
                                       const std::vector<EncoderVariant>& variants, bool per_relation,
                                       const HeadHyperparams& hyper, std::uint64_t seed) {
  const auto conditions = suppression_conditions(sets, per_relation);
  std::vector<EvalRecord> out;
  for (const auto& task : tasks) {
    for (const auto variant : variants) {
      auto h = hyper;
      h.freeze_encoder = variant == EncoderVariant::Raw;
      const auto ft = finetune_head(params, vocab, task, h, seed);
      auto ev = eval_under_suppression(ft.model, vocab, task, variant, conditions);
      out.insert(out.end(), ev.records.begin(), ev.records.end());
    }
  }
  return out;
}

// ---- commands --------------------------------------------------------------

StageResult cmd_dataset_validate(const ConfigFile& cfg) {
  const auto c = with_defaults(cfg);
  const auto ds = load_dataset_from(c);
  StageResult r;
  r.text = fmt::format("valid: {} relations, {} prompts ({})\n", ds.relations().size(), ds.prompts().size(),
                       c.get_bool("data.lenient", false) ? "lenient" : "strict");
  if (const auto out = c.find("path.out"); out && !out->empty()) {
    DatasetFile f{make_meta("dataset", section_hash(c, {"data."}), c.get_u64("seed", 1)), summarize(ds)};
    write_dataset_json(*out, f);
    write_text_file(sibling(*out, ".csv"), csv_meta_line(f.meta) + summary_csv(f.rows));
    r.outputs = {*out, sibling(*out, ".csv")};
  }
  return r;
}

StageResult cmd_dataset_summary(const ConfigFile& cfg) {
  const auto c = with_defaults(cfg);
  return {summary_csv(summarize(load_dataset_from(c))), {}};
}

StageResult cmd_corpus_synth(const ConfigFile& cfg) {
  const auto c = with_defaults(cfg);
  const fs::path dir = c.require("path.out_dir");
  const auto spec = synth_spec_from(c);
  const auto synth = generate_synthetic_corpus(spec);
  fs::create_directories(dir);
  std::string corpus;
  for (const auto& line : synth.corpus) corpus += line + "\n";
  write_text_file(dir / "corpus.txt", corpus);
  save_dataset(synth.dataset, dir / "relations.jsonl", dir / "prompts.jsonl");
  StageResult r;
  r.outputs = {dir / "corpus.txt", dir / "relations.jsonl", dir / "prompts.jsonl"};
  if (!synth.tasks.empty()) {
    save_tasks(synth.tasks, dir / "tasks");
    r.outputs.push_back(dir / "tasks");
  }
  std::string toy = "# train-toy configuration; relative paths resolve against this file\n";
  toy += c.canonical("seed");
  toy += "path.corpus = corpus.txt\npath.prompts = prompts.jsonl\npath.out = toy.ckpt\n";
  toy += c.canonical("model.") + c.canonical("train.");
  write_text_file(dir / "toy.cfg", toy);
  std::string run = "# pipeline configuration; relative paths resolve against this file\n";
  run += c.canonical("seed");
  run += "path.relations = relations.jsonl\npath.prompts = prompts.jsonl\npath.ckpt = toy.ckpt\n";
  if (!synth.tasks.empty()) run += "path.tasks = tasks\n";
  run += "path.out_dir = run\n";
  for (const char* section : {"data.", "attribution.", "selection.", "erasure.", "tasks."}) {
    run += c.canonical(section);
  }
  write_text_file(dir / "pipeline.cfg", run);
  r.outputs.push_back(dir / "toy.cfg");
  r.outputs.push_back(dir / "pipeline.cfg");
  r.text = fmt::format("wrote {} corpus lines, {} relations, {} prompts, {} tasks to {}\n", synth.corpus.size(),
                       synth.dataset.relations().size(), synth.dataset.prompts().size(), synth.tasks.size(),
                       dir.string());
  return r;
}

StageResult cmd_train_toy(const ConfigFile& cfg) {
  const auto c = with_defaults(cfg);
  const fs::path out = c.require("path.out");
  std::vector<std::string> corpus;
  {
    std::istringstream in(read_text_file(require_input(c, "path.corpus")));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) corpus.push_back(line);
    }
  }
  std::vector<ClozeExample> cloze;
  if (const auto p = c.find("path.prompts"); p && !p->empty()) cloze = read_cloze(*p);
  auto vocab_text = corpus;
  for (const auto& ex : cloze) vocab_text.push_back(fill_mask(ex.text, ex.answer));
  if (corpus.empty() && cloze.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus has no text lines");
  Checkpoint ckpt;
  ckpt.vocab = build_vocab(vocab_text);
  const auto model = model_config_from(c);
  const auto hyper = train_hyperparams_from(c);
  auto res = train_mlm(corpus, cloze, ckpt.vocab, model, hyper);
  ckpt.params = std::move(res.params);
  const double recall = cloze.empty() ? 0.0 : cloze_recall(ckpt.params, ckpt.vocab, cloze);
  nlohmann::ordered_json meta;
  meta["artifact"] = "ckpt";
  meta["tool_version"] = tool_version();
  meta["config_hash"] = section_hash(c, {"model.", "train."});
  meta["seed"] = model.seed;
  meta["final_loss"] = res.final_loss;
  meta["cloze_recall"] = recall;
  ckpt.metadata_json = meta.dump();
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(ckpt, out);
  StageResult r;
  r.outputs = {out};
  r.text = fmt::format("trained: vocab {}, final loss {:.4f}, cloze recall {:.3f} -> {}\n", ckpt.vocab.size(),
                       res.final_loss, recall, out.string());
  return r;
}

StageResult cmd_trace(const ConfigFile& cfg) {
  const auto c = with_defaults(cfg);
  const fs::path out = c.require("path.out");
  const auto ckpt = load_checkpoint(require_input(c, "path.ckpt"));
  const auto ds = load_dataset_from(c);
  const auto acfg = attribution_config_from(c);
  const double write_threshold = c.get_double("attribution.write_threshold", 0.05);
  const int write_top = get_int(c, "attribution.write_top");
  if (!(write_threshold > 0.0 && write_threshold <= 1.0) || write_top < 1) {
    throw Error(ErrorCode::InvalidArgument, "attribution.write_threshold must be in (0, 1], attribution.write_top >= 1");
  }
  const auto prompts = trace_dataset(ckpt.params, ckpt.vocab, ds, acfg, write_threshold, write_top);
  const auto meta = make_meta("attr", section_hash(c, {"attribution.", "data."}), c.get_u64("seed", 1));
  write_attr_jsonl(out, meta, prompts);
  write_text_file(sibling(out, ".csv"), attr_csv(meta, prompts));
  double mean_p = 0.0;
  for (const auto& p : prompts) mean_p += p.probability;
  if (!prompts.empty()) mean_p /= static_cast<double>(prompts.size());
  return {fmt::format("traced {} prompts ({}), mean P(answer) {:.4f} -> {}\n", prompts.size(),
                      method_name(acfg.method), mean_p, out.string()),
          {out, sibling(out, ".csv")}};
}

StageResult cmd_select(const ConfigFile& cfg) {
  const auto c = with_defaults(cfg);
  const fs::path out = c.require("path.out");
  const auto attr = read_attr_jsonl(require_input(c, "path.attr"));
  SetsFile f;
  f.selection = selection_config_from(c);
  f.method = attr.prompts.empty() ? "ig" : attr.prompts.front().method;
  for (const auto& p : attr.prompts) {
    if (p.method != f.method) throw Error(ErrorCode::InvalidArgument, "attribution file mixes methods");
  }
  f.sets = select_sets(attr.prompts, f.selection);
  f.summary = summarize_sets(f.sets);
  f.meta = make_meta("sets", section_hash(c, {"selection."}), c.get_u64("seed", 1));
  write_sets_jsonl(out, f);
  write_text_file(sibling(out, ".csv"), sets_csv(f));
  return {fmt::format("{} sets ({}): avg BN {:.2f}, inner {:.2f}, inter {:.2f}, empty {} -> {}\n", f.sets.size(),
                      f.method, f.summary.avg_neurons, f.summary.avg_inner, f.summary.inter, f.summary.empty_sets,
                      out.string()),
          {out, sibling(out, ".csv")}};
}

StageResult cmd_erase(const ConfigFile& cfg) {
  const auto c = with_defaults(cfg);
  const fs::path out = c.require("path.out");
  const auto ckpt = load_checkpoint(require_input(c, "path.ckpt"));
  const auto ds = load_dataset_from(c);
  const auto sets = load_sets(require_input(c, "path.sets"));
  const auto ecfg = erasure_config_from(c);
  const double factor = c.get_double("erasure.amplify", 0.0);
  if (factor != 0.0 && factor < 1.0) throw Error(ErrorCode::InvalidArgument, "erasure.amplify must be >= 1");
  ErasureFile f;
  f.report = run_rq2(ckpt.params, ckpt.vocab, ds, sets, ecfg, factor);
  f.meta = make_meta("erasure", section_hash(c, {"erasure.", "data."}), ecfg.seed);
  write_erasure_jsonl(out, f);
  write_text_file(sibling(out, ".csv"), erasure_csv(f));
  const auto summary_path = sibling(out, ".summary.csv");
  write_text_file(summary_path, erasure_summary_csv(f));
  StageResult r;
  r.outputs = {out, sibling(out, ".csv"), summary_path};
  if (const auto bake = c.find("path.bake"); bake && !bake->empty()) {
    std::set<NeuronId> all;
    for (const auto& s : sets) all.insert(s.neurons.begin(), s.neurons.end());
    Checkpoint baked = ckpt;
    baked.params = bake_suppression(ckpt.params, {all.begin(), all.end()});
    save_checkpoint(baked, *bake);
    r.outputs.push_back(*bake);
  }
  const auto& o = f.report.overall;
  r.text = fmt::format("{} relations ({}): avg BN {:.2f}, ratio bias {:.3f}, ratio ctrl {:.3f}, selectivity {:.3f} -> {}\n",
                       o.relations, factor > 0.0 ? fmt::format("amplify x{}", factor) : "erase", o.n_suppressed,
                       o.ratio_target, o.ratio_ctrl, o.selectivity, out.string());
  return r;
}

StageResult cmd_stats(const ConfigFile& cfg) {
  const auto c = with_defaults(cfg);
  const auto erasure = read_erasure_jsonl(require_input(c, "path.erasure"));
  std::vector<NeuronSet> sets;
  const auto sets_path = c.find("path.sets");
  const bool have_sets = sets_path && !sets_path->empty();
  if (have_sets) sets = load_sets(*sets_path);
  auto s = compute_rq2_stats(erasure.report, have_sets ? &sets : nullptr);
  s.meta = make_meta("stats", section_hash(c, {}), c.get_u64("seed", 1));
  StageResult r;
  r.text = stats_text(s);
  if (const auto out = c.find("path.out"); out && !out->empty()) {
    write_stats_json(*out, s);
    write_text_file(sibling(*out, ".txt"), r.text);
    r.outputs = {*out, sibling(*out, ".txt")};
  }
  return r;
}

StageResult cmd_eval_tasks(const ConfigFile& cfg) {
  const auto c = with_defaults(cfg);
  const fs::path out = c.require("path.out");
  const auto ckpt = load_checkpoint(require_input(c, "path.ckpt"));
  const auto tasks = load_tasks(require_input(c, "path.tasks", true));
  const auto sets = load_sets(require_input(c, "path.sets"));
  std::vector<EncoderVariant> variants;
  for (const auto& v : split_list(c.get_string("tasks.variants", ""))) {
    if (v == "raw") {
      variants.push_back(EncoderVariant::Raw);
    } else if (v == "finetuned") {
      variants.push_back(EncoderVariant::FineTuned);
    } else {
      throw Error(ErrorCode::InvalidArgument, "tasks.variants: unknown variant '" + v + "'");
    }
  }
  if (variants.empty()) throw Error(ErrorCode::InvalidArgument, "tasks.variants is empty");
  Rq3File f;
  f.records = run_eval_tasks(ckpt.params, ckpt.vocab, tasks, sets, variants, c.get_bool("tasks.per_relation", false),
                             head_hyperparams_from(c), c.get_u64("seed", 1));
  f.summary = aggregate_rq3(f.records);
  f.meta = make_meta("rq3", section_hash(c, {"tasks."}), c.get_u64("seed", 1));
  write_rq3_jsonl(out, f);
  write_text_file(sibling(out, ".csv"), rq3_csv(f));
  StageResult r;
  r.outputs = {out, sibling(out, ".csv")};
  for (const auto& v : f.summary.per_variant) {
    for (const auto& cell : v.cells) {
      r.text += fmt::format("{} {}: mean delta {:+.4f}, worst {:+.4f} over {} records\n", encoder_variant_name(v.variant),
                            cell.metric, cell.mean_absolute, cell.worst_absolute, cell.records);
    }
  }
  r.text += "-> " + out.string() + "\n";
  return r;
}

StageResult cmd_report(const ConfigFile& cfg) {
  const auto c = with_defaults(cfg);
  ReportInputs in;
  auto given = [&](const char* key) -> std::optional<std::string> {
    auto v = c.find(key);
    if (v && !v->empty()) return v;
    return std::nullopt;
  };
  if (auto p = given("path.dataset")) in.dataset = read_dataset_json(*p);
  if (auto p = given("path.rq1")) {
    for (const auto& item : split_list(*p)) in.rq1.push_back(read_sets_jsonl(item));
  }
  if (auto p = given("path.rq2")) in.rq2 = read_erasure_jsonl(*p);
  if (auto p = given("path.stats")) in.stats = read_stats_json(*p);
  if (auto p = given("path.rq3")) in.rq3 = read_rq3_jsonl(*p);
  std::optional<PaperReference> ref;
  if (auto p = given("path.paper_ref")) ref = load_paper_reference(*p);
  const auto text = render_report(in, ref);
  if (auto out = given("path.out")) {
    write_text_file(*out, text);
    return {"wrote " + *out + "\n", {fs::path(*out)}};
  }
  return {text, {}};
}

}  // namespace bt
