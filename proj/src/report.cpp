#include "biastracer/report.hpp"

#include <cmath>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

#include "biastracer/error.hpp"

namespace bt {

using json = nlohmann::json;

namespace {

constexpr const char* kMinus = "−";
constexpr const char* kNotReproducible = "not reproducible at desk scale";

ReferenceTable parse_table(const json& doc, const char* key) {
  if (!doc.contains(key)) throw Error(ErrorCode::MalformedRecord, std::string("reference table '") + key + "' missing");
  const auto& t = doc.at(key);
  ReferenceTable out;
  out.source = t.at("source").get<std::string>();
  out.columns = t.at("columns").get<std::vector<std::string>>();
  for (const auto& r : t.at("rows")) {
    ReferenceRow row;
    row.label = r.at("row").get<std::string>();
    if (r.contains("task")) row.task = r.at("task").get<std::string>();
    for (const auto& v : r.at("values")) {
      row.values.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
    }
    if (row.values.size() != out.columns.size()) {
      throw Error(ErrorCode::MalformedRecord,
                  std::string("reference table '") + key + "' row '" + row.label + "' has the wrong width");
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::string p_text(const json& v) {
  return v.is_string() ? v.get<std::string>() : format_reference(v.get<double>());
}

std::string na() { return "n/a"; }

std::string opt_num(std::optional<double> v, int decimals, bool signed_delta = false) {
  return v && std::isfinite(*v) ? format_number(*v, decimals, signed_delta) : na();
}

std::string p_value(double p) {
  if (!std::isfinite(p)) return na();
  if (p != 0.0 && p < 1e-4) return fmt::format("{:.3e}", p);
  return fmt::format("{:.4f}", p);
}

std::string row(const std::vector<std::string>& cells) {
  std::string out = "|";
  for (const auto& c : cells) out += " " + c + " |";
  return out + "\n";
}

std::string header(const std::vector<std::string>& cells) {
  std::string out = row(cells) + "|";
  for (std::size_t i = 0; i < cells.size(); ++i) out += i == 0 ? "---|" : "---:|";
  return out + "\n";
}

std::string meta_line(const ArtifactMeta& m) {
  return fmt::format("`{}`: tool {}, config {}, seed {}", m.artifact, m.tool_version, m.config_hash, m.seed);
}

std::string reference_heading(const ReferenceTable& t) {
  return fmt::format("Reference values ({}, BERT scale; {}):\n\n", t.source, kNotReproducible);
}

const Rq3Cell* find_cell(const std::vector<Rq3Cell>& cells, const std::string& metric) {
  for (const auto& c : cells) {
    if (c.metric == metric) return &c;
  }
  return nullptr;
}

std::string cell_mean(const std::vector<Rq3Cell>& cells, const std::string& metric, int decimals) {
  const auto* c = find_cell(cells, metric);
  return c ? format_number(c->mean_absolute, decimals, true) : "—";
}

std::string cell_worst(const std::vector<Rq3Cell>& cells, const std::string& metric, int decimals) {
  const auto* c = find_cell(cells, metric);
  return c ? format_number(c->worst_absolute, decimals, true) : "—";
}

void render_dataset(std::string& out, const DatasetFile& d, const std::optional<PaperReference>& ref) {
  out += "## Dataset (Table 1 layout)\n\n";
  out += meta_line(d.meta) + "\n\n";
  out += header({"Category", "Relations", "Prompts", "Groups", "Stereotypes"});
  for (const auto& r : d.rows) {
    out += row({r.label, std::to_string(r.relations), std::to_string(r.prompts), std::to_string(r.groups),
                std::to_string(r.stereotypes)});
  }
  out += "\n";
  if (ref) {
    out += reference_heading(ref->table1);
    out += header({"Category", "Relations", "Prompts", "Groups", "Stereotypes"});
    for (const auto& r : ref->table1.rows) {
      std::vector<std::string> cells{r.label};
      for (const auto& v : r.values) cells.push_back(v ? fmt::format("{}", static_cast<long>(*v)) : na());
      out += row(cells);
    }
    out += "\n";
  }
}

void render_rq1(std::string& out, const std::vector<SetsFile>& files, const std::optional<PaperReference>& ref) {
  const SetsFile* ig = nullptr;
  const SetsFile* base = nullptr;
  for (const auto& f : files) {
    if (f.method == "ig" && !ig) ig = &f;
    if (f.method == "baseline" && !base) base = &f;
  }
  out += "## RQ1: biased neuron tracing (Table 2 layout)\n\n";
  for (const auto& f : files) out += "- " + meta_line(f.meta) + " (" + f.method + ")\n";
  out += "\n";
  auto v = [](const SetsFile* f, double SelectionSummary::*field) {
    return f ? format_number(f->summary.*field, 2) : na();
  };
  out += header({"Model", "Avg IG BN", "Avg Base BN", "IG inner", "IG inter", "Base inner", "Base inter"});
  out += row({"toy encoder", v(ig, &SelectionSummary::avg_neurons), v(base, &SelectionSummary::avg_neurons),
              v(ig, &SelectionSummary::avg_inner), v(ig, &SelectionSummary::inter),
              v(base, &SelectionSummary::avg_inner), v(base, &SelectionSummary::inter)});
  out += "\n";
  const std::size_t relations = ig ? ig->sets.size() : base ? base->sets.size() : 0;
  const std::size_t empty = ig ? ig->summary.empty_sets : base ? base->summary.empty_sets : 0;
  out += fmt::format("Relations: {}; empty sets: {}.\n\n", relations, empty);
  if (ref) {
    static const char* names[] = {"Avg IG BN", "Avg Base BN", "IG inner", "IG inter", "Base inner", "Base inter"};
    out += reference_heading(ref->table2);
    for (const auto& r : ref->table2.rows) {
      std::string line = "- " + r.label + ":";
      for (std::size_t i = 0; i < r.values.size() && i < 6; ++i) {
        line += fmt::format("{} {} {}", i == 0 ? "" : ",", names[i], r.values[i] ? format_reference(*r.values[i]) : na());
      }
      out += line + "\n";
    }
    out += "\n";
  }
}

void render_rq2(std::string& out, const ErasureFile& e, const std::optional<PaperReference>& ref) {
  const auto& rep = e.report;
  const std::string mode = rep.results.empty() ? "erase" : rep.results.front().mode;
  out += "## RQ2: suppression (Table 3 layout)\n\n";
  out += meta_line(e.meta) + "; mode " + mode + "\n\n";
  out += header({"Category", "Relations", "Avg #BN", "PPL ratio (bias)", "PPL ratio (ctrl)", "Selectivity"});
  auto agg_row = [&](const Rq2Aggregate& a) {
    out += row({a.label, std::to_string(a.relations), format_number(a.n_suppressed, 2),
                format_number(a.ratio_target, 3), format_number(a.ratio_ctrl, 3), format_number(a.selectivity, 3)});
  };
  for (const auto& a : rep.per_category) agg_row(a);
  agg_row(rep.overall);
  out += "\n";
  std::size_t tested = 0, selective = 0, skipped = 0, shortfall = 0;
  for (const auto& r : rep.results) {
    if (r.skipped) {
      ++skipped;
      continue;
    }
    ++tested;
    if (r.ratio_target >= 1.5 && r.ratio_ctrl <= 1.2) ++selective;
    if (r.ctrl_shortfall) ++shortfall;
  }
  out += fmt::format(
      "Relations with PPL ratio (bias) >= 1.5 and PPL ratio (ctrl) <= 1.2: {}/{}; skipped (empty set): {}; "
      "control shortfall: {}.\n\n",
      selective, tested, skipped, shortfall);
  if (ref) {
    out += reference_heading(ref->table3);
    for (const auto& r : ref->table3.rows) {
      auto at = [&](std::size_t i) { return i < r.values.size() && r.values[i] ? format_reference(*r.values[i]) : na(); };
      out += fmt::format("- {}: PPL bias {}, ctrl {}, Avg #BN {}\n", r.label, at(1), at(2), at(0));
    }
    out += "\n";
  }
}

void render_stats(std::string& out, const Rq2Stats& s, const std::optional<PaperReference>& ref) {
  out += "### RQ2 statistics\n\n";
  out += meta_line(s.meta) + "; relations tested: " + std::to_string(s.relations) + "\n\n";
  if (s.wilcoxon) {
    const auto& w = *s.wilcoxon;
    out += fmt::format("- Wilcoxon signed-rank (target perplexity after vs before): W+ = {}, W- = {}, "
                       "min(W+, W-) = {}, n = {}, p = {} ({})\n",
                       format_number(w.w_plus, 1), format_number(w.w_minus, 1), format_number(w.w_min, 1), w.n,
                       p_value(w.p_value), w.method_note);
  } else {
    out += "- Wilcoxon signed-rank: n/a\n";
  }
  out += "- Cliff's Δ (after vs before): " + opt_num(s.cliffs_delta, 3) + "\n";
  out += "- Cliff's Δ (paired differences): " + opt_num(s.cliffs_delta_paired, 3) + "\n";
  auto sp = [&](const char* what, const std::optional<TestResult>& t) {
    if (!t) {
      out += fmt::format("- Spearman {}: n/a\n", what);
      return;
    }
    out += fmt::format("- Spearman {}: ρ = {}, p = {}\n", what, format_number(t->statistic, 3), p_value(t->p_value));
  };
  sp("(a) suppressed neurons vs PPL ratio (bias)", s.size_vs_ratio_target);
  sp("(b) inner intersection vs PPL ratio (ctrl)", s.inner_vs_ratio_ctrl);
  for (const auto& n : s.notes) out += "- note: " + n + "\n";
  out += "\n";
  if (ref) {
    const auto& r = ref->rq2;
    out += fmt::format("Reference values (RQ2 statistics, BERT scale; {}):\n\n", kNotReproducible);
    out += fmt::format("- Wilcoxon W = {}, p {}\n", format_number(r.wilcoxon_w, 1), r.wilcoxon_p);
    out += fmt::format("- Cliff's Δ = {}\n", format_number(r.cliffs_delta, 3));
    out += fmt::format("- Spearman (a) ρ = {}, p {}\n", format_number(r.size_rho, 3), r.size_p);
    out += fmt::format("- Spearman (b) ρ = {}, p {}\n", format_number(r.inner_rho, 3), r.inner_p);
    out += "\n";
  }
}

void render_rq3(std::string& out, const Rq3File& f, const std::optional<PaperReference>& ref) {
  const auto& s = f.summary;
  out += "## RQ3: downstream tasks (Table 4 layout)\n\n";
  out += meta_line(f.meta) + "\n\n";
  std::map<std::string, std::string> baselines;  // (task, variant) -> "acc ..."
  for (const auto& r : f.records) {
    if (r.condition != "baseline") continue;
    std::string text;
    for (const auto& [k, v] : r.metrics.entries()) {
      text += (text.empty() ? "" : ", ") + k + " " + format_number(v, 3);
    }
    baselines[r.task_id + "/" + encoder_variant_name(r.variant)] = text;
  }
  out += "Mean absolute delta over suppression conditions, per task and encoder variant:\n\n";
  out += header({"Task", "Variant", "Baseline", "Accuracy Δ", "Macro-F1 Δ", "PPL Δ", "Worst accuracy Δ"});
  for (const auto& t : s.per_task) {
    const auto variant = encoder_variant_name(t.variant);
    const auto it = baselines.find(t.task_id + "/" + variant);
    out += row({t.task_id, variant, it == baselines.end() ? na() : it->second, cell_mean(t.cells, "accuracy", 3),
                cell_mean(t.cells, "macro_f1", 3), cell_mean(t.cells, "perplexity", 3),
                cell_worst(t.cells, "accuracy", 3)});
  }
  out += "\n";
  out += "Mean absolute delta across tasks, per suppression condition:\n\n";
  out += header({"Condition", "Variant", "Accuracy Δ", "Macro-F1 Δ", "PPL Δ"});
  for (const auto& c : s.per_condition) {
    out += row({c.condition, encoder_variant_name(c.variant), cell_mean(c.cells, "accuracy", 3),
                cell_mean(c.cells, "macro_f1", 3), cell_mean(c.cells, "perplexity", 3)});
  }
  out += "\n";
  out += "Raw vs fine-tuned:\n\n";
  out += header({"Variant", "Accuracy Δ (mean)", "Accuracy Δ (worst)", "Accuracy Δ % (mean)", "Records"});
  for (const auto& v : s.per_variant) {
    const auto* acc = find_cell(v.cells, "accuracy");
    out += row({encoder_variant_name(v.variant), cell_mean(v.cells, "accuracy", 4), cell_worst(v.cells, "accuracy", 4),
                acc && acc->mean_relative_pct ? format_number(*acc->mean_relative_pct, 2, true) : na(),
                acc ? std::to_string(acc->records) : "0"});
  }
  out += "\n";
  if (ref) {
    out += reference_heading(ref->table4);
    static const char* names[] = {"Accuracy Δ", "Macro-F1 Δ", "PPL Δ"};
    for (const auto& r : ref->table4.rows) {
      std::string line = "- " + r.label + ":";
      bool first = true;
      for (std::size_t i = 0; i < r.values.size() && i < 3; ++i) {
        if (!r.values[i]) continue;
        line += fmt::format("{} {} {}", first ? "" : ",", names[i], format_reference(*r.values[i], true));
        first = false;
      }
      out += line + "\n";
    }
    out += "\n";
  }
}

}  // namespace

std::string format_number(double v, int decimals, bool signed_delta) {
  if (!std::isfinite(v)) return na();
  std::string s = fmt::format("{:.{}f}", std::fabs(v), decimals);
  const bool zero = s.find_first_not_of("0.") == std::string::npos;
  if (zero) return s;
  if (v < 0) return kMinus + s;
  return signed_delta ? "+" + s : s;
}

std::string format_reference(double v, bool signed_delta) {
  int decimals = 2;
  while (decimals < 6) {
    const double scale = std::pow(10.0, decimals);
    if (std::fabs(std::round(v * scale) / scale - v) < 1e-12) break;
    ++decimals;
  }
  return format_number(v, decimals, signed_delta);
}

PaperReference load_paper_reference(const std::filesystem::path& path) {
  PaperReference ref;
  try {
    const auto doc = json::parse(read_text_file(path));
    ref.description = doc.value("description", "");
    ref.table1 = parse_table(doc, "table1");
    ref.table2 = parse_table(doc, "table2");
    ref.table3 = parse_table(doc, "table3");
    ref.table4 = parse_table(doc, "table4");
    const auto& s = doc.at("rq2_statistics");
    ref.rq2.wilcoxon_w = s.at("wilcoxon_w").get<double>();
    ref.rq2.wilcoxon_p = p_text(s.at("wilcoxon_p"));
    ref.rq2.cliffs_delta = s.at("cliffs_delta").get<double>();
    ref.rq2.size_rho = s.at("spearman_size_vs_ratio_target").at("rho").get<double>();
    ref.rq2.size_p = p_text(s.at("spearman_size_vs_ratio_target").at("p"));
    ref.rq2.inner_rho = s.at("spearman_inner_vs_ratio_ctrl").at("rho").get<double>();
    ref.rq2.inner_p = p_text(s.at("spearman_inner_vs_ratio_ctrl").at("p"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, path.string() + ": " + e.what());
  }
  // Numeric p-values read "p = 0.818"; textual ones already carry their relation.
  for (auto* p : {&ref.rq2.wilcoxon_p, &ref.rq2.size_p, &ref.rq2.inner_p}) {
    if (!p->empty() && (p->front() != '<' && p->front() != '>' && p->front() != '=')) *p = "= " + *p;
  }
  return ref;
}

std::string render_report(const ReportInputs& in, const std::optional<PaperReference>& ref) {
  if (in.empty()) throw Error(ErrorCode::InvalidArgument, "report needs at least one artifact");
  std::string out = "# Biased neuron tracing report\n\n";
  out += "Measured values come from the toy encoder artifacts listed in each section.";
  if (ref) out += " Reference values are the published BERT-scale results and are " + std::string(kNotReproducible) + ".";
  out += "\n\n";
  if (in.dataset) render_dataset(out, *in.dataset, ref);
  if (!in.rq1.empty()) render_rq1(out, in.rq1, ref);
  if (in.rq2) render_rq2(out, *in.rq2, ref);
  if (in.stats) render_stats(out, *in.stats, ref);
  if (in.rq3) render_rq3(out, *in.rq3, ref);
  return out;
}

}  // namespace bt
