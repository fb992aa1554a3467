#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "biastracer/artifacts.hpp"

namespace bt {

// Published BERT-scale values shown beside the toy measurements.
struct ReferenceRow {
  std::string label;
  std::string task;  // Table 4 task code, empty elsewhere
  std::vector<std::optional<double>> values;
};

struct ReferenceTable {
  std::string source;
  std::vector<std::string> columns;
  std::vector<ReferenceRow> rows;
};

struct ReferenceStats {
  double wilcoxon_w = 0.0;
  std::string wilcoxon_p;  // numbers and "< 0.0001" alike are kept as text
  double cliffs_delta = 0.0;
  double size_rho = 0.0;
  std::string size_p;
  double inner_rho = 0.0;
  std::string inner_p;
};

struct PaperReference {
  std::string description;
  ReferenceTable table1, table2, table3, table4;
  ReferenceStats rq2;
};

// Throws MalformedRecord naming the missing entry.
PaperReference load_paper_reference(const std::filesystem::path& path);

struct ReportInputs {
  std::optional<DatasetFile> dataset;
  std::vector<SetsFile> rq1;  // one per attribution method
  std::optional<ErasureFile> rq2;
  std::optional<Rq2Stats> stats;
  std::optional<Rq3File> rq3;

  bool empty() const { return !dataset && rq1.empty() && !rq2 && !stats && !rq3; }
};

// Markdown. Only sections whose artifacts are present are rendered; the
// output depends on nothing but the inputs, so re-rendering is byte-identical.
// Throws InvalidArgument when inputs is empty.
std::string render_report(const ReportInputs& inputs, const std::optional<PaperReference>& reference);

// Number formatting used in the report: U+2212 for negatives, a leading '+'
// for positive deltas when signed is set.
std::string format_number(double v, int decimals, bool signed_delta = false);
// At least two decimals, more when the value needs them (-0.002).
std::string format_reference(double v, bool signed_delta = false);

}  // namespace bt
