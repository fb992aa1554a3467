#include <gtest/gtest.h>

#include "biastracer/error.hpp"
#include "biastracer/report.hpp"
#include "support.hpp"

namespace bt {
namespace {

bool has(const std::string& text, const std::string& needle) { return text.find(needle) != std::string::npos; }

SetsFile sets_file(const std::string& method) {
  SetsFile f;
  f.meta = make_meta("sets", "00000000deadbeef", 1);
  f.method = method;
  f.sets = {{"r1", "BR01", {{0, 1}, {1, 2}}, {{{0, 1}, {1, 2}}, {{0, 1}, {1, 2}}}, 0.3, 0, 2.0},
            {"r2", "BR02", {{0, 1}}, {{{0, 1}}, {{0, 1}}}, 0.3, 0, 1.0}};
  f.summary = summarize_sets(f.sets);
  return f;
}

ReportInputs rq1_only() {
  ReportInputs in;
  in.rq1 = {sets_file("ig"), sets_file("baseline")};
  return in;
}

PaperReference reference() { return load_paper_reference(std::string(BT_DATA_DIR) + "/paper_reference.json"); }

TEST(Report, OnlyPresentSectionsAreRendered) {
  const auto text = render_report(rq1_only(), std::nullopt);
  EXPECT_TRUE(has(text, "## RQ1"));
  EXPECT_FALSE(has(text, "## RQ2"));
  EXPECT_FALSE(has(text, "## RQ3"));
  EXPECT_FALSE(has(text, "## Dataset"));
  EXPECT_FALSE(has(text, "Reference values"));
  EXPECT_TRUE(has(text, "| toy encoder | 1.50 | 1.50 |")) << text;
}

TEST(Report, RenderingIsByteIdentical) {
  const auto ref = reference();
  EXPECT_EQ(render_report(rq1_only(), ref), render_report(rq1_only(), ref));
}

TEST(Report, ReferenceValuesAreLabelled) {
  ReportInputs in = rq1_only();
  in.stats = Rq2Stats{make_meta("stats", "00000000deadbeef", 1)};
  in.stats->relations = 2;
  in.rq3 = Rq3File{make_meta("rq3", "00000000deadbeef", 1), {}, {}};
  ErasureFile e{make_meta("erasure", "00000000deadbeef", 1), {}};
  e.report.overall.label = "all";
  in.rq2 = e;
  const auto text = render_report(in, reference());
  EXPECT_TRUE(has(text, "bert-base-cased: Avg IG BN 2.49"));
  EXPECT_TRUE(has(text, "bert-base-uncased: PPL bias 2.34, ctrl 2.03"));
  EXPECT_TRUE(has(text, "Sentiment: Accuracy Δ −0.23, Macro-F1 Δ −0.28"));
  EXPECT_TRUE(has(text, "Requirement type: Accuracy Δ +0.04, Macro-F1 Δ −0.002"));
  EXPECT_TRUE(has(text, "W = 3321.0"));
  EXPECT_TRUE(has(text, "not reproducible at desk scale"));
}

TEST(Report, EmptyInputsAreRejected) {
  EXPECT_TRUE(support::throws_code([] { render_report(ReportInputs{}, std::nullopt); }, ErrorCode::InvalidArgument));
}

TEST(Report, MissingReferenceEntryNamesIt) {
  support::TempDir dir("ref");
  write_text_file(dir / "ref.json", R"({"description":"x"})");
  try {
    load_paper_reference(dir / "ref.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedRecord);
    EXPECT_TRUE(has(e.what(), "table1")) << e.what();
  }
}

TEST(Report, NumberFormatting) {
  EXPECT_EQ(format_number(-0.5, 2), "−0.50");
  EXPECT_EQ(format_number(0.04, 2, true), "+0.04");
  EXPECT_EQ(format_number(1.0, 3), "1.000");
  EXPECT_EQ(format_reference(-0.002, true), "−0.002");
  EXPECT_EQ(format_reference(2.5), "2.50");
}

}  // namespace
}  // namespace bt
