// Uses nothing but the public C header and the shared library.
#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "biastracer/biastracer.h"

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  bt_string_free(s);
  return out;
}

TEST(CApi, StatusNamesAndVersion) {
  EXPECT_STREQ(bt_status_name(BT_OK), "Ok");
  EXPECT_STREQ(bt_status_name(BT_ERR_TOO_FEW_SETS), "TooFewSets");
  EXPECT_STRNE(bt_version(), "");
}

TEST(CApi, OptionsSetGetAndMissingKey) {
  bt_options* opts = nullptr;
  ASSERT_EQ(bt_options_new(&opts), BT_OK);
  EXPECT_EQ(bt_options_set(opts, "selection.t", "0.2"), BT_OK);
  char* value = nullptr;
  ASSERT_EQ(bt_options_get(opts, "selection.t", &value), BT_OK);
  EXPECT_EQ(take(value), "0.2");
  EXPECT_STREQ(bt_last_error(), "");
  EXPECT_EQ(bt_options_get(opts, "selection.k", &value), BT_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(bt_last_error()).find("selection.k"), std::string::npos) << bt_last_error();
  EXPECT_EQ(bt_options_set(nullptr, "a", "b"), BT_ERR_INVALID_ARGUMENT);
  bt_options_free(opts);
  bt_options_free(nullptr);
}

TEST(CApi, OptionsLoadResolvesRelativePaths) {
  const auto dir = std::filesystem::temp_directory_path() / "bt-capi-load";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "x.cfg") << "path.ckpt = toy.ckpt\nseed = 4\n";
  bt_options* opts = nullptr;
  ASSERT_EQ(bt_options_new(&opts), BT_OK);
  ASSERT_EQ(bt_options_load(opts, (dir / "x.cfg").c_str()), BT_OK);
  char* value = nullptr;
  ASSERT_EQ(bt_options_get(opts, "path.ckpt", &value), BT_OK);
  EXPECT_EQ(take(value), (dir / "toy.ckpt").string());
  EXPECT_EQ(bt_options_load(opts, (dir / "absent.cfg").c_str()), BT_ERR_IO);
  bt_options_free(opts);
  std::filesystem::remove_all(dir);
}

TEST(CApi, StatisticsWorkedExamples) {
  const double before[] = {1, 1, 1, 1, 1};
  const double after[] = {2, 3, 4, 5, 6};
  bt_wilcoxon w{};
  ASSERT_EQ(bt_wilcoxon_signed_rank(before, after, 5, &w), BT_OK);
  EXPECT_EQ(w.w_plus, 15.0);
  EXPECT_EQ(w.p_value, 0.0625);
  EXPECT_EQ(w.n, 5u);
  EXPECT_EQ(w.exact, 1);

  const double x[] = {1, 2}, y[] = {1.5, 3};
  double delta = 0;
  ASSERT_EQ(bt_cliffs_delta(x, 2, y, 2, &delta), BT_OK);
  EXPECT_EQ(delta, -0.5);

  const double a[] = {1, 2, 3, 4, 5}, b[] = {2, 1, 4, 3, 5};
  double rho = 0, p = 0;
  ASSERT_EQ(bt_spearman(a, b, 5, &rho, &p), BT_OK);
  EXPECT_DOUBLE_EQ(rho, 0.8);

  EXPECT_EQ(bt_wilcoxon_signed_rank(before, before, 5, &w), BT_ERR_ALL_ZERO_DIFFERENCES);
  EXPECT_EQ(bt_spearman(a, before, 5, &rho, &p), BT_ERR_CONSTANT_INPUT);
  EXPECT_EQ(bt_cliffs_delta(x, 0, y, 2, &delta), BT_ERR_EMPTY_INPUT);
  EXPECT_STRNE(bt_last_error(), "");
}

TEST(CApi, UnknownCommandAndMissingField) {
  bt_options* opts = nullptr;
  ASSERT_EQ(bt_options_new(&opts), BT_OK);
  EXPECT_EQ(bt_run_command("frobnicate", opts, nullptr), BT_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(bt_run_command("trace", opts, nullptr), BT_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::string(bt_last_error()).find("path."), std::string::npos) << bt_last_error();
  bt_options_free(opts);
}

TEST(CApi, DatasetRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "bt-capi-ds";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "r.jsonl") << R"({"id":"r1","category":"BR07","group":"monks","association":"are","stereotype":"quiet"})"
                                 << "\n";
  {
    std::ofstream p(dir / "p.jsonl");
    for (int k = 0; k < 10; ++k) {
      p << R"({"relation_id":"r1","text":"form)" << k << R"( [MASK] are quiet","answer":"monks"})" << "\n";
    }
  }
  bt_dataset* ds = nullptr;
  ASSERT_EQ(bt_dataset_load((dir / "r.jsonl").c_str(), (dir / "p.jsonl").c_str(), 1, &ds), BT_OK);
  EXPECT_EQ(bt_dataset_relation_count(ds), 1u);
  EXPECT_EQ(bt_dataset_prompt_count(ds), 10u);
  char* csv = nullptr;
  ASSERT_EQ(bt_dataset_summary_csv(ds, &csv), BT_OK);
  EXPECT_NE(take(csv).find("BR07(Religion),1,10,1,1"), std::string::npos);
  bt_dataset_free(ds);
  EXPECT_EQ(bt_dataset_load((dir / "nope.jsonl").c_str(), (dir / "p.jsonl").c_str(), 1, &ds), BT_ERR_IO);
  std::filesystem::remove_all(dir);
}

}  // namespace
