#include "biastracer/biastracer.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "biastracer/checkpoint.hpp"
#include "biastracer/config_file.hpp"
#include "biastracer/error.hpp"
#include "biastracer/intervention.hpp"
#include "biastracer/pipeline.hpp"
#include "biastracer/relation_store.hpp"
#include "biastracer/stages.hpp"
#include "biastracer/stats.hpp"

struct bt_options {
  bt::ConfigFile cfg;
};

struct bt_dataset {
  bt::RelationDataset ds;
};

struct bt_model {
  bt::Checkpoint ckpt;
};

namespace {

thread_local std::string g_last_error;

bt_status fail(bt_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <class F>
bt_status guarded(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return BT_OK;
  } catch (const bt::Error& e) {
    return fail(static_cast<bt_status>(e.code()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(BT_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(BT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(BT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(BT_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void need(const void* p, const char* what) {
  if (!p) throw bt::Error(bt::ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

bt::StageResult dispatch(const std::string& command, const bt::ConfigFile& cfg) {
  using namespace bt;
  if (command == "dataset-validate") return cmd_dataset_validate(cfg);
  if (command == "dataset-summary") return cmd_dataset_summary(cfg);
  if (command == "corpus-synth") return cmd_corpus_synth(cfg);
  if (command == "train-toy") return cmd_train_toy(cfg);
  if (command == "trace") return cmd_trace(cfg);
  if (command == "select") return cmd_select(cfg);
  if (command == "erase") return cmd_erase(cfg);  // amplifies when erasure.amplify > 0
  if (command == "amplify") {
    if (cfg.get_double("erasure.amplify", 0.0) < 1.0) {
      throw Error(ErrorCode::InvalidArgument, "amplify needs erasure.amplify >= 1");
    }
    return cmd_erase(cfg);
  }
  if (command == "stats") return cmd_stats(cfg);
  if (command == "eval-tasks") return cmd_eval_tasks(cfg);
  if (command == "report") return cmd_report(cfg);
  if (command == "pipeline") {
    const auto r = run_pipeline(cfg, cfg.get_bool("pipeline.force", false));
    return {r.text, {r.manifest}};
  }
  throw Error(ErrorCode::InvalidArgument, "unknown command '" + command + "'");
}

}  // namespace

extern "C" {

const char* bt_version(void) { return BT_VERSION_STRING; }

const char* bt_status_name(bt_status status) {
  if (status == BT_OK) return "Ok";
  return bt::error_code_name(static_cast<bt::ErrorCode>(status));
}

const char* bt_last_error(void) { return g_last_error.c_str(); }

void bt_string_free(char* s) { std::free(s); }

bt_status bt_options_new(bt_options** out) {
  return guarded([&] {
    need(out, "out");
    *out = new bt_options();
  });
}

bt_status bt_options_load(bt_options* opts, const char* path) {
  return guarded([&] {
    need(opts, "opts");
    need(path, "path");
    opts->cfg.merge(bt::load_run_config(path));
  });
}

bt_status bt_options_set(bt_options* opts, const char* key, const char* value) {
  return guarded([&] {
    need(opts, "opts");
    need(key, "key");
    need(value, "value");
    opts->cfg.set(key, value);
  });
}

bt_status bt_options_get(const bt_options* opts, const char* key, char** out_value) {
  return guarded([&] {
    need(opts, "opts");
    need(key, "key");
    need(out_value, "out_value");
    const auto v = opts->cfg.find(key);
    if (!v) throw bt::Error(bt::ErrorCode::InvalidArgument, std::string("no option '") + key + "'");
    *out_value = dup_string(*v);
  });
}

void bt_options_free(bt_options* opts) { delete opts; }

bt_status bt_run_command(const char* command, const bt_options* opts, char** out_text) {
  return guarded([&] {
    need(command, "command");
    need(opts, "opts");
    const auto r = dispatch(command, opts->cfg);
    if (out_text) *out_text = dup_string(r.text);
  });
}

bt_status bt_dataset_load(const char* relations_path, const char* prompts_path, int strict, bt_dataset** out) {
  return guarded([&] {
    need(relations_path, "relations_path");
    need(prompts_path, "prompts_path");
    need(out, "out");
    auto* d = new bt_dataset{bt::load_dataset(relations_path, prompts_path, strict != 0)};
    *out = d;
  });
}

size_t bt_dataset_relation_count(const bt_dataset* ds) { return ds ? ds->ds.relations().size() : 0; }

size_t bt_dataset_prompt_count(const bt_dataset* ds) { return ds ? ds->ds.prompts().size() : 0; }

bt_status bt_dataset_summary_csv(const bt_dataset* ds, char** out_csv) {
  return guarded([&] {
    need(ds, "ds");
    need(out_csv, "out_csv");
    *out_csv = dup_string(bt::summary_csv(bt::summarize(ds->ds)));
  });
}

void bt_dataset_free(bt_dataset* ds) { delete ds; }

bt_status bt_model_load(const char* checkpoint_path, bt_model** out) {
  return guarded([&] {
    need(checkpoint_path, "checkpoint_path");
    need(out, "out");
    *out = new bt_model{bt::load_checkpoint(checkpoint_path)};
  });
}

bt_status bt_model_get_info(const bt_model* model, bt_model_info* out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    const auto& c = model->ckpt.params.config;
    *out = {c.n_layers, c.d_model, c.n_heads, c.d_ff, c.vocab_size, c.max_len, c.seed};
  });
}

bt_status bt_model_mask_prob(const bt_model* model, const char* text, const char* answer, double* out_prob) {
  return guarded([&] {
    need(model, "model");
    need(text, "text");
    need(answer, "answer");
    need(out_prob, "out_prob");
    const auto enc = bt::encode_prompt(model->ckpt.vocab, text, answer);
    *out_prob = bt::mask_token_prob(model->ckpt.params, enc.seq, enc.answer);
  });
}

void bt_model_free(bt_model* model) { delete model; }

bt_status bt_wilcoxon_signed_rank(const double* before, const double* after, size_t n, bt_wilcoxon* out) {
  return guarded([&] {
    need(out, "out");
    if (n > 0) {
      need(before, "before");
      need(after, "after");
    }
    const auto r = bt::wilcoxon_signed_rank({before, n}, {after, n});
    *out = {r.w_plus, r.w_minus, r.w_min, r.p_value, r.n, r.exact ? 1 : 0};
  });
}

bt_status bt_cliffs_delta(const double* x, size_t nx, const double* y, size_t ny, double* out) {
  return guarded([&] {
    need(out, "out");
    if (nx > 0) need(x, "x");
    if (ny > 0) need(y, "y");
    *out = bt::cliffs_delta({x, nx}, {y, ny});
  });
}

bt_status bt_spearman(const double* x, const double* y, size_t n, double* out_rho, double* out_p) {
  return guarded([&] {
    need(out_rho, "out_rho");
    need(out_p, "out_p");
    if (n > 0) {
      need(x, "x");
      need(y, "y");
    }
    const auto r = bt::spearman({x, n}, {y, n});
    *out_rho = r.statistic;
    *out_p = r.p_value;
  });
}

}  // extern "C"
