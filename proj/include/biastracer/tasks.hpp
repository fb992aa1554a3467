#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace bt {

enum class TaskKind { Binary, Multiclass, MaskedLM };

std::string task_kind_name(TaskKind kind);
TaskKind parse_task_kind(const std::string& name);

struct TaskSpec {
  std::string id;
  TaskKind kind = TaskKind::Binary;
  int n_classes = 2;  // 2 for Binary, >= 3 for Multiclass, unused for MaskedLM
  std::string train_file;
  std::string test_file;

  bool is_classification() const { return kind != TaskKind::MaskedLM; }
};

struct TaskExample {
  std::string text;    // for MaskedLM contains [MASK] exactly once
  int label = 0;       // classification
  std::string answer;  // MaskedLM
};

struct TaskData {
  TaskSpec spec;
  std::vector<TaskExample> train;
  std::vector<TaskExample> test;
};

// tasks.json lists every task; each task has <id>.train.jsonl and <id>.test.jsonl
// next to it with one {"text","label"} or {"text","answer"} object per line.
std::vector<TaskData> load_tasks(const std::filesystem::path& dir);
void save_tasks(const std::vector<TaskData>& tasks, const std::filesystem::path& dir);

}  // namespace bt
