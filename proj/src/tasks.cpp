#include "biastracer/tasks.hpp"

#include <fstream>

#include <json.hpp>

#include "biastracer/error.hpp"
#include "biastracer/relation_store.hpp"

namespace bt {

std::string task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::Binary: return "binary";
    case TaskKind::Multiclass: return "multiclass";
    case TaskKind::MaskedLM: return "mlm";
  }
  return "binary";
}

TaskKind parse_task_kind(const std::string& name) {
  if (name == "binary") return TaskKind::Binary;
  if (name == "multiclass") return TaskKind::Multiclass;
  if (name == "mlm") return TaskKind::MaskedLM;
  throw Error(ErrorCode::MalformedRecord, "unknown task kind '" + name + "'");
}

namespace {

std::vector<TaskExample> read_examples(const std::filesystem::path& path, const TaskSpec& spec) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<TaskExample> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(n);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, where + ": " + e.what());
    }
    TaskExample ex;
    if (!obj.contains("text") || !obj["text"].is_string()) {
      throw Error(ErrorCode::MalformedRecord, where + ": field 'text' missing");
    }
    ex.text = obj["text"].get<std::string>();
    if (spec.is_classification()) {
      if (!obj.contains("label") || !obj["label"].is_number_integer()) {
        throw Error(ErrorCode::MalformedRecord, where + ": field 'label' missing");
      }
      ex.label = obj["label"].get<int>();
      if (ex.label < 0 || ex.label >= spec.n_classes) {
        throw Error(ErrorCode::MalformedRecord, where + ": label out of range");
      }
    } else {
      if (!obj.contains("answer") || !obj["answer"].is_string()) {
        throw Error(ErrorCode::MalformedRecord, where + ": field 'answer' missing");
      }
      ex.answer = obj["answer"].get<std::string>();
      if (count_mask_tokens(ex.text) != 1) {
        throw Error(ErrorCode::MalformedRecord, where + ": text must contain [MASK] exactly once");
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void write_examples(const std::filesystem::path& path, const TaskSpec& spec,
                    const std::vector<TaskExample>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& ex : examples) {
    nlohmann::ordered_json obj;
    obj["text"] = ex.text;
    if (spec.is_classification()) {
      obj["label"] = ex.label;
    } else {
      obj["answer"] = ex.answer;
    }
    out << obj.dump() << '\n';
  }
}

}  // namespace

std::vector<TaskData> load_tasks(const std::filesystem::path& dir) {
  const auto index = dir / "tasks.json";
  std::ifstream in(index);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + index.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, index.string() + ": " + e.what());
  }
  std::vector<TaskData> tasks;
  for (const auto& entry : doc.at("tasks")) {
    TaskData t;
    t.spec.id = entry.at("id").get<std::string>();
    t.spec.kind = parse_task_kind(entry.at("kind").get<std::string>());
    t.spec.n_classes = entry.value("n_classes", t.spec.kind == TaskKind::Binary ? 2 : 0);
    if (t.spec.kind == TaskKind::Binary && t.spec.n_classes != 2) {
      throw Error(ErrorCode::MalformedRecord, "binary task '" + t.spec.id + "' must have 2 classes");
    }
    if (t.spec.kind == TaskKind::Multiclass && t.spec.n_classes < 3) {
      throw Error(ErrorCode::MalformedRecord, "multiclass task '" + t.spec.id + "' needs >= 3 classes");
    }
    t.spec.train_file = entry.at("train").get<std::string>();
    t.spec.test_file = entry.at("test").get<std::string>();
    t.train = read_examples(dir / t.spec.train_file, t.spec);
    t.test = read_examples(dir / t.spec.test_file, t.spec);
    tasks.push_back(std::move(t));
  }
  return tasks;
}

void save_tasks(const std::vector<TaskData>& tasks, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json doc;
  doc["tasks"] = nlohmann::ordered_json::array();
  for (const auto& t : tasks) {
    nlohmann::ordered_json entry;
    entry["id"] = t.spec.id;
    entry["kind"] = task_kind_name(t.spec.kind);
    if (t.spec.is_classification()) entry["n_classes"] = t.spec.n_classes;
    entry["train"] = t.spec.train_file;
    entry["test"] = t.spec.test_file;
    doc["tasks"].push_back(entry);
    write_examples(dir / t.spec.train_file, t.spec, t.train);
    write_examples(dir / t.spec.test_file, t.spec, t.test);
  }
  std::ofstream out(dir / "tasks.json", std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write tasks.json");
  out << doc.dump(2) << '\n';
}

}  // namespace bt
