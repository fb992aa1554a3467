#include "fixture.hpp"

#include <map>

#include "biastracer/stages.hpp"

namespace bt::support {

TrainedFixture load_trained_fixture(const std::filesystem::path& dir) {
  return {dir, load_checkpoint(dir / "toy.ckpt"), load_dataset(dir / "relations.jsonl", dir / "prompts.jsonl", true),
          load_tasks(dir / "tasks")};
}

const std::vector<NeuronSet>& default_ig_sets(const TrainedFixture& fx) {
  static std::map<std::filesystem::path, std::vector<NeuronSet>> cache;
  auto it = cache.find(fx.dir);
  if (it == cache.end()) {
    const auto attr = trace_dataset(fx.ckpt.params, fx.ckpt.vocab, fx.dataset, AttributionConfig{}, 0.05, 64);
    it = cache.emplace(fx.dir, select_sets(attr, SelectionConfig{})).first;
  }
  return it->second;
}

}  // namespace bt::support
