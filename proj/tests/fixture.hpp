#pragma once

#include <filesystem>
#include <vector>

#include "biastracer/checkpoint.hpp"
#include "biastracer/relation_store.hpp"
#include "biastracer/selection.hpp"
#include "biastracer/tasks.hpp"

namespace bt::support {

// The default trained fixture: `corpus synth --seed 1` followed by
// `train-toy --config toy.cfg` in one directory.
struct TrainedFixture {
  std::filesystem::path dir;
  Checkpoint ckpt;
  RelationDataset dataset;
  std::vector<TaskData> tasks;
};

TrainedFixture load_trained_fixture(const std::filesystem::path& dir);

// IG sets with the default selection settings, computed on first use.
const std::vector<NeuronSet>& default_ig_sets(const TrainedFixture& fx);

}  // namespace bt::support
