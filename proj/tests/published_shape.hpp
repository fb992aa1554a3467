#pragma once

#include <array>
#include <cstddef>

#include "biastracer/relation_store.hpp"

namespace bt::support {

// Published per-category counts of the released bias dataset, BR01..BR09.
struct PublishedCounts {
  std::array<std::size_t, 9> relations{65, 45, 102, 126, 50, 359, 94, 65, 112};
  std::array<std::size_t, 9> groups{29, 35, 30, 66, 27, 76, 36, 22, 36};
  std::array<std::size_t, 9> stereotypes{65, 45, 100, 115, 47, 290, 84, 64, 103};
  std::size_t total_relations = 1018;
  std::size_t total_prompts = 10180;
  std::size_t total_groups = 357;
  std::size_t total_stereotypes = 913;
};

// Synthetic dataset with exactly the published per-category relation, group
// and stereotype counts and ten prompts per relation.
RelationDataset published_shape_dataset();

}  // namespace bt::support
