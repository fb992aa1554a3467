#include "published_shape.hpp"

#include <string>
#include <vector>

namespace bt::support {

RelationDataset published_shape_dataset() {
  const PublishedCounts counts;
  std::vector<BiasedRelation> relations;
  std::vector<BiasPrompt> prompts;
  for (int c = 0; c < kCategoryCount; ++c) {
    const auto cat = category_from_index(c);
    const std::string tag = category_code(cat);
    for (std::size_t j = 0; j < counts.relations[static_cast<std::size_t>(c)]; ++j) {
      BiasedRelation r;
      r.id = tag + "-" + std::to_string(j);
      r.category = cat;
      // cycling through the pools realizes every group and stereotype at least once
      r.group = tag + "-group" + std::to_string(j % counts.groups[static_cast<std::size_t>(c)]);
      r.association = "are";
      r.stereotype = tag + "-stereo" + std::to_string(j % counts.stereotypes[static_cast<std::size_t>(c)]);
      for (int k = 0; k < 10; ++k) {
        prompts.push_back({r.id, "variant" + std::to_string(k) + " [MASK] are " + r.stereotype, r.group});
      }
      relations.push_back(std::move(r));
    }
  }
  return RelationDataset(std::move(relations), std::move(prompts), /*strict=*/true);
}

}  // namespace bt::support
