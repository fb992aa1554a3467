#include "biastracer/synth.hpp"

#include <array>
#include <cstdio>
#include <string_view>

#include "biastracer/error.hpp"
#include "biastracer/rng.hpp"

namespace bt {
namespace {

// {G} is the masked group, {R} the association, {S} the stereotype.
constexpr std::array<std::string_view, 10> kTemplates = {
    "{G} are {R} {S}",
    "people think that {G} are {R} {S}",
    "it is {R} {S} to be {G}",
    "{R} {S} describes {G} well",
    "the {G} are often {R} {S}",
    "everyone knows {G} are {R} {S}",
    "they said the {G} were {R} {S}",
    "being {R} {S} is common among {G}",
    "we expect {G} to be {R} {S}",
    "ask any {G} about being {R} {S}",
};
constexpr std::array<std::string_view, 3> kPrefixes = {"", "indeed", "reportedly"};

std::string render(std::string_view tmpl, const std::string& g, const std::string& r,
                   const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl.compare(i, 3, "{G}") == 0) {
      out += g;
      i += 3;
    } else if (tmpl.compare(i, 3, "{R}") == 0) {
      out += r;
      i += 3;
    } else if (tmpl.compare(i, 3, "{S}") == 0) {
      out += s;
      i += 3;
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

std::string paraphrase(int k, const std::string& g, const std::string& r, const std::string& s) {
  const auto tmpl = kTemplates[static_cast<std::size_t>(k) % kTemplates.size()];
  const auto prefix = kPrefixes[static_cast<std::size_t>(k) / kTemplates.size()];
  std::string body = render(tmpl, g, r, s);
  return prefix.empty() ? body : std::string(prefix) + " " + body;
}

std::string numbered(const char* stem, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%02d", stem, i);
  return buf;
}

std::string group_name(int category, int g) {
  return "g" + std::to_string(category + 1) + static_cast<char>('a' + g % 26) +
         (g >= 26 ? std::to_string(g / 26) : std::string());
}

// Sentence of neutral filler words with one cue token at a random slot.
std::string cue_sentence(Rng& rng, const std::string& cue, int fillers) {
  std::vector<std::string> words;
  const int n = 3 + static_cast<int>(rng.below(4));
  for (int i = 0; i < n; ++i) words.push_back(numbered("w", static_cast<int>(rng.below(static_cast<std::uint64_t>(fillers)))));
  words.insert(words.begin() + static_cast<long>(rng.below(words.size() + 1)), cue);
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

TaskData classification_task(Rng& rng, const std::string& id, const std::vector<std::string>& stems,
                             const SynthSpec& spec) {
  constexpr int kCuesPerClass = 4;
  constexpr int kFillers = 16;
  TaskData t;
  t.spec.id = id;
  t.spec.n_classes = static_cast<int>(stems.size());
  t.spec.kind = stems.size() == 2 ? TaskKind::Binary : TaskKind::Multiclass;
  t.spec.train_file = id + ".train.jsonl";
  t.spec.test_file = id + ".test.jsonl";
  auto make = [&](int n) {
    std::vector<TaskExample> out;
    for (int i = 0; i < n; ++i) {
      const int label = i % t.spec.n_classes;
      const auto cue = numbered(stems[static_cast<std::size_t>(label)].c_str(),
                                static_cast<int>(rng.below(kCuesPerClass)));
      out.push_back({cue_sentence(rng, cue, kFillers), label, {}});
    }
    rng.shuffle(out);
    return out;
  };
  t.train = make(spec.task_train_size);
  t.test = make(spec.task_test_size);
  return t;
}

// Requirement completion: "the system shall <verb> the [MASK]" where each verb
// selects a fixed object.
TaskData completion_task(Rng& rng, const SynthSpec& spec) {
  constexpr int kVerbs = 8;
  constexpr std::array<std::string_view, 4> kFrames = {
      "the system shall {V} the {O}",
      "the app must {V} every {O}",
      "users can {V} the {O} quickly",
      "the service will {V} each {O}",
  };
  TaskData t;
  t.spec.id = "RC";
  t.spec.kind = TaskKind::MaskedLM;
  t.spec.n_classes = 0;
  t.spec.train_file = "RC.train.jsonl";
  t.spec.test_file = "RC.test.jsonl";
  auto make = [&](int n) {
    std::vector<TaskExample> out;
    for (int i = 0; i < n; ++i) {
      const int v = static_cast<int>(rng.below(kVerbs));
      const auto frame = std::string(kFrames[rng.below(kFrames.size())]);
      std::string text;
      for (std::size_t p = 0; p < frame.size();) {
        if (frame.compare(p, 3, "{V}") == 0) {
          text += numbered("verb", v);
          p += 3;
        } else if (frame.compare(p, 3, "{O}") == 0) {
          text += std::string(kMaskToken);
          p += 3;
        } else {
          text += frame[p++];
        }
      }
      out.push_back({text, 0, numbered("obj", v)});
    }
    return out;
  };
  t.train = make(spec.task_train_size);
  t.test = make(spec.task_test_size);
  return t;
}

std::string fill_mask(const std::string& text, const std::string& answer) {
  std::string out = text;
  const auto pos = out.find(kMaskToken);
  out.replace(pos, kMaskToken.size(), answer);
  return out;
}

}  // namespace

int max_paraphrases() { return static_cast<int>(kTemplates.size() * kPrefixes.size()); }

SynthCorpus generate_synthetic_corpus(const SynthSpec& spec) {
  if (spec.relations < 1 || spec.paraphrases < 1 || spec.groups_per_category < 1 ||
      spec.associations < 1 || spec.stereotypes < 1) {
    throw Error(ErrorCode::InvalidArgument, "synthetic corpus counts must be >= 1");
  }
  if (spec.paraphrases > max_paraphrases()) {
    throw Error(ErrorCode::VocabTooSmall,
                "only " + std::to_string(max_paraphrases()) + " distinct paraphrase templates exist");
  }
  const long pairs = static_cast<long>(spec.associations) * spec.stereotypes;
  if (pairs < spec.relations) {
    throw Error(ErrorCode::VocabTooSmall,
                std::to_string(spec.relations) + " relations need distinct (association, "
                "stereotype) pairs but only " + std::to_string(pairs) + " exist");
  }

  Rng rng(spec.seed, 0x73796e7468ULL);
  std::vector<std::pair<int, int>> pair_pool;
  for (int a = 0; a < spec.associations; ++a) {
    for (int s = 0; s < spec.stereotypes; ++s) pair_pool.emplace_back(a, s);
  }
  rng.shuffle(pair_pool);

  std::vector<BiasedRelation> relations;
  std::vector<BiasPrompt> prompts;
  SynthCorpus out;
  for (int i = 0; i < spec.relations; ++i) {
    const int cat = i % kCategoryCount;
    BiasedRelation r;
    r.id = numbered("rel", i);
    r.category = category_from_index(cat);
    const int g = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.groups_per_category)));
    r.group = group_name(cat, g);
    r.association = numbered("a", pair_pool[static_cast<std::size_t>(i)].first);
    r.stereotype = numbered("s", pair_pool[static_cast<std::size_t>(i)].second);
    r.source_sentence = paraphrase(0, r.group, r.association, r.stereotype);
    for (int k = 0; k < spec.paraphrases; ++k) {
      BiasPrompt p;
      p.relation_id = r.id;
      p.text = paraphrase(k, std::string(kMaskToken), r.association, r.stereotype);
      p.answer = r.group;
      prompts.push_back(std::move(p));
    }
    relations.push_back(std::move(r));
  }
  {
    Rng scaffold_rng(spec.seed, 0x73636166ULL);
    for (int i = 0; i < spec.scaffold_lines && pair_pool.size() > static_cast<std::size_t>(spec.relations); ++i) {
      const int cat = static_cast<int>(scaffold_rng.below(kCategoryCount));
      const int g = static_cast<int>(scaffold_rng.below(static_cast<std::uint64_t>(spec.groups_per_category)));
      const std::string group = group_name(cat, g);
      // Only (association, stereotype) pairs no relation uses.
      const auto& [a, st] = pair_pool[static_cast<std::size_t>(spec.relations) +
                                      scaffold_rng.below(pair_pool.size() - static_cast<std::size_t>(spec.relations))];
      out.corpus.push_back(paraphrase(static_cast<int>(scaffold_rng.below(static_cast<std::uint64_t>(spec.paraphrases))), group, numbered("a", a), numbered("s", st)));
    }
  }
  out.dataset = RelationDataset(std::move(relations), std::move(prompts), true,
                                static_cast<std::size_t>(spec.paraphrases));

  if (spec.task_train_size > 0 && spec.task_test_size > 0) {
    Rng task_rng(spec.seed, 0x7461736b73ULL);
    out.tasks.push_back(classification_task(task_rng, "IN", {"civil", "rude"}, spec));
    out.tasks.push_back(classification_task(task_rng, "TB", {"calm", "tense"}, spec));
    out.tasks.push_back(classification_task(task_rng, "RT", {"func", "perf", "secu"}, spec));
    out.tasks.push_back(classification_task(task_rng, "SN", {"good", "bad"}, spec));
    out.tasks.push_back(completion_task(task_rng, spec));
    for (const auto& t : out.tasks) {
      for (const auto& ex : t.train) {
        out.corpus.push_back(t.spec.is_classification() ? ex.text : fill_mask(ex.text, ex.answer));
      }
    }
  }
  return out;
}

std::vector<ClozeExample> cloze_examples(const RelationDataset& dataset) {
  std::vector<ClozeExample> out;
  out.reserve(dataset.prompts().size());
  for (const auto& p : dataset.prompts()) out.push_back({p.text, p.answer});
  return out;
}

}  // namespace bt
