#include "biastracer/vocab.hpp"

#include <cctype>
#include <set>

#include "biastracer/error.hpp"

namespace bt {
namespace {
const std::vector<std::string> kSpecials = {"[PAD]", "[UNK]", "[MASK]"};
}

Vocab::Vocab() : Vocab(kSpecials) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < kSpecials.size() ||
      !std::equal(kSpecials.begin(), kSpecials.end(), tokens_.begin())) {
    throw Error(ErrorCode::InvalidArgument, "vocabulary must start with [PAD] [UNK] [MASK]");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocab::id_or_unk(std::string_view token) const { return find(token).value_or(kUnkId); }

TokenSequence Vocab::encode(std::string_view text) const {
  TokenSequence seq;
  for (const auto& word : split_whitespace(text)) {
    const TokenId id = id_or_unk(word);
    if (id == kMaskId && !seq.mask_position) seq.mask_position = seq.tokens.size();
    seq.tokens.push_back(id);
  }
  return seq;
}

std::string Vocab::decode(const std::vector<TokenId>& ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) words.emplace_back(text.substr(start, i - start));
  }
  return words;
}

Vocab build_vocab(const std::vector<std::string>& corpus) {
  std::set<std::string> seen;
  for (const auto& line : corpus) {
    for (auto& w : split_whitespace(line)) seen.insert(std::move(w));
  }
  for (const auto& s : kSpecials) seen.erase(s);
  if (seen.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus contains no tokens");
  std::vector<std::string> tokens = kSpecials;
  tokens.insert(tokens.end(), seen.begin(), seen.end());
  return Vocab(std::move(tokens));
}

}  // namespace bt
