#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bt {

using TokenId = int;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kMaskId = 2;

struct TokenSequence {
  std::vector<TokenId> tokens;
  std::optional<std::size_t> mask_position;
};

// Whitespace tokenizer over a closed vocabulary. Ids 0..2 are [PAD], [UNK] and
// [MASK]; corpus tokens follow in lexicographic order.
class Vocab {
 public:
  Vocab();
  explicit Vocab(std::vector<std::string> tokens);  // must start with the specials

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  std::optional<TokenId> find(std::string_view token) const;
  TokenId id_or_unk(std::string_view token) const;

  // The first [MASK] token, if any, becomes the mask position.
  TokenSequence encode(std::string_view text) const;
  std::string decode(const std::vector<TokenId>& ids) const;

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

std::vector<std::string> split_whitespace(std::string_view text);

Vocab build_vocab(const std::vector<std::string>& corpus);

}  // namespace bt
