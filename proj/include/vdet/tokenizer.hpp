#pragma once

#include <array>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vdet/common.hpp"
#include "vdet/normalize.hpp"

namespace vdet {

namespace special {
inline constexpr int cls = 0;
inline constexpr int sep = 1;
inline constexpr int pad = 2;
inline constexpr int unk = 3;
inline constexpr int count = 8;
}  // namespace special

inline constexpr std::array<std::string_view, special::count> kSpecialTokens = {
    "[CLS]", "[SEP]", "[PAD]", "[UNK]", "<C>", "<CPP>", "<PY>", "<SOL>"};

/// Appended to every pre-token before merging.
inline constexpr std::string_view kEndOfWord = "</w>";

int language_tag_id(Language lang);

/// Trained subword vocabulary. Immutable once built; encode/decode are const.
class BpeModel {
 public:
  BpeModel() = default;
  BpeModel(std::vector<std::string> vocab, std::vector<std::pair<std::string, std::string>> merges,
           int target_vocab_size);

  int vocab_size() const { return static_cast<int>(vocab_.size()); }
  int target_vocab_size() const { return target_vocab_size_; }
  const std::vector<std::string>& vocab() const { return vocab_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }

  /// Id of a symbol, or [UNK].
  int id_of(const std::string& symbol) const;

  /// Merge-rank segmentation of one pre-token (end marker included).
  std::vector<std::string> segment(std::string_view word) const;

  std::string to_json() const;
  static BpeModel from_json(std::string_view text);

  /// Hash of the canonical JSON serialization; checkpoints record it.
  std::string content_hash() const;

 private:
  std::vector<std::string> vocab_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::unordered_map<std::string, int> ids_;
  std::unordered_map<std::string, int> merge_rank_;
  int target_vocab_size_ = 0;
};

struct EncodeResult {
  std::vector<int> ids;
  std::vector<int> token_to_line;
  bool truncated = false;
};

/// Learns merges over whitespace-separated pre-tokens. Throws on an empty
/// corpus or when the target cannot hold the specials and base symbols.
BpeModel bpe_train(const std::vector<std::string>& texts, int target_vocab_size);

/// [CLS], language tag, subwords, [SEP]; content is cut from the end to fit max_len.
EncodeResult encode(const BpeModel& model, const NormalizedUnit& unit, Language lang,
                    int max_len);

/// Drops specials, maps [UNK] to "<unk>", end-of-word markers to single spaces.
std::string decode(const BpeModel& model, const std::vector<int>& ids);

}  // namespace vdet
