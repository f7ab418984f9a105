#include "vdet/tokenizer.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include <json.hpp>

namespace vdet {

using nlohmann::json;

namespace {

std::string pair_key(std::string_view left, std::string_view right) {
  std::string key(left);
  key += '\0';
  key += right;
  return key;
}

std::vector<std::string> initial_symbols(std::string_view word) {
  auto symbols = utf8_chars(word);
  symbols.emplace_back(kEndOfWord);
  return symbols;
}

// Whitespace-separated pre-tokens with their 1-based line numbers.
std::vector<std::pair<std::string_view, int>> pre_tokens(std::string_view text) {
  std::vector<std::pair<std::string_view, int>> out;
  int line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\n' && text[j] != '\t' &&
           text[j] != '\r')
      ++j;
    out.emplace_back(text.substr(i, j - i), line);
    i = j;
  }
  return out;
}

}  // namespace

int language_tag_id(Language lang) {
  switch (lang) {
    case Language::c: return 4;
    case Language::cpp: return 5;
    case Language::python: return 6;
    case Language::solidity: return 7;
  }
  return special::unk;
}

BpeModel::BpeModel(std::vector<std::string> vocab,
                   std::vector<std::pair<std::string, std::string>> merges,
                   int target_vocab_size)
    : vocab_(std::move(vocab)), merges_(std::move(merges)), target_vocab_size_(target_vocab_size) {
  if (vocab_.size() < special::count) throw Error("tokenizer vocab lacks the special tokens");
  for (int i = 0; i < special::count; ++i) {
    if (vocab_[i] != kSpecialTokens[i])
      throw Error("tokenizer special token " + std::to_string(i) + " must be " +
                  std::string(kSpecialTokens[i]));
  }
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!ids_.emplace(vocab_[i], static_cast<int>(i)).second)
      throw Error("tokenizer vocab repeats symbol '" + vocab_[i] + "'");
  }
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    const auto& [l, rt] = merges_[r];
    if (!ids_.count(l) || !ids_.count(rt) || !ids_.count(l + rt))
      throw Error("tokenizer merge " + std::to_string(r) + " references unknown symbols");
    merge_rank_.emplace(pair_key(l, rt), static_cast<int>(r));
  }
}

int BpeModel::id_of(const std::string& symbol) const {
  auto it = ids_.find(symbol);
  return it == ids_.end() ? special::unk : it->second;
}

std::vector<std::string> BpeModel::segment(std::string_view word) const {
  auto symbols = initial_symbols(word);
  for (;;) {
    int best_rank = std::numeric_limits<int>::max();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = merge_rank_.find(pair_key(symbols[i], symbols[i + 1]));
      if (it != merge_rank_.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == std::numeric_limits<int>::max()) break;
    const auto& [left, right] = merges_[best_rank];
    std::vector<std::string> next;
    next.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
        next.push_back(left + right);
        i += 2;
      } else {
        next.push_back(std::move(symbols[i]));
        ++i;
      }
    }
    symbols = std::move(next);
  }
  return symbols;
}

std::string BpeModel::to_json() const {
  json merges = json::array();
  for (const auto& [l, r] : merges_) merges.push_back(json::array({l, r}));
  json obj = {{"specials", std::vector<std::string>(kSpecialTokens.begin(), kSpecialTokens.end())},
              {"merges", merges},
              {"vocab", vocab_},
              {"target_vocab_size", target_vocab_size_}};
  return obj.dump(1) + "\n";
}

BpeModel BpeModel::from_json(std::string_view text) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("malformed tokenizer file: ") + e.what());
  }
  try {
    auto specials = obj.at("specials").get<std::vector<std::string>>();
    if (specials.size() != special::count ||
        !std::equal(specials.begin(), specials.end(), kSpecialTokens.begin()))
      throw Error("tokenizer file has unexpected special tokens");
    std::vector<std::pair<std::string, std::string>> merges;
    for (const auto& m : obj.at("merges")) {
      if (!m.is_array() || m.size() != 2) throw Error("tokenizer merge must be a [left, right] pair");
      merges.emplace_back(m[0].get<std::string>(), m[1].get<std::string>());
    }
    return BpeModel(obj.at("vocab").get<std::vector<std::string>>(), std::move(merges),
                    obj.at("target_vocab_size").get<int>());
  } catch (const json::exception& e) {
    throw Error(std::string("invalid tokenizer file: ") + e.what());
  }
}

std::string BpeModel::content_hash() const { return "fnv1a64:" + hex64(fnv1a64(to_json())); }

BpeModel bpe_train(const std::vector<std::string>& texts, int target_vocab_size) {
  std::map<std::string, long long> word_counts;
  for (const auto& text : texts) {
    for (const auto& [word, _] : pre_tokens(text)) ++word_counts[std::string(word)];
  }
  if (word_counts.empty()) throw Error("cannot train a tokenizer on an empty corpus");

  std::vector<std::vector<std::string>> words;
  std::vector<long long> counts;
  std::set<std::string> base;
  for (const auto& [word, count] : word_counts) {
    words.push_back(initial_symbols(word));
    counts.push_back(count);
    base.insert(words.back().begin(), words.back().end());
  }
  const int minimum = special::count + static_cast<int>(base.size());
  if (target_vocab_size < minimum)
    throw Error("target vocab size " + std::to_string(target_vocab_size) + " is below the " +
                std::to_string(minimum) + " specials and base symbols");

  std::vector<std::string> vocab(kSpecialTokens.begin(), kSpecialTokens.end());
  vocab.insert(vocab.end(), base.begin(), base.end());
  std::set<std::string> known(vocab.begin(), vocab.end());
  std::vector<std::pair<std::string, std::string>> merges;

  while (static_cast<int>(vocab.size()) < target_vocab_size) {
    std::map<std::pair<std::string, std::string>, long long> pair_counts;
    for (std::size_t w = 0; w < words.size(); ++w) {
      const auto& syms = words[w];
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) pair_counts[{syms[i], syms[i + 1]}] += counts[w];
    }
    // std::map iterates pairs in lexicographic order, so the first maximum
    // found is the lexicographically smallest among ties.
    const std::pair<std::string, std::string>* best = nullptr;
    long long best_count = 0;
    for (const auto& [pair, count] : pair_counts) {
      if (count > best_count) {
        best_count = count;
        best = &pair;
      }
    }
    if (best == nullptr || best_count < 2) break;

    const auto left = best->first;
    const auto right = best->second;
    const std::string merged = left + right;
    merges.emplace_back(left, right);
    if (known.insert(merged).second) vocab.push_back(merged);
    for (auto& syms : words) {
      std::vector<std::string> next;
      next.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size();) {
        if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
          next.push_back(merged);
          i += 2;
        } else {
          next.push_back(std::move(syms[i]));
          ++i;
        }
      }
      syms = std::move(next);
    }
  }
  return BpeModel(std::move(vocab), std::move(merges), target_vocab_size);
}

EncodeResult encode(const BpeModel& model, const NormalizedUnit& unit, Language lang,
                    int max_len) {
  if (max_len < 3) throw Error("max_len must be at least 3");
  EncodeResult out;
  out.ids = {special::cls, language_tag_id(lang)};
  out.token_to_line = {0, 0};
  const std::size_t content_cap = static_cast<std::size_t>(max_len) - 3;
  std::size_t content = 0;
  for (const auto& [word, line] : pre_tokens(unit.text)) {
    for (const auto& sym : model.segment(word)) {
      if (content == content_cap) {
        out.truncated = true;
        break;
      }
      out.ids.push_back(model.id_of(sym));
      out.token_to_line.push_back(line);
      ++content;
    }
    if (out.truncated) break;
  }
  out.ids.push_back(special::sep);
  out.token_to_line.push_back(0);
  return out;
}

std::string decode(const BpeModel& model, const std::vector<int>& ids) {
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= model.vocab_size())
      throw Error("token id " + std::to_string(id) + " is outside the vocabulary");
    if (id == special::unk) {
      out += "<unk>";
      continue;
    }
    if (id < special::count) continue;
    const std::string& sym = model.vocab()[id];
    if (sym.size() >= kEndOfWord.size() &&
        std::string_view(sym).substr(sym.size() - kEndOfWord.size()) == kEndOfWord) {
      out.append(sym, 0, sym.size() - kEndOfWord.size());
      out += ' ';
    } else {
      out += sym;
    }
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace vdet
