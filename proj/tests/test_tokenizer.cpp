#include <doctest.h>

#include <map>
#include <sstream>

#include "vdet/synthetic.hpp"
#include "vdet/tokenizer.hpp"

using namespace vdet;

namespace {

std::string repeat_words(const std::vector<std::pair<std::string, int>>& counts) {
  std::string text;
  for (const auto& [w, n] : counts)
    for (int i = 0; i < n; ++i) text += w + " ";
  return text;
}

// Independent oracle: count adjacent pairs over character sequences.
std::pair<std::string, std::string> brute_force_first_merge(
    const std::vector<std::pair<std::string, int>>& counts) {
  std::map<std::pair<std::string, std::string>, int> pairs;
  for (const auto& [w, n] : counts) {
    std::vector<std::string> syms;
    for (char c : w) syms.emplace_back(1, c);
    syms.emplace_back(kEndOfWord);
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) pairs[{syms[i], syms[i + 1]}] += n;
  }
  std::pair<std::string, std::string> best;
  int best_n = -1;
  for (const auto& [p, n] : pairs)
    if (n > best_n) {
      best_n = n;
      best = p;
    }
  return best;
}

std::vector<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

}  // namespace

TEST_CASE("first merge on the classic corpus is (e, s)") {
  const std::vector<std::pair<std::string, int>> counts = {
      {"low", 5}, {"lower", 2}, {"newest", 6}, {"widest", 3}};
  const auto oracle = brute_force_first_merge(counts);
  CHECK(oracle == std::make_pair(std::string("e"), std::string("s")));
  const auto model = bpe_train({repeat_words(counts)}, 100);
  REQUIRE_FALSE(model.merges().empty());
  CHECK(model.merges()[0] == oracle);
}

TEST_CASE("single repeated character corpus") {
  const auto model = bpe_train({"a a a"}, 100);
  std::vector<std::string> expected(kSpecialTokens.begin(), kSpecialTokens.end());
  for (const char* s : {"</w>", "a", "a</w>"}) expected.emplace_back(s);
  CHECK(model.vocab() == expected);
  CHECK(model.merges().size() == 1);
}

TEST_CASE("target equal to specials plus base symbols yields zero merges") {
  const auto model = bpe_train({"ab ab ba"}, 8 + 3);
  CHECK(model.merges().empty());
  CHECK(model.vocab_size() == 11);
  CHECK_THROWS_AS(bpe_train({"ab ab ba"}, 10), Error);
  CHECK_THROWS_AS(bpe_train({}, 100), Error);
  CHECK_THROWS_AS(bpe_train({"   "}, 100), Error);
}

TEST_CASE("specials hold ids 0-7") {
  const auto model = bpe_train({"x y"}, 50);
  for (int i = 0; i < special::count; ++i) CHECK(model.vocab()[i] == kSpecialTokens[i]);
  CHECK(language_tag_id(Language::solidity) == model.id_of("<SOL>"));
}

TEST_CASE("encode of empty text") {
  const auto model = bpe_train({"x y"}, 50);
  const auto r = encode(model, normalize("", Language::solidity), Language::solidity, 16);
  CHECK(r.ids == std::vector<int>{special::cls, language_tag_id(Language::solidity), special::sep});
  CHECK(r.token_to_line == std::vector<int>{0, 0, 0});
  CHECK_FALSE(r.truncated);
}

TEST_CASE("truncation boundary keeps [SEP] last") {
  // Five single-character words with no merges: one subword plus marker each.
  const auto model = bpe_train({"a b c d e"}, 8 + 6);
  const auto unit = normalize("a b c d e", Language::python);
  const auto probe = encode(model, unit, Language::python, 512);
  const int content = static_cast<int>(probe.ids.size()) - 3;
  const auto fits = encode(model, unit, Language::python, content + 3);
  CHECK_FALSE(fits.truncated);
  CHECK(fits.ids.size() == static_cast<std::size_t>(content + 3));
  const auto cut = encode(model, unit, Language::python, content + 2);
  CHECK(cut.truncated);
  CHECK(cut.ids.size() == static_cast<std::size_t>(content + 2));
  CHECK(cut.ids.back() == special::sep);
  CHECK_THROWS_AS(encode(model, unit, Language::python, 2), Error);
}

TEST_CASE("decode drops specials and marks unknowns") {
  const auto model = bpe_train({"ab ab"}, 50);
  CHECK(decode(model, {special::cls, language_tag_id(Language::python), special::sep}).empty());
  const auto r = encode(model, normalize("ab zz", Language::python), Language::python, 32);
  CHECK(decode(model, r.ids).find("<unk>") != std::string::npos);
  CHECK_THROWS_AS(decode(model, {9999}), Error);
}

TEST_CASE("round trip, length cap and merge-order soundness over synthetic samples") {
  SyntheticConfig cfg;
  cfg.n_samples = 120;
  cfg.n_projects = 12;
  const auto m = generate_synthetic(cfg);
  std::vector<std::string> texts;
  for (const auto& s : m.samples) texts.push_back(normalize(s.code, s.language).text);
  const auto model = bpe_train(texts, 400);
  for (std::size_t i = 0; i < 100; ++i) {
    const auto& s = m.samples[i];
    const auto unit = normalize(s.code, s.language);
    const auto full = encode(model, unit, s.language, 512);
    CHECK(words(decode(model, full.ids)) == words(unit.text));
    CHECK(full.token_to_line.size() == full.ids.size());
    int last = 0;
    for (std::size_t k = 2; k + 1 < full.ids.size(); ++k) {
      CHECK(full.token_to_line[k] >= last);
      last = full.token_to_line[k];
    }
    const auto capped = encode(model, unit, s.language, 24);
    CHECK(capped.ids.size() <= 24);
    CHECK(capped.ids.back() == special::sep);
  }
  // Re-applying merges to characters reproduces every stored multi-character symbol.
  for (const auto& [l, r] : model.merges()) CHECK(model.id_of(l + r) != special::unk);
}

TEST_CASE("tokenizer JSON reload is bit-exact") {
  const auto model = bpe_train({"int ID1 = NUM ;", "ID1 ( ID2 ) ;"}, 60);
  const auto text = model.to_json();
  const auto again = BpeModel::from_json(text);
  CHECK(again.to_json() == text);
  CHECK(again.content_hash() == model.content_hash());
  CHECK(again.merges() == model.merges());
  CHECK_THROWS_AS(BpeModel::from_json("{}"), Error);
}
