#include "vdet/normalize.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>

namespace vdet {

namespace {
#include "vdet_keywords.inc"

std::set<std::string, std::less<>> parse_keyword_list(std::string_view text) {
  std::set<std::string, std::less<>> out;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) out.insert(word);
  return out;
}

bool is_ident_start(unsigned char c, Language lang) {
  return std::isalpha(c) || c == '_' || c >= 0x80 || (lang == Language::solidity && c == '$');
}

bool is_ident_char(unsigned char c, Language lang) {
  return is_ident_start(c, lang) || std::isdigit(c);
}

bool is_reserved_placeholder(std::string_view text) {
  if (text == "NUM" || text == "STR") return true;
  if (text.size() < 3 || text.substr(0, 2) != "ID") return false;
  return std::all_of(text.begin() + 2, text.end(), [](char c) { return c >= '0' && c <= '9'; });
}

constexpr std::array<std::string_view, 4> kPunct3 = {">>=", "<<=", "...", "->*"};
constexpr std::array<std::string_view, 3> kPunct3b = {"**=", "//=", "<=>"};
constexpr std::array<std::string_view, 28> kPunct2 = {
    "::", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "**", "//", ":=", "=>", ".*", "##", "@=", "~="};

class Lexer {
 public:
  Lexer(std::string_view src, Language lang)
      : src_(src), lang_(lang), keywords_(keywords(lang)) {}

  std::vector<LexToken> run() {
    while (pos_ < src_.size()) step();
    return std::move(out_);
  }

 private:
  [[noreturn]] void fail(const std::string& what, int line) const {
    throw Error(what + " at line " + std::to_string(line));
  }

  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  bool c_family() const { return lang_ != Language::python; }

  void emit(TokenKind kind, std::string text, int line) {
    out_.push_back({kind, std::move(text), line});
  }

  void emit_newline() {
    emit(TokenKind::newline, "\n", line_);
    ++line_;
  }

  // Newlines swallowed by a multi-line token still count as lines.
  void emit_embedded_newlines(std::string_view body) {
    for (char c : body) {
      if (c == '\n') emit_newline();
    }
  }

  void step() {
    const char c = peek();
    if (c == '\n') {
      ++pos_;
      emit_newline();
      return;
    }
    if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
      ++pos_;
      return;
    }
    if (c == '\\' && (peek(1) == '\n' || (peek(1) == '\r' && peek(2) == '\n'))) {
      pos_ += peek(1) == '\n' ? 2 : 3;
      emit_newline();
      return;
    }
    if (lang_ == Language::python && c == '#') {
      while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      return;
    }
    if (c_family() && c == '/' && peek(1) == '/') {
      while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      return;
    }
    if (c_family() && c == '/' && peek(1) == '*') {
      const int start_line = line_;
      auto end = src_.find("*/", pos_ + 2);
      if (end == std::string_view::npos) fail("unterminated block comment", start_line);
      emit_embedded_newlines(src_.substr(pos_, end - pos_));
      pos_ = end + 2;
      return;
    }
    if (c == '"' || c == '\'') {
      lex_string(pos_, pos_);
      return;
    }
    const auto uc = static_cast<unsigned char>(c);
    if (std::isdigit(uc) || (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      lex_number();
      return;
    }
    if (is_ident_start(uc, lang_)) {
      lex_identifier();
      return;
    }
    lex_punct();
  }

  bool is_string_prefix(std::string_view word) const {
    std::string lower(word);
    for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    switch (lang_) {
      case Language::python:
        return lower == "r" || lower == "u" || lower == "b" || lower == "f" || lower == "br" ||
               lower == "rb" || lower == "fr" || lower == "rf";
      case Language::c:
        return word == "L" || word == "u" || word == "U" || word == "u8";
      case Language::cpp:
        return word == "L" || word == "u" || word == "U" || word == "u8" || word == "R" ||
               word == "LR" || word == "uR" || word == "UR" || word == "u8R";
      case Language::solidity:
        return word == "hex" || word == "unicode";
    }
    return false;
  }

  // `token_start` is where the prefix (if any) begins; `quote_pos` the opening quote.
  void lex_string(std::size_t token_start, std::size_t quote_pos) {
    const int start_line = line_;
    const char quote = src_[quote_pos];
    const bool raw_cpp = lang_ == Language::cpp && quote == '"' && quote_pos > token_start &&
                         src_[quote_pos - 1] == 'R';
    std::size_t i = quote_pos + 1;
    if (raw_cpp) {
      auto paren = src_.find('(', i);
      if (paren == std::string_view::npos) fail("malformed raw string literal", start_line);
      std::string closing = ")" + std::string(src_.substr(i, paren - i)) + "\"";
      auto end = src_.find(closing, paren + 1);
      if (end == std::string_view::npos) fail("unterminated string literal", start_line);
      i = end + closing.size();
    } else if (lang_ == Language::python && src_.substr(quote_pos, 3) == std::string(3, quote)) {
      const std::string triple(3, quote);
      i = quote_pos + 3;
      for (;;) {
        if (i >= src_.size()) fail("unterminated string literal", start_line);
        if (src_[i] == '\\') {
          i += 2;
          continue;
        }
        if (src_.substr(i, 3) == triple) {
          i += 3;
          break;
        }
        ++i;
      }
    } else {
      for (;;) {
        if (i >= src_.size() || src_[i] == '\n') fail("unterminated string literal", start_line);
        if (src_[i] == '\\') {
          i += 2;
          continue;
        }
        if (src_[i] == quote) {
          ++i;
          break;
        }
        ++i;
      }
      if (i > src_.size()) fail("unterminated string literal", start_line);
    }
    std::string_view text = src_.substr(token_start, i - token_start);
    emit(TokenKind::string, std::string(text), start_line);
    emit_embedded_newlines(text);
    pos_ = i;
  }

  void lex_number() {
    const std::size_t start = pos_;
    const bool hex = peek() == '0' && (peek(1) == 'x' || peek(1) == 'X');
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      const auto uc = static_cast<unsigned char>(c);
      if (std::isalnum(uc) || c == '_' || c == '.') {
        ++pos_;
        continue;
      }
      if ((c == '+' || c == '-') && pos_ > start) {
        const char prev = src_[pos_ - 1];
        const bool exponent = hex ? (prev == 'p' || prev == 'P') : (prev == 'e' || prev == 'E');
        if (exponent) {
          ++pos_;
          continue;
        }
      }
      if (c == '\'' && (lang_ == Language::c || lang_ == Language::cpp) &&
          std::isxdigit(static_cast<unsigned char>(peek(1)))) {
        ++pos_;
        continue;
      }
      break;
    }
    emit(TokenKind::number, std::string(src_.substr(start, pos_ - start)), line_);
  }

  void lex_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && is_ident_char(static_cast<unsigned char>(src_[pos_]), lang_)) ++pos_;
    std::string_view word = src_.substr(start, pos_ - start);
    if ((peek() == '"' || peek() == '\'') && is_string_prefix(word)) {
      lex_string(start, pos_);
      return;
    }
    const bool kw = keywords_.find(word) != keywords_.end();
    emit(kw ? TokenKind::keyword : TokenKind::identifier, std::string(word), line_);
  }

  void lex_punct() {
    auto try_match = [&](std::string_view op) {
      if (src_.substr(pos_, op.size()) == op) {
        emit(TokenKind::punct, std::string(op), line_);
        pos_ += op.size();
        return true;
      }
      return false;
    };
    if (lang_ == Language::solidity && try_match(">>>")) return;
    for (auto op : kPunct3) {
      if (try_match(op)) return;
    }
    for (auto op : kPunct3b) {
      if (try_match(op)) return;
    }
    for (auto op : kPunct2) {
      if (try_match(op)) return;
    }
    // Single character, keeping multi-byte UTF-8 sequences whole.
    auto pieces = utf8_chars(src_.substr(pos_, 4));
    emit(TokenKind::punct, pieces.front(), line_);
    pos_ += pieces.front().size();
  }

  std::string_view src_;
  Language lang_;
  const std::set<std::string, std::less<>>& keywords_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::vector<LexToken> out_;
};

}  // namespace

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::keyword: return "keyword";
    case TokenKind::identifier: return "identifier";
    case TokenKind::number: return "number";
    case TokenKind::string: return "string";
    case TokenKind::punct: return "punct";
    case TokenKind::newline: return "newline";
  }
  return "?";
}

const std::set<std::string, std::less<>>& keywords(Language lang) {
  static const auto c = parse_keyword_list(kKeywords_c);
  static const auto cpp = parse_keyword_list(kKeywords_cpp);
  static const auto python = parse_keyword_list(kKeywords_python);
  static const auto solidity = parse_keyword_list(kKeywords_solidity);
  switch (lang) {
    case Language::c: return c;
    case Language::cpp: return cpp;
    case Language::python: return python;
    case Language::solidity: return solidity;
  }
  return c;
}

int count_lines(std::string_view text) {
  if (text.empty()) return 0;
  return static_cast<int>(std::count(text.begin(), text.end(), '\n')) + 1;
}

std::vector<LexToken> lex(std::string_view code, Language lang) {
  return Lexer(code, lang).run();
}

std::string render_tokens(const std::vector<LexToken>& tokens) {
  std::string out;
  bool line_start = true;
  for (const auto& tok : tokens) {
    if (tok.kind == TokenKind::newline) {
      out += '\n';
      line_start = true;
      continue;
    }
    if (!line_start) out += ' ';
    out += tok.text;
    line_start = false;
  }
  return out;
}

NormalizedUnit normalize(std::string_view code, Language lang) {
  NormalizedUnit unit;
  unit.line_count = count_lines(code);
  int next_id = 1;
  for (auto tok : lex(code, lang)) {
    switch (tok.kind) {
      case TokenKind::identifier:
        if (!is_reserved_placeholder(tok.text)) {
          auto [it, inserted] = unit.ident_map.try_emplace(tok.text, "");
          if (inserted) it->second = "ID" + std::to_string(next_id++);
          tok.text = it->second;
        }
        break;
      case TokenKind::number:
        tok.text = "NUM";
        break;
      case TokenKind::string:
        tok.text = "STR";
        break;
      default:
        break;
    }
    unit.tokens.push_back(std::move(tok));
  }
  unit.text = render_tokens(unit.tokens);
  return unit;
}

NormalizedUnit structure_view(const NormalizedUnit& unit) {
  NormalizedUnit out = unit;
  int depth = 0;
  for (auto& tok : out.tokens) {
    if (tok.kind != TokenKind::punct) continue;
    int tag = depth;
    if (tok.text == "(" || tok.text == "[" || tok.text == "{") {
      tag = ++depth;
    } else if (tok.text == ")" || tok.text == "]" || tok.text == "}") {
      tag = depth;
      depth = std::max(0, depth - 1);
    }
    tok.text += "@" + std::to_string(std::min(tag, 9));
  }
  out.text = render_tokens(out.tokens);
  return out;
}

}  // namespace vdet
