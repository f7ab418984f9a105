#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vdet/common.hpp"

namespace vdet {

enum class TokenKind { keyword, identifier, number, string, punct, newline };

std::string_view to_string(TokenKind kind);

struct LexToken {
  TokenKind kind;
  std::string text;
  int line;  // 1-based

  bool operator==(const LexToken&) const = default;
};

/// Lexically normalized source. `tokens` holds the normalized token stream
/// (newline tokens included) that `text` was rendered from.
struct NormalizedUnit {
  std::string text;
  int line_count = 0;
  std::map<std::string, std::string> ident_map;
  std::vector<LexToken> tokens;
};

/// Keywords and builtin names that normalization never renames.
const std::set<std::string, std::less<>>& keywords(Language lang);

/// Number of source lines: 0 for empty text, otherwise newlines + 1.
int count_lines(std::string_view text);

/// Tokenizes source text. Comments are dropped, newlines become tokens.
/// Throws Error with the line number on unterminated strings or comments.
std::vector<LexToken> lex(std::string_view code, Language lang);

/// Renames identifiers to ID1..IDn by first occurrence, literals to NUM/STR,
/// strips comments and collapses intra-line whitespace.
NormalizedUnit normalize(std::string_view code, Language lang);

/// Renders a token stream: single spaces within a line, '\n' between lines.
std::string render_tokens(const std::vector<LexToken>& tokens);

/// The structure channel used by the second ensemble member: every punct token
/// gets its bracket nesting depth appended ("(@1", ";@0"). Depth saturates at 9.
NormalizedUnit structure_view(const NormalizedUnit& unit);

}  // namespace vdet
