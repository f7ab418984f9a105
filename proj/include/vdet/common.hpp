#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vdet {

/// Every recoverable failure in the library is reported with this type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Language { c, cpp, python, solidity };

inline constexpr Language kAllLanguages[] = {Language::c, Language::cpp, Language::python,
                                             Language::solidity};

std::string_view to_string(Language lang);
Language parse_language(std::string_view name);  // throws Error on unknown names

/// Language tag token placed after [CLS]: <C>, <CPP>, <PY>, <SOL>.
std::string_view language_tag(Language lang);

/// Guess a language from a source file extension; throws Error when unknown.
Language language_from_extension(std::string_view path);

/// FNV-1a, 64 bit. Stable across platforms, used for content keys and file hashes.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

/// Splits a UTF-8 string into code-point substrings. Invalid bytes become
/// single-byte pieces.
std::vector<std::string> utf8_chars(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

/// Derives an independent sub-seed from a base seed and a stream label.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream);

namespace log {
enum class Level { debug, info, warn, error };
void set_level(Level level);
void write(Level level, std::string_view message);
inline void info(std::string_view m) { write(Level::info, m); }
inline void warn(std::string_view m) { write(Level::warn, m); }
inline void error(std::string_view m) { write(Level::error, m); }
inline void debug(std::string_view m) { write(Level::debug, m); }
}  // namespace log

}  // namespace vdet
