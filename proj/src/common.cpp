#include "vdet/common.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

namespace vdet {

std::string_view to_string(Language lang) {
  switch (lang) {
    case Language::c: return "c";
    case Language::cpp: return "cpp";
    case Language::python: return "python";
    case Language::solidity: return "solidity";
  }
  return "?";
}

Language parse_language(std::string_view name) {
  for (Language lang : kAllLanguages) {
    if (to_string(lang) == name) return lang;
  }
  throw Error("unknown language '" + std::string(name) + "'");
}

std::string_view language_tag(Language lang) {
  switch (lang) {
    case Language::c: return "<C>";
    case Language::cpp: return "<CPP>";
    case Language::python: return "<PY>";
    case Language::solidity: return "<SOL>";
  }
  return "?";
}

Language language_from_extension(std::string_view path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string_view::npos ? "" : std::string(path.substr(dot + 1));
  if (ext == "c" || ext == "h") return Language::c;
  if (ext == "cpp" || ext == "cc" || ext == "cxx" || ext == "hpp" || ext == "hh" || ext == "hxx")
    return Language::cpp;
  if (ext == "py") return Language::python;
  if (ext == "sol") return Language::solidity;
  throw Error("cannot infer language from '" + std::string(path) + "'");
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::vector<std::string> utf8_chars(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xF0 && lead < 0xF8) len = 4;
    else if (lead >= 0xE0) len = lead < 0xF0 ? 3 : 1;
    else if (lead >= 0xC0) len = 2;
    if (i + len > text.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write to '" + path + "' failed");
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view stream) {
  // splitmix64 finalizer over the stream hash mixed with the base seed
  std::uint64_t z = base ^ fnv1a64(stream);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace log {
namespace {
std::atomic<Level> g_level{Level::info};
}

void set_level(Level level) { g_level = level; }

void write(Level level, std::string_view message) {
  if (level < g_level.load()) return;
  static constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
  std::string line = "[";
  line += kNames[static_cast<int>(level)];
  line += "] ";
  line += message;
  line += '\n';
  std::fputs(line.c_str(), stderr);
}
}  // namespace log

}  // namespace vdet
