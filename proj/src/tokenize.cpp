#include "docmt/tokenize.h"

#include <array>

namespace docmt {

bool is_unicode_whitespace(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
    case 0x20: case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

char32_t decode_utf8(std::string_view text, std::size_t& pos) {
  const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(text[i]); };
  unsigned char b0 = byte(pos);
  std::size_t len = 1;
  char32_t cp = b0;
  if (b0 >= 0xF0)      { len = 4; cp = b0 & 0x07u; }
  else if (b0 >= 0xE0) { len = 3; cp = b0 & 0x0Fu; }
  else if (b0 >= 0xC0) { len = 2; cp = b0 & 0x1Fu; }
  if (len == 1 || pos + len > text.size()) {
    ++pos;
    return b0;
  }
  for (std::size_t i = 1; i < len; ++i) {
    unsigned char b = byte(pos + i);
    if ((b & 0xC0u) != 0x80u) {  // malformed: consume the lead byte only
      ++pos;
      return b0;
    }
    cp = (cp << 6) | (b & 0x3Fu);
  }
  pos += len;
  return cp;
}

std::vector<std::string_view> tokenize(std::string_view text) {
  std::vector<std::string_view> tokens;
  std::size_t pos = 0;
  std::size_t start = 0;
  bool in_token = false;
  while (pos < text.size()) {
    std::size_t at = pos;
    char32_t cp = decode_utf8(text, pos);
    if (is_unicode_whitespace(cp)) {
      if (in_token) {
        tokens.push_back(text.substr(start, at - start));
        in_token = false;
      }
    } else if (!in_token) {
      start = at;
      in_token = true;
    }
  }
  if (in_token)
    tokens.push_back(text.substr(start));
  return tokens;
}

int count_tokens(std::string_view text) {
  int n = 0;
  std::size_t pos = 0;
  bool in_token = false;
  while (pos < text.size()) {
    char32_t cp = decode_utf8(text, pos);
    if (is_unicode_whitespace(cp)) {
      in_token = false;
    } else if (!in_token) {
      ++n;
      in_token = true;
    }
  }
  return n;
}

TokenCounter whitespace_counter() {
  return [](std::string_view text) { return count_tokens(text); };
}

std::string_view trim(std::string_view text) {
  std::size_t begin = 0;
  while (begin < text.size()) {
    std::size_t next = begin;
    if (is_unicode_whitespace(decode_utf8(text, next)))
      begin = next;
    else
      break;
  }
  // scan forward to find the last non-whitespace end position
  std::size_t end = begin;
  std::size_t pos = begin;
  while (pos < text.size()) {
    if (!is_unicode_whitespace(decode_utf8(text, pos)))
      end = pos;
  }
  return text.substr(begin, end - begin);
}

namespace {

bool is_edge_punct(char32_t cp) {
  switch (cp) {
    case U'.': case U',': case U';': case U':': case U'!': case U'?':
    case U'"': case U'\'': case U'(': case U')':
    case 0xAB: case 0xBB:        // « »
    case 0x201E: case 0x201C: case 0x201D:  // „ “ ”
      return true;
    default:
      return false;
  }
}

}  // namespace

std::string_view strip_edge_punct(std::string_view token) {
  bool changed = true;
  while (changed && !token.empty()) {
    changed = false;
    std::size_t pos = 0;
    char32_t first = decode_utf8(token, pos);
    if (is_edge_punct(first)) {
      token.remove_prefix(pos);
      changed = true;
      continue;
    }
    // find the last code point
    std::size_t last_at = 0;
    char32_t last = 0;
    for (std::size_t p = 0; p < token.size();) {
      last_at = p;
      last = decode_utf8(token, p);
    }
    if (is_edge_punct(last)) {
      token = token.substr(0, last_at);
      changed = true;
    }
  }
  return token;
}

namespace {

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

char32_t lower_cp(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;   // Latin-1
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;               // Cyrillic А-Я
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;               // Ѐ-Џ
  if (cp >= 0x100 && cp <= 0x177 && cp % 2 == 0) return cp + 1;   // Latin Ext-A pairs
  return cp;
}

}  // namespace

std::string lowercase(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size())
    append_utf8(out, lower_cp(decode_utf8(text, pos)));
  return out;
}

std::string join_tokens(const std::vector<std::string_view>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out.append(tokens[i]);
  }
  return out;
}

std::string normalize_match(std::string_view text, bool case_insensitive) {
  std::string out;
  for (std::string_view token : tokenize(text)) {
    token = strip_edge_punct(token);
    if (token.empty())
      continue;
    if (!out.empty())
      out.push_back(' ');
    if (case_insensitive)
      out.append(lowercase(token));
    else
      out.append(token);
  }
  return out;
}

}  // namespace docmt
