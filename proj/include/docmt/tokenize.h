#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace docmt {

// A token is a maximal run of non-whitespace characters, where whitespace is
// the Unicode White_Space set decoded from UTF-8. Invalid byte sequences are
// treated as opaque non-whitespace bytes so ingestion never fails on them.

bool is_unicode_whitespace(char32_t cp);

// Decodes one code point starting at `pos`; advances `pos` past it. Returns
// the code point, or the raw byte value for malformed sequences.
char32_t decode_utf8(std::string_view text, std::size_t& pos);

std::vector<std::string_view> tokenize(std::string_view text);

// Token count without materializing the tokens.
int count_tokens(std::string_view text);

// Counting hook: samplers and assemblers take this so subword token counts
// can be plugged in; the default counts whitespace tokens.
using TokenCounter = std::function<int(std::string_view)>;

TokenCounter whitespace_counter();

// Trims Unicode whitespace from both ends.
std::string_view trim(std::string_view text);

// Strips the edge-punctuation set .,;:!?"'()«»„“” from both ends of a token.
std::string_view strip_edge_punct(std::string_view token);

// ASCII + Latin-1 + Cyrillic lowercasing; other code points pass through.
std::string lowercase(std::string_view text);

std::string join_tokens(const std::vector<std::string_view>& tokens);

// Canonical form used by phrase matching: tokenize, strip edge punctuation
// per token, optionally lowercase, drop tokens that become empty, join with
// single spaces.
std::string normalize_match(std::string_view text, bool case_insensitive = true);

}  // namespace docmt
