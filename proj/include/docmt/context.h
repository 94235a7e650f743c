#pragma once

#include <span>
#include <string>
#include <vector>

#include "docmt/corpus.h"
#include "docmt/tokenize.h"

namespace docmt {

// Context + payload assembled for one inference call. The payload sentence is
// always present, whole, at segments[payload_index]; context segments are
// unmodified consecutive document sentences. token_count sums the segment
// token counts; separators are not budgeted.
struct AssembledInput {
  std::vector<std::string> segments;
  int payload_index = 0;
  std::string joined_text;  // sep-joined; space-joined when sep is empty
  int token_count = 0;
  int left_tokens = 0;
  int right_tokens = 0;
};

struct WindowPolicy {
  enum class Kind { left_tokens, sentence_window, token_budget };
  Kind kind = Kind::left_tokens;
  int max_tokens = 250;  // L for left_tokens
  int left_k = 0;        // sentence_window
  int right_k = 0;
  int budget_n = 0;      // token_budget, with budget_l <= budget_n
  int budget_l = 0;
  std::string sep = "<sep>";  // empty = no-separator mode, space joining

  static WindowPolicy left(int L, std::string sep = "<sep>");
  static WindowPolicy window(int left_k, int right_k, std::string sep = "<sep>");
  static WindowPolicy budget(int n, int l, std::string sep = "<sep>");
};

// Greedily prepends whole preceding sentences, nearest first, while the total
// token count (payload included) stays within L. The payload is kept even if
// it alone exceeds L, and is always the last segment.
AssembledInput assemble_left(std::span<const std::string> sentences,
                             int payload_index, int max_tokens,
                             const std::string& sep,
                             const TokenCounter& counter = whitespace_counter());

// Up to left_k preceding and right_k following sentences, truncated at the
// document edges.
AssembledInput assemble_window(std::span<const std::string> sentences,
                               int payload_index, int left_k, int right_k,
                               const std::string& sep,
                               const TokenCounter& counter = whitespace_counter());

// Token-budget assembly (n, l): left context packs whole sentences, nearest
// first, within min(l, n - |payload|); whatever remains of n after the left
// context and the payload goes to right-context sentences.
AssembledInput assemble_budget(std::span<const std::string> sentences,
                               int payload_index, int budget_n, int budget_l,
                               const std::string& sep,
                               const TokenCounter& counter = whitespace_counter());

AssembledInput assemble(std::span<const std::string> sentences, int payload_index,
                        const WindowPolicy& policy,
                        const TokenCounter& counter = whitespace_counter());

// Document overloads assemble over the source side.
AssembledInput assemble(const Document& doc, int payload_index,
                        const WindowPolicy& policy,
                        const TokenCounter& counter = whitespace_counter());

struct PayloadExtraction {
  std::string text;
  bool segment_mismatch = false;  // output had fewer segments than expected
};

// Splits engine output on the separator and returns the segment at
// payload_index. When the output has fewer segments, the last one is
// returned and the mismatch flagged; evaluation carries on.
PayloadExtraction extract_payload_by_sep(const std::string& output_text,
                                         int payload_index,
                                         const std::string& sep);

// Separator-free fallback: the payload's share of source tokens, applied to
// the output, selecting tokens from the end. Rounds half away from zero with
// a floor of one token for non-empty outputs.
std::string extract_payload_proportional(const std::string& source_joined,
                                         const std::string& payload_text,
                                         const std::string& output_text);

}  // namespace docmt
