#include "docmt/context.h"

#include <cmath>

#include "docmt/error.h"
#include "docmt/sampler.h"

namespace docmt {

WindowPolicy WindowPolicy::left(int L, std::string sep) {
  WindowPolicy p;
  p.kind = Kind::left_tokens;
  p.max_tokens = L;
  p.sep = std::move(sep);
  return p;
}

WindowPolicy WindowPolicy::window(int left_k, int right_k, std::string sep) {
  WindowPolicy p;
  p.kind = Kind::sentence_window;
  p.left_k = left_k;
  p.right_k = right_k;
  p.sep = std::move(sep);
  return p;
}

WindowPolicy WindowPolicy::budget(int n, int l, std::string sep) {
  WindowPolicy p;
  p.kind = Kind::token_budget;
  p.budget_n = n;
  p.budget_l = l;
  p.sep = std::move(sep);
  return p;
}

namespace {

void check_payload_index(std::span<const std::string> sentences, int payload_index) {
  if (payload_index < 0 || payload_index >= static_cast<int>(sentences.size()))
    throw ValidationError("payload_index out of range");
}

std::string join_for_inference(const std::vector<std::string>& segments,
                               const std::string& sep) {
  if (sep.empty()) {  // no-separator mode for sentence-trained models
    std::string out;
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (i) out.push_back(' ');
      out.append(segments[i]);
    }
    return out;
  }
  return join_segments(segments, sep);
}

AssembledInput finish(std::span<const std::string> sentences, int first, int last,
                      int payload_index, const std::string& sep,
                      const TokenCounter& counter) {
  AssembledInput out;
  out.segments.assign(sentences.begin() + first, sentences.begin() + last + 1);
  out.payload_index = payload_index - first;
  for (int i = first; i <= last; ++i) {
    int t = counter(sentences[i]);
    out.token_count += t;
    if (i < payload_index)
      out.left_tokens += t;
    else if (i > payload_index)
      out.right_tokens += t;
  }
  out.joined_text = join_for_inference(out.segments, sep);
  return out;
}

}  // namespace

AssembledInput assemble_left(std::span<const std::string> sentences,
                             int payload_index, int max_tokens,
                             const std::string& sep, const TokenCounter& counter) {
  check_payload_index(sentences, payload_index);
  int total = counter(sentences[payload_index]);
  int first = payload_index;
  while (first > 0) {
    int t = counter(sentences[first - 1]);
    if (total + t > max_tokens)
      break;
    total += t;
    --first;
  }
  return finish(sentences, first, payload_index, payload_index, sep, counter);
}

AssembledInput assemble_window(std::span<const std::string> sentences,
                               int payload_index, int left_k, int right_k,
                               const std::string& sep, const TokenCounter& counter) {
  check_payload_index(sentences, payload_index);
  int first = std::max(0, payload_index - left_k);
  int last = std::min(static_cast<int>(sentences.size()) - 1, payload_index + right_k);
  return finish(sentences, first, last, payload_index, sep, counter);
}

AssembledInput assemble_budget(std::span<const std::string> sentences,
                               int payload_index, int budget_n, int budget_l,
                               const std::string& sep, const TokenCounter& counter) {
  check_payload_index(sentences, payload_index);
  if (budget_l > budget_n)
    throw ValidationError("token budget requires l <= n");
  int payload_tokens = counter(sentences[payload_index]);

  int left_budget = std::min(budget_l, budget_n - payload_tokens);
  int first = payload_index;
  int left_tokens = 0;
  while (first > 0) {
    int t = counter(sentences[first - 1]);
    if (left_tokens + t > left_budget)
      break;
    left_tokens += t;
    --first;
  }

  int right_budget = budget_n - left_tokens - payload_tokens;
  int last = payload_index;
  int right_tokens = 0;
  while (last + 1 < static_cast<int>(sentences.size())) {
    int t = counter(sentences[last + 1]);
    if (right_tokens + t > right_budget)
      break;
    right_tokens += t;
    ++last;
  }
  return finish(sentences, first, last, payload_index, sep, counter);
}

AssembledInput assemble(std::span<const std::string> sentences, int payload_index,
                        const WindowPolicy& policy, const TokenCounter& counter) {
  switch (policy.kind) {
    case WindowPolicy::Kind::left_tokens:
      return assemble_left(sentences, payload_index, policy.max_tokens, policy.sep, counter);
    case WindowPolicy::Kind::sentence_window:
      return assemble_window(sentences, payload_index, policy.left_k, policy.right_k,
                             policy.sep, counter);
    case WindowPolicy::Kind::token_budget:
      return assemble_budget(sentences, payload_index, policy.budget_n, policy.budget_l,
                             policy.sep, counter);
  }
  throw ValidationError("unknown window policy");
}

AssembledInput assemble(const Document& doc, int payload_index,
                        const WindowPolicy& policy, const TokenCounter& counter) {
  std::vector<std::string> sources;
  sources.reserve(doc.pairs.size());
  for (const auto& p : doc.pairs)
    sources.push_back(p.source);
  return assemble(sources, payload_index, policy, counter);
}

PayloadExtraction extract_payload_by_sep(const std::string& output_text,
                                         int payload_index, const std::string& sep) {
  PayloadExtraction result;
  if (trim(output_text).empty()) {
    result.segment_mismatch = true;
    return result;
  }
  auto segments = split_segments(output_text, sep);
  if (payload_index < static_cast<int>(segments.size())) {
    result.text = segments[static_cast<std::size_t>(payload_index)];
  } else {
    result.text = segments.back();  // engine dropped or merged a separator
    result.segment_mismatch = true;
  }
  return result;
}

std::string extract_payload_proportional(const std::string& source_joined,
                                         const std::string& payload_text,
                                         const std::string& output_text) {
  auto out_tokens = tokenize(output_text);
  if (out_tokens.empty())
    return "";
  int source_total = count_tokens(source_joined);
  int payload_total = count_tokens(payload_text);
  double ratio = source_total > 0
                     ? static_cast<double>(payload_total) / source_total
                     : 1.0;
  long k = std::lround(ratio * static_cast<double>(out_tokens.size()));
  k = std::max(1L, std::min(k, static_cast<long>(out_tokens.size())));
  std::vector<std::string_view> tail(out_tokens.end() - k, out_tokens.end());
  return join_tokens(tail);
}

}  // namespace docmt
