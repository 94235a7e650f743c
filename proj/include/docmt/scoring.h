#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "docmt/context.h"
#include "docmt/engine.h"
#include "docmt/testset.h"

namespace docmt {

struct MatchConfig {
  bool case_insensitive = true;
  bool strip_edge_punct = true;
  enum class Scope { payload, full_output };
  Scope scope = Scope::payload;
};

struct ItemResult {
  std::string id;
  bool correct = false;
  std::vector<std::string> flags;
  nlohmann::json annotations = nlohmann::json::object();
};

struct BucketStats {
  std::size_t n = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
};

// Per-item results are kept so reports can be re-bucketed after the fact;
// flagged items count as incorrect (never excluded), except forced-mode
// items whose good phrase cannot be located, which are skipped and counted
// separately.
struct EvalReport {
  std::string metric;  // contrastive | generative | generative_forced
  std::size_t n_items = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
  std::map<std::string, BucketStats> buckets;
  std::map<std::string, std::size_t> flags_histogram;
  std::vector<ItemResult> items;
  std::size_t skipped = 0;
};

// True iff some good phrase occurs in `text` as a contiguous token
// subsequence and no bad phrase does. Tokens are compared after edge
// punctuation stripping and lowercasing per the config; a phrase that
// normalizes to nothing is treated as present.
bool match_phrases(const std::string& text,
                   const std::vector<std::string>& good_phrases,
                   const std::vector<std::string>& bad_phrases,
                   const MatchConfig& cfg = {});

// Translates each item under the window policy and matches phrases against
// the extracted payload (or the full output, per cfg.scope). Items carrying
// a forced target prefix are sent as forced-prefix translations, with the
// prefix cut down to the segments the policy actually kept. Engine failures
// flag the item and count it incorrect.
EvalReport score_generative(const std::vector<GenerativeItem>& items,
                            Engine& engine, const WindowPolicy& policy,
                            const MatchConfig& cfg = {},
                            const TokenCounter& counter = whitespace_counter());

// Force-decodes each item's positive target up to the token before its good
// phrase and matches on the continuation only. Full item context is used on
// both sides. Items whose good phrase cannot be located in the positive are
// skipped (flag "unlocatable-phrase"); an empty prefix falls back to free
// translation for that item.
EvalReport score_generative_forced(const std::vector<GenerativeItem>& items,
                                   Engine& engine, const MatchConfig& cfg = {},
                                   const std::string& sep = "<sep>");

// Scores the positive and every negative under identical context and counts
// an item correct iff the positive's logprob strictly exceeds each
// negative's. Ties and missing scores are incorrect.
EvalReport score_contrastive(const std::vector<ContrastiveItem>& items,
                             Engine& engine, const MatchConfig& cfg = {},
                             const std::string& sep = "<sep>");

enum class BucketKey {
  distance_0_vs_1plus,
  pronoun,
  pronoun_x_distance,
  phenomenon,
};

BucketKey parse_bucket_key(const std::string& name);

// Partitions the report's items by the annotation named by `key` and fills
// report.buckets. Items missing the annotation land in "unannotated".
// pronoun_x_distance uses keys "<pronoun>|<0 or 1+>".
EvalReport bucket_report(const EvalReport& report, BucketKey key);

struct SweepSpec {
  enum class Kind { sentence, token_budget };
  Kind kind = Kind::sentence;
  std::vector<int> rows;  // left_k values, or n values
  std::vector<int> cols;  // right_k values, or l values
  int max_tokens = 250;
  std::string sep = "<sep>";
};

struct SweepGrid {
  SweepSpec spec;
  std::map<std::pair<int, int>, EvalReport> cells;
};

// One score_generative run per grid coordinate. Token-budget grids skip
// coordinates with l > n; every other requested coordinate gets a cell.
SweepGrid context_sweep(const std::vector<GenerativeItem>& items, Engine& engine,
                        const SweepSpec& spec, const MatchConfig& cfg = {},
                        const TokenCounter& counter = whitespace_counter());

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const SweepGrid& grid);

// Aligned-column rendering; pronoun-by-distance buckets come out as a
// matrix with "all" and "sie+er" aggregate rows.
std::string render_report_text(const EvalReport& report);

// Accuracy matrix, rows x cols, with axis labels.
std::string render_sweep_tsv(const SweepGrid& grid);

}  // namespace docmt
