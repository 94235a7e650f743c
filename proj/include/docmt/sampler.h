#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "docmt/corpus.h"
#include "docmt/rng.h"
#include "docmt/tokenize.h"

namespace docmt {

// A data source for sampling. When doc_flag is false every emitted sample is
// a single sentence pair; when true, consecutive in-document sentences are
// merged up to a drawn length.
struct Pool {
  std::string name;
  Corpus corpus;
  bool doc_flag = false;
  int weight = 1;  // relative draw weight; defaults give a 1:1 ratio
};

struct SamplerConfig {
  int max_sample_len = 250;                       // L, in source tokens
  std::string sep = "<sep>";
  long long virtual_epoch_tokens = 1000000000LL;  // 1e9 target tokens
  std::uint64_t seed = 0;
  TokenCounter counter = whitespace_counter();
};

struct TrainingSample {
  std::string source_text;  // segments joined by sep
  std::string target_text;
  int n_segments = 0;
  std::string pool_name;
  std::string doc_id;
  int drawn_l = 0;  // 0 for single-sentence pools (no length draw)
};

struct EpochCounter {
  long long target_tokens_emitted = 0;
  long long epochs_completed = 0;  // floor(emitted / virtual_epoch_tokens)
};

// `s1 SEP s2 SEP ... sk` with single spaces around the separator; applied to
// both sides so the separator counts match. Throws if the separator occurs
// inside a sentence (the concatenation must stay invertible).
std::pair<std::string, std::string> join_segments(
    const std::vector<SentencePair>& pairs, const std::string& sep);

std::string join_segments(const std::vector<std::string>& sentences,
                          const std::string& sep);

// Inverse of join_segments: splits on the separator and trims whitespace
// around each piece. Text without the separator is a single segment. An
// empty separator splits nothing.
std::vector<std::string> split_segments(const std::string& text,
                                        const std::string& sep);

// Draws training samples from a set of pools:
//   1. choose a pool (weighted-uniform over pools with unconsumed data);
//   2. if that pool has no active shard, choose one uniformly from its
//      not-yet-selected shards; the shard is then read to exhaustion via its
//      cursor before another is picked;
//   3. doc pools: draw l uniform from {1..L} and merge consecutive pairs
//      from the cursor until the accumulated source token count reaches l
//      (checked after adding each sentence, so the triggering sentence is
//      included) or the document ends; the first pair is always included;
//   4. sentence pools: emit the next pair alone.
//
// RNG draw order per sample, fixed so an external simulator can replay the
// stream: pool index (skipped when only one pool has data), then shard index
// (skipped when the pool has an active shard or exactly one shard remains),
// then l (doc pools only). Each is one uniform_int call on Rng.
class Sampler {
public:
  Sampler(std::vector<Pool> pools, SamplerConfig config);

  // One step of the procedure above; nullopt once every pool is exhausted.
  std::optional<TrainingSample> draw();

  // Rewinds all cursors and shard sets for another pass. The RNG is not
  // reseeded, so successive passes sample different shard orders.
  void start_pass();

  const EpochCounter& epochs() const { return epochs_; }
  const std::vector<Pool>& pools() const { return pools_; }

private:
  struct PoolState {
    std::optional<std::size_t> active_shard;
    std::vector<std::size_t> remaining;  // shard indices never selected
  };

  bool pool_has_data(std::size_t i) const;
  TrainingSample draw_from(std::size_t pool_index);

  std::vector<Pool> pools_;
  std::vector<PoolState> state_;
  SamplerConfig config_;
  Rng rng_;
  EpochCounter epochs_;
};

// Validates a pool set against a config: the separator must be non-empty,
// whitespace-free, and absent from every sentence on both sides.
void validate_pools(const std::vector<Pool>& pools, const SamplerConfig& config);

}  // namespace docmt
