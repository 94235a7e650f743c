#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "docmt/tokenize.h"

namespace docmt {

// One parallel line. Documents are maximal runs of equal consecutive doc_id;
// index_in_doc is consecutive from 0 within each document.
struct SentencePair {
  std::string source;
  std::string target;
  std::string doc_id;
  int index_in_doc = 0;
};

struct Document {
  std::string id;
  std::vector<SentencePair> pairs;
};

// Order-preserving slice of a corpus with an independent read cursor. The
// cursor belongs to exactly one reader at a time.
struct Shard {
  int id = 0;
  std::vector<SentencePair> pairs;
  std::size_t cursor = 0;
};

struct Corpus {
  std::string name;
  std::vector<Shard> shards;
  long long target_token_count = 0;  // raw target tokens, for epoch estimates
  int split_documents = 0;           // documents cut by a shard boundary

  std::size_t line_count() const;
};

inline constexpr std::size_t kDefaultShardSize = 100000;

enum class CorpusFormat { tsv, parallel_files };

// Loads a corpus as a single shard; use shard_corpus to slice it.
//
// parallel_files: source_path/target_path/docids_path hold aligned lines.
// An empty docids_path makes every line its own single-sentence document.
// tsv: source_path is the file, `source \t target \t doc_id` per line
// (doc_id column optional); the other two paths are ignored.
//
// Lines are UTF-8, LF-terminated; a trailing CR is stripped. A source line
// that is empty after whitespace trimming is rejected.
Corpus load_corpus(const std::string& source_path,
                   const std::string& target_path,
                   const std::string& docids_path,
                   CorpusFormat format,
                   const TokenCounter& counter = whitespace_counter());

// Re-slices into shards of `shard_size` lines (all full except possibly the
// last). A document straddling a boundary becomes two documents, one per
// shard, each renumbered from 0; the corpus line order is untouched.
Corpus shard_corpus(Corpus corpus, std::size_t shard_size);

// Returns the pair at the cursor and advances it; nullptr at end-of-shard.
const SentencePair* next_pair(Shard& shard);

// Shard-local documents (maximal doc_id runs within the shard).
std::vector<Document> documents(const Shard& shard);
std::vector<Document> documents(const Corpus& corpus);

}  // namespace docmt
