#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace docmt {

struct EngineOptions {
  std::string mock;                   // "mock:<kind>[:<spec-file>]"
  std::string command;                // shell command for a subprocess engine
  std::vector<std::string> env;       // "KEY=VAL" pass-through entries
  int timeout_ms = 60000;
  int jobs = 1;                       // parallel engine processes
};

struct SampleOptions {
  std::vector<std::string> pools;     // "name:file.tsv[:docs]" or
                                      // "name:src,trg[,docids][:docs]"
  std::vector<std::string> weights;   // "name=W"
  int max_len = 250;
  std::string sep = "<sep>";
  std::uint64_t seed = 1;
  long long virtual_epoch_tokens = 1000000000LL;
  int shard_size = 100000;
  int passes = 1;
  long long limit = 0;                // stop after this many samples; 0 = off
  std::string out;                    // sample JSONL; "-" = stdout
  std::string plain_prefix;           // also write <prefix>.src/.trg
};

struct ConvertOptions {
  std::string in;
  std::string schema;                 // required unless input is already generative
  std::string out;                    // "-" = stdout
  std::string sep = "<sep>";
  bool warn_tokenization = false;
};

struct ScoreOptions {
  std::string in;
  std::string schema;                 // contrastive-schema input; empty = sniff
  std::string metric = "genpro";      // genpro | genpro-forced | contrastive
  std::string policy = "left:250";    // left:L | window:LEFT,RIGHT | budget:N,L
  std::string sep = "<sep>";
  std::string bucket;                 // distance | pronoun | pronoun-distance | phenomenon
  bool case_sensitive = false;
  bool keep_edge_punct = false;
  std::string scope = "payload";      // payload | full_output
  std::string out;                    // report JSON; "-" = stdout
  std::string text_out;               // optional aligned-text rendering
  EngineOptions engine;
};

struct SweepOptions {
  std::string in;
  std::string schema;
  std::string grid = "sentence";      // sentence | budget
  std::vector<int> rows;              // left_k values, or n values
  std::vector<int> cols;              // right_k values, or l values
  int max_tokens = 250;
  std::string sep = "<sep>";
  std::string scope = "payload";
  bool case_sensitive = false;
  bool keep_edge_punct = false;
  std::string out;                    // TSV; "-" = stdout
  std::string json_out;
  EngineOptions engine;
};

struct ShiftOptions {
  std::string in;
  std::string schema = "generic-jsonl";
  int offset = 1;
  std::string out_prefix;             // writes <prefix>.src/.ref/.jsonl
  bool warn_tokenization = false;
};

int cmd_sample(const SampleOptions& options);
int cmd_convert(const ConvertOptions& options);
int cmd_score(const ScoreOptions& options);
int cmd_sweep(const SweepOptions& options);
int cmd_shift(const ShiftOptions& options);

// Runs fn and maps the error hierarchy onto the exit contract:
// 0 success, 1 validation, 2 engine failure, 3 I/O.
int run_mapped(const std::function<int()>& fn);

}  // namespace docmt
