#include <string>

#include "CLI11.hpp"

#include "docmt/commands.h"
#include "docmt/version.h"

namespace {

void add_engine_options(CLI::App* cmd, docmt::EngineOptions& options) {
  cmd->add_option("--engine", options.mock,
                  "mock engine spec: mock:<kind>[:<spec-file>]");
  cmd->add_option("--engine-cmd", options.command,
                  "shell command for a subprocess engine (NDJSON on stdin/stdout)");
  cmd->add_option("--engine-env", options.env,
                  "KEY=VAL passed into the engine process (repeatable)");
  cmd->add_option("--timeout-ms", options.timeout_ms,
                  "per-response-line timeout for subprocess engines");
  cmd->add_option("--jobs", options.jobs,
                  "parallel engine processes over disjoint request shards");
}

void add_match_options(CLI::App* cmd, bool& case_sensitive, bool& keep_edge_punct,
                       std::string& scope) {
  cmd->add_flag("--case-sensitive", case_sensitive,
                "match phrases case-sensitively");
  cmd->add_flag("--keep-edge-punct", keep_edge_punct,
                "do not strip edge punctuation before matching");
  cmd->add_option("--scope", scope, "match scope: payload or full_output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"document-context MT sampling and evaluation toolkit"};
  app.set_version_flag("--version", docmt::kVersion);
  app.set_config("--config", "", "read options from a config file");
  app.require_subcommand(1);

  docmt::SampleOptions sample_opt;
  auto* sample = app.add_subcommand(
      "sample", "draw training samples from sentence and document pools");
  sample->add_option("--pool", sample_opt.pools,
                     "name:file.tsv[:docs] or name:src,trg[,docids][:docs]; "
                     ":docs makes it a document pool")
      ->required();
  sample->add_option("--pool-weight", sample_opt.weights,
                     "name=W relative draw weight (default 1)");
  sample->add_option("--max-len", sample_opt.max_len,
                     "max source tokens per sample (L)");
  sample->add_option("--sep", sample_opt.sep, "segment separator token");
  sample->add_option("--seed", sample_opt.seed, "RNG seed");
  sample->add_option("--virtual-epoch-tokens", sample_opt.virtual_epoch_tokens,
                     "target tokens per virtual epoch");
  sample->add_option("--shard-size", sample_opt.shard_size,
                     "sentences per shard");
  sample->add_option("--passes", sample_opt.passes,
                     "full passes over the pools");
  sample->add_option("--limit", sample_opt.limit,
                     "stop after this many samples (0 = run passes out)");
  sample->add_option("--out", sample_opt.out, "sample JSONL path, or - for stdout");
  sample->add_option("--plain-prefix", sample_opt.plain_prefix,
                     "also write <prefix>.src and <prefix>.trg");

  docmt::ConvertOptions convert_opt;
  auto* convert = app.add_subcommand(
      "convert", "convert a contrastive test set to generative JSONL");
  convert->add_option("--in", convert_opt.in, "input test set")->required();
  convert->add_option("--schema", convert_opt.schema,
                      "contrapro | contrawsd | discevalmt | gtwic | generic-jsonl");
  convert->add_option("--out", convert_opt.out, "output JSONL, or - for stdout");
  convert->add_option("--sep", convert_opt.sep, "separator for forced prefixes");
  convert->add_flag("--warn-tokenization", convert_opt.warn_tokenization,
                    "warn when inputs look tokenized");

  docmt::ScoreOptions score_opt;
  auto* score = app.add_subcommand("score", "evaluate an engine on a test set");
  score->add_option("--in", score_opt.in, "test set input")->required();
  score->add_option("--schema", score_opt.schema,
                    "schema of a contrastive input (omit for generative JSONL)");
  score->add_option("--metric", score_opt.metric,
                    "genpro | genpro-forced | contrastive");
  score->add_option("--policy", score_opt.policy,
                    "context window: left:L | window:LEFT,RIGHT | budget:N,L");
  score->add_option("--sep", score_opt.sep,
                    "segment separator; empty string = separator-free mode");
  score->add_option("--bucket", score_opt.bucket,
                    "report buckets: distance | pronoun | pronoun-distance | "
                    "phenomenon");
  add_match_options(score, score_opt.case_sensitive, score_opt.keep_edge_punct,
                    score_opt.scope);
  score->add_option("--out", score_opt.out, "report JSON, or - for stdout");
  score->add_option("--text-out", score_opt.text_out,
                    "also render an aligned-text report");
  add_engine_options(score, score_opt.engine);

  docmt::SweepOptions sweep_opt;
  auto* sweep = app.add_subcommand(
      "sweep", "grid of generative scores over context windows");
  sweep->add_option("--in", sweep_opt.in, "generative JSONL input")->required();
  sweep->add_option("--schema", sweep_opt.schema,
                    "schema of a contrastive input (omit for generative JSONL)");
  sweep->add_option("--grid", sweep_opt.grid, "sentence | budget");
  sweep->add_option("--rows", sweep_opt.rows,
                    "row values: left sentences, or total budgets n");
  sweep->add_option("--cols", sweep_opt.cols,
                    "column values: right sentences, or left budgets l");
  sweep->add_option("--max-tokens", sweep_opt.max_tokens,
                    "token cap for sentence windows");
  sweep->add_option("--sep", sweep_opt.sep, "segment separator");
  add_match_options(sweep, sweep_opt.case_sensitive, sweep_opt.keep_edge_punct,
                    sweep_opt.scope);
  sweep->add_option("--out", sweep_opt.out, "TSV grid, or - for stdout");
  sweep->add_option("--json-out", sweep_opt.json_out, "grid as JSON");
  add_engine_options(sweep, sweep_opt.engine);

  docmt::ShiftOptions shift_opt;
  auto* shift = app.add_subcommand(
      "shift", "build the test set shifted past each payload sentence");
  shift->add_option("--in", shift_opt.in, "contrastive test set")->required();
  shift->add_option("--schema", shift_opt.schema,
                    "contrapro | contrawsd | discevalmt | gtwic | generic-jsonl");
  shift->add_option("--offset", shift_opt.offset,
                    "sentences past the payload (0 = identity)");
  shift->add_option("--out-prefix", shift_opt.out_prefix,
                    "writes <prefix>.src, <prefix>.ref, <prefix>.jsonl")
      ->required();
  shift->add_flag("--warn-tokenization", shift_opt.warn_tokenization,
                  "warn when inputs look tokenized");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (*sample)
    return docmt::run_mapped([&] { return docmt::cmd_sample(sample_opt); });
  if (*convert)
    return docmt::run_mapped([&] { return docmt::cmd_convert(convert_opt); });
  if (*score)
    return docmt::run_mapped([&] { return docmt::cmd_score(score_opt); });
  if (*sweep)
    return docmt::run_mapped([&] { return docmt::cmd_sweep(sweep_opt); });
  if (*shift)
    return docmt::run_mapped([&] { return docmt::cmd_shift(shift_opt); });
  return 1;
}
