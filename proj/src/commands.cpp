#include "docmt/commands.h"

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "json.hpp"

#include "docmt/context.h"
#include "docmt/corpus.h"
#include "docmt/engine.h"
#include "docmt/error.h"
#include "docmt/manifest.h"
#include "docmt/sampler.h"
#include "docmt/scoring.h"
#include "docmt/testset.h"

namespace docmt {

using nlohmann::json;

namespace {

std::vector<std::string> split_on(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == sep) {
      parts.push_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

// Writes either to a file or, for "-", to stdout.
class OutputStream {
 public:
  explicit OutputStream(const std::string& path) : path_(path) {
    if (!to_stdout()) {
      file_.open(path, std::ios::binary);
      if (!file_)
        throw IoError("cannot write " + path);
    }
  }
  std::ostream& get() { return to_stdout() ? std::cout : file_; }
  bool to_stdout() const { return path_.empty() || path_ == "-"; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream file_;
};

struct ParsedPool {
  Pool pool;
  std::vector<std::string> files;
};

ParsedPool parse_pool_spec(const std::string& spec, int shard_size) {
  auto first = spec.find(':');
  if (first == std::string::npos || first == 0)
    throw ValidationError("pool spec must look like name:files[:docs], got: " + spec);
  std::string name = spec.substr(0, first);
  std::string rest = spec.substr(first + 1);
  bool docs = false;
  const std::string kDocsSuffix = ":docs";
  if (rest.size() > kDocsSuffix.size() &&
      rest.compare(rest.size() - kDocsSuffix.size(), kDocsSuffix.size(),
                   kDocsSuffix) == 0) {
    docs = true;
    rest.resize(rest.size() - kDocsSuffix.size());
  }
  auto paths = split_on(rest, ',');
  ParsedPool parsed;
  Corpus corpus;
  if (paths.size() == 1) {
    corpus = load_corpus(paths[0], "", "", CorpusFormat::tsv);
    parsed.files = {paths[0]};
  } else if (paths.size() == 2 || paths.size() == 3) {
    std::string docids = paths.size() == 3 ? paths[2] : "";
    corpus = load_corpus(paths[0], paths[1], docids, CorpusFormat::parallel_files);
    parsed.files = paths;
  } else {
    throw ValidationError("pool " + name +
                          ": expected one TSV path or src,trg[,docids] paths");
  }
  corpus.name = name;
  corpus = shard_corpus(std::move(corpus), static_cast<std::size_t>(shard_size));
  parsed.pool = Pool{name, std::move(corpus), docs, 1};
  return parsed;
}

void apply_pool_weights(std::vector<Pool>& pools,
                        const std::vector<std::string>& weights) {
  for (const auto& entry : weights) {
    auto eq = entry.find('=');
    if (eq == std::string::npos)
      throw ValidationError("pool weight must look like name=W, got: " + entry);
    std::string name = entry.substr(0, eq);
    int value = std::stoi(entry.substr(eq + 1));
    bool found = false;
    for (auto& pool : pools) {
      if (pool.name == name) {
        pool.weight = value;
        found = true;
      }
    }
    if (!found)
      throw ValidationError("pool weight names unknown pool: " + name);
  }
}

std::vector<std::pair<std::string, std::string>> parse_env(
    const std::vector<std::string>& entries) {
  std::vector<std::pair<std::string, std::string>> env;
  for (const auto& entry : entries) {
    auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ValidationError("engine env entry must look like KEY=VAL, got: " + entry);
    env.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
  }
  return env;
}

std::unique_ptr<Engine> build_engine(const EngineOptions& options) {
  auto env = parse_env(options.env);
  int jobs = std::max(1, options.jobs);
  if (jobs == 1)
    return make_engine(options.mock, options.command, env, options.timeout_ms);
  std::vector<std::unique_ptr<Engine>> workers;
  workers.reserve(static_cast<std::size_t>(jobs));
  for (int i = 0; i < jobs; ++i)
    workers.push_back(make_engine(options.mock, options.command, env,
                                  options.timeout_ms));
  return make_parallel_engine(std::move(workers));
}

WindowPolicy parse_policy(const std::string& text, const std::string& sep) {
  auto colon = text.find(':');
  std::string kind = text.substr(0, colon == std::string::npos ? text.size() : colon);
  std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "left") {
    int L = args.empty() ? 250 : std::stoi(args);
    return WindowPolicy::left(L, sep);
  }
  if (kind == "window") {
    auto parts = split_on(args, ',');
    if (parts.size() != 2)
      throw ValidationError("window policy needs LEFT,RIGHT, got: " + text);
    return WindowPolicy::window(std::stoi(parts[0]), std::stoi(parts[1]), sep);
  }
  if (kind == "budget") {
    auto parts = split_on(args, ',');
    if (parts.size() != 2)
      throw ValidationError("budget policy needs N,L, got: " + text);
    return WindowPolicy::budget(std::stoi(parts[0]), std::stoi(parts[1]), sep);
  }
  throw ValidationError("unknown policy kind: " + text);
}

MatchConfig make_match_config(bool case_sensitive, bool keep_edge_punct,
                              const std::string& scope) {
  MatchConfig cfg;
  cfg.case_insensitive = !case_sensitive;
  cfg.strip_edge_punct = !keep_edge_punct;
  if (scope == "payload")
    cfg.scope = MatchConfig::Scope::payload;
  else if (scope == "full_output" || scope == "full")
    cfg.scope = MatchConfig::Scope::full_output;
  else
    throw ValidationError("unknown match scope: " + scope);
  return cfg;
}

// An input whose first line is a JSON object with "good_phrases" is already
// in the generative format; conversion passes it through, which makes
// convert idempotent.
bool sniff_generative(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty())
      continue;
    json j = json::parse(line, nullptr, false);
    return j.is_object() && j.contains("good_phrases");
  }
  return false;
}

std::vector<GenerativeItem> load_generative_input(const std::string& path,
                                                  const std::string& schema,
                                                  const std::string& sep,
                                                  bool warn_tokenization) {
  if (sniff_generative(path))
    return load_generative_jsonl(path);
  if (schema.empty())
    throw ValidationError(path +
                          " is not generative JSONL; give --schema to convert "
                          "a contrastive test set on the fly");
  auto items = load_contrastive(path, parse_schema(schema), warn_tokenization);
  return to_generative(items, sep);
}

void write_manifest_for(const std::string& primary_output,
                        const std::string& command, const json& config,
                        const std::vector<std::string>& inputs,
                        const std::vector<std::string>& outputs,
                        const json& stats) {
  if (primary_output.empty() || primary_output == "-")
    return;  // streaming to stdout leaves nothing to fingerprint
  write_manifest(primary_output + ".manifest.json",
                 make_manifest(command, config, inputs, outputs, stats));
}

}  // namespace

int cmd_sample(const SampleOptions& options) {
  if (options.pools.empty())
    throw ValidationError("sample needs at least one --pool");
  if (options.out.empty() && options.plain_prefix.empty())
    throw ValidationError("sample needs --out or --plain-prefix");

  std::vector<Pool> pools;
  std::vector<std::string> input_files;
  for (const auto& spec : options.pools) {
    auto parsed = parse_pool_spec(spec, options.shard_size);
    input_files.insert(input_files.end(), parsed.files.begin(), parsed.files.end());
    pools.push_back(std::move(parsed.pool));
  }
  apply_pool_weights(pools, options.weights);

  SamplerConfig config;
  config.max_sample_len = options.max_len;
  config.sep = options.sep;
  config.virtual_epoch_tokens = options.virtual_epoch_tokens;
  config.seed = options.seed;
  Sampler sampler(std::move(pools), config);

  std::optional<OutputStream> jsonl;
  if (!options.out.empty())
    jsonl.emplace(options.out);
  std::ofstream plain_src, plain_trg;
  if (!options.plain_prefix.empty()) {
    plain_src.open(options.plain_prefix + ".src", std::ios::binary);
    plain_trg.open(options.plain_prefix + ".trg", std::ios::binary);
    if (!plain_src || !plain_trg)
      throw IoError("cannot write " + options.plain_prefix + ".src/.trg");
  }

  long long total = 0;
  std::map<std::string, long long> per_pool;
  bool capped = false;
  for (int pass = 0; pass < options.passes && !capped; ++pass) {
    if (pass > 0)
      sampler.start_pass();
    while (auto sample = sampler.draw()) {
      if (jsonl) {
        json j;
        j["src"] = sample->source_text;
        j["trg"] = sample->target_text;
        j["n_segments"] = sample->n_segments;
        j["pool"] = sample->pool_name;
        j["doc_id"] = sample->doc_id;
        j["l"] = sample->drawn_l;
        jsonl->get() << j.dump() << '\n';
      }
      if (plain_src.is_open()) {
        plain_src << sample->source_text << '\n';
        plain_trg << sample->target_text << '\n';
      }
      ++total;
      ++per_pool[sample->pool_name];
      if (options.limit > 0 && total >= options.limit) {
        capped = true;
        break;
      }
    }
  }
  if (jsonl && !jsonl->to_stdout())
    jsonl->get().flush();
  plain_src.close();
  plain_trg.close();

  json config_json;
  config_json["pools"] = options.pools;
  config_json["weights"] = options.weights;
  config_json["max_len"] = options.max_len;
  config_json["sep"] = options.sep;
  config_json["seed"] = options.seed;
  config_json["virtual_epoch_tokens"] = options.virtual_epoch_tokens;
  config_json["shard_size"] = options.shard_size;
  config_json["passes"] = options.passes;
  config_json["limit"] = options.limit;

  json stats;
  stats["samples"] = total;
  stats["per_pool"] = per_pool;
  stats["target_tokens_emitted"] = sampler.epochs().target_tokens_emitted;
  stats["epochs_completed"] = sampler.epochs().epochs_completed;

  std::vector<std::string> outputs;
  if (jsonl && !jsonl->to_stdout())
    outputs.push_back(options.out);
  if (!options.plain_prefix.empty()) {
    outputs.push_back(options.plain_prefix + ".src");
    outputs.push_back(options.plain_prefix + ".trg");
  }
  std::string primary =
      (jsonl && !jsonl->to_stdout()) ? options.out : options.plain_prefix;
  write_manifest_for(primary, "sample", config_json, input_files, outputs, stats);
  return 0;
}

int cmd_convert(const ConvertOptions& options) {
  std::vector<GenerativeItem> items;
  std::size_t contrastive_in = 0;
  if (sniff_generative(options.in)) {
    items = load_generative_jsonl(options.in);
  } else {
    if (options.schema.empty())
      throw ValidationError("--schema is required unless the input is already "
                            "generative JSONL");
    auto loaded = load_contrastive(options.in, parse_schema(options.schema),
                                   options.warn_tokenization);
    contrastive_in = loaded.size();
    items = to_generative(loaded, options.sep);
  }
  OutputStream out(options.out);
  write_generative_jsonl(items, out.get());
  out.get().flush();

  json config_json;
  config_json["in"] = options.in;
  config_json["schema"] = options.schema;
  config_json["sep"] = options.sep;
  json stats;
  stats["items_in"] = contrastive_in == 0 ? items.size() : contrastive_in;
  stats["items_out"] = items.size();
  if (!out.to_stdout())
    write_manifest_for(options.out, "convert", config_json, {options.in},
                       {options.out}, stats);
  return 0;
}

int cmd_score(const ScoreOptions& options) {
  auto cfg = make_match_config(options.case_sensitive, options.keep_edge_punct,
                               options.scope);
  auto engine = build_engine(options.engine);

  EvalReport report;
  if (options.metric == "contrastive") {
    std::string schema = options.schema.empty() ? "generic-jsonl" : options.schema;
    auto items = load_contrastive(options.in, parse_schema(schema));
    report = score_contrastive(items, *engine, cfg, options.sep);
  } else if (options.metric == "genpro") {
    auto items = load_generative_input(options.in, options.schema, options.sep,
                                       false);
    auto policy = parse_policy(options.policy, options.sep);
    report = score_generative(items, *engine, policy, cfg);
  } else if (options.metric == "genpro-forced") {
    auto items = load_generative_input(options.in, options.schema, options.sep,
                                       false);
    report = score_generative_forced(items, *engine, cfg, options.sep);
  } else {
    throw ValidationError("unknown metric: " + options.metric);
  }

  if (!options.bucket.empty())
    report = bucket_report(report, parse_bucket_key(options.bucket));

  OutputStream out(options.out);
  out.get() << to_json(report).dump(2) << '\n';
  out.get().flush();
  if (!options.text_out.empty()) {
    OutputStream text(options.text_out);
    text.get() << render_report_text(report);
    text.get().flush();
  }

  json config_json;
  config_json["in"] = options.in;
  config_json["schema"] = options.schema;
  config_json["metric"] = options.metric;
  config_json["policy"] = options.policy;
  config_json["sep"] = options.sep;
  config_json["bucket"] = options.bucket;
  config_json["case_sensitive"] = options.case_sensitive;
  config_json["keep_edge_punct"] = options.keep_edge_punct;
  config_json["scope"] = options.scope;
  config_json["engine"] = engine->describe();
  config_json["jobs"] = options.engine.jobs;

  json stats;
  stats["n_items"] = report.n_items;
  stats["n_correct"] = report.n_correct;
  stats["accuracy"] = report.accuracy;
  stats["skipped"] = report.skipped;
  stats["flags"] = report.flags_histogram;

  if (!out.to_stdout()) {
    std::vector<std::string> outputs = {options.out};
    if (!options.text_out.empty() && options.text_out != "-")
      outputs.push_back(options.text_out);
    write_manifest_for(options.out, "score", config_json, {options.in}, outputs,
                       stats);
  }
  return 0;
}

int cmd_sweep(const SweepOptions& options) {
  auto cfg = make_match_config(options.case_sensitive, options.keep_edge_punct,
                               options.scope);
  auto engine = build_engine(options.engine);
  auto items = load_generative_input(options.in, options.schema, options.sep,
                                     false);

  SweepSpec spec;
  if (options.grid == "sentence")
    spec.kind = SweepSpec::Kind::sentence;
  else if (options.grid == "budget" || options.grid == "token_budget")
    spec.kind = SweepSpec::Kind::token_budget;
  else
    throw ValidationError("unknown grid kind: " + options.grid);
  spec.rows = options.rows;
  spec.cols = options.cols;
  if (spec.rows.empty() || spec.cols.empty()) {
    if (spec.kind != SweepSpec::Kind::sentence)
      throw ValidationError("budget grids need explicit --rows and --cols");
    spec.rows = {0, 1, 2, 3, 4};
    spec.cols = {0, 1, 2, 3, 4};
  }
  spec.max_tokens = options.max_tokens;
  spec.sep = options.sep;

  auto grid = context_sweep(items, *engine, spec, cfg);

  OutputStream out(options.out);
  out.get() << render_sweep_tsv(grid);
  out.get().flush();
  if (!options.json_out.empty()) {
    OutputStream jout(options.json_out);
    jout.get() << to_json(grid).dump(2) << '\n';
    jout.get().flush();
  }

  json config_json;
  config_json["in"] = options.in;
  config_json["schema"] = options.schema;
  config_json["grid"] = options.grid;
  config_json["rows"] = spec.rows;
  config_json["cols"] = spec.cols;
  config_json["max_tokens"] = options.max_tokens;
  config_json["sep"] = options.sep;
  config_json["scope"] = options.scope;
  config_json["engine"] = engine->describe();

  json stats;
  stats["cells"] = grid.cells.size();
  stats["items"] = items.size();

  if (!out.to_stdout()) {
    std::vector<std::string> outputs = {options.out};
    if (!options.json_out.empty() && options.json_out != "-")
      outputs.push_back(options.json_out);
    write_manifest_for(options.out, "sweep", config_json, {options.in}, outputs,
                       stats);
  }
  return 0;
}

int cmd_shift(const ShiftOptions& options) {
  if (options.out_prefix.empty())
    throw ValidationError("shift needs --out-prefix");
  auto items = load_contrastive(options.in, parse_schema(options.schema),
                                options.warn_tokenization);
  auto result = shift_testset(items, options.offset);

  std::string src_path = options.out_prefix + ".src";
  std::string ref_path = options.out_prefix + ".ref";
  std::string jsonl_path = options.out_prefix + ".jsonl";
  write_shifted_files(result, src_path, ref_path);
  {
    std::ofstream jout(jsonl_path, std::ios::binary);
    if (!jout)
      throw IoError("cannot write " + jsonl_path);
    for (const auto& pair : result.pairs) {
      json j;
      j["src_context"] = pair.src_context;
      j["src"] = pair.src;
      j["ref"] = pair.ref;
      jout << j.dump() << '\n';
    }
  }

  json config_json;
  config_json["in"] = options.in;
  config_json["schema"] = options.schema;
  config_json["offset"] = options.offset;

  json stats;
  stats["pairs"] = result.pairs.size();
  stats["dropped"] = result.dropped;

  write_manifest_for(src_path, "shift", config_json, {options.in},
                     {src_path, ref_path, jsonl_path}, stats);
  return 0;
}

int run_mapped(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const EngineError& e) {
    std::cerr << "engine error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace docmt
