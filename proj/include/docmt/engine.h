#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace docmt {

enum class EngineMode { translate, translate_forced, score };

const char* mode_name(EngineMode mode);
EngineMode parse_mode(const std::string& name);

struct EngineRequest {
  std::string id;
  EngineMode mode = EngineMode::translate;
  std::string input;
  std::optional<std::string> forced_prefix;  // mode translate_forced
  std::optional<std::string> candidate;      // mode score
};

// Flags mark degraded responses: "timeout", "missing-response", "no-score".
// A response with a flag set carries no usable output/logprob.
struct EngineResponse {
  std::string id;
  std::string output;
  std::optional<double> logprob;
  std::vector<std::string> flags;

  bool ok() const { return flags.empty(); }
};

// One response per request, matched by id, returned in request order.
// Engines that cannot score leave logprob unset and flag "no-score".
class Engine {
 public:
  virtual ~Engine() = default;
  virtual std::vector<EngineResponse> run_batch(
      const std::vector<EngineRequest>& requests) = 0;
  virtual bool supports_score() const = 0;
  virtual std::string describe() const = 0;
};

// Deterministic in-process engines for tests and pipeline plumbing.
//
// Common spec fields (JSON): "kind" (copy | lookup | scripted-pronoun),
// "sep" (segment separator, default "<sep>"), optional "score_fn".
//
//   copy              every segment translates to itself.
//   lookup            "table" maps source segment -> target segment;
//                     unknown segments pass through unchanged.
//   scripted-pronoun  "table" maps source segment to either
//                     {"translation": t} or {"template": "... [PRON] ...",
//                     "pronoun": p, "distance": d}; the placeholder becomes
//                     p when the antecedent is reachable (d <= number of
//                     segments before this one in the input, and
//                     d <= "context_window"), else "default_choice".
//
// score_fn: {"kind": "neg_length"} scores -token_count(candidate);
// {"kind": "table", "values": {candidate: logprob}} looks the candidate up
// (miss -> flag "no-score"); {"kind": "hash"} hashes (input, candidate) to a
// value in [-2, -1), a fixed pseudo-random scorer.
//
// Forced-prefix translation emits the prefix verbatim, skips as many input
// segments as the prefix has, and continues by rule.
struct MockEngineSpec {
  std::string kind;
  std::string sep = "<sep>";
  nlohmann::json table = nlohmann::json::object();
  int context_window = 0;
  std::string default_choice;
  std::optional<nlohmann::json> score_fn;

  static MockEngineSpec from_json(const nlohmann::json& j);
  static MockEngineSpec from_file(const std::string& path);
};

std::unique_ptr<Engine> make_mock_engine(const MockEngineSpec& spec);

// Wraps a child process speaking newline-delimited JSON on stdin/stdout:
// {"id","mode","input","forced_prefix","candidate"} per request line,
// {"id","output","logprob"} per response line. The command runs under
// `sh -c`. A batch writes all requests, closes the pipe, and reads until
// every id is answered or the stream ends. No line for timeout_ms (measured
// from the previous line) marks all still-pending requests "timeout" and
// kills the child. A child that exits nonzero with requests pending is a
// hard error (EngineError, partial count included); a clean EOF leaves the
// unanswered ones flagged "missing-response". Unparseable or unknown-id
// lines are skipped.
class SubprocessEngine : public Engine {
 public:
  SubprocessEngine(std::string command,
                   std::vector<std::pair<std::string, std::string>> env = {},
                   int timeout_ms = 60000, bool scoring = true);
  ~SubprocessEngine() override;

  std::vector<EngineResponse> run_batch(
      const std::vector<EngineRequest>& requests) override;
  bool supports_score() const override { return scoring_; }
  std::string describe() const override { return "subprocess:" + command_; }

 private:
  void start();
  void stop();

  std::string command_;
  std::vector<std::pair<std::string, std::string>> env_;
  int timeout_ms_;
  bool scoring_;
  int child_pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
};

// Fans a batch out over several worker engines (disjoint round-robin request
// shards, one thread each) and merges responses back into request order.
// Workers must be independent processes or mocks; results equal a sequential
// run item-for-item.
std::unique_ptr<Engine> make_parallel_engine(
    std::vector<std::unique_ptr<Engine>> workers);

// Builds an engine from the CLI surface: mock_spec "mock:<kind>:<spec-file>"
// or engine_cmd for a subprocess. Exactly one must be given.
std::unique_ptr<Engine> make_engine(
    const std::string& mock_spec, const std::string& engine_cmd,
    const std::vector<std::pair<std::string, std::string>>& env,
    int timeout_ms = 60000);

nlohmann::json to_json(const EngineRequest& request);
EngineRequest request_from_json(const nlohmann::json& j);

}  // namespace docmt
