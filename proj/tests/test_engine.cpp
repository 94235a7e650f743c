#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <string>
#include <vector>

#include "docmt/engine.h"
#include "docmt/error.h"
#include "test_util.h"

using namespace docmt;
using nlohmann::json;

namespace {

std::string engine_script(const std::string& behavior) {
  return "python3 " TEST_ENGINE_DIR "/engine.py " + behavior;
}

EngineRequest translate_req(const std::string& id, const std::string& input) {
  EngineRequest r;
  r.id = id;
  r.mode = EngineMode::translate;
  r.input = input;
  return r;
}

EngineRequest forced_req(const std::string& id, const std::string& input,
                         const std::string& prefix) {
  EngineRequest r;
  r.id = id;
  r.mode = EngineMode::translate_forced;
  r.input = input;
  r.forced_prefix = prefix;
  return r;
}

EngineRequest score_req(const std::string& id, const std::string& input,
                        const std::string& candidate) {
  EngineRequest r;
  r.id = id;
  r.mode = EngineMode::score;
  r.input = input;
  r.candidate = candidate;
  return r;
}

std::unique_ptr<Engine> copy_engine() {
  MockEngineSpec spec;
  spec.kind = "copy";
  return make_mock_engine(spec);
}

}  // namespace

TEST_CASE("request json carries exactly the optional fields its mode needs") {
  auto j = to_json(forced_req("r1", "in", "pfx"));
  CHECK(j["mode"] == "translate_forced");
  CHECK(j["forced_prefix"] == "pfx");
  CHECK_FALSE(j.contains("candidate"));
  auto back = request_from_json(j);
  CHECK(back.id == "r1");
  CHECK(back.mode == EngineMode::translate_forced);
  CHECK(back.forced_prefix == "pfx");

  CHECK(parse_mode("score") == EngineMode::score);
  CHECK_THROWS_AS(parse_mode("paraphrase"), ValidationError);
  CHECK(std::string(mode_name(EngineMode::translate)) == "translate");
}

TEST_CASE("batch validation ties optional fields to the mode") {
  auto engine = copy_engine();
  auto bad_translate = translate_req("x", "in");
  bad_translate.forced_prefix = "oops";
  CHECK_THROWS_AS(engine->run_batch({bad_translate}), ValidationError);

  auto bad_score = score_req("x", "in", "cand");
  bad_score.candidate.reset();
  CHECK_THROWS_AS(engine->run_batch({bad_score}), ValidationError);

  auto bad_forced = forced_req("x", "in", "pfx");
  bad_forced.candidate = "extra";
  CHECK_THROWS_AS(engine->run_batch({bad_forced}), ValidationError);
}

TEST_CASE("copy mock translates every segment to itself") {
  auto engine = copy_engine();
  auto rs = engine->run_batch({translate_req("a", "eins <sep> zwei <sep> drei")});
  REQUIRE(rs.size() == 1);
  CHECK(rs[0].output == "eins <sep> zwei <sep> drei");
  CHECK(rs[0].ok());
  CHECK_FALSE(engine->supports_score());
  CHECK(engine->describe() == "mock:copy");

  // score mode without a score_fn degrades to a flagged response
  auto scored = engine->run_batch({score_req("s", "in", "cand")});
  CHECK(scored[0].flags == std::vector<std::string>{"no-score"});
  CHECK_FALSE(scored[0].logprob.has_value());
}

TEST_CASE("lookup mock maps known segments and echoes unknown ones") {
  MockEngineSpec spec;
  spec.kind = "lookup";
  spec.table = {{"guten Morgen", "good morning"}, {"danke", "thanks"}};
  auto engine = make_mock_engine(spec);
  auto rs = engine->run_batch(
      {translate_req("a", "guten Morgen <sep> hmm <sep> danke")});
  CHECK(rs[0].output == "good morning <sep> hmm <sep> thanks");
}

TEST_CASE("scripted mock resolves the pronoun only when the antecedent is visible") {
  MockEngineSpec spec;
  spec.kind = "scripted-pronoun";
  spec.context_window = 2;
  spec.default_choice = "es";
  spec.table = {
      {"ctx A", "Kontext A"},
      {"ctx B", {{"translation", "Kontext B"}}},
      {"it is red", {{"template", "[PRON] ist rot"}, {"pronoun", "er"}, {"distance", 2}}},
      {"it is new", {{"template", "[PRON] ist neu"}, {"pronoun", "sie"}, {"distance", 0}}},
  };
  auto engine = make_mock_engine(spec);

  auto full = engine->run_batch({translate_req("a", "ctx A <sep> ctx B <sep> it is red")});
  CHECK(full[0].output == "Kontext A <sep> Kontext B <sep> er ist rot");

  // one context segment: distance 2 out of reach
  auto near = engine->run_batch({translate_req("b", "ctx B <sep> it is red")});
  CHECK(near[0].output == "Kontext B <sep> es ist rot");

  // distance 0 resolves with no context at all
  auto zero = engine->run_batch({translate_req("c", "it is new")});
  CHECK(zero[0].output == "sie ist neu");

  // the engine's own window caps reachability regardless of input size
  spec.context_window = 1;
  auto capped = make_mock_engine(spec)->run_batch(
      {translate_req("d", "ctx A <sep> ctx B <sep> it is red")});
  CHECK(capped[0].output == "Kontext A <sep> Kontext B <sep> es ist rot");
}

TEST_CASE("mock forced translation keeps the prefix and continues by rule") {
  MockEngineSpec spec;
  spec.kind = "lookup";
  spec.table = {{"s1", "t1"}, {"s2", "t2"}, {"s3", "t3"}};
  auto engine = make_mock_engine(spec);

  auto rs = engine->run_batch(
      {forced_req("a", "s1 <sep> s2 <sep> s3", "T1 <sep> T2")});
  CHECK(rs[0].output == "T1 <sep> T2 t3");

  // prefix covering everything is returned as-is
  auto all = engine->run_batch({forced_req("b", "s1", "X <sep> Y")});
  CHECK(all[0].output == "X <sep> Y");

  // empty prefix behaves like plain translation
  auto none = engine->run_batch({forced_req("c", "s1 <sep> s2", "")});
  CHECK(none[0].output == "t1 <sep> t2");
}

TEST_CASE("mock score functions") {
  MockEngineSpec spec;
  spec.kind = "copy";

  SUBCASE("neg_length scores minus the token count") {
    spec.score_fn = json{{"kind", "neg_length"}};
    auto engine = make_mock_engine(spec);
    CHECK(engine->supports_score());
    auto rs = engine->run_batch({score_req("a", "in", "drei kleine Worte")});
    CHECK(rs[0].logprob == -3.0);
  }
  SUBCASE("table looks candidates up and flags misses") {
    spec.score_fn = json{{"kind", "table"},
                         {"values", {{"gut", -0.5}, {"schlecht", -4.0}}}};
    auto engine = make_mock_engine(spec);
    auto rs = engine->run_batch({score_req("a", "in", "gut"),
                                 score_req("b", "in", "fehlt")});
    CHECK(rs[0].logprob == -0.5);
    CHECK_FALSE(rs[1].logprob.has_value());
    CHECK(rs[1].flags == std::vector<std::string>{"no-score"});
  }
  SUBCASE("hash is deterministic and lives in [-2, -1)") {
    spec.score_fn = json{{"kind", "hash"}};
    auto engine = make_mock_engine(spec);
    auto rs = engine->run_batch({score_req("a", "in", "x"),
                                 score_req("b", "in", "x"),
                                 score_req("c", "in", "y"),
                                 score_req("d", "andere", "x")});
    REQUIRE(rs[0].logprob.has_value());
    CHECK(*rs[0].logprob == *rs[1].logprob);
    CHECK(*rs[0].logprob != *rs[2].logprob);
    CHECK(*rs[0].logprob != *rs[3].logprob);
    for (const auto& r : rs) {
      CHECK(*r.logprob >= -2.0);
      CHECK(*r.logprob < -1.0);
    }
  }
}

TEST_CASE("mock spec parsing rejects malformed specs") {
  CHECK_THROWS_AS(MockEngineSpec::from_json(json{{"kind", "gpt"}}), ValidationError);
  CHECK_THROWS_AS(MockEngineSpec::from_json(json{{"kind", "lookup"},
                                                 {"table", "not an object"}}),
                  ValidationError);
  CHECK_THROWS_AS(MockEngineSpec::from_json(json{{"kind", "copy"},
                                                 {"score_fn", {{"kind", "magic"}}}}),
                  ValidationError);
  CHECK_THROWS_AS(MockEngineSpec::from_file("/nonexistent/spec.json"), IoError);

  testutil::TempDir dir;
  auto path = testutil::write_file(
      dir.path("spec.json"),
      R"({"kind": "lookup", "sep": "|", "table": {"a": "b"}})");
  auto spec = MockEngineSpec::from_file(path);
  CHECK(spec.kind == "lookup");
  CHECK(spec.sep == "|");
  auto rs = make_mock_engine(spec)->run_batch({translate_req("x", "a | c")});
  CHECK(rs[0].output == "b | c");
}

TEST_CASE("subprocess engine round-trips a mixed batch") {
  SubprocessEngine engine(engine_script("echo"));
  std::vector<EngineRequest> batch = {
      translate_req("t1", "erste Zeile"),
      forced_req("t2", "zweite Zeile", "Prefix"),
      score_req("t3", "dritte", "ein zwei drei vier"),
  };
  auto rs = engine.run_batch(batch);
  REQUIRE(rs.size() == 3);
  CHECK(rs[0].output == "erste Zeile");
  CHECK(rs[0].ok());
  CHECK(rs[1].output == "Prefix zweite Zeile");
  CHECK(rs[2].logprob == -4.0);
  CHECK(engine.supports_score());
  CHECK(engine.describe() == "subprocess:" + engine_script("echo"));

  // a second batch restarts the child
  auto again = engine.run_batch({translate_req("r", "noch einmal")});
  CHECK(again[0].output == "noch einmal");
}

TEST_CASE("subprocess responses are matched by id, not by arrival order") {
  SubprocessEngine engine(engine_script("reverse"));
  std::vector<EngineRequest> batch;
  for (int i = 0; i < 6; ++i)
    batch.push_back(translate_req("id" + std::to_string(i), "in" + std::to_string(i)));
  auto rs = engine.run_batch(batch);
  for (int i = 0; i < 6; ++i) {
    CHECK(rs[i].id == "id" + std::to_string(i));
    CHECK(rs[i].output == "in" + std::to_string(i));
  }
}

TEST_CASE("duplicate request ids are answered positionally") {
  SubprocessEngine engine(engine_script("echo"));
  auto rs = engine.run_batch({translate_req("dup", "erste"),
                              translate_req("dup", "zweite")});
  CHECK(rs[0].output == "erste");
  CHECK(rs[1].output == "zweite");
}

TEST_CASE("junk lines from the engine are skipped") {
  SubprocessEngine engine(engine_script("malformed"));
  auto rs = engine.run_batch({translate_req("a", "x"), translate_req("b", "y")});
  CHECK(rs[0].output == "x");
  CHECK(rs[1].output == "y");
  CHECK(rs[0].ok());
}

TEST_CASE("a clean exit with unanswered requests flags them missing") {
  SubprocessEngine engine(engine_script("missing"));
  auto rs = engine.run_batch({translate_req("a", "x"), translate_req("b", "y"),
                              translate_req("c", "z")});
  CHECK(rs[0].ok());
  CHECK(rs[1].ok());
  CHECK(rs[2].flags == std::vector<std::string>{"missing-response"});

  // an engine that says nothing at all leaves every request flagged
  SubprocessEngine mute("true");
  auto none = mute.run_batch({translate_req("a", "x")});
  CHECK(none[0].flags == std::vector<std::string>{"missing-response"});
}

TEST_CASE("a nonzero exit with pending requests is a hard engine error") {
  SubprocessEngine engine(engine_script("crash"));
  std::vector<EngineRequest> batch;
  for (int i = 0; i < 4; ++i)
    batch.push_back(translate_req("c" + std::to_string(i), "x"));
  CHECK_THROWS_WITH_AS(engine.run_batch(batch),
                       doctest::Contains("exit status 3"), EngineError);

  SubprocessEngine broken("no_such_binary_anywhere");
  CHECK_THROWS_AS(broken.run_batch({translate_req("a", "x")}), EngineError);

  CHECK_THROWS_AS(SubprocessEngine(""), ValidationError);
}

TEST_CASE("silence past the deadline times the pending requests out") {
  SubprocessEngine engine(engine_script("timeout"), {}, 400);
  auto rs = engine.run_batch({translate_req("a", "prompt"),
                              translate_req("b", "stalled"),
                              translate_req("c", "stalled too")});
  CHECK(rs[0].output == "prompt");
  CHECK(rs[0].ok());
  CHECK(rs[1].flags == std::vector<std::string>{"timeout"});
  CHECK(rs[2].flags == std::vector<std::string>{"timeout"});
}

TEST_CASE("environment variables reach the engine process") {
  SubprocessEngine engine(engine_script("echo"), {{"ENGINE_TAG", "tag:"}});
  auto rs = engine.run_batch({translate_req("a", "text")});
  CHECK(rs[0].output == "tag:text");
}

TEST_CASE("parallel fan-out returns exactly the sequential result") {
  auto make_worker = [] {
    MockEngineSpec spec;
    spec.kind = "copy";
    spec.score_fn = json{{"kind", "hash"}};
    return make_mock_engine(spec);
  };
  std::vector<EngineRequest> batch;
  for (int i = 0; i < 23; ++i) {
    if (i % 3 == 0)
      batch.push_back(score_req("s" + std::to_string(i), "in" + std::to_string(i), "cand"));
    else
      batch.push_back(translate_req("t" + std::to_string(i), "in" + std::to_string(i)));
  }
  auto sequential = make_worker()->run_batch(batch);

  std::vector<std::unique_ptr<Engine>> workers;
  for (int w = 0; w < 4; ++w)
    workers.push_back(make_worker());
  auto parallel = make_parallel_engine(std::move(workers));
  auto merged = parallel->run_batch(batch);

  REQUIRE(merged.size() == sequential.size());
  for (std::size_t i = 0; i < merged.size(); ++i) {
    CHECK(merged[i].id == sequential[i].id);
    CHECK(merged[i].output == sequential[i].output);
    CHECK(merged[i].logprob == sequential[i].logprob);
  }
  CHECK(parallel->supports_score());
  CHECK(parallel->describe() == "mock:copy x4");

  SUBCASE("subprocess workers fan out the same way") {
    std::vector<std::unique_ptr<Engine>> subs;
    for (int w = 0; w < 3; ++w)
      subs.push_back(std::make_unique<SubprocessEngine>(engine_script("echo")));
    auto sub_parallel = make_parallel_engine(std::move(subs));
    std::vector<EngineRequest> texts;
    for (int i = 0; i < 10; ++i)
      texts.push_back(translate_req("p" + std::to_string(i), "line " + std::to_string(i)));
    auto rs = sub_parallel->run_batch(texts);
    for (int i = 0; i < 10; ++i)
      CHECK(rs[i].output == "line " + std::to_string(i));
  }
  SUBCASE("a single worker is passed through unwrapped") {
    std::vector<std::unique_ptr<Engine>> one;
    one.push_back(make_worker());
    CHECK(make_parallel_engine(std::move(one))->describe() == "mock:copy");
  }
}

TEST_CASE("make_engine builds from the CLI surface") {
  auto copy = make_engine("mock:copy", "", {});
  CHECK(copy->describe() == "mock:copy");

  testutil::TempDir dir;
  auto path = testutil::write_file(
      dir.path("spec.json"), R"({"kind": "lookup", "table": {"a": "b"}})");
  auto lookup = make_engine("mock:lookup:" + path, "", {});
  CHECK(lookup->describe() == "mock:lookup");
  CHECK_THROWS_AS(make_engine("mock:copy:" + path, "", {}), ValidationError);
  CHECK_THROWS_AS(make_engine("mock:alien", "", {}), ValidationError);

  auto sub = make_engine("", engine_script("echo"), {});
  CHECK(sub->describe() == "subprocess:" + engine_script("echo"));

  CHECK_THROWS_AS(make_engine("", "", {}), ValidationError);
  CHECK_THROWS_AS(make_engine("mock:copy", "cmd", {}), ValidationError);
}
