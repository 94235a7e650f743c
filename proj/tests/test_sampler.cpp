#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "docmt/error.h"
#include "docmt/rng.h"
#include "docmt/sampler.h"
#include "reference_sampler.h"
#include "test_util.h"

using namespace docmt;

namespace {

// Corpus of `docs` documents with `per_doc` one-token-padded sentences each;
// every sentence names its own position ("d2s5 ...") so samples can be
// checked for document integrity after the fact.
std::string labeled_tsv(int docs, int per_doc, int pad_tokens = 1) {
  std::string body;
  for (int d = 0; d < docs; ++d) {
    for (int s = 0; s < per_doc; ++s) {
      std::string tag = "d" + std::to_string(d) + "s" + std::to_string(s);
      std::string pad;
      for (int t = 0; t < pad_tokens; ++t)
        pad += " w" + std::to_string(t);
      body += tag + pad + "\tT" + tag + pad + "\tdoc" + std::to_string(d) + "\n";
    }
  }
  return body;
}

Pool make_doc_pool(testutil::TempDir& dir, const std::string& body,
                   const std::string& name, std::size_t shard_size,
                   bool doc_flag = true, int weight = 1) {
  auto path = testutil::write_file(dir.path(name + ".tsv"), body);
  Pool pool;
  pool.name = name;
  pool.corpus = shard_corpus(load_corpus(path, "", "", CorpusFormat::tsv), shard_size);
  pool.doc_flag = doc_flag;
  pool.weight = weight;
  return pool;
}

std::vector<TrainingSample> full_pass(Sampler& sampler) {
  std::vector<TrainingSample> out;
  while (auto s = sampler.draw())
    out.push_back(std::move(*s));
  return out;
}

}  // namespace

TEST_CASE("join_segments and split_segments invert each other") {
  std::vector<std::string> segs = {"Der Hund bellt .", "Er ist laut .", "Ende"};
  auto joined = join_segments(segs, "<sep>");
  CHECK(joined == "Der Hund bellt . <sep> Er ist laut . <sep> Ende");
  CHECK(split_segments(joined, "<sep>") == segs);

  CHECK(split_segments("nur ein Satz", "<sep>") ==
        std::vector<std::string>{"nur ein Satz"});
  CHECK(split_segments("a <sep>  b ", "<sep>") == std::vector<std::string>{"a", "b"});
  // empty separator: nothing to split on
  CHECK(split_segments("a <sep> b", "") == std::vector<std::string>{"a <sep> b"});
  // a separator inside a sentence would make the join ambiguous
  CHECK_THROWS_AS(join_segments(std::vector<std::string>{"hat <sep> drin"}, "<sep>"),
                  ValidationError);
}

TEST_CASE("pair join applies the separator to both sides in lockstep") {
  std::vector<SentencePair> pairs = {{"s1", "t1", "d", 0}, {"s2", "t2", "d", 1}};
  auto [src, trg] = join_segments(pairs, "<sep>");
  CHECK(src == "s1 <sep> s2");
  CHECK(trg == "t1 <sep> t2");
}

TEST_CASE("pool validation rejects unusable separators and contaminated data") {
  testutil::TempDir dir;
  auto pool = make_doc_pool(dir, labeled_tsv(2, 3), "p", 100);
  SamplerConfig cfg;

  cfg.sep = "";
  CHECK_THROWS_AS(validate_pools({pool}, cfg), ValidationError);
  cfg.sep = "<s p>";
  CHECK_THROWS_AS(validate_pools({pool}, cfg), ValidationError);
  cfg.sep = "<sep>";
  CHECK_NOTHROW(validate_pools({pool}, cfg));
  cfg.max_sample_len = 0;
  CHECK_THROWS_AS(validate_pools({pool}, cfg), ValidationError);

  auto bad = make_doc_pool(dir, "hat <sep> drin\tx\td\n", "bad", 100);
  SamplerConfig ok;
  CHECK_THROWS_AS(validate_pools({bad}, ok), ValidationError);
  CHECK_THROWS_AS(Sampler({bad}, ok), ValidationError);
}

TEST_CASE("a pass emits every pair exactly once and never crosses documents") {
  testutil::TempDir dir;
  SamplerConfig cfg;
  cfg.max_sample_len = 6;
  cfg.seed = 11;
  // 4 docs x 7 sentences, 3 tokens each, sharded so one doc is split
  Sampler sampler({make_doc_pool(dir, labeled_tsv(4, 7, 2), "p", 10)}, cfg);
  auto samples = full_pass(sampler);
  CHECK(sampler.draw() == std::nullopt);

  std::multiset<std::string> seen;
  for (const auto& s : samples) {
    auto segs = split_segments(s.source_text, "<sep>");
    auto trgs = split_segments(s.target_text, "<sep>");
    REQUIRE(segs.size() == trgs.size());
    CHECK(static_cast<int>(segs.size()) == s.n_segments);
    CHECK(s.drawn_l >= 1);
    CHECK(s.drawn_l <= 6);
    CHECK(s.pool_name == "p");
    // all segments from one document, consecutive in order
    std::string doc;
    int prev = -1;
    for (const auto& seg : segs) {
      seen.insert(seg);
      auto tag = seg.substr(0, seg.find(' '));  // "dXsY"
      auto at = tag.find('s');
      std::string d = tag.substr(0, at);
      int idx = std::stoi(tag.substr(at + 1));
      if (doc.empty()) {
        doc = d;
      } else {
        CHECK(d == doc);
        CHECK(idx == prev + 1);
      }
      prev = idx;
    }
    CHECK(s.doc_id == "doc" + doc.substr(1));
  }

  std::multiset<std::string> expected;
  for (int d = 0; d < 4; ++d)
    for (int s = 0; s < 7; ++s)
      expected.insert("d" + std::to_string(d) + "s" + std::to_string(s) + " w0 w1");
  CHECK(seen == expected);

  SUBCASE("start_pass covers the corpus again") {
    sampler.start_pass();
    auto again = full_pass(sampler);
    std::multiset<std::string> seen2;
    for (const auto& s : again)
      for (const auto& seg : split_segments(s.source_text, "<sep>"))
        seen2.insert(seg);
    CHECK(seen2 == expected);
  }
}

TEST_CASE("merging stops at the triggering sentence or the document end") {
  testutil::TempDir dir;
  SamplerConfig cfg;
  cfg.max_sample_len = 8;
  cfg.seed = 3;
  Sampler sampler({make_doc_pool(dir, labeled_tsv(3, 5, 1), "p", 100)}, cfg);
  // every sentence has 2 source tokens; doc runs are 5 sentences long
  for (const auto& s : full_pass(sampler)) {
    int tokens = count_tokens(s.source_text) - (s.n_segments - 1);  // minus seps
    auto segs = split_segments(s.source_text, "<sep>");
    auto last_tag = segs.back().substr(0, segs.back().find(' '));
    bool reached_l = tokens >= s.drawn_l;
    bool at_doc_end = last_tag.substr(last_tag.find('s') + 1) == "4";
    CHECK((reached_l || at_doc_end));
    if (reached_l && s.n_segments > 1) {
      // without the last sentence the draw was still short of l
      CHECK(tokens - 2 < s.drawn_l);
    }
  }
}

TEST_CASE("sentence pools emit one pair per draw in shard order") {
  testutil::TempDir dir;
  SamplerConfig cfg;
  cfg.seed = 5;
  Sampler sampler({make_doc_pool(dir, labeled_tsv(2, 4), "s", 100, false)}, cfg);
  auto samples = full_pass(sampler);
  REQUIRE(samples.size() == 8);  // single shard: file order
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(samples[i].n_segments == 1);
    CHECK(samples[i].drawn_l == 0);
    CHECK(samples[i].source_text ==
          "d" + std::to_string(i / 4) + "s" + std::to_string(i % 4) + " w0");
  }
}

TEST_CASE("identical seeds replay identical streams") {
  testutil::TempDir dir;
  auto body = labeled_tsv(6, 5, 2);
  SamplerConfig cfg;
  cfg.max_sample_len = 7;
  cfg.seed = 42;

  auto stream = [&](std::uint64_t seed) {
    SamplerConfig c = cfg;
    c.seed = seed;
    Sampler s({make_doc_pool(dir, body, "p", 8)}, c);
    std::string out;
    for (const auto& sample : full_pass(s))
      out += sample.source_text + "\n" + sample.target_text + "\n";
    return out;
  };
  CHECK(stream(42) == stream(42));
  CHECK(stream(42) != stream(43));
}

TEST_CASE("two pools both drain and keep their identities") {
  testutil::TempDir dir;
  SamplerConfig cfg;
  cfg.max_sample_len = 4;
  cfg.seed = 9;
  auto doc_pool = make_doc_pool(dir, labeled_tsv(3, 4), "news", 100, true, 2);
  auto sent_pool = make_doc_pool(dir, labeled_tsv(2, 5), "wiki", 100, false, 1);
  Sampler sampler({doc_pool, sent_pool}, cfg);
  std::map<std::string, int> segments_by_pool;
  for (const auto& s : full_pass(sampler))
    segments_by_pool[s.pool_name] += s.n_segments;
  CHECK(segments_by_pool["news"] == 12);
  CHECK(segments_by_pool["wiki"] == 10);
  CHECK_THROWS_AS(Sampler({}, cfg), ValidationError);
  auto zero_weight = doc_pool;
  zero_weight.weight = 0;
  CHECK_THROWS_AS(Sampler({zero_weight}, cfg), ValidationError);
}

TEST_CASE("epoch accounting counts emitted target tokens, separators included") {
  testutil::TempDir dir;
  SamplerConfig cfg;
  cfg.max_sample_len = 10;
  cfg.seed = 1;
  cfg.virtual_epoch_tokens = 25;
  Sampler sampler({make_doc_pool(dir, labeled_tsv(2, 6, 1), "p", 100)}, cfg);
  long long total = 0;
  for (const auto& s : full_pass(sampler))
    total += count_tokens(s.target_text);
  CHECK(sampler.epochs().target_tokens_emitted == total);
  CHECK(sampler.epochs().epochs_completed == total / 25);
  CHECK(total > 0);
}

TEST_CASE("the draw stream matches the stand-alone simulator") {
  testutil::TempDir dir;
  auto doc_body = labeled_tsv(5, 6, 2);
  auto sent_body = labeled_tsv(3, 4, 1);
  auto doc_path = testutil::write_file(dir.path("doc.tsv"), doc_body);
  auto sent_path = testutil::write_file(dir.path("sent.tsv"), sent_body);

  for (std::uint64_t seed : {0ull, 7ull, 123456789ull}) {
    SamplerConfig cfg;
    cfg.max_sample_len = 9;
    cfg.seed = seed;
    std::vector<Pool> pools;
    pools.push_back(make_doc_pool(dir, doc_body, "doc", 7, true, 3));
    pools.push_back(make_doc_pool(dir, sent_body, "sent", 5, false, 1));
    Sampler sampler(std::move(pools), cfg);

    std::vector<refsim::Pool> sim_pools;
    sim_pools.push_back(refsim::make_pool("doc", doc_path, true, 3, 7));
    sim_pools.push_back(refsim::make_pool("sent", sent_path, false, 1, 5));
    refsim::Simulator sim(std::move(sim_pools), 9, "<sep>", seed);

    std::string got, want;
    while (true) {
      auto a = sampler.draw();
      auto b = sim.draw();
      CHECK(a.has_value() == b.has_value());
      if (!a || !b)
        break;
      got += a->source_text + "\t" + a->target_text + "\t" + a->pool_name + "\t" +
             a->doc_id + "\t" + std::to_string(a->n_segments) + "\t" +
             std::to_string(a->drawn_l) + "\n";
      want += refsim::serialize(*b);
    }
    CHECK(got == want);
    CHECK(!got.empty());
  }
}
