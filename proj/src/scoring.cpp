#include "docmt/scoring.h"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

#include "docmt/error.h"
#include "docmt/sampler.h"
#include "docmt/tokenize.h"

namespace docmt {

using nlohmann::json;

namespace {

std::vector<std::string> match_tokens(std::string_view text, const MatchConfig& cfg) {
  std::vector<std::string> out;
  for (std::string_view tok : tokenize(text)) {
    if (cfg.strip_edge_punct)
      tok = strip_edge_punct(tok);
    if (tok.empty())
      continue;
    out.push_back(cfg.case_insensitive ? lowercase(tok) : std::string(tok));
  }
  return out;
}

bool contains_contiguous(const std::vector<std::string>& hay,
                         const std::vector<std::string>& needle) {
  if (needle.empty())
    return true;
  if (needle.size() > hay.size())
    return false;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    bool all = true;
    for (std::size_t j = 0; j < needle.size(); ++j) {
      if (hay[i + j] != needle[j]) {
        all = false;
        break;
      }
    }
    if (all)
      return true;
  }
  return false;
}

std::string join_parts(const std::vector<std::string>& parts, const std::string& sep) {
  if (parts.empty())
    return "";
  if (sep.empty()) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) out.push_back(' ');
      out += parts[i];
    }
    return out;
  }
  return join_segments(parts, sep);
}

std::vector<std::string> full_segments(const GenerativeItem& item) {
  std::vector<std::string> segments = item.src_context;
  segments.push_back(item.src);
  segments.insert(segments.end(), item.src_following.begin(),
                  item.src_following.end());
  return segments;
}

void add_flags(ItemResult& res, const std::vector<std::string>& flags) {
  res.flags.insert(res.flags.end(), flags.begin(), flags.end());
}

void finalize(EvalReport& report) {
  report.n_items = report.items.size();
  report.n_correct = 0;
  report.flags_histogram.clear();
  for (const auto& item : report.items) {
    if (item.correct)
      ++report.n_correct;
    for (const auto& f : item.flags)
      ++report.flags_histogram[f];
  }
  report.accuracy = report.n_items == 0
                        ? 0.0
                        : static_cast<double>(report.n_correct) /
                              static_cast<double>(report.n_items);
}

// Strips the forced prefix from the output; a missing prefix is flagged and
// leaves nothing to match.
std::string continuation_after(const std::string& output, const std::string& prefix,
                               ItemResult& res) {
  if (output.rfind(prefix, 0) != 0) {
    res.flags.push_back("prefix-mismatch");
    return "";
  }
  return std::string(trim(std::string_view(output).substr(prefix.size())));
}

}  // namespace

bool match_phrases(const std::string& text,
                   const std::vector<std::string>& good_phrases,
                   const std::vector<std::string>& bad_phrases,
                   const MatchConfig& cfg) {
  auto hay = match_tokens(text, cfg);
  if (hay.empty())
    return false;
  bool good = false;
  for (const auto& phrase : good_phrases) {
    if (contains_contiguous(hay, match_tokens(phrase, cfg))) {
      good = true;
      break;
    }
  }
  if (!good)
    return false;
  for (const auto& phrase : bad_phrases)
    if (contains_contiguous(hay, match_tokens(phrase, cfg)))
      return false;
  return true;
}

EvalReport score_generative(const std::vector<GenerativeItem>& items,
                            Engine& engine, const WindowPolicy& policy,
                            const MatchConfig& cfg, const TokenCounter& counter) {
  struct Prepared {
    AssembledInput assembled;
    std::string prefix;  // empty = free translation
  };
  std::vector<Prepared> prepared;
  prepared.reserve(items.size());
  std::vector<EngineRequest> requests;
  requests.reserve(items.size());

  for (const auto& item : items) {
    auto segments = full_segments(item);
    Prepared p;
    p.assembled = assemble(segments, static_cast<int>(item.src_context.size()),
                           policy, counter);
    if (policy.sep.empty() && cfg.scope == MatchConfig::Scope::payload &&
        p.assembled.payload_index + 1 !=
            static_cast<int>(p.assembled.segments.size()))
      throw ValidationError(
          "item " + item.id +
          ": separator-free payload extraction needs the payload as the last "
          "segment; drop right context or match on the full output");

    EngineRequest r;
    r.id = item.id;
    r.input = p.assembled.joined_text;
    if (item.forced_target_prefix && !item.tgt_context.empty()) {
      // The policy may have kept fewer source-context sentences than the
      // item has target context; the prefix is cut to the kept count so the
      // two sides stay aligned.
      auto keep = std::min(item.tgt_context.size(),
                           static_cast<std::size_t>(p.assembled.payload_index));
      if (keep > 0) {
        std::vector<std::string> tail(item.tgt_context.end() - keep,
                                      item.tgt_context.end());
        p.prefix = join_parts(tail, policy.sep);
        r.mode = EngineMode::translate_forced;
        r.forced_prefix = p.prefix;
      }
    }
    requests.push_back(std::move(r));
    prepared.push_back(std::move(p));
  }

  auto responses = engine.run_batch(requests);

  EvalReport report;
  report.metric = "generative";
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    const auto& resp = responses[i];
    const auto& p = prepared[i];
    ItemResult res;
    res.id = item.id;
    res.annotations = item.annotations;
    add_flags(res, resp.flags);
    if (resp.ok()) {
      std::string scope_text;
      if (!p.prefix.empty()) {
        std::string cont = continuation_after(resp.output, p.prefix, res);
        if (res.flags.empty()) {
          if (cfg.scope == MatchConfig::Scope::payload && !policy.sep.empty())
            scope_text = split_segments(cont, policy.sep).front();
          else
            scope_text = cont;
        }
      } else if (cfg.scope == MatchConfig::Scope::full_output) {
        scope_text = resp.output;
      } else if (!policy.sep.empty()) {
        auto extracted = extract_payload_by_sep(resp.output,
                                                p.assembled.payload_index,
                                                policy.sep);
        if (extracted.segment_mismatch)
          res.flags.push_back("segment-mismatch");
        scope_text = extracted.text;
      } else {
        scope_text = extract_payload_proportional(p.assembled.joined_text,
                                                  item.src, resp.output);
      }
      res.correct = match_phrases(scope_text, item.good_phrases,
                                  item.bad_phrases, cfg);
    }
    report.items.push_back(std::move(res));
  }
  finalize(report);
  return report;
}

EvalReport score_generative_forced(const std::vector<GenerativeItem>& items,
                                   Engine& engine, const MatchConfig& cfg,
                                   const std::string& sep) {
  struct Prepared {
    const GenerativeItem* item;
    std::string prefix;
    int payload_index;
  };
  std::vector<Prepared> prepared;
  std::vector<EngineRequest> requests;
  EvalReport report;
  report.metric = "generative_forced";

  for (const auto& item : items) {
    // Locate the good phrase in the positive target; the prefix ends on the
    // token right before it, in the original spelling.
    std::optional<std::string> truncated;
    if (item.tgt_positive) {
      auto raw = tokenize(*item.tgt_positive);
      std::vector<std::string> norm;
      std::vector<std::size_t> raw_index;  // filtered position -> raw position
      for (std::size_t i = 0; i < raw.size(); ++i) {
        std::string_view tok = raw[i];
        if (cfg.strip_edge_punct)
          tok = strip_edge_punct(tok);
        if (tok.empty())
          continue;
        norm.push_back(cfg.case_insensitive ? lowercase(tok) : std::string(tok));
        raw_index.push_back(i);
      }
      for (const auto& phrase : item.good_phrases) {
        auto needle = match_tokens(phrase, cfg);
        if (needle.empty() || needle.size() > norm.size())
          continue;
        for (std::size_t at = 0; at + needle.size() <= norm.size(); ++at) {
          bool all = true;
          for (std::size_t j = 0; j < needle.size(); ++j)
            if (norm[at + j] != needle[j]) {
              all = false;
              break;
            }
          if (all) {
            std::vector<std::string_view> head(raw.begin(),
                                               raw.begin() + raw_index[at]);
            truncated = join_tokens(head);
            break;
          }
        }
        if (truncated)
          break;
      }
    }
    if (!truncated) {
      ++report.skipped;
      ++report.flags_histogram["unlocatable-phrase"];
      continue;
    }

    Prepared p;
    p.item = &item;
    p.payload_index = static_cast<int>(item.src_context.size());
    std::vector<std::string> prefix_parts = item.tgt_context;
    if (!truncated->empty())
      prefix_parts.push_back(*truncated);
    p.prefix = join_parts(prefix_parts, sep);

    std::vector<std::string> segments = item.src_context;
    segments.push_back(item.src);
    EngineRequest r;
    r.id = item.id;
    r.input = join_parts(segments, sep);
    if (!p.prefix.empty()) {
      r.mode = EngineMode::translate_forced;
      r.forced_prefix = p.prefix;
    }
    requests.push_back(std::move(r));
    prepared.push_back(std::move(p));
  }

  auto responses = engine.run_batch(requests);
  auto histogram = report.flags_histogram;  // keep the skip counts

  for (std::size_t i = 0; i < prepared.size(); ++i) {
    const auto& p = prepared[i];
    const auto& resp = responses[i];
    ItemResult res;
    res.id = p.item->id;
    res.annotations = p.item->annotations;
    add_flags(res, resp.flags);
    if (resp.ok()) {
      std::string scope_text;
      bool usable = true;
      if (!p.prefix.empty()) {
        scope_text = continuation_after(resp.output, p.prefix, res);
        usable = res.flags.empty();
      } else if (cfg.scope == MatchConfig::Scope::payload && !sep.empty()) {
        auto extracted = extract_payload_by_sep(resp.output, p.payload_index, sep);
        if (extracted.segment_mismatch)
          res.flags.push_back("segment-mismatch");
        scope_text = extracted.text;
      } else {
        scope_text = resp.output;
      }
      if (usable)
        res.correct = match_phrases(scope_text, p.item->good_phrases,
                                    p.item->bad_phrases, cfg);
    }
    report.items.push_back(std::move(res));
  }
  finalize(report);
  for (const auto& [flag, count] : histogram)
    report.flags_histogram[flag] += count;
  return report;
}

EvalReport score_contrastive(const std::vector<ContrastiveItem>& items,
                             Engine& engine, const MatchConfig& cfg,
                             const std::string& sep) {
  (void)cfg;
  if (!engine.supports_score())
    throw ValidationError("engine does not support score mode");

  struct Span {
    std::size_t start;
    std::size_t count;  // positive + negatives
  };
  std::vector<Span> spans;
  spans.reserve(items.size());
  std::vector<EngineRequest> requests;

  for (const auto& item : items) {
    std::vector<std::string> src_parts = item.src_context;
    src_parts.push_back(item.src);
    std::string input = join_parts(src_parts, sep);

    auto candidate = [&](const std::string& target) {
      std::vector<std::string> parts = item.tgt_context;
      parts.push_back(target);
      return join_parts(parts, sep);
    };

    Span span{requests.size(), 1 + item.tgt_negatives.size()};
    EngineRequest pos;
    pos.id = item.id;
    pos.mode = EngineMode::score;
    pos.input = input;
    pos.candidate = candidate(item.tgt_positive);
    requests.push_back(std::move(pos));
    for (const auto& neg : item.tgt_negatives) {
      EngineRequest r;
      r.id = item.id;
      r.mode = EngineMode::score;
      r.input = input;
      r.candidate = candidate(neg);
      requests.push_back(std::move(r));
    }
    spans.push_back(span);
  }

  auto responses = engine.run_batch(requests);

  EvalReport report;
  report.metric = "contrastive";
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    const auto& span = spans[i];
    ItemResult res;
    res.id = item.id;
    res.annotations = item.annotations;
    bool all_scored = true;
    for (std::size_t j = 0; j < span.count; ++j) {
      const auto& resp = responses[span.start + j];
      add_flags(res, resp.flags);
      if (!resp.logprob) {
        all_scored = false;
        if (resp.flags.empty())
          res.flags.push_back("no-score");
      }
    }
    if (all_scored) {
      double positive = *responses[span.start].logprob;
      res.correct = true;
      for (std::size_t j = 1; j < span.count; ++j) {
        if (!(positive > *responses[span.start + j].logprob)) {
          res.correct = false;
          break;
        }
      }
    }
    report.items.push_back(std::move(res));
  }
  finalize(report);
  return report;
}

BucketKey parse_bucket_key(const std::string& name) {
  if (name == "distance" || name == "antecedent_distance_0_vs_1plus")
    return BucketKey::distance_0_vs_1plus;
  if (name == "pronoun")
    return BucketKey::pronoun;
  if (name == "pronoun_x_distance" || name == "pronoun-distance")
    return BucketKey::pronoun_x_distance;
  if (name == "phenomenon")
    return BucketKey::phenomenon;
  throw ValidationError("unknown bucket key: " + name);
}

namespace {

std::optional<long long> annotation_distance(const json& ann) {
  if (!ann.contains("antecedent_distance"))
    return std::nullopt;
  const auto& d = ann["antecedent_distance"];
  if (!d.is_number_integer())
    return std::nullopt;
  return d.get<long long>();
}

std::optional<std::string> annotation_string(const json& ann, const char* key) {
  if (!ann.contains(key) || !ann[key].is_string())
    return std::nullopt;
  return ann[key].get<std::string>();
}

std::string bucket_of(const ItemResult& item, BucketKey key) {
  switch (key) {
    case BucketKey::distance_0_vs_1plus: {
      auto d = annotation_distance(item.annotations);
      if (!d)
        return "unannotated";
      return *d == 0 ? "0" : "1+";
    }
    case BucketKey::pronoun: {
      auto p = annotation_string(item.annotations, "pronoun");
      return p ? lowercase(*p) : "unannotated";
    }
    case BucketKey::pronoun_x_distance: {
      auto p = annotation_string(item.annotations, "pronoun");
      auto d = annotation_distance(item.annotations);
      if (!p || !d)
        return "unannotated";
      return lowercase(*p) + "|" + (*d == 0 ? "0" : "1+");
    }
    case BucketKey::phenomenon: {
      auto ph = annotation_string(item.annotations, "phenomenon");
      return ph ? *ph : "unannotated";
    }
  }
  return "unannotated";
}

}  // namespace

EvalReport bucket_report(const EvalReport& report, BucketKey key) {
  EvalReport out = report;
  out.buckets.clear();
  for (const auto& item : out.items) {
    auto& bucket = out.buckets[bucket_of(item, key)];
    ++bucket.n;
    if (item.correct)
      ++bucket.n_correct;
  }
  for (auto& [name, bucket] : out.buckets)
    bucket.accuracy = bucket.n == 0 ? 0.0
                                    : static_cast<double>(bucket.n_correct) /
                                          static_cast<double>(bucket.n);
  return out;
}

SweepGrid context_sweep(const std::vector<GenerativeItem>& items, Engine& engine,
                        const SweepSpec& spec, const MatchConfig& cfg,
                        const TokenCounter& counter) {
  SweepGrid grid;
  grid.spec = spec;
  for (int row : spec.rows) {
    for (int col : spec.cols) {
      WindowPolicy policy;
      if (spec.kind == SweepSpec::Kind::sentence) {
        policy = WindowPolicy::window(row, col, spec.sep);
        policy.max_tokens = spec.max_tokens;
      } else {
        if (col > row)
          continue;  // left allocation cannot exceed the total budget
        policy = WindowPolicy::budget(row, col, spec.sep);
        policy.max_tokens = spec.max_tokens;
      }
      grid.cells.emplace(std::make_pair(row, col),
                         score_generative(items, engine, policy, cfg, counter));
    }
  }
  return grid;
}

json to_json(const EvalReport& report) {
  json j;
  j["metric"] = report.metric;
  j["n_items"] = report.n_items;
  j["n_correct"] = report.n_correct;
  j["accuracy"] = report.accuracy;
  j["skipped"] = report.skipped;
  json buckets = json::object();
  for (const auto& [name, bucket] : report.buckets) {
    buckets[name] = {{"n", bucket.n},
                     {"n_correct", bucket.n_correct},
                     {"accuracy", bucket.accuracy}};
  }
  j["buckets"] = buckets;
  j["flags_histogram"] = report.flags_histogram;
  json items = json::array();
  for (const auto& item : report.items) {
    json e;
    e["id"] = item.id;
    e["correct"] = item.correct;
    e["flags"] = item.flags;
    if (!item.annotations.empty())
      e["annotations"] = item.annotations;
    items.push_back(std::move(e));
  }
  j["items"] = items;
  return j;
}

json to_json(const SweepGrid& grid) {
  json j;
  j["kind"] = grid.spec.kind == SweepSpec::Kind::sentence ? "sentence" : "token_budget";
  j["rows"] = grid.spec.rows;
  j["cols"] = grid.spec.cols;
  j["max_tokens"] = grid.spec.max_tokens;
  j["sep"] = grid.spec.sep;
  json cells = json::array();
  for (const auto& [coord, report] : grid.cells) {
    json cell;
    cell["row"] = coord.first;
    cell["col"] = coord.second;
    cell["n_items"] = report.n_items;
    cell["n_correct"] = report.n_correct;
    cell["accuracy"] = report.accuracy;
    cell["flags_histogram"] = report.flags_histogram;
    cells.push_back(std::move(cell));
  }
  j["cells"] = cells;
  return j;
}

namespace {

std::string format_accuracy(double value) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << value;
  return out.str();
}

// Pronoun-by-distance buckets render as a matrix with aggregate rows.
bool matrix_buckets(const std::map<std::string, BucketStats>& buckets) {
  if (buckets.empty())
    return false;
  for (const auto& [name, bucket] : buckets)
    if (name != "unannotated" && name.find('|') == std::string::npos)
      return false;
  return true;
}

}  // namespace

std::string render_report_text(const EvalReport& report) {
  std::ostringstream out;
  out << "metric: " << report.metric << "\n";
  out << "items: " << report.n_items << "  correct: " << report.n_correct
      << "  accuracy: " << format_accuracy(report.accuracy) << "\n";
  if (report.skipped > 0)
    out << "skipped: " << report.skipped << "\n";
  if (!report.flags_histogram.empty()) {
    out << "flags:";
    for (const auto& [flag, count] : report.flags_histogram)
      out << " " << flag << "=" << count;
    out << "\n";
  }
  if (report.buckets.empty())
    return out.str();

  if (matrix_buckets(report.buckets)) {
    // rows = pronouns (+ "all" and "sie+er" aggregates), columns = distance
    std::vector<std::string> pronouns;
    std::set<std::string> cols;
    for (const auto& [name, bucket] : report.buckets) {
      if (name == "unannotated")
        continue;
      auto bar = name.find('|');
      std::string pron = name.substr(0, bar);
      if (std::find(pronouns.begin(), pronouns.end(), pron) == pronouns.end())
        pronouns.push_back(pron);
      cols.insert(name.substr(bar + 1));
    }
    std::sort(pronouns.begin(), pronouns.end());
    auto cell = [&](const std::string& pron, const std::string& col) {
      BucketStats stats;
      for (const auto& [name, bucket] : report.buckets) {
        auto bar = name.find('|');
        if (bar == std::string::npos)
          continue;
        std::string p = name.substr(0, bar);
        if (name.substr(bar + 1) != col)
          continue;
        bool take = pron == "all" || p == pron ||
                    (pron == "sie+er" && (p == "sie" || p == "er"));
        if (!take)
          continue;
        stats.n += bucket.n;
        stats.n_correct += bucket.n_correct;
      }
      return stats;
    };
    std::vector<std::string> rows = {"all"};
    rows.insert(rows.end(), pronouns.begin(), pronouns.end());
    bool have_sie_er =
        std::find(pronouns.begin(), pronouns.end(), "sie") != pronouns.end() &&
        std::find(pronouns.begin(), pronouns.end(), "er") != pronouns.end();
    if (have_sie_er)
      rows.push_back("sie+er");
    out << "\n" << std::left << std::setw(10) << "pronoun";
    for (const auto& col : cols)
      out << std::right << std::setw(10) << col;
    out << "\n";
    for (const auto& row : rows) {
      out << std::left << std::setw(10) << row;
      for (const auto& col : cols) {
        auto stats = cell(row, col);
        out << std::right << std::setw(10)
            << (stats.n == 0 ? std::string("-")
                             : format_accuracy(static_cast<double>(stats.n_correct) /
                                               static_cast<double>(stats.n)));
      }
      out << "\n";
    }
    if (report.buckets.count("unannotated")) {
      const auto& u = report.buckets.at("unannotated");
      out << std::left << std::setw(10) << "unannot."
          << "  n=" << u.n << " accuracy=" << format_accuracy(u.accuracy) << "\n";
    }
    return out.str();
  }

  std::size_t width = 8;
  for (const auto& [name, bucket] : report.buckets)
    width = std::max(width, name.size() + 2);
  out << "\n"
      << std::left << std::setw(static_cast<int>(width)) << "bucket"
      << std::right << std::setw(8) << "n" << std::setw(10) << "correct"
      << std::setw(10) << "accuracy" << "\n";
  for (const auto& [name, bucket] : report.buckets) {
    out << std::left << std::setw(static_cast<int>(width)) << name << std::right
        << std::setw(8) << bucket.n << std::setw(10) << bucket.n_correct
        << std::setw(10) << format_accuracy(bucket.accuracy) << "\n";
  }
  return out.str();
}

std::string render_sweep_tsv(const SweepGrid& grid) {
  std::ostringstream out;
  bool sentence = grid.spec.kind == SweepSpec::Kind::sentence;
  out << (sentence ? "left\\right" : "n\\l");
  for (int col : grid.spec.cols)
    out << '\t' << col;
  out << '\n';
  for (int row : grid.spec.rows) {
    out << row;
    for (int col : grid.spec.cols) {
      auto it = grid.cells.find({row, col});
      out << '\t' << (it == grid.cells.end() ? std::string("-")
                                             : format_accuracy(it->second.accuracy));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace docmt
