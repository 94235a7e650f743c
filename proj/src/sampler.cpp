#include "docmt/sampler.h"

#include <numeric>
#include <sstream>

#include "docmt/error.h"

namespace docmt {

namespace {

void check_no_sep(const std::string& sentence, const std::string& sep) {
  if (sentence.find(sep) != std::string::npos)
    throw ValidationError("separator \"" + sep + "\" occurs inside a sentence: " + sentence);
}

std::string join_side(const std::vector<std::string>& sentences, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i) {
      out.push_back(' ');
      out.append(sep);
      out.push_back(' ');
    }
    out.append(sentences[i]);
  }
  return out;
}

}  // namespace

std::string join_segments(const std::vector<std::string>& sentences,
                          const std::string& sep) {
  for (const auto& s : sentences)
    check_no_sep(s, sep);
  return join_side(sentences, sep);
}

std::pair<std::string, std::string> join_segments(
    const std::vector<SentencePair>& pairs, const std::string& sep) {
  std::vector<std::string> src, trg;
  src.reserve(pairs.size());
  trg.reserve(pairs.size());
  for (const auto& p : pairs) {
    check_no_sep(p.source, sep);
    check_no_sep(p.target, sep);
    src.push_back(p.source);
    trg.push_back(p.target);
  }
  return {join_side(src, sep), join_side(trg, sep)};
}

std::vector<std::string> split_segments(const std::string& text,
                                        const std::string& sep) {
  std::vector<std::string> segments;
  if (sep.empty()) {
    segments.push_back(text);
    return segments;
  }
  std::size_t begin = 0;
  while (true) {
    std::size_t at = text.find(sep, begin);
    std::string_view piece = at == std::string::npos
                                 ? std::string_view(text).substr(begin)
                                 : std::string_view(text).substr(begin, at - begin);
    segments.emplace_back(trim(piece));
    if (at == std::string::npos)
      break;
    begin = at + sep.size();
  }
  return segments;
}

void validate_pools(const std::vector<Pool>& pools, const SamplerConfig& config) {
  if (config.sep.empty())
    throw ValidationError("separator must be non-empty");
  for (std::size_t pos = 0; pos < config.sep.size();) {
    if (is_unicode_whitespace(decode_utf8(config.sep, pos)))
      throw ValidationError("separator must not contain whitespace");
  }
  if (config.max_sample_len < 1)
    throw ValidationError("max_sample_len must be >= 1");
  if (config.virtual_epoch_tokens < 1)
    throw ValidationError("virtual_epoch_tokens must be >= 1");
  for (const auto& pool : pools) {
    for (const auto& shard : pool.corpus.shards) {
      for (std::size_t i = 0; i < shard.pairs.size(); ++i) {
        const auto& p = shard.pairs[i];
        if (p.source.find(config.sep) != std::string::npos ||
            p.target.find(config.sep) != std::string::npos) {
          std::ostringstream msg;
          msg << "pool " << pool.name << ", shard " << shard.id << ", pair " << i
              << ": sentence contains the separator \"" << config.sep << "\"";
          throw ValidationError(msg.str());
        }
      }
    }
  }
}

Sampler::Sampler(std::vector<Pool> pools, SamplerConfig config)
    : pools_(std::move(pools)), config_(std::move(config)), rng_(config_.seed) {
  if (pools_.empty())
    throw ValidationError("sampler needs at least one pool");
  for (const auto& pool : pools_)
    if (pool.weight < 1)
      throw ValidationError("pool weight must be >= 1");
  validate_pools(pools_, config_);
  state_.resize(pools_.size());
  start_pass();
}

void Sampler::start_pass() {
  for (std::size_t i = 0; i < pools_.size(); ++i) {
    state_[i].active_shard.reset();
    state_[i].remaining.resize(pools_[i].corpus.shards.size());
    std::iota(state_[i].remaining.begin(), state_[i].remaining.end(), 0);
    for (auto& shard : pools_[i].corpus.shards)
      shard.cursor = 0;
  }
}

bool Sampler::pool_has_data(std::size_t i) const {
  const auto& st = state_[i];
  if (st.active_shard) {
    const auto& shard = pools_[i].corpus.shards[*st.active_shard];
    if (shard.cursor < shard.pairs.size())
      return true;
  }
  return !st.remaining.empty();
}

std::optional<TrainingSample> Sampler::draw() {
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < pools_.size(); ++i)
    if (pool_has_data(i))
      active.push_back(i);
  if (active.empty())
    return std::nullopt;  // end of pass

  // step 1: weighted-uniform pool choice; no draw burned when there is no choice
  std::size_t pool_index = active[0];
  if (active.size() > 1) {
    std::uint64_t total = 0;
    for (auto i : active)
      total += static_cast<std::uint64_t>(pools_[i].weight);
    std::uint64_t pick = rng_.uniform_int(0, total - 1);
    for (auto i : active) {
      std::uint64_t w = static_cast<std::uint64_t>(pools_[i].weight);
      if (pick < w) {
        pool_index = i;
        break;
      }
      pick -= w;
    }
  }
  return draw_from(pool_index);
}

TrainingSample Sampler::draw_from(std::size_t pool_index) {
  Pool& pool = pools_[pool_index];
  PoolState& st = state_[pool_index];

  // step 2: pick a shard if none is active; it stays active until consumed
  if (!st.active_shard ||
      pool.corpus.shards[*st.active_shard].cursor >=
          pool.corpus.shards[*st.active_shard].pairs.size()) {
    std::size_t j = 0;
    if (st.remaining.size() > 1)
      j = static_cast<std::size_t>(rng_.uniform_int(0, st.remaining.size() - 1));
    st.active_shard = st.remaining[j];
    st.remaining.erase(st.remaining.begin() + static_cast<std::ptrdiff_t>(j));
  }
  Shard& shard = pool.corpus.shards[*st.active_shard];

  TrainingSample sample;
  sample.pool_name = pool.name;

  if (!pool.doc_flag) {
    // step 4
    const SentencePair* pair = next_pair(shard);
    sample.source_text = pair->source;
    sample.target_text = pair->target;
    sample.n_segments = 1;
    sample.doc_id = pair->doc_id;
    sample.drawn_l = 0;
  } else {
    // step 3
    int l = static_cast<int>(rng_.uniform_int(1, static_cast<std::uint64_t>(config_.max_sample_len)));
    std::vector<SentencePair> taken;
    const SentencePair* first = next_pair(shard);
    taken.push_back(*first);
    int source_tokens = config_.counter(first->source);
    while (source_tokens < l && shard.cursor < shard.pairs.size()) {
      const SentencePair& next = shard.pairs[shard.cursor];
      bool same_doc = next.doc_id == taken.back().doc_id &&
                      next.index_in_doc == taken.back().index_in_doc + 1;
      if (!same_doc)
        break;  // never join across a document boundary
      taken.push_back(next);
      ++shard.cursor;
      source_tokens += config_.counter(next.source);
    }
    auto [src, trg] = join_segments(taken, config_.sep);
    sample.source_text = std::move(src);
    sample.target_text = std::move(trg);
    sample.n_segments = static_cast<int>(taken.size());
    sample.doc_id = taken.front().doc_id;
    sample.drawn_l = l;
  }

  if (st.active_shard && shard.cursor >= shard.pairs.size())
    st.active_shard.reset();

  epochs_.target_tokens_emitted += config_.counter(sample.target_text);
  epochs_.epochs_completed =
      epochs_.target_tokens_emitted / config_.virtual_epoch_tokens;
  return sample;
}

}  // namespace docmt
