#include "docmt/corpus.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "docmt/error.h"

namespace docmt {

std::size_t Corpus::line_count() const {
  std::size_t n = 0;
  for (const auto& s : shards)
    n += s.pairs.size();
  return n;
}

namespace {

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path);
  return in;
}

// getline with CR stripping; returns false at EOF.
bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line))
    return false;
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  return true;
}

void check_source_nonempty(const std::string& source, const std::string& path,
                           std::size_t lineno) {
  if (trim(source).empty()) {
    std::ostringstream msg;
    msg << path << ": line " << lineno << ": empty source sentence";
    throw ValidationError(msg.str());
  }
}

// Assigns index_in_doc over maximal runs of equal consecutive doc_id.
void number_documents(std::vector<SentencePair>& pairs) {
  int index = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i > 0 && pairs[i].doc_id == pairs[i - 1].doc_id)
      ++index;
    else
      index = 0;
    pairs[i].index_in_doc = index;
  }
}

std::vector<SentencePair> load_tsv(const std::string& path) {
  auto in = open_or_throw(path);
  std::vector<SentencePair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (read_line(in, line)) {
    ++lineno;
    auto first_tab = line.find('\t');
    if (first_tab == std::string::npos) {
      std::ostringstream msg;
      msg << path << ": line " << lineno << ": expected `source \\t target [\\t doc_id]`";
      throw ValidationError(msg.str());
    }
    auto second_tab = line.find('\t', first_tab + 1);
    SentencePair pair;
    pair.source = line.substr(0, first_tab);
    if (second_tab == std::string::npos) {
      pair.target = line.substr(first_tab + 1);
      pair.doc_id = "#" + std::to_string(lineno);
    } else {
      pair.target = line.substr(first_tab + 1, second_tab - first_tab - 1);
      pair.doc_id = line.substr(second_tab + 1);
    }
    check_source_nonempty(pair.source, path, lineno);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<SentencePair> load_parallel(const std::string& source_path,
                                        const std::string& target_path,
                                        const std::string& docids_path) {
  auto src_in = open_or_throw(source_path);
  auto trg_in = open_or_throw(target_path);
  std::optional<std::ifstream> doc_in;
  if (!docids_path.empty())
    doc_in = open_or_throw(docids_path);

  std::vector<SentencePair> pairs;
  std::string src_line, trg_line, doc_line;
  std::size_t lineno = 0;
  while (true) {
    bool has_src = read_line(src_in, src_line);
    bool has_trg = read_line(trg_in, trg_line);
    bool has_doc = doc_in ? read_line(*doc_in, doc_line) : has_src;
    if (!has_src && !has_trg && !has_doc)
      break;
    ++lineno;
    if (!(has_src && has_trg && has_doc)) {
      std::ostringstream msg;
      msg << "line " << lineno << ": ";
      if (!has_src) msg << source_path << " ended before the other files";
      else if (!has_trg) msg << target_path << " ended before the other files";
      else msg << docids_path << " ended before the other files";
      throw ValidationError(msg.str());
    }
    check_source_nonempty(src_line, source_path, lineno);
    SentencePair pair;
    pair.source = src_line;
    pair.target = trg_line;
    pair.doc_id = doc_in ? doc_line : "#" + std::to_string(lineno);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace

Corpus load_corpus(const std::string& source_path,
                   const std::string& target_path,
                   const std::string& docids_path,
                   CorpusFormat format,
                   const TokenCounter& counter) {
  std::vector<SentencePair> pairs =
      format == CorpusFormat::tsv ? load_tsv(source_path)
                                  : load_parallel(source_path, target_path, docids_path);
  if (pairs.empty())
    throw ValidationError(source_path + ": empty corpus");
  number_documents(pairs);

  Corpus corpus;
  corpus.name = std::filesystem::path(source_path).stem().string();
  for (const auto& p : pairs)
    corpus.target_token_count += counter(p.target);
  Shard shard;
  shard.id = 0;
  shard.pairs = std::move(pairs);
  corpus.shards.push_back(std::move(shard));
  return corpus;
}

Corpus shard_corpus(Corpus corpus, std::size_t shard_size) {
  if (shard_size < 1)
    throw ValidationError("shard_size must be >= 1");

  std::vector<SentencePair> all;
  all.reserve(corpus.line_count());
  for (auto& s : corpus.shards)
    for (auto& p : s.pairs)
      all.push_back(std::move(p));

  Corpus out;
  out.name = std::move(corpus.name);
  out.target_token_count = corpus.target_token_count;
  // Count boundary-straddling documents before the moves below gut `all`.
  for (std::size_t begin = shard_size; begin < all.size(); begin += shard_size)
    if (all[begin].doc_id == all[begin - 1].doc_id)
      ++out.split_documents;
  for (std::size_t begin = 0; begin < all.size(); begin += shard_size) {
    std::size_t end = std::min(begin + shard_size, all.size());
    Shard shard;
    shard.id = static_cast<int>(out.shards.size());
    shard.pairs.assign(std::make_move_iterator(all.begin() + begin),
                       std::make_move_iterator(all.begin() + end));
    number_documents(shard.pairs);  // a split run restarts from 0 in its shard
    out.shards.push_back(std::move(shard));
  }
  return out;
}

const SentencePair* next_pair(Shard& shard) {
  if (shard.cursor >= shard.pairs.size())
    return nullptr;
  return &shard.pairs[shard.cursor++];
}

std::vector<Document> documents(const Shard& shard) {
  std::vector<Document> docs;
  for (const auto& pair : shard.pairs) {
    if (docs.empty() || pair.index_in_doc == 0) {
      docs.push_back(Document{pair.doc_id, {}});
    }
    docs.back().pairs.push_back(pair);
  }
  return docs;
}

std::vector<Document> documents(const Corpus& corpus) {
  std::vector<Document> docs;
  for (const auto& shard : corpus.shards) {
    auto shard_docs = documents(shard);
    docs.insert(docs.end(), std::make_move_iterator(shard_docs.begin()),
                std::make_move_iterator(shard_docs.end()));
  }
  return docs;
}

}  // namespace docmt
