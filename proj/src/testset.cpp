#include "docmt/testset.h"

#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "docmt/error.h"
#include "docmt/tokenize.h"
#include "docmt/sampler.h"

namespace docmt {

using nlohmann::json;

TestsetSchema parse_schema(const std::string& name) {
  if (name == "contrapro") return TestsetSchema::contrapro;
  if (name == "contrawsd") return TestsetSchema::contrawsd;
  if (name == "discevalmt") return TestsetSchema::discevalmt;
  if (name == "gtwic") return TestsetSchema::gtwic;
  if (name == "generic-jsonl" || name == "generic_jsonl" || name == "jsonl")
    return TestsetSchema::generic_jsonl;
  throw ValidationError("unknown test set schema: " + name);
}

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path);
  return in;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  return line;
}

std::vector<std::string> json_string_list(const json& j, const std::string& id,
                                          const std::string& field) {
  if (!j.is_array())
    throw ValidationError("item " + id + ": field '" + field + "' must be an array");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string())
      throw ValidationError("item " + id + ": field '" + field + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

void check_item(const ContrastiveItem& item) {
  if (item.tgt_negatives.empty())
    throw ValidationError("item " + item.id + ": field 'tgt_negatives' is empty");
  for (const auto& neg : item.tgt_negatives)
    if (neg == item.tgt_positive)
      throw ValidationError("item " + item.id +
                            ": field 'tgt_negatives' repeats the positive example");
  if (item.annotations.contains("antecedent_distance")) {
    const auto& d = item.annotations["antecedent_distance"];
    if (d.is_number_integer() && d.get<long long>() < 0)
      throw ValidationError("item " + item.id +
                            ": field 'antecedent_distance' is negative");
  }
}

std::vector<ContrastiveItem> load_contrapro(const std::string& path) {
  auto in = open_input(path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  if (!doc.is_array())
    throw ValidationError(path + ": expected a top-level JSON array");
  std::vector<ContrastiveItem> items;
  items.reserve(doc.size());
  for (std::size_t idx = 0; idx < doc.size(); ++idx) {
    const json& e = doc[idx];
    ContrastiveItem item;
    if (e.contains("document id") && e.contains("segment id")) {
      std::ostringstream id;
      id << e["document id"].get<std::string>() << "#";
      if (e["segment id"].is_string())
        id << e["segment id"].get<std::string>();
      else
        id << e["segment id"].get<long long>();
      item.id = id.str();
    } else {
      item.id = "item-" + std::to_string(idx);
    }
    for (const char* field : {"src segment", "ref segment", "errors"})
      if (!e.contains(field))
        throw ValidationError("item " + item.id + ": missing field '" + field + "'");
    item.src = e["src segment"].get<std::string>();
    item.tgt_positive = e["ref segment"].get<std::string>();
    if (e.contains("src context"))
      item.src_context = json_string_list(e["src context"], item.id, "src context");
    if (e.contains("ref context"))
      item.tgt_context = json_string_list(e["ref context"], item.id, "ref context");
    if (e.contains("src context after"))
      item.src_following =
          json_string_list(e["src context after"], item.id, "src context after");
    if (e.contains("ref context after"))
      item.tgt_following =
          json_string_list(e["ref context after"], item.id, "ref context after");
    if (e.contains("ref pronoun"))
      item.annotations["pronoun"] = e["ref pronoun"].get<std::string>();
    if (e.contains("src pronoun"))
      item.annotations["src_pronoun"] = e["src pronoun"].get<std::string>();
    if (e.contains("ante distance"))
      item.annotations["antecedent_distance"] = e["ante distance"].get<long long>();
    json neg_pronouns = json::array();
    for (const json& err : e["errors"]) {
      if (!err.contains("contrastive"))
        throw ValidationError("item " + item.id + ": error entry missing 'contrastive'");
      item.tgt_negatives.push_back(err["contrastive"].get<std::string>());
      if (err.contains("replacement"))
        neg_pronouns.push_back(err["replacement"].get<std::string>());
    }
    if (neg_pronouns.size() == item.tgt_negatives.size() && !neg_pronouns.empty())
      item.annotations["negative_pronouns"] = neg_pronouns;
    check_item(item);
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<ContrastiveItem> load_contrawsd(const std::string& path) {
  auto in = open_input(path);
  std::vector<ContrastiveItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty())
      continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == '\t') {
        cols.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (cols.size() < 4)
      throw ValidationError(path + " line " + std::to_string(lineno) +
                            ": expected id, source, positive and at least one negative");
    ContrastiveItem item;
    item.id = cols[0];
    item.src = cols[1];
    item.tgt_positive = cols[2];
    item.tgt_negatives.assign(cols.begin() + 3, cols.end());
    check_item(item);
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<ContrastiveItem> load_discevalmt(const std::string& path) {
  auto in = open_input(path);
  std::vector<ContrastiveItem> items;
  std::vector<std::string> block;
  std::string line;
  std::size_t block_no = 0;

  auto flush = [&]() {
    if (block.empty())
      return;
    ++block_no;
    ContrastiveItem item;
    item.id = "disc-" + std::to_string(block_no);
    bool have_src = false, have_pos = false;
    for (const auto& raw : block) {
      auto sep_at = raw.find(": ");
      if (sep_at == std::string::npos)
        throw ValidationError("item " + item.id + ": malformed line '" + raw + "'");
      std::string key = raw.substr(0, sep_at);
      std::string value = raw.substr(sep_at + 2);
      if (key == "id")            item.id = value;
      else if (key == "phenomenon") item.annotations["phenomenon"] = value;
      else if (key == "srcctx")   item.src_context.push_back(value);
      else if (key == "trgctx")   item.tgt_context.push_back(value);
      else if (key == "src")      { item.src = value; have_src = true; }
      else if (key == "positive") { item.tgt_positive = value; have_pos = true; }
      else if (key == "negative") item.tgt_negatives.push_back(value);
      else
        throw ValidationError("item " + item.id + ": unknown field '" + key + "'");
    }
    if (!have_src)
      throw ValidationError("item " + item.id + ": missing field 'src'");
    if (!have_pos)
      throw ValidationError("item " + item.id + ": missing field 'positive'");
    check_item(item);
    items.push_back(std::move(item));
    block.clear();
  };

  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty())
      flush();
    else
      block.push_back(line);
  }
  flush();
  return items;
}

std::vector<std::string> split_eos(const std::string& line) {
  static const std::string kDelim = " _eos ";
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto at = line.find(kDelim, start);
    if (at == std::string::npos)
      break;
    parts.push_back(line.substr(start, at - start));
    start = at + kDelim.size();
  }
  parts.push_back(line.substr(start));
  return parts;
}

std::vector<ContrastiveItem> load_gtwic(const std::string& path) {
  auto in = open_input(path);
  std::vector<ContrastiveItem> items;
  std::vector<std::string> block;
  std::string line;
  std::size_t block_no = 0;

  auto flush = [&]() {
    if (block.empty())
      return;
    ++block_no;
    ContrastiveItem item;
    item.id = "gtwic-" + std::to_string(block_no);
    if (block.size() < 3)
      throw ValidationError("item " + item.id +
                            ": expected a source line, a positive line and at least "
                            "one negative line");
    auto src_parts = split_eos(block[0]);
    item.src = src_parts.back();
    src_parts.pop_back();
    item.src_context = std::move(src_parts);
    auto pos_parts = split_eos(block[1]);
    item.tgt_positive = pos_parts.back();
    pos_parts.pop_back();
    item.tgt_context = std::move(pos_parts);
    for (std::size_t i = 2; i < block.size(); ++i)
      item.tgt_negatives.push_back(split_eos(block[i]).back());
    check_item(item);
    items.push_back(std::move(item));
    block.clear();
  };

  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty())
      flush();
    else
      block.push_back(line);
  }
  flush();
  return items;
}

std::vector<ContrastiveItem> load_generic(const std::string& path) {
  auto in = open_input(path);
  std::vector<ContrastiveItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (trim(line).empty())
      continue;
    json e;
    try {
      e = json::parse(line);
    } catch (const json::exception& ex) {
      throw ValidationError(path + " line " + std::to_string(lineno) + ": " + ex.what());
    }
    ContrastiveItem item;
    item.id = e.contains("id") ? e["id"].get<std::string>()
                               : "item-" + std::to_string(lineno);
    for (const char* field : {"src", "tgt_positive", "tgt_negatives"})
      if (!e.contains(field))
        throw ValidationError("item " + item.id + ": missing field '" + field + "'");
    item.src = e["src"].get<std::string>();
    item.tgt_positive = e["tgt_positive"].get<std::string>();
    item.tgt_negatives = json_string_list(e["tgt_negatives"], item.id, "tgt_negatives");
    if (e.contains("src_context"))
      item.src_context = json_string_list(e["src_context"], item.id, "src_context");
    if (e.contains("tgt_context"))
      item.tgt_context = json_string_list(e["tgt_context"], item.id, "tgt_context");
    if (e.contains("src_following"))
      item.src_following = json_string_list(e["src_following"], item.id, "src_following");
    if (e.contains("tgt_following"))
      item.tgt_following = json_string_list(e["tgt_following"], item.id, "tgt_following");
    if (e.contains("annotations")) {
      if (!e["annotations"].is_object())
        throw ValidationError("item " + item.id + ": field 'annotations' must be an object");
      item.annotations = e["annotations"];
    }
    check_item(item);
    items.push_back(std::move(item));
  }
  return items;
}

// Moses-style artifacts that suggest the text was left tokenized.
bool looks_tokenized(const std::string& text) {
  for (const char* marker : {" .", " ,", " ?", " !", "&apos;", "&quot;", " n't"})
    if (text.find(marker) != std::string::npos)
      return true;
  return false;
}

}  // namespace

std::vector<ContrastiveItem> load_contrastive(const std::string& path,
                                              TestsetSchema schema,
                                              bool warn_tokenization) {
  std::vector<ContrastiveItem> items;
  switch (schema) {
    case TestsetSchema::contrapro:     items = load_contrapro(path); break;
    case TestsetSchema::contrawsd:     items = load_contrawsd(path); break;
    case TestsetSchema::discevalmt:    items = load_discevalmt(path); break;
    case TestsetSchema::gtwic:         items = load_gtwic(path); break;
    case TestsetSchema::generic_jsonl: items = load_generic(path); break;
  }
  if (warn_tokenization) {
    std::size_t suspicious = 0;
    for (const auto& item : items)
      if (looks_tokenized(item.src) || looks_tokenized(item.tgt_positive))
        ++suspicious;
    if (suspicious > 0)
      std::cerr << "warning: " << suspicious << " of " << items.size()
                << " items look tokenized; inputs are expected detokenized\n";
  }
  return items;
}

std::pair<std::string, std::string> phrase_diff(const std::string& positive,
                                                const std::string& negative) {
  auto p = tokenize(positive);
  auto n = tokenize(negative);
  std::size_t m = p.size(), k = n.size();
  std::size_t i = 0;
  while (i < m && i < k && p[i] == n[i])
    ++i;
  std::size_t max_s = std::min(m, k) - i;
  std::size_t s = 0;
  while (s < max_s && p[m - 1 - s] == n[k - 1 - s])
    ++s;
  std::vector<std::string_view> good(p.begin() + i, p.begin() + (m - s));
  std::vector<std::string_view> bad(n.begin() + i, n.begin() + (k - s));
  if (good.empty() && bad.empty())
    throw ValidationError("phrase_diff: no differing span between \"" + positive +
                          "\" and \"" + negative + "\"");
  std::set<std::string_view> good_tokens(good.begin(), good.end());
  for (const auto& tok : bad) {
    if (good_tokens.count(tok))
      throw ValidationError(
          "phrase_diff: more than one differing region (residues \"" +
          join_tokens(good) + "\" and \"" + join_tokens(bad) +
          "\" share the token \"" + std::string(tok) + "\")");
  }
  return {join_tokens(good), join_tokens(bad)};
}

namespace {

std::string group_key(const ContrastiveItem& item) {
  std::string key;
  for (const auto& s : item.src_context) { key += s; key += '\x1f'; }
  key += '\x1e'; key += item.src; key += '\x1e';
  for (const auto& s : item.tgt_context) { key += s; key += '\x1f'; }
  key += '\x1e'; key += item.tgt_positive;
  return key;
}

std::vector<std::vector<const ContrastiveItem*>> group_by_positive(
    const std::vector<ContrastiveItem>& items) {
  std::vector<std::vector<const ContrastiveItem*>> groups;
  std::map<std::string, std::size_t> index;
  for (const auto& item : items) {
    auto key = group_key(item);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(std::move(key), groups.size());
      groups.push_back({&item});
    } else {
      groups[it->second].push_back(&item);
    }
  }
  return groups;
}

void push_unique(std::vector<std::string>& list, const std::string& value) {
  for (const auto& have : list)
    if (have == value)
      return;
  list.push_back(value);
}

}  // namespace

std::vector<GenerativeItem> to_generative(const std::vector<ContrastiveItem>& items,
                                          const std::string& sep) {
  std::vector<GenerativeItem> out;
  for (const auto& group : group_by_positive(items)) {
    const ContrastiveItem& base = *group.front();
    GenerativeItem g;
    g.id = base.id;
    g.src_context = base.src_context;
    g.src = base.src;
    g.src_following = base.src_following;
    g.tgt_context = base.tgt_context;
    g.tgt_positive = base.tgt_positive;
    g.annotations = base.annotations;

    std::vector<std::string> negatives;
    std::vector<std::string> negative_pronouns;
    bool pronouns_complete = true;
    for (const ContrastiveItem* item : group) {
      const json* pron = nullptr;
      if (item->annotations.contains("negative_pronouns"))
        pron = &item->annotations["negative_pronouns"];
      for (std::size_t j = 0; j < item->tgt_negatives.size(); ++j) {
        std::size_t before = negatives.size();
        push_unique(negatives, item->tgt_negatives[j]);
        if (negatives.size() == before)
          continue;  // duplicate negative across the group
        if (pron && j < pron->size())
          negative_pronouns.push_back((*pron)[j].get<std::string>());
        else
          pronouns_complete = false;
      }
    }

    bool annotated = base.annotations.contains("pronoun") && pronouns_complete &&
                     !negative_pronouns.empty();
    if (annotated) {
      g.good_phrases.push_back(base.annotations["pronoun"].get<std::string>());
      for (const auto& p : negative_pronouns)
        push_unique(g.bad_phrases, p);
      json merged = json::array();
      for (const auto& p : negative_pronouns)
        merged.push_back(p);
      g.annotations["negative_pronouns"] = merged;
    } else {
      std::string good;
      bool first = true;
      for (const auto& neg : negatives) {
        auto [gd, bd] = phrase_diff(base.tgt_positive, neg);
        if (first) {
          good = gd;
          first = false;
        } else if (gd != good) {
          throw ValidationError("item " + g.id + ": good phrase disagrees across negatives (\"" +
                                good + "\" vs \"" + gd + "\")");
        }
        push_unique(g.bad_phrases, bd);
      }
      g.good_phrases.push_back(good);
    }

    for (const auto& gd : g.good_phrases) {
      auto norm = normalize_match(gd);
      for (const auto& bd : g.bad_phrases)
        if (normalize_match(bd) == norm)
          throw ValidationError("item " + g.id + ": good phrase \"" + gd +
                                "\" matches bad phrase \"" + bd + "\"");
    }
    if (!g.tgt_context.empty())
      g.forced_target_prefix = join_segments(g.tgt_context, sep);
    out.push_back(std::move(g));
  }
  return out;
}

ShiftResult shift_testset(const std::vector<ContrastiveItem>& items, int offset) {
  if (offset < 0)
    throw ValidationError("shift offset must be >= 0");
  ShiftResult result;
  for (const auto& group : group_by_positive(items)) {
    const ContrastiveItem& base = *group.front();
    if (offset == 0) {
      result.pairs.push_back({base.src_context, base.src, base.tgt_positive});
      continue;
    }
    auto k = static_cast<std::size_t>(offset);
    if (base.src_following.size() < k || base.tgt_following.size() < k) {
      ++result.dropped;
      continue;
    }
    ShiftedPair pair;
    pair.src_context = base.src_context;
    pair.src_context.push_back(base.src);
    pair.src_context.insert(pair.src_context.end(), base.src_following.begin(),
                            base.src_following.begin() + (k - 1));
    pair.src = base.src_following[k - 1];
    pair.ref = base.tgt_following[k - 1];
    result.pairs.push_back(std::move(pair));
  }
  return result;
}

void write_shifted_files(const ShiftResult& result, const std::string& src_path,
                         const std::string& ref_path) {
  std::ofstream src(src_path, std::ios::binary);
  std::ofstream ref(ref_path, std::ios::binary);
  if (!src)
    throw IoError("cannot write " + src_path);
  if (!ref)
    throw IoError("cannot write " + ref_path);
  for (const auto& pair : result.pairs) {
    src << pair.src << '\n';
    ref << pair.ref << '\n';
  }
}

json to_json(const ContrastiveItem& item) {
  json j;
  j["id"] = item.id;
  j["src_context"] = item.src_context;
  j["src"] = item.src;
  j["tgt_context"] = item.tgt_context;
  j["tgt_positive"] = item.tgt_positive;
  j["tgt_negatives"] = item.tgt_negatives;
  j["annotations"] = item.annotations;
  if (!item.src_following.empty())
    j["src_following"] = item.src_following;
  if (!item.tgt_following.empty())
    j["tgt_following"] = item.tgt_following;
  return j;
}

json to_json(const GenerativeItem& item) {
  json j;
  j["id"] = item.id;
  j["src_context"] = item.src_context;
  j["src"] = item.src;
  if (item.forced_target_prefix)
    j["forced_target_prefix"] = *item.forced_target_prefix;
  else
    j["forced_target_prefix"] = nullptr;
  j["good_phrases"] = item.good_phrases;
  j["bad_phrases"] = item.bad_phrases;
  if (!item.src_following.empty())
    j["src_following"] = item.src_following;
  j["tgt_context"] = item.tgt_context;
  if (item.tgt_positive)
    j["tgt_positive"] = *item.tgt_positive;
  j["annotations"] = item.annotations;
  return j;
}

GenerativeItem generative_from_json(const json& e) {
  GenerativeItem g;
  g.id = e.at("id").get<std::string>();
  if (e.contains("src_context"))
    g.src_context = json_string_list(e["src_context"], g.id, "src_context");
  g.src = e.at("src").get<std::string>();
  if (e.contains("forced_target_prefix") && !e["forced_target_prefix"].is_null())
    g.forced_target_prefix = e["forced_target_prefix"].get<std::string>();
  g.good_phrases = json_string_list(e.at("good_phrases"), g.id, "good_phrases");
  if (e.contains("bad_phrases"))
    g.bad_phrases = json_string_list(e["bad_phrases"], g.id, "bad_phrases");
  if (e.contains("src_following"))
    g.src_following = json_string_list(e["src_following"], g.id, "src_following");
  if (e.contains("tgt_context"))
    g.tgt_context = json_string_list(e["tgt_context"], g.id, "tgt_context");
  if (e.contains("tgt_positive") && e["tgt_positive"].is_string())
    g.tgt_positive = e["tgt_positive"].get<std::string>();
  if (e.contains("annotations") && e["annotations"].is_object())
    g.annotations = e["annotations"];
  return g;
}

void write_contrastive_jsonl(const std::vector<ContrastiveItem>& items,
                             std::ostream& out) {
  for (const auto& item : items)
    out << to_json(item).dump() << '\n';
}

void write_generative_jsonl(const std::vector<GenerativeItem>& items,
                            std::ostream& out) {
  for (const auto& item : items)
    out << to_json(item).dump() << '\n';
}

std::vector<GenerativeItem> load_generative_jsonl(const std::string& path) {
  auto in = open_input(path);
  std::vector<GenerativeItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (trim(line).empty())
      continue;
    try {
      items.push_back(generative_from_json(json::parse(line)));
    } catch (const json::exception& ex) {
      throw ValidationError(path + " line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return items;
}

}  // namespace docmt
