#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace docmt {

// One contrastive example: a positive translation paired with constructed
// negatives. A non-empty tgt_context marks items whose decision depends on
// the target side (those are fed to the decoder as a prefix in generative
// mode). annotations carries dataset metadata: "pronoun", "antecedent_distance",
// "phenomenon", "negative_pronouns" (array aligned with tgt_negatives).
struct ContrastiveItem {
  std::string id;
  std::vector<std::string> src_context;
  std::string src;
  std::vector<std::string> tgt_context;
  std::string tgt_positive;
  std::vector<std::string> tgt_negatives;
  nlohmann::json annotations = nlohmann::json::object();
  // Sentences after the payload, when the dataset provides them; needed only
  // for building shifted test sets.
  std::vector<std::string> src_following;
  std::vector<std::string> tgt_following;
};

struct GenerativeItem {
  std::string id;
  std::vector<std::string> src_context;
  std::string src;
  std::optional<std::string> forced_target_prefix;  // set when tgt_context non-empty
  std::vector<std::string> good_phrases;
  std::vector<std::string> bad_phrases;
  // Retained from conversion: following source sentences feed right-context
  // windows, target context aligns forced prefixes, the positive target
  // anchors forced-prefix truncation, annotations drive bucketing.
  std::vector<std::string> src_following;
  std::vector<std::string> tgt_context;
  std::optional<std::string> tgt_positive;
  nlohmann::json annotations = nlohmann::json::object();
};

enum class TestsetSchema { contrapro, contrawsd, discevalmt, gtwic, generic_jsonl };

TestsetSchema parse_schema(const std::string& name);

// Loads and normalizes a contrastive test set.
//
//   contrapro      JSON array; per item: "src segment", "ref segment",
//                  "ref pronoun", "ante distance", "errors":[{"contrastive",
//                  "replacement"}...], optional "src context"/"ref context"
//                  (+ " after" variants), "document id", "segment id".
//   contrawsd      TSV: id \t src \t positive \t negative [\t negative...].
//   discevalmt     blank-line-separated blocks of "key: value" lines; keys
//                  id, phenomenon, srcctx, src, trgctx, positive, negative
//                  (srcctx/trgctx/negative repeatable).
//   gtwic          blank-line-separated blocks: source line, positive line,
//                  negative lines; sentences within a line joined by " _eos ";
//                  the last sentence is the one under test.
//   generic_jsonl  one object per line: {"id","src_context":[],"src",
//                  "tgt_context":[],"tgt_positive","tgt_negatives":[],
//                  "annotations":{}} plus optional "src_following"/
//                  "tgt_following".
std::vector<ContrastiveItem> load_contrastive(const std::string& path,
                                              TestsetSchema schema,
                                              bool warn_tokenization = false);

// Token-level minimal differing window: strip the longest common token
// prefix, then the longest common suffix that stays clear of it; the
// residues are (good, bad). Equal inputs are an error, as are pairs whose
// residues still share a token (more than one differing region).
std::pair<std::string, std::string> phrase_diff(const std::string& positive,
                                                const std::string& negative);

// Converts to generative items, grouping contrastive entries that share the
// same positive example. Pronoun-annotated sets take the annotation route;
// otherwise phrases come from phrase_diff against each negative, and the
// good phrase must agree across them. sep is used to join target context
// into forced_target_prefix.
std::vector<GenerativeItem> to_generative(const std::vector<ContrastiveItem>& items,
                                          const std::string& sep = "<sep>");

struct ShiftedPair {
  std::vector<std::string> src_context;  // original payload absorbed here
  std::string src;
  std::string ref;
};

struct ShiftResult {
  std::vector<ShiftedPair> pairs;
  std::size_t dropped = 0;  // items lacking enough following context
};

// Builds a plain parallel test set from the sentences `offset` positions
// after each payload (grouped by positive example first). offset 0 is the
// identity test set.
ShiftResult shift_testset(const std::vector<ContrastiveItem>& items, int offset = 1);

// One line per pair in each file.
void write_shifted_files(const ShiftResult& result, const std::string& src_path,
                         const std::string& ref_path);

// Generic JSONL writers/readers for both item kinds.
void write_contrastive_jsonl(const std::vector<ContrastiveItem>& items,
                             std::ostream& out);
void write_generative_jsonl(const std::vector<GenerativeItem>& items,
                            std::ostream& out);
std::vector<GenerativeItem> load_generative_jsonl(const std::string& path);

nlohmann::json to_json(const ContrastiveItem& item);
nlohmann::json to_json(const GenerativeItem& item);
GenerativeItem generative_from_json(const nlohmann::json& j);

}  // namespace docmt
