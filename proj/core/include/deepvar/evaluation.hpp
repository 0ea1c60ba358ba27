#pragma once

#include <map>
#include <string>
#include <vector>

#include "deepvar/corpus.hpp"

namespace deepvar {

struct TypeCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  // 0/0 counts as 0 throughout.
  double precision() const;
  double recall() const;
  double f1() const;
};

struct EvalReport {
  std::map<EntityType, TypeCounts> per_type;  // only types present on either side
  TypeCounts micro;
  double macro_f1 = 0.0;  // mean F1 over present types; 1.0 when none present

  std::string to_text() const;
  std::string to_json() const;
};

EvalReport parse_eval_report(const std::string& json_text);

// A predicted span is a true positive iff a gold span with identical
// boundaries and identical type exists in the same sentence; each gold span
// matches at most one prediction, duplicates beyond the first are false
// positives.
EvalReport exact_match_score(const std::vector<std::vector<EntitySpan>>& gold,
                             const std::vector<std::vector<EntitySpan>>& predicted);

// Strips the BIO headers via bio_to_spans on both sides, then exact match.
EvalReport score_tag_output(const std::vector<std::vector<int>>& gold_tags,
                            const std::vector<std::vector<int>>& predicted_tags);

}  // namespace deepvar
