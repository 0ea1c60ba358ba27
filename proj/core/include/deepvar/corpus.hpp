#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deepvar/tokenizer.hpp"

namespace deepvar {

enum class EntityType { kDnaMutation = 0, kProteinMutation = 1, kSnp = 2 };

std::string_view entity_type_name(EntityType t);
std::optional<EntityType> entity_type_from_name(std::string_view name);

// The fixed six-tag BIO scheme. Index 0 is O (also used for padding
// positions under masking); there is deliberately no I-SNP.
class TagSet {
 public:
  static constexpr std::size_t kSize = 6;
  static constexpr int kOutside = 0;

  static const std::array<std::string, kSize>& names();
  static const std::string& name(int tag);
  static std::optional<int> index_of(std::string_view name);

  static bool is_begin(int tag);
  static bool is_inside(int tag);
  static std::optional<EntityType> entity_type_of(int tag);  // nullopt for O
  static int begin_tag(EntityType t);
  static std::optional<int> inside_tag(EntityType t);  // nullopt for SNP
};

// Entity mention over a token range (inclusive ends). Character offsets are
// filled when token geometry is known; -1 means unset.
struct EntitySpan {
  EntityType type;
  std::size_t token_start = 0;
  std::size_t token_end = 0;
  std::ptrdiff_t char_start = -1;
  std::ptrdiff_t char_end = -1;

  friend bool operator==(const EntitySpan& a, const EntitySpan& b) {
    return a.type == b.type && a.token_start == b.token_start &&
           a.token_end == b.token_end;
  }
};

struct AnnotatedSentence {
  std::vector<Token> tokens;
  std::vector<int> tags;  // same length as tokens, BIO-valid
  std::string doc_id;
  std::string text;  // source the token offsets index into

  // Throws DataError on any invariant violation. check_bio_transitions is
  // turned off for model-output files, which may carry orphan I- tags.
  void validate(bool check_bio_transitions = true) const;
};

struct DatasetSplit {
  std::vector<AnnotatedSentence> train;
  std::vector<AnnotatedSentence> validation;
  std::vector<AnnotatedSentence> test;
};

// Token-per-line format: "token<TAB>tag", blank line between sentences,
// optional "-DOCSTART- <doc_id>" headers, lines starting with '#' skipped.
// Gold corpora load with validate_bio on; predicted files load with it off
// since decoder output need not be BIO-consistent.
std::vector<AnnotatedSentence> load_bio_file(const std::string& path,
                                             bool validate_bio = true);

// Canonical writer; loading its output and re-writing reproduces it byte for byte.
void write_bio_file(const std::string& path, const std::vector<AnnotatedSentence>& sentences);
std::string format_bio(const std::vector<AnnotatedSentence>& sentences);

// First token of a span gets B-<type>, the rest I-<type>, everything else O.
// Rejects overlapping spans and multi-token SNP spans.
std::vector<int> spans_to_bio(const std::vector<Token>& tokens,
                              std::vector<EntitySpan> spans);

// Total over arbitrary tag sequences: maximal B-X (I-X)* runs become spans
// and an orphan I-X opens a new span as if it were B-X. Out-of-range tag
// indices are treated as O.
std::vector<EntitySpan> bio_to_spans(const std::vector<int>& tags);
std::vector<EntitySpan> bio_to_spans(const std::vector<int>& tags,
                                     const std::vector<Token>& tokens);

struct AlignmentIssue {
  std::string doc_id;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::string entity_type;
  std::string reason;  // "boundary", "overlap", "snp_multi_token"
};

struct AlignmentReport {
  std::size_t total_spans = 0;
  std::size_t aligned = 0;
  std::vector<AlignmentIssue> issues;

  std::size_t misaligned() const { return issues.size(); }
  std::string to_text() const;
};

struct OffsetCorpus {
  std::vector<AnnotatedSentence> sentences;
  AlignmentReport report;
};

// text file: "doc_id<TAB>sentence text" per line; annotation file:
// "doc_id<TAB>char_start<TAB>char_end<TAB>type<TAB>surface" per line.
// Spans that do not land on token boundaries are reported, never dropped
// silently.
OffsetCorpus load_offset_annotations(const std::string& text_path,
                                     const std::string& annotation_path,
                                     const TokenizerConfig& tokenizer_config);

// Deterministic shuffled holdout; validation gets round(n * fraction).
std::pair<std::vector<AnnotatedSentence>, std::vector<AnnotatedSentence>> split_holdout(
    const std::vector<AnnotatedSentence>& sentences, double fraction, std::uint64_t seed);

}  // namespace deepvar
