#include "deepvar/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "deepvar/errors.hpp"
#include "deepvar/rng.hpp"

namespace deepvar {

std::string_view entity_type_name(EntityType t) {
  switch (t) {
    case EntityType::kDnaMutation: return "DNAMutation";
    case EntityType::kProteinMutation: return "ProteinMutation";
    case EntityType::kSnp: return "SNP";
  }
  return "?";
}

std::optional<EntityType> entity_type_from_name(std::string_view name) {
  if (name == "DNAMutation") return EntityType::kDnaMutation;
  if (name == "ProteinMutation") return EntityType::kProteinMutation;
  if (name == "SNP") return EntityType::kSnp;
  return std::nullopt;
}

const std::array<std::string, TagSet::kSize>& TagSet::names() {
  static const std::array<std::string, kSize> kNames = {
      "O", "B-DNAMutation", "I-DNAMutation", "B-ProteinMutation",
      "I-ProteinMutation", "B-SNP"};
  return kNames;
}

const std::string& TagSet::name(int tag) { return names()[static_cast<std::size_t>(tag)]; }

std::optional<int> TagSet::index_of(std::string_view name) {
  const auto& all = names();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i] == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

bool TagSet::is_begin(int tag) { return tag == 1 || tag == 3 || tag == 5; }
bool TagSet::is_inside(int tag) { return tag == 2 || tag == 4; }

std::optional<EntityType> TagSet::entity_type_of(int tag) {
  switch (tag) {
    case 1:
    case 2: return EntityType::kDnaMutation;
    case 3:
    case 4: return EntityType::kProteinMutation;
    case 5: return EntityType::kSnp;
    default: return std::nullopt;
  }
}

int TagSet::begin_tag(EntityType t) {
  switch (t) {
    case EntityType::kDnaMutation: return 1;
    case EntityType::kProteinMutation: return 3;
    case EntityType::kSnp: return 5;
  }
  return 0;
}

std::optional<int> TagSet::inside_tag(EntityType t) {
  switch (t) {
    case EntityType::kDnaMutation: return 2;
    case EntityType::kProteinMutation: return 4;
    case EntityType::kSnp: return std::nullopt;  // no I-SNP
  }
  return std::nullopt;
}

namespace {

bool has_whitespace(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
  });
}

// I-X is only valid directly after B-X or I-X.
bool bio_transition_ok(int prev, int next) {
  if (!TagSet::is_inside(next)) return true;
  if (prev < 0) return false;
  return TagSet::entity_type_of(prev) == TagSet::entity_type_of(next) &&
         (TagSet::is_begin(prev) || TagSet::is_inside(prev));
}

}  // namespace

void AnnotatedSentence::validate(bool check_bio_transitions) const {
  check_data(tokens.size() == tags.size(),
             "sentence has " + std::to_string(tokens.size()) + " tokens but " +
                 std::to_string(tags.size()) + " tags");
  int prev = -1;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    check_data(tags[i] >= 0 && tags[i] < static_cast<int>(TagSet::kSize),
               "tag index out of range: " + std::to_string(tags[i]));
    check_data(!check_bio_transitions || bio_transition_ok(prev, tags[i]),
               "invalid BIO sequence: " + TagSet::name(tags[i]) + " at position " +
                   std::to_string(i));
    prev = tags[i];
  }
  for (const Token& t : tokens) {
    check_data(!t.text.empty() && !has_whitespace(t.text),
               "token text must be non-empty and whitespace-free: '" + t.text + "'");
    check_data(t.start < t.end && t.end <= text.size() &&
                   text.compare(t.start, t.end - t.start, t.text) == 0,
               "token offsets do not match sentence text: '" + t.text + "'");
  }
}

namespace {

// Rebuilds a source string for sentences loaded from token-only files.
void attach_joined_text(AnnotatedSentence& s) {
  std::string text;
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    if (i) text += ' ';
    s.tokens[i].start = text.size();
    text += s.tokens[i].text;
    s.tokens[i].end = text.size();
  }
  s.text = std::move(text);
}

}  // namespace

std::vector<AnnotatedSentence> load_bio_file(const std::string& path, bool validate_bio) {
  std::ifstream in(path);
  check_data(in.is_open(), "cannot open BIO file: " + path);

  std::vector<AnnotatedSentence> sentences;
  AnnotatedSentence current;
  std::string doc_id;
  std::size_t sentence_first_line = 0;
  std::string line;
  std::size_t line_no = 0;

  const auto finish_sentence = [&]() {
    if (current.tokens.empty()) return;
    current.doc_id = doc_id;
    attach_joined_text(current);
    try {
      current.validate(validate_bio);
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(sentence_first_line) + ": " + e.what());
    }
    sentences.push_back(std::move(current));
    current = AnnotatedSentence{};
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      finish_sentence();
      continue;
    }
    if (line.rfind("-DOCSTART-", 0) == 0) {
      finish_sentence();
      std::size_t pos = line.find_first_not_of(" \t", 10);
      doc_id = pos == std::string::npos ? "" : line.substr(pos);
      continue;
    }
    if (line[0] == '#') continue;  // span summary blocks from tagged output

    const std::size_t tab = line.find('\t');
    check_data(tab != std::string::npos && line.find('\t', tab + 1) == std::string::npos,
               path + ":" + std::to_string(line_no) +
                   ": malformed line, expected 'token<TAB>tag': " + line);
    std::string token_text = line.substr(0, tab);
    std::string tag_name = line.substr(tab + 1);
    check_data(!token_text.empty() && !has_whitespace(token_text),
               path + ":" + std::to_string(line_no) + ": bad token text: '" + token_text + "'");
    const auto tag = TagSet::index_of(tag_name);
    check_data(tag.has_value(),
               path + ":" + std::to_string(line_no) + ": unknown tag " + tag_name);
    if (current.tokens.empty()) sentence_first_line = line_no;
    current.tokens.push_back(Token{std::move(token_text), 0, 0});
    current.tags.push_back(*tag);
  }
  finish_sentence();
  return sentences;
}

std::string format_bio(const std::vector<AnnotatedSentence>& sentences) {
  std::string out;
  std::string current_doc;
  for (const AnnotatedSentence& s : sentences) {
    if (s.doc_id != current_doc && !s.doc_id.empty()) {
      out += "-DOCSTART- " + s.doc_id + "\n";
    }
    current_doc = s.doc_id;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      out += s.tokens[i].text;
      out += '\t';
      out += TagSet::name(s.tags[i]);
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

void write_bio_file(const std::string& path, const std::vector<AnnotatedSentence>& sentences) {
  std::ofstream out(path, std::ios::binary);
  check_data(out.is_open(), "cannot write BIO file: " + path);
  out << format_bio(sentences);
  check_data(out.good(), "failed writing BIO file: " + path);
}

std::vector<int> spans_to_bio(const std::vector<Token>& tokens,
                              std::vector<EntitySpan> spans) {
  std::vector<int> tags(tokens.size(), TagSet::kOutside);
  std::sort(spans.begin(), spans.end(), [](const EntitySpan& a, const EntitySpan& b) {
    return a.token_start < b.token_start;
  });
  std::size_t prev_end = 0;
  bool first = true;
  for (const EntitySpan& span : spans) {
    check_data(span.token_start <= span.token_end && span.token_end < tokens.size(),
               "span token range out of bounds");
    check_data(first || span.token_start > prev_end, "overlapping entity spans");
    if (span.type == EntityType::kSnp) {
      check_data(span.token_start == span.token_end,
                 "SNP spans must cover a single token (no I-SNP)");
    }
    tags[span.token_start] = TagSet::begin_tag(span.type);
    for (std::size_t i = span.token_start + 1; i <= span.token_end; ++i) {
      tags[i] = *TagSet::inside_tag(span.type);
    }
    prev_end = span.token_end;
    first = false;
  }
  return tags;
}

std::vector<EntitySpan> bio_to_spans(const std::vector<int>& tags) {
  std::vector<EntitySpan> spans;
  std::optional<EntityType> open;
  std::size_t open_start = 0;

  const auto close = [&](std::size_t end_exclusive) {
    if (!open) return;
    spans.push_back(EntitySpan{*open, open_start, end_exclusive - 1});
    open.reset();
  };

  for (std::size_t i = 0; i < tags.size(); ++i) {
    const int tag = tags[i] >= 0 && tags[i] < static_cast<int>(TagSet::kSize)
                        ? tags[i]
                        : TagSet::kOutside;
    const auto type = TagSet::entity_type_of(tag);
    if (!type) {
      close(i);
      continue;
    }
    if (TagSet::is_begin(tag)) {
      close(i);
      open = type;
      open_start = i;
    } else {  // inside tag; orphans start a fresh span of the same type
      if (open && *open == *type) continue;
      close(i);
      open = type;
      open_start = i;
    }
  }
  close(tags.size());
  return spans;
}

std::vector<EntitySpan> bio_to_spans(const std::vector<int>& tags,
                                     const std::vector<Token>& tokens) {
  std::vector<EntitySpan> spans = bio_to_spans(tags);
  for (EntitySpan& s : spans) {
    if (s.token_end < tokens.size()) {
      s.char_start = static_cast<std::ptrdiff_t>(tokens[s.token_start].start);
      s.char_end = static_cast<std::ptrdiff_t>(tokens[s.token_end].end);
    }
  }
  return spans;
}

std::string AlignmentReport::to_text() const {
  std::ostringstream out;
  out << "total: " << total_spans << "\n";
  out << "aligned: " << aligned << "\n";
  out << "misaligned: " << issues.size() << "\n";
  for (const AlignmentIssue& issue : issues) {
    out << issue.reason << "\t" << issue.doc_id << "\t" << issue.char_start << "\t"
        << issue.char_end << "\t" << issue.entity_type << "\n";
  }
  return out.str();
}

namespace {

struct RawSpan {
  std::size_t char_start;
  std::size_t char_end;
  EntityType type;
};

}  // namespace

OffsetCorpus load_offset_annotations(const std::string& text_path,
                                     const std::string& annotation_path,
                                     const TokenizerConfig& tokenizer_config) {
  std::ifstream text_in(text_path);
  check_data(text_in.is_open(), "cannot open text file: " + text_path);

  std::vector<std::string> doc_order;
  std::unordered_map<std::string, std::string> doc_text;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(text_in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    check_data(tab != std::string::npos,
               text_path + ":" + std::to_string(line_no) +
                   ": expected 'doc_id<TAB>sentence text'");
    std::string doc = line.substr(0, tab);
    check_data(doc_text.emplace(doc, line.substr(tab + 1)).second,
               text_path + ":" + std::to_string(line_no) + ": duplicate doc_id " + doc);
    doc_order.push_back(std::move(doc));
  }

  std::ifstream ann_in(annotation_path);
  check_data(ann_in.is_open(), "cannot open annotation file: " + annotation_path);
  std::unordered_map<std::string, std::vector<RawSpan>> doc_spans;
  line_no = 0;
  std::size_t total_spans = 0;
  while (std::getline(ann_in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
      const std::size_t tab = line.find('\t', pos);
      fields.push_back(line.substr(pos, tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    const std::string where = annotation_path + ":" + std::to_string(line_no);
    check_data(fields.size() == 5,
               where + ": expected 'doc_id<TAB>start<TAB>end<TAB>type<TAB>surface'");
    const auto it = doc_text.find(fields[0]);
    check_data(it != doc_text.end(), where + ": unknown doc_id " + fields[0]);
    std::size_t start = 0, end = 0;
    try {
      start = std::stoul(fields[1]);
      end = std::stoul(fields[2]);
    } catch (const std::exception&) {
      throw DataError(where + ": bad character offsets");
    }
    check_data(start < end && end <= it->second.size(), where + ": offsets out of range");
    const auto type = entity_type_from_name(fields[3]);
    check_data(type.has_value(), where + ": unknown entity type " + fields[3]);
    check_data(it->second.compare(start, end - start, fields[4]) == 0,
               where + ": surface text does not match offsets");
    doc_spans[fields[0]].push_back(RawSpan{start, end, *type});
    ++total_spans;
  }

  OffsetCorpus corpus;
  corpus.report.total_spans = total_spans;
  for (const std::string& doc : doc_order) {
    AnnotatedSentence sentence;
    sentence.doc_id = doc;
    sentence.text = doc_text[doc];
    sentence.tokens = tokenize(sentence.text, tokenizer_config);

    auto spans_it = doc_spans.find(doc);
    std::vector<EntitySpan> aligned;
    if (spans_it != doc_spans.end()) {
      std::sort(spans_it->second.begin(), spans_it->second.end(),
                [](const RawSpan& a, const RawSpan& b) { return a.char_start < b.char_start; });
      std::size_t taken_until = 0;  // token index; guards against overlap
      bool any_taken = false;
      for (const RawSpan& raw : spans_it->second) {
        const auto issue = [&](const char* reason) {
          corpus.report.issues.push_back(
              AlignmentIssue{doc, raw.char_start, raw.char_end,
                             std::string(entity_type_name(raw.type)), reason});
        };
        std::size_t tok_start = sentence.tokens.size();
        std::size_t tok_end = sentence.tokens.size();
        for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
          if (sentence.tokens[i].start == raw.char_start) tok_start = i;
          if (sentence.tokens[i].end == raw.char_end) tok_end = i;
        }
        if (tok_start >= sentence.tokens.size() || tok_end >= sentence.tokens.size() ||
            tok_start > tok_end) {
          issue("boundary");
          continue;
        }
        if (raw.type == EntityType::kSnp && tok_start != tok_end) {
          issue("snp_multi_token");
          continue;
        }
        if (any_taken && tok_start <= taken_until) {
          issue("overlap");
          continue;
        }
        aligned.push_back(EntitySpan{raw.type, tok_start, tok_end,
                                     static_cast<std::ptrdiff_t>(raw.char_start),
                                     static_cast<std::ptrdiff_t>(raw.char_end)});
        taken_until = tok_end;
        any_taken = true;
        ++corpus.report.aligned;
      }
    }
    sentence.tags = spans_to_bio(sentence.tokens, aligned);
    if (!sentence.tokens.empty()) corpus.sentences.push_back(std::move(sentence));
  }
  return corpus;
}

std::pair<std::vector<AnnotatedSentence>, std::vector<AnnotatedSentence>> split_holdout(
    const std::vector<AnnotatedSentence>& sentences, double fraction, std::uint64_t seed) {
  check_config(fraction > 0.0 && fraction < 1.0,
               "holdout fraction must be in (0, 1), got " + std::to_string(fraction));
  check_data(!sentences.empty(), "cannot split an empty corpus");

  std::vector<std::size_t> order(sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = Rng(seed).split("holdout");
  rng.shuffle(order);

  const auto val_count = static_cast<std::size_t>(
      std::llround(static_cast<double>(sentences.size()) * fraction));
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + val_count);
  std::vector<std::size_t> train_idx(order.begin() + val_count, order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  std::pair<std::vector<AnnotatedSentence>, std::vector<AnnotatedSentence>> result;
  for (std::size_t i : train_idx) result.first.push_back(sentences[i]);
  for (std::size_t i : val_idx) result.second.push_back(sentences[i]);
  return result;
}

}  // namespace deepvar
