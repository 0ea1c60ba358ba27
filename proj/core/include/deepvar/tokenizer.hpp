#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace deepvar {

// A token with byte offsets into its source sentence: text == source[start, end).
struct Token {
  std::string text;
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const Token&) const = default;
};

// Character classes driving tokenization. Defaults follow the domain rules
// for variant mentions: keep hyphens, dots and angle brackets inside tokens,
// split on separators, strip trailing punctuation, peel surrounding brackets.
struct TokenizerConfig {
  std::string split_chars = "\"#&$_*;/\\~!?={}";  // whitespace always splits
  std::string strip_chars = "\",.':";
  std::vector<std::pair<char, char>> bracket_pairs = {
      {'(', ')'}, {'[', ']'}, {'{', '}'}};

  static TokenizerConfig standard() { return TokenizerConfig{}; }
  void validate() const;  // throws ConfigError if classes touch alphanumerics

  bool is_split(char c) const;
  bool is_strip(char c) const;
};

// true iff the first and last characters form a configured pair and the
// interior is non-empty.
bool is_bracketed(std::string_view token_text,
                  const std::vector<std::pair<char, char>>& pairs);

// Splits on whitespace and split_chars (separators are dropped), then for
// each piece strips trailing strip_chars exhaustively and peels one layer of
// surrounding brackets. Stripped characters and peeled brackets are emitted
// as their own single-character tokens so every non-separator byte of the
// input stays addressable by offset. Pure; deterministic.
std::vector<Token> tokenize(std::string_view text, const TokenizerConfig& config);

}  // namespace deepvar
