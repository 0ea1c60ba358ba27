#include "deepvar/tokenizer.hpp"

#include <algorithm>
#include <cctype>

#include "deepvar/errors.hpp"

namespace deepvar {

namespace {

bool is_space_byte(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

bool is_alnum_byte(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

void TokenizerConfig::validate() const {
  for (char c : split_chars) {
    check_config(!is_alnum_byte(c),
                 std::string("tokenizer split_chars must not contain alphanumerics: '") + c + "'");
  }
  for (char c : strip_chars) {
    check_config(!is_alnum_byte(c),
                 std::string("tokenizer strip_chars must not contain alphanumerics: '") + c + "'");
  }
  for (auto [open, close] : bracket_pairs) {
    check_config(!is_alnum_byte(open) && !is_alnum_byte(close),
                 "tokenizer bracket pairs must not contain alphanumerics");
  }
}

bool TokenizerConfig::is_split(char c) const {
  return is_space_byte(c) || split_chars.find(c) != std::string::npos;
}

bool TokenizerConfig::is_strip(char c) const {
  return strip_chars.find(c) != std::string::npos;
}

bool is_bracketed(std::string_view token_text,
                  const std::vector<std::pair<char, char>>& pairs) {
  if (token_text.size() < 3) return false;  // interior must be non-empty
  for (auto [open, close] : pairs) {
    if (token_text.front() == open && token_text.back() == close) return true;
  }
  return false;
}

namespace {

void emit(std::string_view source, std::size_t start, std::size_t end,
          std::vector<Token>& out) {
  out.push_back(Token{std::string(source.substr(start, end - start)), start, end});
}

// One whitespace/split-free piece: exhaustive trailing strip, then one layer
// of bracket peeling. Sub-tokens come out in offset order.
void emit_piece(std::string_view source, std::size_t start, std::size_t end,
                const TokenizerConfig& config, std::vector<Token>& out) {
  std::size_t core_end = end;
  while (core_end > start && config.is_strip(source[core_end - 1])) --core_end;

  if (core_end > start) {
    std::string_view core = source.substr(start, core_end - start);
    if (is_bracketed(core, config.bracket_pairs)) {
      emit(source, start, start + 1, out);
      emit(source, start + 1, core_end - 1, out);
      emit(source, core_end - 1, core_end, out);
    } else {
      emit(source, start, core_end, out);
    }
  }
  for (std::size_t i = core_end; i < end; ++i) emit(source, i, i + 1, out);
}

}  // namespace

std::vector<Token> tokenize(std::string_view text, const TokenizerConfig& config) {
  config.validate();
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (config.is_split(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && !config.is_split(text[j])) ++j;
    emit_piece(text, i, j, config, out);
    i = j;
  }
  return out;
}

}  // namespace deepvar
