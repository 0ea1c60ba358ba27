#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cctype>

#include "deepvar/errors.hpp"
#include "deepvar/rng.hpp"
#include "deepvar/tokenizer.hpp"
#include "support/tokenizer_cases.hpp"

using namespace deepvar;

namespace {

std::vector<std::string> texts(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  for (const Token& t : tokens) out.push_back(t.text);
  return out;
}

// The structural invariants every tokenization must satisfy.
void check_invariants(const std::string& input, const std::vector<Token>& tokens,
                      const TokenizerConfig& config) {
  std::vector<bool> covered(input.size(), false);
  std::size_t prev_end = 0;
  for (const Token& t : tokens) {
    REQUIRE(!t.text.empty());
    REQUIRE(t.start < t.end);
    REQUIRE(t.end <= input.size());
    CHECK(input.substr(t.start, t.end - t.start) == t.text);  // offset fidelity
    CHECK(t.start >= prev_end);                               // monotone, non-overlapping
    prev_end = t.end;
    for (std::size_t i = t.start; i < t.end; ++i) covered[i] = true;
    for (char c : t.text) {
      CHECK(!config.is_split(c));  // no token contains a split character
    }
  }
  // every uncovered byte is a separator
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (!covered[i]) CHECK(config.is_split(input[i]));
  }
}

}  // namespace

TEST_CASE("golden corpus (25 hand-traced cases)") {
  const TokenizerConfig config = TokenizerConfig::standard();
  CHECK(deepvar::testing::tokenizer_golden_cases().size() == 25);
  for (const auto& c : deepvar::testing::tokenizer_golden_cases()) {
    INFO("input: [" << c.input << "]");
    const std::vector<Token> tokens = tokenize(c.input, config);
    CHECK(texts(tokens) == c.expected);
    check_invariants(c.input, tokens, config);
  }
}

TEST_CASE("is_bracketed") {
  const auto pairs = TokenizerConfig::standard().bracket_pairs;
  CHECK(is_bracketed("(IL-2)", pairs));
  CHECK(is_bracketed("[x]", pairs));
  CHECK_FALSE(is_bracketed("(IL-2", pairs));
  CHECK_FALSE(is_bracketed("()", pairs));  // empty interior
  CHECK_FALSE(is_bracketed("(x]", pairs));
  CHECK_FALSE(is_bracketed("x", pairs));
}

TEST_CASE("determinism") {
  const TokenizerConfig config = TokenizerConfig::standard();
  const std::string input = "We saw (IL-2), rs123 and c.399_402del in ND3.";
  CHECK(tokenize(input, config) == tokenize(input, config));
}

TEST_CASE("config validation rejects alphanumerics") {
  TokenizerConfig config;
  config.split_chars = "a";
  CHECK_THROWS_AS(tokenize("x", config), ConfigError);
  TokenizerConfig config2;
  config2.strip_chars = "9";
  CHECK_THROWS_AS(tokenize("x", config2), ConfigError);
}

TEST_CASE("offset fidelity fuzz: 10000 random strings") {
  const TokenizerConfig config = TokenizerConfig::standard();
  // alphabet biased toward boundary-triggering characters
  const std::string pool =
      "ab zZ09.,'\":;()[]{}#&$_*/\\~!?=<>+-%|@ \t\n\xc3\xa9\xce\xa9";
  Rng rng(20260810);
  for (int trial = 0; trial < 10000; ++trial) {
    std::string input;
    const std::size_t len = rng.below(40);
    for (std::size_t i = 0; i < len; ++i) input += pool[rng.below(pool.size())];
    const std::vector<Token> tokens = tokenize(input, config);
    check_invariants(input, tokens, config);
  }
}

TEST_CASE("custom config: different separators") {
  TokenizerConfig config;
  config.split_chars = "-";
  config.strip_chars = ".";
  config.bracket_pairs = {{'<', '>'}};
  const std::vector<Token> tokens = tokenize("<IL-2>.", config);
  // '-' splits, so the piece "<IL" is not bracketed; "2>." strips the dot
  CHECK(texts(tokens) == std::vector<std::string>{"<IL", "2>", "."});
}
