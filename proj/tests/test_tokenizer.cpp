#include <doctest.h>

#include <random>
#include <string>

#include "ubert/errors.hpp"
#include "ubert/random.hpp"
#include "ubert/tokenizer.hpp"

using namespace ubert;

namespace {

std::vector<std::string> texts(const TokenSequence& seq) {
  std::vector<std::string> out;
  for (const Token& t : seq.tokens) out.push_back(t.text);
  return out;
}

// Rebuilds the source one character at a time: every byte is either inside
// the token whose offsets cover it or is an ASCII whitespace gap.
bool reconstructs(const std::string& src, const TokenSequence& seq) {
  std::string rebuilt(src.size(), '\0');
  std::vector<int> owner(src.size(), -1);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const Token& t = seq[k];
    if (t.char_end <= t.char_start || t.char_end > src.size()) return false;
    if (src.substr(t.char_start, t.char_end - t.char_start) != t.text) return false;
    for (std::size_t i = t.char_start; i < t.char_end; ++i) {
      if (owner[i] != -1) return false;
      owner[i] = static_cast<int>(k);
      rebuilt[i] = t.text[i - t.char_start];
    }
  }
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (owner[i] == -1) {
      if (src[i] != ' ' && src[i] != '\t' && src[i] != '\n' && src[i] != '\r' && src[i] != '\v' && src[i] != '\f')
        return false;
      rebuilt[i] = src[i];
    }
  }
  return rebuilt == src;
}

}  // namespace

TEST_SUITE("tokenizer") {

TEST_CASE("words and punctuation") {
  const TokenSequence seq = tokenize("john works.");
  CHECK(texts(seq) == std::vector<std::string>{"john", "works", "."});
  REQUIRE(seq.size() == 3);
  CHECK(seq[0].char_start == 0);
  CHECK(seq[0].char_end == 4);
  CHECK(seq[1].char_start == 5);
  CHECK(seq[1].char_end == 10);
  CHECK(seq[2].char_start == 10);
  CHECK(seq[2].char_end == 11);
  CHECK_FALSE(seq[0].is_special);
}

TEST_CASE("empty and blank input") {
  CHECK(tokenize("").tokens.empty());
  CHECK(tokenize(" \t\n ").tokens.empty());
}

TEST_CASE("punctuation runs split per character") {
  CHECK(texts(tokenize("a--b!?")) == std::vector<std::string>{"a", "-", "-", "b", "!", "?"});
  CHECK(texts(tokenize("x1y2 3")) == std::vector<std::string>{"x1y2", "3"});
}

TEST_CASE("unicode whitespace and letters") {
  // U+00A0 no-break space separates; U+00E9 is a letter and stays inside the word.
  const TokenSequence seq = tokenize("caf\xC3\xA9\xC2\xA0" "bar");
  CHECK(texts(seq) == std::vector<std::string>{"caf\xC3\xA9", "bar"});
  CHECK(seq[1].char_start == 7);
  // U+3001 ideographic comma is punctuation.
  CHECK(texts(tokenize("a\xE3\x80\x81" "b")) == std::vector<std::string>{"a", "\xE3\x80\x81", "b"});
}

TEST_CASE("token_span_of_char_span") {
  const TokenSequence seq = tokenize("john works");
  CHECK(token_span_of_char_span(seq, 5, 10) == TokenSpan{1, 1});
  CHECK(token_span_of_char_span(seq, 0, 10) == TokenSpan{0, 1});
  CHECK_THROWS_AS(token_span_of_char_span(seq, 1, 3), AlignmentError);
  CHECK_THROWS_AS(token_span_of_char_span(seq, 0, 3), AlignmentError);
  CHECK_THROWS_AS(token_span_of_char_span(seq, 4, 5), AlignmentError);
  try {
    token_span_of_char_span(seq, 1, 4);
    FAIL("expected an alignment error");
  } catch (const AlignmentError& e) {
    CHECK(std::string(e.what()).find("start") != std::string::npos);
  }
}

TEST_CASE("random ascii strings reconstruct and round trip") {
  Rng rng(2024);
  const std::string alphabet = "abcXYZ019 .,;:!?-'\"()\t\n ";
  for (int trial = 0; trial < 1000; ++trial) {
    std::string s;
    const std::size_t n = uniform_index(rng, 40);
    for (std::size_t i = 0; i < n; ++i) s += alphabet[uniform_index(rng, alphabet.size())];
    const TokenSequence seq = tokenize(s);
    REQUIRE_MESSAGE(reconstructs(s, seq), "input: [" << s << "]");
    CHECK(seq == tokenize(s));
    for (std::size_t a = 0; a < seq.size(); ++a) {
      for (std::size_t b = a; b < seq.size(); ++b) {
        const auto [cs, ce] = char_span_of_token_span(seq, {a, b});
        CHECK(token_span_of_char_span(seq, cs, ce) == TokenSpan{a, b});
      }
    }
  }
}

}
