#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ubert {

struct Token {
  std::string text;
  std::size_t char_start = 0;  // byte offset into the source text, inclusive
  std::size_t char_end = 0;    // exclusive
  bool is_special = false;

  static Token special(std::string text) { return Token{std::move(text), 0, 0, true}; }

  friend bool operator==(const Token&, const Token&) = default;
};

struct TokenSequence {
  std::vector<Token> tokens;
  std::string source_text;

  std::size_t size() const noexcept { return tokens.size(); }
  const Token& operator[](std::size_t i) const { return tokens[i]; }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// Inclusive token range [first, last].
struct TokenSpan {
  std::size_t first = 0;
  std::size_t last = 0;

  friend auto operator<=>(const TokenSpan&, const TokenSpan&) = default;
};

// Splits on Unicode whitespace. Maximal runs of letters and digits form one
// token; every other codepoint is a token of its own. Offsets are byte
// offsets into the UTF-8 input.
TokenSequence tokenize(std::string_view text);

// Maps the character range [char_start, char_end) to the inclusive token
// range covering exactly those characters. Throws AlignmentError when either
// boundary falls inside a token or the range covers no token.
TokenSpan token_span_of_char_span(const TokenSequence& seq, std::size_t char_start,
                                  std::size_t char_end);

// Inverse of token_span_of_char_span on aligned spans.
std::pair<std::size_t, std::size_t> char_span_of_token_span(const TokenSequence& seq,
                                                            TokenSpan span);

}  // namespace ubert
