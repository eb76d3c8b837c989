#include "ubert/tokenizer.hpp"

#include <algorithm>
#include <array>

#include "ubert/errors.hpp"

namespace ubert {
namespace {

enum class CharClass { Space, Word, Punct };

struct Decoded {
  char32_t cp;
  std::size_t len;
};

// Invalid sequences decode as a single byte so offsets always advance.
Decoded decode_utf8(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) {
    return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  auto byte = [&](std::size_t k) { return static_cast<char32_t>(s[i + k] & 0x3F); };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0 && cont(1)) return {((b0 & 0x1Fu) << 6) | byte(1), 2};
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2))
    return {((b0 & 0x0Fu) << 12) | (byte(1) << 6) | byte(2), 3};
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3))
    return {((b0 & 0x07u) << 18) | (byte(1) << 12) | (byte(2) << 6) | byte(3), 4};
  return {0xFFFD, 1};
}

bool is_unicode_space(char32_t cp) {
  static constexpr std::array<char32_t, 11> extra = {0x0085, 0x00A0, 0x1680, 0x2028,
                                                     0x2029, 0x202F, 0x205F, 0x3000,
                                                     0x180E, 0x200B, 0xFEFF};
  if (cp == ' ' || (cp >= 0x09 && cp <= 0x0D)) return true;
  if (cp >= 0x2000 && cp <= 0x200A) return true;
  return std::find(extra.begin(), extra.end(), cp) != extra.end();
}

// Without a Unicode database we approximate: ASCII is classified exactly,
// the common punctuation and symbol blocks are punctuation, and every other
// non-ASCII codepoint is treated as a word character.
bool is_non_ascii_punct(char32_t cp) {
  struct Range {
    char32_t lo, hi;
  };
  static constexpr std::array<Range, 14> ranges = {{
      {0x00A1, 0x00BF}, {0x00D7, 0x00D7}, {0x00F7, 0x00F7}, {0x2010, 0x2027},
      {0x2030, 0x205E}, {0x20A0, 0x20CF}, {0x2100, 0x214F}, {0x2190, 0x2BFF},
      {0x3001, 0x3003}, {0x3008, 0x3020}, {0xFE30, 0xFE4F}, {0xFF01, 0xFF0F},
      {0xFF1A, 0xFF20}, {0xFFFD, 0xFFFD},
  }};
  return std::any_of(ranges.begin(), ranges.end(),
                     [cp](const Range& r) { return cp >= r.lo && cp <= r.hi; });
}

CharClass classify(char32_t cp) {
  if (is_unicode_space(cp)) return CharClass::Space;
  if (cp < 0x80) {
    const bool alnum = (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
                       (cp >= 'A' && cp <= 'Z');
    return alnum ? CharClass::Word : CharClass::Punct;
  }
  return is_non_ascii_punct(cp) ? CharClass::Punct : CharClass::Word;
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
  TokenSequence seq;
  seq.source_text = std::string(text);
  std::size_t i = 0;
  std::size_t word_start = 0;
  bool in_word = false;
  auto close_word = [&](std::size_t end) {
    if (in_word) {
      seq.tokens.push_back({std::string(text.substr(word_start, end - word_start)),
                            word_start, end, false});
      in_word = false;
    }
  };
  while (i < text.size()) {
    const Decoded d = decode_utf8(text, i);
    switch (classify(d.cp)) {
      case CharClass::Space:
        close_word(i);
        break;
      case CharClass::Punct:
        close_word(i);
        seq.tokens.push_back({std::string(text.substr(i, d.len)), i, i + d.len, false});
        break;
      case CharClass::Word:
        if (!in_word) {
          in_word = true;
          word_start = i;
        }
        break;
    }
    i += d.len;
  }
  close_word(text.size());
  return seq;
}

TokenSpan token_span_of_char_span(const TokenSequence& seq, std::size_t char_start,
                                  std::size_t char_end) {
  if (char_start >= char_end) {
    throw AlignmentError("empty or inverted character span [" + std::to_string(char_start) +
                         ", " + std::to_string(char_end) + ")");
  }
  std::size_t first = seq.size();
  std::size_t last = seq.size();
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const Token& t = seq[k];
    if (t.is_special) continue;
    if (t.char_start == char_start) first = k;
    if (t.char_end == char_end) last = k;
  }
  if (first == seq.size()) {
    throw AlignmentError("span start " + std::to_string(char_start) +
                         " is not at a token boundary");
  }
  if (last == seq.size()) {
    throw AlignmentError("span end " + std::to_string(char_end) +
                         " is not at a token boundary");
  }
  if (last < first) {
    throw AlignmentError("span [" + std::to_string(char_start) + ", " +
                         std::to_string(char_end) + ") covers no token");
  }
  return {first, last};
}

std::pair<std::size_t, std::size_t> char_span_of_token_span(const TokenSequence& seq,
                                                            TokenSpan span) {
  if (span.first > span.last || span.last >= seq.size()) {
    throw AlignmentError("token span (" + std::to_string(span.first) + ", " +
                         std::to_string(span.last) + ") is outside the sequence");
  }
  return {seq[span.first].char_start, seq[span.last].char_end};
}

}  // namespace ubert
