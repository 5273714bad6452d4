// SPDX-License-Identifier: Apache-2.0
#include "lift/segmenter.hpp"

#include <algorithm>
#include <array>

#include "lift/errors.hpp"

namespace lift {
namespace {

constexpr std::array<std::string_view, 28> kAbbreviations = {
    "Mr.",  "Mrs.", "Ms.",  "Dr.",  "Prof.", "Sr.",  "Jr.",  "St.",  "Mt.",  "vs.",
    "e.g.", "i.e.", "U.S.", "U.K.", "Inc.",  "Ltd.", "Co.",  "Corp.", "No.", "Fig.",
    "Gen.", "Col.", "Lt.",  "Sgt.", "Rev.",  "Hon.", "approx.", "cf.",
};

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_utf8_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

// Length of a closing quote or bracket at `pos`, 0 if none.
std::size_t closer_len(std::string_view text, std::size_t pos) {
  const char c = text[pos];
  if (c == '"' || c == '\'' || c == ')' || c == ']') return 1;
  // U+201D and U+2019 (right double / single quotation marks).
  if (text.substr(pos, 3) == "\xE2\x80\x9D" || text.substr(pos, 3) == "\xE2\x80\x99") return 3;
  return 0;
}

bool opens_sentence(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '"' || c == '\'' ||
         c == '(' || c == '[' || u >= 0x80;
}

// True when the '.' at `dot` ends a guarded abbreviation.
bool ends_abbreviation(std::string_view text, std::size_t dot) {
  std::size_t begin = dot;
  while (begin > 0 && !is_space(text[begin - 1])) --begin;
  while (begin < dot && (text[begin] == '(' || text[begin] == '"' || text[begin] == '\'')) ++begin;
  const auto word = text.substr(begin, dot + 1 - begin);
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end();
}

bool has_content(std::string_view text, std::size_t begin, std::size_t end) {
  for (auto i = begin; i < end; ++i) {
    if (!is_space(text[i])) return true;
  }
  return false;
}

}  // namespace

void SegmenterConfig::validate() const {
  if (context_window_sentences < 1) throw ValidationError("context_window_sentences", "must be >= 1");
  if (context_window_char_cap < 1) throw ValidationError("context_window_char_cap", "must be >= 1");
  if (raw_segment_token_len < 1) throw ValidationError("raw_segment_token_len", "must be >= 1");
}

TokenEstimator::TokenEstimator(TokenEstimatorKind kind, ExternalTokenizer external)
    : kind_(kind), external_(std::move(external)) {
  if (kind_ == TokenEstimatorKind::external && !external_) {
    throw ValidationError("token_estimator", "external estimator needs a tokenizer");
  }
}

std::size_t TokenEstimator::operator()(std::string_view text) const {
  if (kind_ == TokenEstimatorKind::external) return external_(text);
  return estimate_tokens(text, kind_);
}

std::size_t estimate_tokens(std::string_view text, TokenEstimatorKind kind) {
  switch (kind) {
    case TokenEstimatorKind::chars_div_4:
      return (text.size() + 3) / 4;
    case TokenEstimatorKind::whitespace_words: {
      std::size_t words = 0;
      bool in_word = false;
      for (char c : text) {
        if (is_space(c)) {
          in_word = false;
        } else if (!in_word) {
          in_word = true;
          ++words;
        }
      }
      return words;
    }
    case TokenEstimatorKind::external:
      break;
  }
  throw ValidationError("token_estimator", "external estimator needs a tokenizer");
}

Document make_document(std::string doc_id, std::string text, BenchmarkKind kind,
                       const TokenEstimator& estimator) {
  Document doc{std::move(doc_id), std::move(text), kind, 0};
  doc.validate();
  doc.approx_token_count = estimator(doc.text);
  return doc;
}

void validate_document(const Document& doc, const TokenEstimator& estimator) {
  doc.validate();
  if (doc.approx_token_count != estimator(doc.text)) {
    throw ValidationError("approx_token_count", "does not match the configured estimator");
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<TextSpan> sentence_spans(std::string_view text) {
  std::vector<std::size_t> starts{0};
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    const char c = text[i];
    if (is_terminator(c)) {
      std::size_t j = i + 1;
      while (j < n && is_terminator(text[j])) ++j;
      while (j < n) {
        const auto len = closer_len(text, j);
        if (len == 0) break;
        j += len;
      }
      std::size_t k = j;
      while (k < n && is_space(text[k])) ++k;
      const bool abbreviation = c == '.' && j == i + 1 && ends_abbreviation(text, i);
      if (k > j && k < n && opens_sentence(text[k]) && !abbreviation) {
        starts.push_back(j);
        i = k;
        continue;
      }
      i = j;
      continue;
    }
    if (is_space(c)) {
      std::size_t k = i;
      int newlines = 0;
      while (k < n && is_space(text[k])) {
        if (text[k] == '\n') ++newlines;
        ++k;
      }
      if (newlines >= 2 && k < n && has_content(text, starts.back(), i)) {
        starts.push_back(i);
      }
      i = k;
      continue;
    }
    ++i;
  }

  std::vector<TextSpan> spans;
  spans.reserve(starts.size());
  for (std::size_t s = 0; s < starts.size(); ++s) {
    const auto end = s + 1 < starts.size() ? starts[s + 1] : n;
    spans.push_back({starts[s], end});
  }
  return spans;
}

std::vector<SentenceUnit> split_sentences(const Document& doc, const SegmenterConfig& cfg) {
  doc.validate();
  cfg.validate();
  const std::string_view text = doc.text;
  const auto spans = sentence_spans(text);
  const auto window = static_cast<std::size_t>(cfg.context_window_sentences);
  const auto cap = static_cast<std::size_t>(cfg.context_window_char_cap);

  std::vector<SentenceUnit> units;
  units.reserve(spans.size());
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const std::size_t first = k > window ? k - window : 0;
    std::size_t ctx_begin = spans[first].begin;
    const std::size_t ctx_end = spans[k].begin;
    while (ctx_begin < ctx_end && is_space(text[ctx_begin])) ++ctx_begin;
    if (ctx_end - ctx_begin > cap) {
      ctx_begin = ctx_end - cap;
      while (ctx_begin < ctx_end && is_utf8_continuation(text[ctx_begin])) ++ctx_begin;
    }
    units.push_back(SentenceUnit{doc.doc_id, static_cast<int>(k),
                                 std::string(text.substr(spans[k].begin, spans[k].size())),
                                 std::string(text.substr(ctx_begin, ctx_end - ctx_begin))});
  }
  return units;
}

std::vector<RawSegment> chunk_raw(const Document& doc, const SegmenterConfig& cfg,
                                  const TokenEstimator& estimator) {
  doc.validate();
  cfg.validate();
  const std::string_view text = doc.text;
  const std::size_t n = text.size();
  const auto target = static_cast<std::size_t>(cfg.raw_segment_token_len);

  std::vector<std::size_t> sentence_ends;
  for (const auto& span : sentence_spans(text)) sentence_ends.push_back(span.end);

  auto tokens = [&](std::size_t begin, std::size_t end) {
    return estimator(text.substr(begin, end - begin));
  };

  std::vector<RawSegment> segments;
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = n;
    if (tokens(start, n) > target) {
      // Longest prefix that fits; estimators are monotone in prefix length.
      std::size_t lo = start;
      std::size_t hi = n;
      while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        (tokens(start, mid) <= target ? lo : hi) = mid;
      }
      const std::size_t max_end = std::max(lo, start + 1);

      end = 0;
      // Snap to the last sentence end within 10% below the target.
      auto it = std::upper_bound(sentence_ends.begin(), sentence_ends.end(), max_end);
      if (it != sentence_ends.begin()) {
        const std::size_t candidate = *std::prev(it);
        if (candidate > start && tokens(start, candidate) * 10 >= target * 9) end = candidate;
      }
      // Else the last word boundary keeping at least half the target.
      if (end == 0) {
        for (std::size_t p = max_end; p > start + 1; --p) {
          if (p < n && is_space(text[p]) && !is_space(text[p - 1])) {
            if (tokens(start, p) * 2 >= target) end = p;
            break;
          }
        }
      }
      if (end == 0) {
        end = max_end;
        while (end > start + 1 && end < n && is_utf8_continuation(text[end])) --end;
      }
    }
    segments.push_back(RawSegment{doc.doc_id, static_cast<int>(segments.size()),
                                  std::string(text.substr(start, end - start)),
                                  cfg.raw_segment_token_len});
    start = end;
  }
  return segments;
}

}  // namespace lift
