// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "lift/types.hpp"

namespace lift {

struct SegmenterConfig {
  // Preceding sentences that form a unit's context window.
  int context_window_sentences = 3;
  int context_window_char_cap = 512;
  int raw_segment_token_len = 512;
  TokenEstimatorKind token_estimator = TokenEstimatorKind::chars_div_4;

  void validate() const;
  bool operator==(const SegmenterConfig&) const = default;
};

using ExternalTokenizer = std::function<std::size_t(std::string_view)>;

// Token counting contract. `external` delegates to a tokenizer callback
// (normally the trainer's tokenize endpoint) and surfaces its errors.
class TokenEstimator {
 public:
  explicit TokenEstimator(TokenEstimatorKind kind = TokenEstimatorKind::chars_div_4,
                          ExternalTokenizer external = {});

  std::size_t operator()(std::string_view text) const;
  TokenEstimatorKind kind() const noexcept { return kind_; }

 private:
  TokenEstimatorKind kind_;
  ExternalTokenizer external_;
};

// chars_div_4: ceil(bytes / 4); whitespace_words: count of non-blank runs.
// Throws for `external`, which needs a TokenEstimator with a tokenizer.
std::size_t estimate_tokens(std::string_view text, TokenEstimatorKind kind);

Document make_document(std::string doc_id, std::string text, BenchmarkKind kind,
                       const TokenEstimator& estimator);

// Checks the Document invariants including approx_token_count.
void validate_document(const Document& doc, const TokenEstimator& estimator);

struct TextSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool operator==(const TextSpan&) const = default;
};

// Sentence spans tiling `text`. Inter-sentence whitespace is attached to the
// front of the following sentence, so each span ends right after its
// terminator (and any closing quotes/brackets).
std::vector<TextSpan> sentence_spans(std::string_view text);

std::vector<SentenceUnit> split_sentences(const Document& doc, const SegmenterConfig& cfg);

std::vector<RawSegment> chunk_raw(const Document& doc, const SegmenterConfig& cfg,
                                  const TokenEstimator& estimator);

std::string_view trim(std::string_view s);

}  // namespace lift
