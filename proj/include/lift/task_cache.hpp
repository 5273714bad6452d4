// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lift/taskgen.hpp"
#include "lift/types.hpp"

namespace lift {

// Everything that changes what a generator would produce for a document.
// Distinct keys live in distinct files.
struct CacheKey {
  std::string doc_id;
  int qas_per_sentence = 5;
  PromptKind prompt_kind = PromptKind::generic;
  std::string generator_model;
  std::string template_version{kPromptTemplateVersion};

  static CacheKey from(const Document& doc, const GenerationConfig& cfg);
  // Hex digest naming the cache file.
  std::string fingerprint() const;
  bool operator==(const CacheKey&) const = default;
};

// Recorded terminal outcome of one sentence.
struct CachedSentence {
  int sentence_index = 0;
  OutcomeStatus status = OutcomeStatus::skipped;
  int attempts = 0;
  std::string prompt_hash;
  std::vector<QAPair> pairs;
};

// Append-only task store for one document. On disk it is one JSON record per
// line: a header, then per sentence its QA records followed by an outcome
// record, then the completeness marker. Each sentence group is written with a
// single flushed write, and a torn tail (anything after the last complete
// group) is cut off when the file is reopened, so a crash loses at most the
// groups in flight. With an empty cache_dir the store is memory-only.
class TaskCache {
 public:
  static std::unique_ptr<TaskCache> open(const std::filesystem::path& cache_dir, CacheKey key);

  const CacheKey& key() const noexcept { return key_; }
  std::optional<std::filesystem::path> file() const { return file_; }

  bool complete() const;
  std::optional<CachedSentence> sentence(int sentence_index) const;
  std::size_t recorded_sentences() const;

  // Throws Error{CacheCorrupt} if the sentence or any QA key is already
  // recorded.
  void append(const GenerationOutcome& outcome);
  // Requires an outcome for every sentence 0..n_sentences-1.
  void mark_complete(int n_sentences);

  // All QA pairs in (sentence_index, qa_index) order. Throws
  // Error{CacheIncomplete} without the completeness marker.
  std::vector<QAPair> canonical_pairs() const;
  // sha256 over the canonical QA record encodings.
  std::string digest() const;

 private:
  TaskCache(CacheKey key, std::optional<std::filesystem::path> file);
  void load();
  void write_line_group(const std::string& text);
  std::string digest_locked() const;

  CacheKey key_;
  std::optional<std::filesystem::path> file_;
  mutable std::mutex mutex_;
  std::map<int, CachedSentence> sentences_;
  std::optional<int> complete_n_;
};

}  // namespace lift
