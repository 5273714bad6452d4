// SPDX-License-Identifier: Apache-2.0
#include "lift/task_cache.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "lift/codec.hpp"
#include "lift/digest.hpp"
#include "lift/errors.hpp"

namespace lift {
namespace fs = std::filesystem;

namespace {

constexpr int kFormatVersion = 1;

json header_record(const CacheKey& k) {
  return json{{"cache", "lift-tasks"},
              {"version", kFormatVersion},
              {"doc_id", k.doc_id},
              {"qas_per_sentence", k.qas_per_sentence},
              {"prompt_kind", to_string(k.prompt_kind)},
              {"generator_model", k.generator_model},
              {"template_version", k.template_version}};
}

json outcome_record(int sentence_index, OutcomeStatus status, std::size_t n_pairs, int attempts,
                    const std::string& prompt_hash) {
  return json{{"outcome", to_string(status)},
              {"sentence_index", sentence_index},
              {"n_pairs", n_pairs},
              {"attempts", attempts},
              {"prompt_hash", prompt_hash}};
}

std::string file_stem(const CacheKey& k) {
  std::string stem;
  for (char c : k.doc_id) {
    if (stem.size() >= 40) break;
    const auto u = static_cast<unsigned char>(c);
    stem.push_back(std::isalnum(u) || c == '-' || c == '_' ? c : '_');
  }
  return stem + "-" + k.fingerprint().substr(0, 16);
}

[[noreturn]] void corrupt(const fs::path& file, const std::string& why) {
  throw Error(ErrorKind::CacheCorrupt, file.string() + ": " + why);
}

}  // namespace

CacheKey CacheKey::from(const Document& doc, const GenerationConfig& cfg) {
  return CacheKey{doc.doc_id, cfg.qas_per_sentence, cfg.prompt_kind, cfg.model_name,
                  std::string(kPromptTemplateVersion)};
}

std::string CacheKey::fingerprint() const { return sha256_hex(header_record(*this).dump()); }

TaskCache::TaskCache(CacheKey key, std::optional<fs::path> file)
    : key_(std::move(key)), file_(std::move(file)) {}

std::unique_ptr<TaskCache> TaskCache::open(const fs::path& cache_dir, CacheKey key) {
  if (key.doc_id.empty()) throw ValidationError("doc_id", "must be non-empty");
  if (cache_dir.empty()) return std::unique_ptr<TaskCache>(new TaskCache(std::move(key), std::nullopt));
  std::error_code ec;
  fs::create_directories(cache_dir, ec);
  if (ec) throw ValidationError("cache_dir", "cannot create '" + cache_dir.string() + "': " + ec.message());
  auto path = cache_dir / (file_stem(key) + ".jsonl");
  std::unique_ptr<TaskCache> cache(new TaskCache(std::move(key), std::move(path)));
  cache->load();
  return cache;
}

void TaskCache::load() {
  const auto& path = *file_;
  std::string data;
  if (fs::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    data = ss.str();
  }

  // good_end: byte offset just past the last record that ends a committed
  // unit (header, sentence group or marker).
  std::size_t good_end = 0;
  bool have_header = false;
  std::vector<QAPair> pending;
  std::set<std::pair<int, int>> keys;
  std::size_t pos = 0;
  while (pos < data.size()) {
    const auto nl = data.find('\n', pos);
    if (nl == std::string::npos) break;  // unterminated line: torn
    const auto line = std::string_view(data).substr(pos, nl - pos);
    const auto next = nl + 1;
    const auto rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      // A torn write can only be the last thing in the file.
      if (data.find('\n', next) != std::string::npos) corrupt(path, "unreadable record mid-file");
      break;
    }
    if (!have_header) {
      if (rec != header_record(key_)) corrupt(path, "header does not match cache key");
      have_header = true;
      good_end = next;
    } else if (complete_n_) {
      corrupt(path, "records after completeness marker");
    } else if (rec.contains("outcome")) {
      CachedSentence s;
      try {
        s.sentence_index = required<int>(rec, "sentence_index");
        s.status = outcome_status_from_string(required<std::string>(rec, "outcome"));
        s.attempts = required<int>(rec, "attempts");
        s.prompt_hash = required<std::string>(rec, "prompt_hash");
        if (required<std::size_t>(rec, "n_pairs") != pending.size()) {
          corrupt(path, "outcome pair count mismatch");
        }
      } catch (const ValidationError& e) {
        corrupt(path, e.what());
      }
      if (sentences_.contains(s.sentence_index)) corrupt(path, "duplicate sentence outcome");
      for (const auto& qa : pending) {
        if (qa.sentence_index != s.sentence_index) corrupt(path, "QA record outside its group");
      }
      s.pairs = std::move(pending);
      pending.clear();
      sentences_.emplace(s.sentence_index, std::move(s));
      good_end = next;
    } else if (rec.contains("complete")) {
      const int n = required<int>(rec, "n_sentences");
      if (!pending.empty()) corrupt(path, "marker inside an open group");
      for (int i = 0; i < n; ++i) {
        if (!sentences_.contains(i)) corrupt(path, "marker without outcome for every sentence");
      }
      if (static_cast<int>(sentences_.size()) != n) corrupt(path, "outcomes beyond n_sentences");
      complete_n_ = n;
      if (rec.value("digest", std::string()) != digest_locked()) corrupt(path, "digest mismatch");
      good_end = next;
    } else {
      QAPair qa;
      try {
        qa = rec.get<QAPair>();
      } catch (const Error& e) {
        corrupt(path, e.what());
      }
      if (qa.doc_id != key_.doc_id) corrupt(path, "record for another document");
      if (!keys.emplace(qa.sentence_index, qa.qa_index).second) corrupt(path, "duplicate QA key");
      pending.push_back(std::move(qa));
    }
    pos = next;
  }

  if (!have_header) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << header_record(key_).dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorKind::CacheCorrupt, "cannot write " + path.string());
  } else if (good_end < data.size()) {
    fs::resize_file(path, good_end);
  }
}

void TaskCache::write_line_group(const std::string& text) {
  if (!file_) return;
  const int fd = ::open(file_->c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
  if (fd < 0) throw Error(ErrorKind::CacheCorrupt, "cannot open " + file_->string() + ": " + std::strerror(errno));
  std::size_t off = 0;
  while (off < text.size()) {
    const auto n = ::write(fd, text.data() + off, text.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw Error(ErrorKind::CacheCorrupt, "write failed: " + std::string(std::strerror(err)));
    }
    off += static_cast<std::size_t>(n);
  }
  ::close(fd);
}

bool TaskCache::complete() const {
  std::lock_guard lock(mutex_);
  return complete_n_.has_value();
}

std::optional<CachedSentence> TaskCache::sentence(int sentence_index) const {
  std::lock_guard lock(mutex_);
  const auto it = sentences_.find(sentence_index);
  if (it == sentences_.end()) return std::nullopt;
  return it->second;
}

std::size_t TaskCache::recorded_sentences() const {
  std::lock_guard lock(mutex_);
  return sentences_.size();
}

void TaskCache::append(const GenerationOutcome& outcome) {
  const int s = outcome.unit.sentence_index;
  std::string text;
  std::set<int> qa_indices;
  for (const auto& qa : outcome.pairs) {
    if (qa.doc_id != key_.doc_id || qa.sentence_index != s) {
      throw Error(ErrorKind::CacheCorrupt, "QA pair does not belong to sentence " + std::to_string(s));
    }
    if (!qa_indices.insert(qa.qa_index).second) {
      throw Error(ErrorKind::CacheCorrupt, "duplicate QA key " + item_key(qa));
    }
    text += encode(qa);
    text += '\n';
  }
  text += outcome_record(s, outcome.status, outcome.pairs.size(), outcome.attempts,
                         outcome.prompt_hash)
              .dump();
  text += '\n';

  std::lock_guard lock(mutex_);
  if (complete_n_) throw Error(ErrorKind::CacheCorrupt, "cache already complete");
  if (sentences_.contains(s)) {
    throw Error(ErrorKind::CacheCorrupt, "sentence " + std::to_string(s) + " already recorded");
  }
  write_line_group(text);
  sentences_.emplace(s, CachedSentence{s, outcome.status, outcome.attempts, outcome.prompt_hash,
                                       outcome.pairs});
}

void TaskCache::mark_complete(int n_sentences) {
  std::lock_guard lock(mutex_);
  if (complete_n_) {
    if (*complete_n_ != n_sentences) throw Error(ErrorKind::CacheCorrupt, "sentence count changed");
    return;
  }
  for (int i = 0; i < n_sentences; ++i) {
    if (!sentences_.contains(i)) {
      throw Error(ErrorKind::CacheIncomplete, "no outcome for sentence " + std::to_string(i));
    }
  }
  if (static_cast<int>(sentences_.size()) != n_sentences) {
    throw Error(ErrorKind::CacheCorrupt, "outcomes recorded beyond sentence count");
  }
  complete_n_ = n_sentences;
  const json marker{{"complete", true}, {"n_sentences", n_sentences}, {"digest", digest_locked()}};
  write_line_group(marker.dump() + "\n");
}

std::vector<QAPair> TaskCache::canonical_pairs() const {
  std::lock_guard lock(mutex_);
  if (!complete_n_) throw Error(ErrorKind::CacheIncomplete, "no completeness marker for " + key_.doc_id);
  std::vector<QAPair> out;
  for (const auto& [_, s] : sentences_) {
    auto pairs = s.pairs;
    std::sort(pairs.begin(), pairs.end(),
              [](const QAPair& a, const QAPair& b) { return a.qa_index < b.qa_index; });
    out.insert(out.end(), pairs.begin(), pairs.end());
  }
  return out;
}

std::string TaskCache::digest_locked() const {
  std::string text;
  for (const auto& [_, s] : sentences_) {
    auto pairs = s.pairs;
    std::sort(pairs.begin(), pairs.end(),
              [](const QAPair& a, const QAPair& b) { return a.qa_index < b.qa_index; });
    for (const auto& qa : pairs) {
      text += encode(qa);
      text += '\n';
    }
  }
  return sha256_hex(text);
}

std::string TaskCache::digest() const {
  std::lock_guard lock(mutex_);
  return digest_locked();
}

}  // namespace lift
