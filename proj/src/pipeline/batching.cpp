// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "lift/digest.hpp"
#include "lift/errors.hpp"
#include "lift/pipeline.hpp"

namespace lift {

std::vector<TaskBatch> assemble_batches(const std::vector<TrainingItem>& items, int batch_size,
                                        int epoch) {
  if (batch_size < 1) throw ValidationError("batch_size", "must be >= 1");
  std::vector<TaskBatch> out;
  for (std::size_t i = 0; i < items.size(); i += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(items.size(), i + static_cast<std::size_t>(batch_size));
    std::vector<TrainingItem> slice(items.begin() + static_cast<std::ptrdiff_t>(i),
                                    items.begin() + static_cast<std::ptrdiff_t>(end));
    const auto source = source_of(slice);
    out.push_back(TaskBatch{epoch, static_cast<int>(out.size()), std::move(slice), source});
  }
  return out;
}

SegmentMixer::SegmentMixer(double ratio, std::uint64_t seed) : ratio_(ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ValidationError("segment_ratio", "must be in [0, 1]");
  // Phase in [0, 1): which slot of each period carries the segment.
  acc_ = static_cast<double>(mix_seed(seed) >> 11) * 0x1.0p-53;
}

bool SegmentMixer::next_is_segment() {
  acc_ += ratio_;
  if (acc_ >= 1.0) {
    acc_ -= 1.0;
    return true;
  }
  return false;
}

std::vector<TrainingItem> mix_segments(const std::vector<QAPair>& qa,
                                       const std::vector<RawSegment>& segments, double ratio,
                                       std::uint64_t seed) {
  SegmentMixer mixer(ratio, seed);
  std::vector<TrainingItem> out;
  out.reserve(qa.size() + segments.size());
  std::size_t q = 0;
  std::size_t s = 0;
  // ratio 0 turns mixing off entirely, leftover segments included.
  const std::size_t n_segments = ratio > 0.0 ? segments.size() : 0;
  while (q < qa.size() || s < n_segments) {
    const bool take_segment =
        q == qa.size() || (s < n_segments && mixer.next_is_segment());
    if (take_segment) {
      out.emplace_back(segments[s++]);
    } else {
      out.emplace_back(qa[q++]);
    }
  }
  return out;
}

std::vector<TaskBatch> replay_from_cache(const CacheKey& key, const PipelineConfig& cfg, int epoch) {
  cfg.validate();
  if (cfg.cache_dir.empty()) {
    throw Error(ErrorKind::CacheIncomplete, "replay needs an on-disk cache_dir");
  }
  const auto cache = TaskCache::open(cfg.cache_dir, key);
  const auto pairs = cache->canonical_pairs();
  return assemble_batches(std::vector<TrainingItem>(pairs.begin(), pairs.end()), cfg.batch_size,
                          epoch);
}

}  // namespace lift
