// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <mutex>
#include <vector>

#include "lift/types.hpp"

namespace lift {

// Thread-safe event log. Times are seconds since construction on a steady
// clock; each event is stamped under the lock, so the log is ordered.
class MetricsLog {
 public:
  using Clock = std::chrono::steady_clock;

  MetricsLog() : start_(Clock::now()) {}
  explicit MetricsLog(Clock::time_point start) : start_(start) {}

  double record(EventKind kind);
  double now() const;
  PipelineMetrics snapshot() const;

 private:
  Clock::time_point start_;
  mutable std::mutex mutex_;
  std::vector<MetricEvent> events_;
};

}  // namespace lift
