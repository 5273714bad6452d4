// SPDX-License-Identifier: Apache-2.0
#include "lift/metrics_log.hpp"

namespace lift {

double MetricsLog::now() const {
  return std::chrono::duration<double>(Clock::now() - start_).count();
}

double MetricsLog::record(EventKind kind) {
  std::lock_guard lock(mutex_);
  const double t = now();
  events_.push_back({kind, t});
  return t;
}

PipelineMetrics MetricsLog::snapshot() const {
  std::lock_guard lock(mutex_);
  return PipelineMetrics{events_};
}

}  // namespace lift
