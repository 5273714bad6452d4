// SPDX-License-Identifier: Apache-2.0
#include "lift/mock_trainer.hpp"

#include <set>
#include <sstream>
#include <thread>

#include "lift/errors.hpp"

namespace lift {

struct MockTrainer::Job {
  Job(TrainerJob s, MockModel m) : spec(std::move(s)), model(std::move(m)) {}

  TrainerJob spec;
  MockModel model;
  std::mutex mutex;
  std::atomic<bool> training{false};
  int batches_trained = 0;
  std::string adapter_ref;  // set once finalized
};

namespace {

class TrainingGuard {
 public:
  explicit TrainingGuard(std::atomic<bool>& flag) : flag_(flag) {
    if (flag_.exchange(true)) {
      throw Error(ErrorKind::ConcurrentTrainRejected, "a train call for this job is in flight");
    }
  }
  ~TrainingGuard() { flag_.store(false); }
  TrainingGuard(const TrainingGuard&) = delete;
  TrainingGuard& operator=(const TrainingGuard&) = delete;

 private:
  std::atomic<bool>& flag_;
};

}  // namespace

MockTrainer::MockTrainer(MockTrainerOptions options) : options_(options) {}
MockTrainer::~MockTrainer() = default;

void MockTrainer::register_model(const std::string& name, std::vector<std::string> vocabulary) {
  MockModel probe(vocabulary);  // validates
  std::lock_guard lock(mutex_);
  models_[name] = std::move(vocabulary);
}

bool MockTrainer::has_model(const std::string& name) const {
  std::lock_guard lock(mutex_);
  return models_.contains(name);
}

std::vector<std::string> MockTrainer::vocabulary_from_text(std::string_view text, bool with_unk) {
  std::set<std::string> words;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) words.insert(w);
  std::vector<std::string> vocab{std::string(kEosToken)};
  if (with_unk) vocab.emplace_back(kUnkToken);
  for (auto& w : words) {
    if (w != kEosToken && w != kUnkToken) vocab.push_back(w);
  }
  return vocab;
}

std::shared_ptr<MockTrainer::Job> MockTrainer::find_job(const std::string& handle,
                                                        ErrorKind missing) const {
  std::lock_guard lock(mutex_);
  if (auto it = jobs_.find(handle); it != jobs_.end()) return it->second;
  if (missing == ErrorKind::UnknownRef) {
    if (auto ref = refs_.find(handle); ref != refs_.end()) return jobs_.at(ref->second);
  }
  throw Error(missing, "unknown job or adapter '" + handle + "'");
}

std::string MockTrainer::create_job(const TrainerJob& job) {
  job.validate();
  std::lock_guard lock(mutex_);
  const auto model = models_.find(job.base_model);
  if (model == models_.end()) {
    throw Error(ErrorKind::UnknownModel, "unknown base model '" + job.base_model + "'");
  }
  if (jobs_.contains(job.job_id)) {
    throw Error(ErrorKind::DuplicateJobId, "job '" + job.job_id + "' already exists");
  }
  // b_zero: the adapter starts as the identity, i.e. the untouched base model.
  auto state = std::make_shared<Job>(job, MockModel(model->second));
  jobs_.emplace(job.job_id, std::move(state));
  return job.job_id;
}

BatchLossReport MockTrainer::train_batch(const std::string& handle, const TaskBatch& batch) {
  auto job = find_job(handle, ErrorKind::UnknownJob);
  TrainingGuard guard(job->training);
  std::lock_guard lock(job->mutex);
  if (!job->adapter_ref.empty()) {
    throw Error(ErrorKind::JobFinalized, "job '" + handle + "' is finalized");
  }
  batch.validate(job->spec.batch_size);

  // Answer-only masking: QA items contribute their answer tokens only; raw
  // segments contribute every token.
  std::vector<std::vector<int>> targets;
  targets.reserve(batch.items.size());
  for (const auto& item : batch.items) {
    if (const auto* qa = std::get_if<QAPair>(&item)) {
      targets.push_back(job->model.encode(qa->answer));
    } else {
      targets.push_back(job->model.encode(std::get<RawSegment>(item).text));
    }
  }
  if (options_.train_latency.count() > 0) std::this_thread::sleep_for(options_.train_latency);

  double total = 0.0;
  for (const auto& t : targets) total += job->model.sequence_nll(t);
  job->model.update(targets, 10.0 * job->spec.learning_rate);
  ++job->batches_trained;

  BatchLossReport report{batch.epoch, batch.batch_index,
                         total / static_cast<double>(targets.size()),
                         static_cast<int>(targets.size())};
  report.validate();
  return report;
}

std::string MockTrainer::finalize(const std::string& handle) {
  auto job = find_job(handle, ErrorKind::UnknownJob);
  std::lock_guard lock(job->mutex);
  if (!job->adapter_ref.empty()) return job->adapter_ref;
  if (job->batches_trained == 0) {
    throw Error(ErrorKind::NoBatchesTrained, "job '" + handle + "' has no trained batches");
  }
  job->adapter_ref = "adapter:" + handle;
  std::lock_guard registry(mutex_);
  refs_[job->adapter_ref] = handle;
  return job->adapter_ref;
}

std::string MockTrainer::generate(const std::string& handle_or_ref, const std::string& /*prompt*/,
                                  int max_tokens, const Decoding& decoding) {
  if (max_tokens < 0) throw ValidationError("max_tokens", "must be >= 0");
  const auto model = model_of(handle_or_ref);
  const auto tokens = decoding.mode == DecodingMode::greedy
                          ? model.decode_greedy(max_tokens)
                          : model.decode_sampled(max_tokens, decoding.temperature, decoding.seed);
  return model.detokenize(tokens);
}

MockModel MockTrainer::model_of(const std::string& handle_or_ref) const {
  if (handle_or_ref.starts_with(kBaseRefPrefix)) {
    const auto name = handle_or_ref.substr(kBaseRefPrefix.size());
    std::lock_guard lock(mutex_);
    const auto it = models_.find(name);
    if (it == models_.end()) throw Error(ErrorKind::UnknownRef, "unknown base model '" + name + "'");
    return MockModel(it->second);
  }
  auto job = find_job(handle_or_ref, ErrorKind::UnknownRef);
  std::lock_guard lock(job->mutex);
  return job->model;
}

std::size_t MockTrainer::tokenize(std::string_view text) {
  std::size_t count = 0;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) ++count;
  return count;
}

}  // namespace lift
