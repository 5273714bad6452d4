// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "lift/codec.hpp"
#include "lift/digest.hpp"
#include "lift/errors.hpp"
#include "lift/evalharness.hpp"
#include "lift/mock_trainer.hpp"
#include "lift/trainer_http.hpp"

namespace lift {
namespace {

std::size_t word_count(std::string_view s) { return estimate_tokens(s, TokenEstimatorKind::whitespace_words); }

// Token length of pieces joined by single spaces, tracked incrementally.
struct Meter {
  TokenEstimatorKind kind;
  std::size_t bytes = 0;
  std::size_t words = 0;
  std::size_t pieces = 0;

  std::size_t tokens() const {
    if (kind == TokenEstimatorKind::whitespace_words) return words;
    return (bytes + 3) / 4;
  }
  void add(std::string_view piece) {
    bytes += piece.size() + (pieces > 0 ? 1 : 0);
    words += word_count(piece);
    ++pieces;
  }
  Meter with(std::string_view piece) const {
    Meter m = *this;
    m.add(piece);
    return m;
  }
};

std::vector<std::string> sentences_of(std::string_view text, std::string_view needle) {
  std::vector<std::string> out;
  for (const auto& span : sentence_spans(text)) {
    const auto s = trim(text.substr(span.begin, span.size()));
    if (s.empty() || s.find(needle) != std::string_view::npos) continue;
    out.emplace_back(s);
  }
  return out;
}

std::vector<std::string_view> paragraphs_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t begin = 0;
  while (begin < text.size()) {
    auto end = text.find("\n\n", begin);
    if (end == std::string_view::npos) end = text.size();
    const auto para = trim(text.substr(begin, end - begin));
    if (!para.empty()) out.push_back(para);
    begin = end + 2;
  }
  return out;
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const auto r = rng();
    if (r >= threshold) return r % n;
  }
}

struct Built {
  std::string text;
  std::size_t consumed = 0;  // source sentences used, including a padded one
};

// Packs whole sentences up to the target length, pads with the leading words
// of the next sentence until the target is reached (so a needle at depth 100
// sits no more than its own length before L), and inserts the needle at the sentence boundary whose
// token offset is nearest the requested depth.
std::optional<Built> assemble_instance(const std::vector<std::string>& source, std::size_t first,
                                       std::size_t available, int length_l, double depth_d,
                                       TokenEstimatorKind kind) {
  const auto lo = static_cast<std::size_t>(std::ceil(length_l * (1.0 - kNiahLengthTolerance)));
  const auto hi = static_cast<std::size_t>(std::floor(length_l * (1.0 + kNiahLengthTolerance)));
  const auto target = static_cast<std::size_t>(length_l);

  std::vector<std::string> pieces;
  Meter total{kind};
  total.add(kNeedle);
  std::size_t used = 0;
  while (used < available) {
    const auto& s = source[(first + used) % source.size()];
    const auto next = total.with(s);
    if (next.tokens() > target) break;
    total = next;
    pieces.push_back(s);
    ++used;
  }
  if (total.tokens() < target) {
    if (used == available) return std::nullopt;
    const auto& s = source[(first + used) % source.size()];
    std::istringstream words{s};
    std::string fragment;
    for (std::string w; words >> w;) {
      fragment += fragment.empty() ? w : " " + w;
      std::string piece = fragment;
      if (piece.back() != '.') piece += '.';
      if (total.with(piece).tokens() >= target) {
        fragment = std::move(piece);
        break;
      }
    }
    if (fragment.back() != '.') fragment += '.';
    total.add(fragment);
    pieces.push_back(std::move(fragment));
    ++used;
  }
  if (total.tokens() < lo || total.tokens() > hi) return std::nullopt;

  const auto want = static_cast<std::size_t>(std::floor(depth_d / 100.0 * length_l));
  std::size_t best_k = 0;
  std::size_t best_err = want;
  Meter prefix{kind};
  for (std::size_t k = 1; k <= pieces.size(); ++k) {
    prefix.add(pieces[k - 1]);
    // The needle starts after the separating space.
    Meter at = prefix;
    at.bytes += 1;
    const auto t = at.tokens();
    const auto err = t > want ? t - want : want - t;
    if (err < best_err) {
      best_err = err;
      best_k = k;
    }
  }
  pieces.insert(pieces.begin() + static_cast<std::ptrdiff_t>(best_k), std::string(kNeedle));
  Built out;
  for (const auto& p : pieces) out.text += out.text.empty() ? p : " " + p;
  out.consumed = used;
  return out;
}

}  // namespace

std::size_t needle_token_index(std::string_view instance, TokenEstimatorKind estimator) {
  const auto pos = instance.find(kNeedle);
  if (pos == std::string_view::npos) throw ValidationError("instance", "needle not found");
  return estimate_tokens(instance.substr(0, pos), estimator);
}

NiahCase build_niah_case(int length_l, double depth_d, std::string_view filler_corpus,
                         std::uint64_t seed, TokenEstimatorKind estimator) {
  if (length_l < 1) throw ValidationError("length_l", "must be >= 1");
  if (!(depth_d >= 0.0 && depth_d <= 100.0)) throw ValidationError("depth_d", "must be in [0, 100]");
  if (estimator == TokenEstimatorKind::external) {
    throw ValidationError("token_estimator", "needle placement needs a local estimator");
  }
  const auto corpus_tokens = estimate_tokens(filler_corpus, estimator);
  if (corpus_tokens < static_cast<std::size_t>(length_l)) {
    throw Error(ErrorKind::FillerTooShort, "filler has " + std::to_string(corpus_tokens) +
                                               " tokens, need " + std::to_string(length_l));
  }

  NiahCase c{length_l, depth_d, std::string(kNeedle), std::string(kNiahQuestion), {}};

  const auto all = sentences_of(filler_corpus, kNeedle);
  if (all.empty()) throw Error(ErrorKind::FillerTooShort, "filler has no sentences");

  if (corpus_tokens >= static_cast<std::size_t>(kDisjointSliceFactor) * length_l) {
    std::size_t cursor = mix_seed(seed) % all.size();
    std::size_t remaining = all.size();
    for (int i = 0; i < kNiahInstances; ++i) {
      auto built = assemble_instance(all, cursor, remaining, length_l, depth_d, estimator);
      if (!built) break;
      c.instances.push_back(std::move(built->text));
      cursor += built->consumed;
      remaining -= built->consumed;
    }
    if (c.instances.size() != kNiahInstances) c.instances.clear();
  }

  if (c.instances.empty()) {
    const auto paragraphs = paragraphs_of(filler_corpus);
    for (int i = 0; i < kNiahInstances; ++i) {
      std::mt19937_64 rng(mix_seed(seed ^ mix_seed(static_cast<std::uint64_t>(i) + 1)));
      std::vector<std::size_t> order(paragraphs.size());
      for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
      for (std::size_t k = order.size(); k > 1; --k) {
        std::swap(order[k - 1], order[uniform_below(rng, k)]);
      }
      std::vector<std::string> shuffled;
      for (auto k : order) {
        auto s = sentences_of(paragraphs[k], kNeedle);
        shuffled.insert(shuffled.end(), s.begin(), s.end());
      }
      if (shuffled.empty()) throw Error(ErrorKind::FillerTooShort, "filler has no sentences");
      const auto start = uniform_below(rng, shuffled.size());
      auto built = assemble_instance(shuffled, start, shuffled.size(), length_l, depth_d, estimator);
      if (!built) {
        throw Error(ErrorKind::FillerTooShort, "cannot reach length " + std::to_string(length_l));
      }
      c.instances.push_back(std::move(built->text));
    }
  }

  for (std::size_t i = 0; i < c.instances.size(); ++i) {
    for (std::size_t j = i + 1; j < c.instances.size(); ++j) {
      if (c.instances[i] == c.instances[j]) {
        throw Error(ErrorKind::FillerTooShort, "filler too small for distinct instances");
      }
    }
  }
  c.validate();
  return c;
}

bool score_niah_response(std::string_view response) {
  std::string lower(response);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  for (std::string_view kw : {"sandwich", "dolores park", "sunny"}) {
    if (lower.find(kw) == std::string::npos) return false;
  }
  return true;
}

const NiahCell& NiahReport::cell(std::size_t length_i, std::size_t depth_j) const {
  return cells.at(length_i * depths.size() + depth_j);
}

namespace {

std::string fmt_depth(double d) {
  std::ostringstream os;
  os << d;
  return os.str();
}

}  // namespace

std::string NiahReport::heatmap() const {
  std::ostringstream os;
  os << std::left << std::setw(8) << "depth";
  for (int l : lengths) os << std::right << std::setw(8) << l;
  os << '\n';
  for (std::size_t j = 0; j < depths.size(); ++j) {
    os << std::left << std::setw(8) << fmt_depth(depths[j]);
    for (std::size_t i = 0; i < lengths.size(); ++i) {
      const auto& c = cell(i, j);
      std::ostringstream v;
      if (c.failed) {
        v << "fail";
      } else {
        v << std::fixed << std::setprecision(1) << c.accuracy;
      }
      os << std::right << std::setw(8) << v.str();
    }
    os << '\n';
  }
  return os.str();
}

std::string NiahReport::csv() const {
  std::ostringstream os;
  os << "length,depth,accuracy\n";
  for (const auto& c : cells) {
    os << c.length_l << ',' << fmt_depth(c.depth_d) << ',';
    if (!c.failed) os << c.accuracy;
    os << '\n';
  }
  return os.str();
}

void to_json(json& j, const NiahReport& v) {
  json cells = json::array();
  for (const auto& c : v.cells) {
    json instances = json::array();
    for (const auto& r : c.instances) {
      instances.push_back({{"instance", r.instance}, {"correct", r.correct}, {"response", r.response}});
    }
    cells.push_back({{"length", c.length_l},
                     {"depth", c.depth_d},
                     {"failed", c.failed},
                     {"error", c.error},
                     {"correct_count", c.correct_count},
                     {"accuracy", c.failed ? json(nullptr) : json(c.accuracy)},
                     {"instances", std::move(instances)}});
  }
  j = json{{"lengths", v.lengths}, {"depths", v.depths}, {"cells", std::move(cells)}};
}

NiahReport run_niah_matrix(const std::vector<int>& lengths, const std::vector<double>& depths,
                           std::string_view filler_corpus, const EngineRunFn& engine,
                           std::uint64_t seed, int max_concurrent_cells,
                           TokenEstimatorKind estimator) {
  if (lengths.empty()) throw ValidationError("lengths", "must be non-empty");
  if (depths.empty()) throw ValidationError("depths", "must be non-empty");
  for (int l : lengths) {
    if (l < 1) throw ValidationError("lengths", "must be >= 1");
  }
  for (double d : depths) {
    if (!(d >= 0.0 && d <= 100.0)) throw ValidationError("depths", "must be in [0, 100]");
  }

  NiahReport report{lengths, depths, {}};
  report.cells.resize(lengths.size() * depths.size());
  std::atomic<std::size_t> next{0};

  auto run_cell = [&](std::size_t index) {
    NiahCell& cell = report.cells[index];
    cell.length_l = lengths[index / depths.size()];
    cell.depth_d = depths[index % depths.size()];
    try {
      const auto c = build_niah_case(cell.length_l, cell.depth_d, filler_corpus, seed, estimator);
      for (int i = 0; i < kNiahInstances; ++i) {
        const auto instance_seed = mix_seed(seed ^ (static_cast<std::uint64_t>(index) << 8 |
                                                    static_cast<std::uint64_t>(i)));
        auto response = engine(c, i, instance_seed);
        const bool correct = score_niah_response(response);
        cell.correct_count += correct ? 1 : 0;
        cell.instances.push_back({i, correct, std::move(response)});
      }
      cell.accuracy = cell.correct_count / static_cast<double>(kNiahInstances);
    } catch (const std::exception& e) {
      cell.failed = true;
      if (const auto* err = dynamic_cast<const Error*>(&e)) {
        cell.error = std::string(to_string(err->kind())) + ": " + e.what();
      } else {
        cell.error = e.what();
      }
      cell.accuracy = 0.0;
    }
  };

  const auto workers = static_cast<std::size_t>(
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, max_concurrent_cells)), 1,
                              report.cells.size()));
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (auto i = next.fetch_add(1); i < report.cells.size(); i = next.fetch_add(1)) run_cell(i);
    });
  }
  pool.clear();  // joins
  return report;
}

EngineRunFn make_lift_engine(LiftEngineOptions options) {
  options.trainer.validate();
  return [options](const NiahCase& c, int instance, std::uint64_t seed) {
    std::ostringstream id;
    id << "niah-L" << c.length_l << "-D" << c.depth_d << "-i" << instance << "-" << std::hex
       << (seed & 0xffffffffULL);
    const TokenEstimator estimator(options.segmenter.token_estimator == TokenEstimatorKind::external
                                       ? TokenEstimatorKind::chars_div_4
                                       : options.segmenter.token_estimator);
    const auto doc = make_document(id.str(), c.instances.at(static_cast<std::size_t>(instance)),
                                   BenchmarkKind::niah, estimator);

    std::unique_ptr<Trainer> trainer;
    if (options.trainer.in_process) {
      auto mock = std::make_unique<MockTrainer>();
      auto vocab_text = doc.text + " " + c.question;
      mock->register_model(options.job.base_model, MockTrainer::vocabulary_from_text(vocab_text));
      trainer = std::move(mock);
    } else {
      trainer = std::make_unique<HttpTrainerClient>(options.trainer);
    }

    std::string ref = std::string(kBaseRefPrefix) + options.job.base_model;
    if (!options.skip_training) {
      LiftRequest request{doc, options.generation, options.segmenter, options.pipeline, options.job};
      request.job.job_id = options.job.job_id + "-" + doc.doc_id;
      request.job.seed = static_cast<std::int64_t>(seed >> 1);
      std::unique_ptr<ChatClient> generator;
      if (options.pipeline.mode != TrainingMode::finetune_raw) {
        generator = make_chat_client(options.generation.endpoint_url, "LIFT_GENERATOR_API_KEY");
      }
      ref = run_lift(request, *trainer, generator.get()).adapter_ref;
    }
    return trainer->generate(ref, question_prompt(c.question), options.max_answer_tokens,
                             options.decoding);
  };
}

}  // namespace lift
