// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "lift/errors.hpp"
#include "lift/mock_trainer.hpp"

namespace lift {
namespace {

double log_sum_exp(const std::vector<double>& w) {
  const double hi = *std::max_element(w.begin(), w.end());
  double sum = 0.0;
  for (double x : w) sum += std::exp(x - hi);
  return hi + std::log(sum);
}

}  // namespace

MockModel::MockModel(std::vector<std::string> vocabulary) : vocab_(std::move(vocabulary)) {
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!index_.emplace(vocab_[i], static_cast<int>(i)).second) {
      throw ValidationError("vocabulary", "duplicate symbol '" + vocab_[i] + "'");
    }
  }
  const auto eos = index_.find(std::string(kEosToken));
  if (eos == index_.end()) throw ValidationError("vocabulary", "must contain </s>");
  eos_ = eos->second;
  if (auto unk = index_.find(std::string(kUnkToken)); unk != index_.end()) unk_ = unk->second;
}

std::vector<int> MockModel::encode(std::string_view text) const {
  std::vector<int> tokens;
  std::istringstream in{std::string(text)};
  for (std::string word; in >> word;) {
    const auto it = index_.find(word);
    if (it != index_.end()) {
      tokens.push_back(it->second);
    } else if (unk_ >= 0) {
      tokens.push_back(unk_);
    } else {
      throw Error(ErrorKind::EncodingError, "token '" + word + "' is not in the vocabulary");
    }
  }
  tokens.push_back(eos_);
  return tokens;
}

std::string MockModel::detokenize(const std::vector<int>& tokens) const {
  std::string out;
  for (int t : tokens) {
    if (t == eos_) break;
    if (!out.empty()) out.push_back(' ');
    out += vocab_.at(static_cast<std::size_t>(t));
  }
  return out;
}

const std::vector<double>* MockModel::weights(std::size_t position) const {
  if (position >= log_weights_.size() || log_weights_[position].empty()) return nullptr;
  return &log_weights_[position];
}

std::vector<double> MockModel::distribution(std::size_t position) const {
  const auto v = vocab_.size();
  const auto* w = weights(position);
  if (!w) return std::vector<double>(v, 1.0 / static_cast<double>(v));
  const double norm = log_sum_exp(*w);
  std::vector<double> p(v);
  for (std::size_t i = 0; i < v; ++i) p[i] = std::exp((*w)[i] - norm);
  return p;
}

double MockModel::log_prob(std::size_t position, int token) const {
  const auto* w = weights(position);
  if (!w) return -std::log(static_cast<double>(vocab_.size()));
  return (*w)[static_cast<std::size_t>(token)] - log_sum_exp(*w);
}

double MockModel::sequence_nll(const std::vector<int>& tokens) const {
  double nll = 0.0;
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) nll -= log_prob(pos, tokens[pos]);
  return nll;
}

void MockModel::update(const std::vector<std::vector<int>>& sequences, double eta) {
  const double step = std::log1p(eta);
  for (const auto& seq : sequences) {
    if (seq.size() > log_weights_.size()) log_weights_.resize(seq.size());
    for (std::size_t pos = 0; pos < seq.size(); ++pos) {
      auto& row = log_weights_[pos];
      if (row.empty()) row.assign(vocab_.size(), 0.0);
      row[static_cast<std::size_t>(seq[pos])] += step;
    }
  }
  // Shift rows so the max is 0; keeps weights bounded without changing p.
  for (auto& row : log_weights_) {
    if (row.empty()) continue;
    const double hi = *std::max_element(row.begin(), row.end());
    for (double& x : row) x -= hi;
  }
}

std::vector<int> MockModel::decode_greedy(int max_tokens) const {
  std::vector<int> out;
  for (int pos = 0; pos < max_tokens; ++pos) {
    const auto p = distribution(static_cast<std::size_t>(pos));
    // max_element returns the first maximum, so ties go to the lowest index.
    const int token = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    if (token == eos_) break;
    out.push_back(token);
  }
  return out;
}

std::vector<int> MockModel::decode_sampled(int max_tokens, double temperature,
                                           std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::vector<int> out;
  for (int pos = 0; pos < max_tokens; ++pos) {
    auto p = distribution(static_cast<std::size_t>(pos));
    double total = 0.0;
    for (double& x : p) {
      x = std::pow(x, 1.0 / temperature);
      total += x;
    }
    // 53-bit uniform from the raw engine output; portable across stdlibs.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * total;
    double acc = 0.0;
    int token = static_cast<int>(p.size()) - 1;
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc += p[i];
      if (u < acc) {
        token = static_cast<int>(i);
        break;
      }
    }
    if (token == eos_) break;
    out.push_back(token);
  }
  return out;
}

}  // namespace lift
