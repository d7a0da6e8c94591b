/**
 * Copyright 2026 The xgbd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "xgbd/error.hpp"

namespace xgbd {

struct Confusion {
  int tp = 0, fp = 0, tn = 0, fn = 0;
  [[nodiscard]] int total() const { return tp + fp + tn + fn; }
};

inline Confusion confusion(const std::vector<bool>& flags, const std::vector<bool>& truth) {
  if (flags.size() != truth.size()) {
    throw ConfigError("flag and truth vectors differ in length (" + std::to_string(flags.size()) +
                      " vs " + std::to_string(truth.size()) + ")");
  }
  Confusion c;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i]) {
      truth[i] ? ++c.tp : ++c.fp;
    } else {
      truth[i] ? ++c.fn : ++c.tn;
    }
  }
  return c;
}

/// (TP + TN) / n
inline double detection_accuracy(const std::vector<bool>& flags, const std::vector<bool>& truth) {
  const Confusion c = confusion(flags, truth);
  if (c.total() == 0) throw ConfigError("detection_accuracy of zero samples");
  return static_cast<double>(c.tp + c.tn) / c.total();
}

/// TP / (TP + FP); empty when nothing was flagged.
inline std::optional<double> isolation_precision(const std::vector<bool>& flags,
                                                 const std::vector<bool>& truth) {
  const Confusion c = confusion(flags, truth);
  if (c.tp + c.fp == 0) return std::nullopt;
  return static_cast<double>(c.tp) / (c.tp + c.fp);
}

/// Probability that a random positive outscores a random negative, ties
/// counted one half. Computed from mid-ranks (Mann-Whitney U / (n1 n0)).
inline double roc_auc(const std::vector<double>& scores, const std::vector<bool>& truth) {
  if (scores.size() != truth.size()) throw ConfigError("score and truth vectors differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double pos = 0, rank_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (truth[i]) {
      ++pos;
      rank_sum += rank[i];
    }
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0 || neg == 0) throw ConfigError("roc_auc needs both positive and negative samples");
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

struct Metrics {
  double accuracy = 0.0;
  std::optional<double> auc;
  std::optional<double> precision;
  int num_poisoned = 0;
  int num_clean = 0;
  int num_flagged = 0;
  Confusion counts;
};

/// Accuracy, precision, and (when both classes are present) AUC of a detector.
/// Higher `scores` mean more backdoor-like.
inline Metrics evaluate_detection(const std::vector<bool>& flags, const std::vector<double>& scores,
                                  const std::vector<bool>& truth) {
  Metrics m;
  m.counts = confusion(flags, truth);
  m.accuracy = detection_accuracy(flags, truth);
  m.precision = isolation_precision(flags, truth);
  m.num_poisoned = m.counts.tp + m.counts.fn;
  m.num_clean = m.counts.tn + m.counts.fp;
  m.num_flagged = m.counts.tp + m.counts.fp;
  if (m.num_poisoned > 0 && m.num_clean > 0) m.auc = roc_auc(scores, truth);
  return m;
}

/// Sample mean and (n - 1) standard deviation; std is 0 for a single value.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  int count = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  r.count = static_cast<int>(xs.size());
  if (xs.empty()) return r;
  double s = 0.0;
  for (double x : xs) s += x;
  r.mean = s / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return r;
}

}  // namespace xgbd
