#pragma once

// Exhaustive-path CRF oracle: enumerates all K^N tag paths directly. Kept
// deliberately independent of the library's dynamic programming (own
// log-sum-exp, own score accumulation). Scores accumulate left to right in
// the same association order as the Viterbi recursion so exact ties compare
// bitwise; the tie rule prefers the path whose reversed tag sequence is
// lexicographically smallest, matching lowest-index backtracking.

#include <algorithm>
#include <cmath>
#include <vector>

#include "deepvar/tensor.hpp"

namespace deepvar::testing {

inline double oracle_path_score(const Tensor& transitions, const Tensor& emissions,
                                const std::vector<int>& path,
                                const Tensor* start = nullptr,
                                const Tensor* stop = nullptr) {
  const std::size_t n = emissions.rows();
  double s = emissions.at(0, static_cast<std::size_t>(path[0]));
  if (start != nullptr) s = s + (*start)[static_cast<std::size_t>(path[0])];
  for (std::size_t t = 1; t < n; ++t) {
    s = s + transitions.at(static_cast<std::size_t>(path[t - 1]),
                           static_cast<std::size_t>(path[t]));
    s = s + emissions.at(t, static_cast<std::size_t>(path[t]));
  }
  if (stop != nullptr) s = s + (*stop)[static_cast<std::size_t>(path[n - 1])];
  return s;
}

inline bool next_path(std::vector<int>& path, std::size_t k) {
  for (std::size_t i = path.size(); i-- > 0;) {
    if (++path[i] < static_cast<int>(k)) return true;
    path[i] = 0;
  }
  return false;
}

inline double oracle_log_partition(const Tensor& transitions, const Tensor& emissions,
                                   const Tensor* start = nullptr,
                                   const Tensor* stop = nullptr) {
  const std::size_t k = emissions.cols();
  std::vector<int> path(emissions.rows(), 0);
  std::vector<double> scores;
  do {
    scores.push_back(oracle_path_score(transitions, emissions, path, start, stop));
  } while (next_path(path, k));
  const double m = *std::max_element(scores.begin(), scores.end());
  double acc = 0.0;
  for (double s : scores) acc += std::exp(s - m);
  return m + std::log(acc);
}

inline bool reversed_less(const std::vector<int>& a, const std::vector<int>& b) {
  for (std::size_t i = a.size(); i-- > 0;) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

inline std::vector<int> oracle_viterbi(const Tensor& transitions, const Tensor& emissions,
                                       const Tensor* start = nullptr,
                                       const Tensor* stop = nullptr) {
  const std::size_t k = emissions.cols();
  std::vector<int> path(emissions.rows(), 0);
  std::vector<int> best_path = path;
  double best = oracle_path_score(transitions, emissions, path, start, stop);
  while (next_path(path, k)) {
    const double s = oracle_path_score(transitions, emissions, path, start, stop);
    if (s > best || (s == best && reversed_less(path, best_path))) {
      best = s;
      best_path = path;
    }
  }
  return best_path;
}

}  // namespace deepvar::testing
