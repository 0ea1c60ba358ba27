#include "deepvar/crf.hpp"

#include <cmath>

#include "deepvar/errors.hpp"

namespace deepvar {

namespace {

void require_crf_shapes(const Tensor& transitions, const Tensor& emissions,
                        const Tensor* start, const Tensor* stop) {
  check_numeric(emissions.rank() == 2 && emissions.rows() >= 1,
                "crf: emissions must be rank-2 with N >= 1, got " + emissions.shape_str());
  const std::size_t k = emissions.cols();
  check_numeric(transitions.rank() == 2 && transitions.rows() == k && transitions.cols() == k,
                "crf: transitions " + transitions.shape_str() +
                    " do not match emissions " + emissions.shape_str());
  if (start != nullptr) {
    check_numeric(start->rank() == 1 && start->size() == k,
                  "crf: start scores must have shape (K), got " + start->shape_str());
  }
  if (stop != nullptr) {
    check_numeric(stop->rank() == 1 && stop->size() == k,
                  "crf: stop scores must have shape (K), got " + stop->shape_str());
  }
}

void require_path(const std::vector<int>& path, std::size_t n, std::size_t k) {
  check_numeric(path.size() == n, "crf: path length " + std::to_string(path.size()) +
                                      " does not match N=" + std::to_string(n));
  for (int z : path) {
    check_numeric(z >= 0 && static_cast<std::size_t>(z) < k,
                  "crf: tag index " + std::to_string(z) + " out of range");
  }
}

// alpha[t][q]: log-sum score of all length-(t+1) prefixes ending in tag q,
// including emissions up to t and the start bonus.
std::vector<double> forward_table(const Tensor& transitions, const Tensor& emissions,
                                  const Tensor* start) {
  const std::size_t n = emissions.rows();
  const std::size_t k = emissions.cols();
  std::vector<double> alpha(n * k);
  for (std::size_t q = 0; q < k; ++q) {
    alpha[q] = emissions.at(0, q) + (start ? (*start)[q] : 0.0);
  }
  std::vector<double> scores(k);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t q = 0; q < k; ++q) {
      for (std::size_t p = 0; p < k; ++p) {
        scores[p] = alpha[(t - 1) * k + p] + transitions.at(p, q);
      }
      alpha[t * k + q] = emissions.at(t, q) + log_sum_exp(scores);
    }
  }
  return alpha;
}

// beta[t][q]: log-sum score of all suffixes after position t given tag q at t,
// excluding emissions at t but including the stop bonus.
std::vector<double> backward_table(const Tensor& transitions, const Tensor& emissions,
                                   const Tensor* stop) {
  const std::size_t n = emissions.rows();
  const std::size_t k = emissions.cols();
  std::vector<double> beta(n * k, 0.0);
  for (std::size_t q = 0; q < k; ++q) {
    beta[(n - 1) * k + q] = stop ? (*stop)[q] : 0.0;
  }
  std::vector<double> scores(k);
  for (std::size_t t = n - 1; t-- > 0;) {
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t q = 0; q < k; ++q) {
        scores[q] = transitions.at(p, q) + emissions.at(t + 1, q) + beta[(t + 1) * k + q];
      }
      beta[t * k + p] = log_sum_exp(scores);
    }
  }
  return beta;
}

}  // namespace

double crf_path_score(const Tensor& transitions, const Tensor& emissions,
                      const std::vector<int>& path, const Tensor* start,
                      const Tensor* stop) {
  require_crf_shapes(transitions, emissions, start, stop);
  const std::size_t n = emissions.rows();
  require_path(path, n, emissions.cols());
  double score = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    score += emissions.at(t, static_cast<std::size_t>(path[t]));
  }
  for (std::size_t t = 0; t + 1 < n; ++t) {
    score += transitions.at(static_cast<std::size_t>(path[t]),
                            static_cast<std::size_t>(path[t + 1]));
  }
  if (start != nullptr) score += (*start)[static_cast<std::size_t>(path[0])];
  if (stop != nullptr) score += (*stop)[static_cast<std::size_t>(path[n - 1])];
  return score;
}

double crf_log_partition(const Tensor& transitions, const Tensor& emissions,
                         const Tensor* start, const Tensor* stop) {
  require_crf_shapes(transitions, emissions, start, stop);
  const std::size_t n = emissions.rows();
  const std::size_t k = emissions.cols();
  const std::vector<double> alpha = forward_table(transitions, emissions, start);
  std::vector<double> last(k);
  for (std::size_t q = 0; q < k; ++q) {
    last[q] = alpha[(n - 1) * k + q] + (stop ? (*stop)[q] : 0.0);
  }
  return log_sum_exp(last);
}

std::vector<int> crf_viterbi(const Tensor& transitions, const Tensor& emissions,
                             const Tensor* start, const Tensor* stop) {
  require_crf_shapes(transitions, emissions, start, stop);
  const std::size_t n = emissions.rows();
  const std::size_t k = emissions.cols();

  std::vector<double> delta(n * k);
  std::vector<std::size_t> backptr(n * k, 0);
  for (std::size_t q = 0; q < k; ++q) {
    delta[q] = emissions.at(0, q) + (start ? (*start)[q] : 0.0);
  }
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t q = 0; q < k; ++q) {
      double best = delta[(t - 1) * k] + transitions.at(0, q);
      std::size_t best_p = 0;
      for (std::size_t p = 1; p < k; ++p) {
        const double cand = delta[(t - 1) * k + p] + transitions.at(p, q);
        if (cand > best) {  // strict: ties keep the lowest p
          best = cand;
          best_p = p;
        }
      }
      delta[t * k + q] = emissions.at(t, q) + best;
      backptr[t * k + q] = best_p;
    }
  }

  double best = delta[(n - 1) * k] + (stop ? (*stop)[0] : 0.0);
  std::size_t best_q = 0;
  for (std::size_t q = 1; q < k; ++q) {
    const double cand = delta[(n - 1) * k + q] + (stop ? (*stop)[q] : 0.0);
    if (cand > best) {
      best = cand;
      best_q = q;
    }
  }

  std::vector<int> path(n);
  path[n - 1] = static_cast<int>(best_q);
  for (std::size_t t = n - 1; t > 0; --t) {
    best_q = backptr[t * k + best_q];
    path[t - 1] = static_cast<int>(best_q);
  }
  return path;
}

Var crf_path_score(Tape& tape, Var transitions, Var emissions, std::vector<int> path,
                   Var start, Var stop) {
  const Tensor& trans = tape.value(transitions);
  const Tensor& emit = tape.value(emissions);
  const Tensor* start_v = start.valid() ? &tape.value(start) : nullptr;
  const Tensor* stop_v = stop.valid() ? &tape.value(stop) : nullptr;
  const double score = crf_path_score(trans, emit, path, start_v, stop_v);

  std::vector<Var> parents{transitions, emissions};
  if (start.valid()) parents.push_back(start);
  if (stop.valid()) parents.push_back(stop);
  const std::size_t n = emit.rows();
  const std::size_t k = emit.cols();
  return tape.custom(
      Tensor::scalar(score), std::move(parents),
      [transitions, emissions, start, stop, path = std::move(path), n, k](
          Tape& t, std::size_t id) {
        const double g = t.grad(Var{id})[0];
        Tensor& ge = t.grad_mut(emissions);
        Tensor& gt = t.grad_mut(transitions);
        for (std::size_t i = 0; i < n; ++i) {
          ge.at(i, static_cast<std::size_t>(path[i])) += g;
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
          gt.at(static_cast<std::size_t>(path[i]),
                static_cast<std::size_t>(path[i + 1])) += g;
        }
        (void)k;
        if (start.valid()) t.grad_mut(start)[static_cast<std::size_t>(path[0])] += g;
        if (stop.valid()) t.grad_mut(stop)[static_cast<std::size_t>(path[n - 1])] += g;
      });
}

Var crf_log_partition(Tape& tape, Var transitions, Var emissions, Var start, Var stop) {
  const Tensor& trans = tape.value(transitions);
  const Tensor& emit = tape.value(emissions);
  const Tensor* start_v = start.valid() ? &tape.value(start) : nullptr;
  const Tensor* stop_v = stop.valid() ? &tape.value(stop) : nullptr;
  require_crf_shapes(trans, emit, start_v, stop_v);

  const std::size_t n = emit.rows();
  const std::size_t k = emit.cols();
  const std::vector<double> alpha = forward_table(trans, emit, start_v);
  const std::vector<double> beta = backward_table(trans, emit, stop_v);
  std::vector<double> last(k);
  for (std::size_t q = 0; q < k; ++q) last[q] = alpha[(n - 1) * k + q] + (stop_v ? (*stop_v)[q] : 0.0);
  const double log_z = log_sum_exp(last);

  // Posterior marginals are the partition function's gradients.
  Tensor unary({n, k});
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t q = 0; q < k; ++q) {
      unary.at(t, q) = std::exp(alpha[t * k + q] + beta[t * k + q] - log_z);
    }
  }
  Tensor pairwise({k, k});
  for (std::size_t t = 0; t + 1 < n; ++t) {
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t q = 0; q < k; ++q) {
        pairwise.at(p, q) += std::exp(alpha[t * k + p] + trans.at(p, q) +
                                      emit.at(t + 1, q) + beta[(t + 1) * k + q] - log_z);
      }
    }
  }

  std::vector<Var> parents{transitions, emissions};
  if (start.valid()) parents.push_back(start);
  if (stop.valid()) parents.push_back(stop);
  return tape.custom(
      Tensor::scalar(log_z), std::move(parents),
      [transitions, emissions, start, stop, unary = std::move(unary),
       pairwise = std::move(pairwise), n, k](Tape& t, std::size_t id) {
        const double g = t.grad(Var{id})[0];
        Tensor& ge = t.grad_mut(emissions);
        Tensor& gt = t.grad_mut(transitions);
        for (std::size_t i = 0; i < n * k; ++i) ge[i] += g * unary[i];
        for (std::size_t i = 0; i < k * k; ++i) gt[i] += g * pairwise[i];
        if (start.valid()) {
          Tensor& gs = t.grad_mut(start);
          for (std::size_t q = 0; q < k; ++q) gs[q] += g * unary.at(0, q);
        }
        if (stop.valid()) {
          Tensor& gs = t.grad_mut(stop);
          for (std::size_t q = 0; q < k; ++q) gs[q] += g * unary.at(n - 1, q);
        }
      });
}

Var crf_nll(Tape& tape, Var transitions, Var emissions, const std::vector<int>& gold,
            Var start, Var stop) {
  Var log_z = crf_log_partition(tape, transitions, emissions, start, stop);
  Var gold_score = crf_path_score(tape, transitions, emissions, gold, start, stop);
  return tape.sub(log_z, gold_score);
}

}  // namespace deepvar
