#pragma once

#include <vector>

#include "deepvar/tape.hpp"
#include "deepvar/tensor.hpp"

namespace deepvar {

// Linear-chain CRF over K tags. transitions is K x K with [p][q] scoring a
// move from tag p to tag q; emissions is N x K of unary scores. The score of
// a path z is
//     S(z) = sum_t emissions[t][z_t] + sum_{t<N-1} transitions[z_t][z_{t+1}]
// with no start/stop terms by default; optional learned start/stop vectors
// (length K) add start[z_0] and stop[z_{N-1}] when provided.

double crf_path_score(const Tensor& transitions, const Tensor& emissions,
                      const std::vector<int>& path,
                      const Tensor* start = nullptr, const Tensor* stop = nullptr);

// log of the summed exp path scores over all K^N paths, via the forward
// recursion in log space.
double crf_log_partition(const Tensor& transitions, const Tensor& emissions,
                         const Tensor* start = nullptr, const Tensor* stop = nullptr);

// Max-score path; ties break toward the lowest tag index at each backtrack
// step (and at the final position).
std::vector<int> crf_viterbi(const Tensor& transitions, const Tensor& emissions,
                             const Tensor* start = nullptr, const Tensor* stop = nullptr);

// Tape-recorded variants. Gradients are analytic: the partition's gradient
// is the posterior unary/pairwise marginals from the forward-backward pass;
// the path score scatters ones. An invalid (default) Var means "absent".
Var crf_path_score(Tape& tape, Var transitions, Var emissions, std::vector<int> path,
                   Var start = Var{}, Var stop = Var{});
Var crf_log_partition(Tape& tape, Var transitions, Var emissions,
                      Var start = Var{}, Var stop = Var{});

// nll = log_partition - path_score(gold); always >= 0.
Var crf_nll(Tape& tape, Var transitions, Var emissions, const std::vector<int>& gold,
            Var start = Var{}, Var stop = Var{});

}  // namespace deepvar
