#pragma once

#include <cstdint>
#include <iosfwd>

#include "mcl/types.hpp"

namespace mcl {

// Draw n samples from the Gaussian mixture: label ~ priors,
// x = mu_label + sigma * z. Sample i consumes only its own RNG stream, so
// the dataset is bit-identical for a given seed regardless of chunking.
Dataset sample_gmm(const GmmInstance& inst, int n, std::uint64_t seed);

// Draw n samples from the multinomial logit model: x ~ N(0, I_d),
// label ~ softmax(M^T x).
Dataset sample_mlm(const MlmInstance& inst, int n, std::uint64_t seed);

// Means with ||mu_i|| = norms[i] and pairwise correlation
// <mu_i,mu_j>/(||mu_i|| ||mu_j||) = pairwise_corr for i != j, embedded
// deterministically in R^d. Requires d >= k and a PSD Gram matrix.
MeanEnsemble make_orthogonal_ensemble(int k, int d, const VectorXd& norms,
                                      double pairwise_corr = 0.0);
MeanEnsemble make_orthogonal_ensemble(int k, int d, double norm,
                                      double pairwise_corr = 0.0);

// CSV with header x_1,...,x_d,label; one row per sample.
void write_dataset_csv(const Dataset& data, std::ostream& os);

}  // namespace mcl
