#pragma once

#include <cstdint>
#include <iosfwd>

#include "mcl/types.hpp"

namespace mcl {

// Monte Carlo estimate of pi = E[v] and Pi = E[v v^T] for
// v = softmax(V Sigma g), g ~ N(0, I_r). Standard errors come from a
// jackknife over 10 equal blocks. Rank-0 ensembles (all means zero) return
// the exact uniform moments without sampling.
SoftmaxMoments estimate_moments(const MeanEnsemble& means,
                                std::size_t n_samples, std::uint64_t seed);

// MC estimate of the k x r cross moment E[v g^T], with per-entry jackknife
// standard errors in *se when requested. Equals (diag(pi) - Pi) V Sigma by
// Gaussian integration by parts, which the tests enforce.
MatrixXd estimate_cross_moment(const MeanEnsemble& means,
                               std::size_t n_samples, std::uint64_t seed,
                               MatrixXd* se = nullptr);

// MC estimate of E[(weight^T v) g g^T], symmetrized. weight = 1 gives I_r.
MatrixXd estimate_weighted_ggT(const MeanEnsemble& means,
                               const VectorXd& weight, std::size_t n_samples,
                               std::uint64_t seed, MatrixXd* se = nullptr);

void write_moments_csv(const SoftmaxMoments& mom, std::ostream& os);
SoftmaxMoments read_moments_csv(std::istream& is);

}  // namespace mcl
