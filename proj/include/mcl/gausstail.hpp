#pragma once

#include <cstdint>
#include <optional>

#include "mcl/types.hpp"

namespace mcl {

// Monte Carlo estimate of P{A^{1/2} z >= t} (entry-wise) for z standard
// normal. A^{1/2} is taken from the symmetric eigendecomposition with
// negative eigenvalues clamped to zero; jackknife standard error.
ProbEstimate tail_prob_mc(const TailProblem& p, std::size_t n_samples,
                          std::uint64_t seed);

// P{G_0 + max_{i in [k]} G_i >= t} = 1 - E_{G_0}[Phi(t - G_0)^k], the exact
// class-wise error in symmetric geometries, evaluated by deterministic 1-D
// quadrature.
ProbEstimate rank_one_tail(int k, double t);

// Exact class-wise misclassification probability for the GMM,
// P_{e|c} = 1 - P{S_c^{1/2} z >= t_c} with z ~ N(0, sigma^2 I_{k-1}).
// S_c and t_c are assembled from the summary alone. Symmetric problems
// (S_c proportional to I + 11^T, t_c proportional to 1) dispatch to the
// closed-form rank-one evaluator.
ProbEstimate classwise_error_gmm(const CorrelationSummary& summary,
                                 const MeanEnsemble& means, double sigma,
                                 int c, std::size_t n_samples,
                                 std::uint64_t seed);

ProbEstimate total_error_gmm(const CorrelationSummary& summary,
                             const MeanEnsemble& means, double sigma,
                             const PriorSpec& priors, std::size_t n_samples,
                             std::uint64_t seed);

// Total MLM error: samples (g,h) jointly Gaussian with covariance
// [[Sww, Swm],[Swm^T, Smm]], draws Y(h) ~ softmax(h) and estimates
// P{argmax(g + b) != Y(h)}.
ProbEstimate total_error_mlm(const CorrelationSummary& summary,
                             std::size_t n_samples, std::uint64_t seed);

// Class-wise MLM error by nested Monte Carlo: outer draws of
// h ~ N(0, Smm) weighted by softmax_c(h), inner orthant estimates with the
// Schur-complement covariance. Self-normalized by the outer estimate of
// pi_c, so the prior-weighted class-wise errors recombine into the total.
ProbEstimate classwise_error_mlm(const CorrelationSummary& summary, int c,
                                 std::size_t n_outer, std::size_t n_inner,
                                 std::uint64_t seed);
// Default Monte Carlo budget: 2e5 outer draws, 1e3 inner (SE around 2e-3).
ProbEstimate classwise_error_mlm(const CorrelationSummary& summary, int c,
                                 std::uint64_t seed);

// Union bound on the GMM class-wise error: sum_{j != c} Q(-[t_c]_j /
// (sigma sqrt([S_c]_jj))), clipped to [0,1].
double union_bound_gmm(const CorrelationSummary& summary,
                       const MeanEnsemble& means, double sigma, int c);

// Union bound using only the diagonal of Sigma_{w,w}: nontrivial only when
// every [t_c]_j < 0, else 1.
double union_bound_diag_only(const CorrelationSummary& summary,
                             const MeanEnsemble& means, double sigma, int c);

// Slepian comparison bound on 1 - P{A^{1/2} z <= t} through the
// equicorrelated comparison matrix (diag(A) - a I) + a 11^T with
// a = min_ij A_ij. Applicable only when a >= 0 (returns nullopt otherwise).
std::optional<double> slepian_bound(const TailProblem& p);

// Lower and upper bounds on P{X >= x} for X ~ N(0, (1-rho) I + rho 11^T).
struct SatheBounds {
  double lower = 0.0;
  double upper = 1.0;
};
SatheBounds sathe_bounds(double rho, const VectorXd& x);

// Oracle (genie) lower bound on the total error of any trained classifier,
// from pairwise Bayes errors of the k-ary Gaussian hypothesis test with
// known means. Distances are scaled by the noise level sigma.
double genie_lower_bound(const MeanEnsemble& means, const PriorSpec& priors,
                         double sigma = 1.0);

namespace detail {
// S_c (scaled by sigma^2) and t_c from a correlation summary.
void gmm_tail_inputs(const CorrelationSummary& summary, double sigma, int c,
                     MatrixXd& Sc, VectorXd& tc);
// Symmetric PSD square root with negative eigenvalues clamped to zero;
// returns the clamped mass as a fraction of the trace.
MatrixXd psd_sqrt(const MatrixXd& A, double* clamped_fraction = nullptr);
}  // namespace detail

}  // namespace mcl
