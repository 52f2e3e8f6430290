#pragma once

#include <cstdint>
#include <iosfwd>

#include "mcl/types.hpp"

namespace mcl {

// Unique positive root of F(eta) = sum_l pi_l w_l^2/(w_l^2 + eta) = gamma,
// by bisection on the strictly decreasing F; residual |F(eta)-gamma| <=
// 1e-12. Requires 0 < gamma < sum_{l: w_l>0} pi_l.
WlsFixedPoint solve_eta(const PriorSpec& priors, const WeightSpec& w,
                        double gamma);

// ---- GMM predictors ------------------------------------------------------

// Class averaging, any gamma > 0.
CorrelationSummary predict_avg_gmm(const GmmInstance& inst, AspectRatio gamma);

// Least squares, 0 < gamma < 1.
CorrelationSummary predict_ls_gmm(const GmmInstance& inst, AspectRatio gamma);

// Min-norm least squares in the overparameterized regime gamma > 1.
// Off-diagonal weight cross-correlations are not available in this regime,
// so the result carries b, Sigma_{w,mu} and the per-class weight norms only.
struct MinNormLsPrediction {
  VectorXd b;
  MatrixXd Swm;
  VectorXd norms;     // ||w_l||
  VectorXd norms_sq;  // ||w_l||^2
};
MinNormLsPrediction predict_minnorm_ls_gmm(const GmmInstance& inst,
                                           AspectRatio gamma);

// Weighted least squares, 0 < gamma < 1. The b and Sigma_{w,mu} blocks equal
// the unweighted LS prediction under the effective priors pi_tilde; the
// Sigma_{w,w} block carries the additional Q correction.
CorrelationSummary predict_wls_gmm(const GmmInstance& inst, AspectRatio gamma,
                                   const WeightSpec& w);

// ---- MLM predictors ------------------------------------------------------

CorrelationSummary predict_avg_mlm(const MlmInstance& inst, AspectRatio gamma,
                                   const SoftmaxMoments& mom);

CorrelationSummary predict_ls_mlm(const MlmInstance& inst, AspectRatio gamma,
                                  const SoftmaxMoments& mom);

// Weighted least squares under the MLM. The weighted second moments
// E[(nu^T v) g g^T] and E[((nu . nu)^T v) g g^T] are estimated by Monte
// Carlo with the supplied options; everything else is deterministic given
// the softmax moments.
CorrelationSummary predict_wls_mlm(const MlmInstance& inst, AspectRatio gamma,
                                   const WeightSpec& w,
                                   const SoftmaxMoments& mom,
                                   const McOptions& wgg);

// ---- Special-case scalars -------------------------------------------------

// Error arguments for orthogonal, equal-energy, balanced classes:
// P_e = P{G_0 + max_{j<k} G_j >= u}. u_ls = u_avg sqrt(1-gamma) and
// u_bayes = u_avg (averaging is Bayes optimal in this geometry).
struct UValues {
  double u_avg = 0.0;
  double u_ls = 0.0;
  double u_bayes = 0.0;
};
UValues u_values(double mu, double sigma, int k, double gamma);

// Sample-complexity threshold below which LS beats Avg under the MLM with
// orthogonal equal-energy means: gamma* = mu^2 k/(k-1)^2 (1 - k Pi11)^2,
// Pi11 = E[e^{2 mu G_1} / (sum_l e^{mu G_l})^2] estimated by Monte Carlo.
struct GammaStar {
  double value = 0.0;
  double std_err = 0.0;
  double pi11 = 0.0;
};
GammaStar gamma_star(double mu, int k, std::size_t n_samples,
                     std::uint64_t seed);

// ---- Serialization --------------------------------------------------------

// CSV layout: b row, then the k x k blocks Swm, Sww, Smm.
void write_summary_csv(const CorrelationSummary& s, std::ostream& os);
CorrelationSummary read_summary_csv(std::istream& is);

}  // namespace mcl
