#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcl {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

// Class means mu_1..mu_k as columns of M (d x k), together with the
// eigendecomposition of the Grammian M^T M = V Sigma^2 V^T. Eigenvalues
// below 1e-10 times the largest are treated as zero and dropped, which
// defines the rank r <= k.
class MeanEnsemble {
 public:
  static constexpr double kRankCutoff = 1e-10;

  MeanEnsemble() = default;
  explicit MeanEnsemble(MatrixXd means);

  int dim() const { return static_cast<int>(M.cols() ? M.rows() : 0); }
  int classes() const { return static_cast<int>(M.cols()); }
  int rank() const { return static_cast<int>(sigma.size()); }

  // Grammian Sigma_{mu,mu} reconstructed from the retained spectrum.
  MatrixXd grammian() const;
  // Sigma V^T, the r x k factor most formulas are written in.
  MatrixXd sigma_vt() const;

  void check_invariants() const;

  MatrixXd M;       // d x k
  MatrixXd V;       // k x r, orthonormal columns
  VectorXd sigma;   // r positive singular values of M, descending
};

struct PriorSpec {
  PriorSpec() = default;
  explicit PriorSpec(VectorXd p);
  static PriorSpec uniform(int k);

  int classes() const { return static_cast<int>(pi.size()); }

  VectorXd pi;
};

struct GmmInstance {
  GmmInstance(MeanEnsemble m, PriorSpec p, double noise_sd);

  MeanEnsemble means;
  PriorSpec priors;
  double sigma = 1.0;  // noise standard deviation, > 0
};

struct MlmInstance {
  explicit MlmInstance(MeanEnsemble m) : means(std::move(m)) {}

  MeanEnsemble means;
};

// Labeled sample batch. Features are columns of X; labels are 0-based and
// mirrored as one-hot columns of Y.
struct Dataset {
  int dim() const { return static_cast<int>(X.rows()); }
  int classes() const { return static_cast<int>(Y.rows()); }
  int size() const { return static_cast<int>(X.cols()); }

  void check_invariants() const;

  MatrixXd X;       // d x n
  MatrixXd Y;       // k x n one-hot
  VectorXi labels;  // n, values in [0, k)
};

enum class Rule { Avg, LS, WLS, CE };

std::string rule_name(Rule r);
Rule rule_from_name(const std::string& name);

struct LinearClassifier {
  int classes() const { return static_cast<int>(W.rows()); }
  int dim() const { return static_cast<int>(W.cols()); }

  MatrixXd W;   // k x d
  VectorXd b;   // k
  Rule rule = Rule::LS;
};

// Per-class loss weights omega_l; the WLS objective weights class-l samples
// by omega_l^2.
struct WeightSpec {
  WeightSpec() = default;
  explicit WeightSpec(VectorXd w);
  static WeightSpec ones(int k);
  // omega_l = 1/sqrt(pi_l), the natural rebalancing choice.
  static WeightSpec inv_sqrt_prior(const VectorXd& pi);

  VectorXd omega;
};

// The sufficient statistics of a linear classifier for test-error purposes:
// intercepts b, Sigma_{w,mu} = W M, Sigma_{w,w} = W W^T, and the Grammian
// Sigma_{mu,mu} = M^T M.
struct CorrelationSummary {
  int classes() const { return static_cast<int>(b.size()); }

  void check_invariants() const;

  VectorXd b;
  MatrixXd Swm;
  MatrixXd Sww;
  MatrixXd Smm;
};

struct AspectRatio {
  explicit AspectRatio(double g) : gamma(g) {
    if (!(g > 0.0)) throw std::invalid_argument("AspectRatio: gamma must be > 0");
  }
  double gamma;
};

// Solution of the WLS fixed point F(eta) = sum_l pi_l w_l^2/(w_l^2+eta) =
// gamma, with the derived effective priors and variance factor.
struct WlsFixedPoint {
  double eta = 0.0;
  VectorXd pi_tilde;  // (1/gamma) pi_l w_l^2/(w_l^2+eta)
  VectorXd nu;        // (1/gamma) w_l^2/(w_l^2+eta)
  double zeta = 0.0;  // gamma / (eta sum_l pi_l w_l^2/(w_l^2+eta)^2)
};

// First and second moments of softmax(V Sigma g), g ~ N(0, I_r).
struct SoftmaxMoments {
  int classes() const { return static_cast<int>(pi.size()); }
  // Largest per-entry jackknife standard error across pi and Pi.
  double max_se() const;

  void check_invariants(double se_mult = 3.0) const;

  VectorXd pi;
  MatrixXd Pi;
  VectorXd pi_se;
  MatrixXd Pi_se;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
};

// Encodes P{A^{1/2} z >= t} for z standard normal, the tail primitive every
// class-wise error reduces to.
struct TailProblem {
  TailProblem(MatrixXd a, VectorXd tt);

  int dim() const { return static_cast<int>(t.size()); }

  MatrixXd A;  // symmetric PSD (clamped on use)
  VectorXd t;
};

enum class EstimateMethod { MC, ClosedForm, Bound };

struct ProbEstimate {
  double value = 0.0;
  double std_err = 0.0;
  EstimateMethod method = EstimateMethod::MC;
  std::string warning;  // set when PSD clamping was material
};

struct McOptions {
  std::size_t n_samples = 200000;
  std::uint64_t seed = 0;
};

}  // namespace mcl
