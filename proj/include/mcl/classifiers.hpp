#pragma once

#include <iosfwd>
#include <optional>

#include "mcl/types.hpp"

namespace mcl {

// Class averaging: W = (1/n) Y X^T, b = (1/n) Y 1.
LinearClassifier fit_avg(const Dataset& data);

// Least squares with intercept: minimizes (1/2n)||W X + b 1^T - Y||_F^2.
// When the centered normal system is singular (in particular n < d+1) the
// returned W is the minimum-Frobenius-norm minimizer, intercepts free.
LinearClassifier fit_ls(const Dataset& data);

// Weighted least squares with per-class weights omega (class-l samples
// weighted by omega_l^2). fit_wls with omega = 1 runs the identical solver
// path as fit_ls. Rejects zero weight on a class present in the data.
LinearClassifier fit_wls(const Dataset& data, const WeightSpec& w);

struct CeReport {
  int steps_run = 0;
  double final_loss = 0.0;
  double final_lr = 0.0;
  bool separable_capped = false;  // norm growth cap hit (separable data)
};

// Full-batch gradient descent on the multiclass cross-entropy, intercepts
// included in the logits. The step size halves whenever a step would
// increase the loss. Training stops early when ||(W,b)||_F exceeds
// norm_cap, which signals (quasi-)separable data with no finite minimizer.
LinearClassifier fit_ce(const Dataset& data, int steps, double lr,
                        CeReport* report = nullptr, double norm_cap = 100.0);

// argmax_j <w_j, x> + b_j; ties broken toward the lowest index.
int predict(const LinearClassifier& clf, const VectorXd& x);
VectorXi predict_batch(const LinearClassifier& clf, const MatrixXd& X);

CorrelationSummary summarize(const LinearClassifier& clf,
                             const MeanEnsemble& means);

struct EmpiricalError {
  double total = 0.0;
  VectorXd classwise;  // NaN for classes absent from the test set
  VectorXd freq;       // empirical class frequencies
};

EmpiricalError empirical_error(const LinearClassifier& clf,
                               const Dataset& test);

// Flat CSV, one row per class: w_1,...,w_d,b.
void write_classifier_csv(const LinearClassifier& clf, std::ostream& os);
LinearClassifier read_classifier_csv(std::istream& is, Rule rule);

namespace detail {
// Shared LS/WLS core: min-Frobenius-norm solution of the sample-weighted
// affine least squares over all target rows, one factorization for all k.
void solve_affine_ls(const MatrixXd& X, const MatrixXd& T, const VectorXd& u,
                     MatrixXd& W, VectorXd& b);
}  // namespace detail

}  // namespace mcl
