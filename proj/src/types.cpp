#include "mcl/types.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace mcl {

MeanEnsemble::MeanEnsemble(MatrixXd means) : M(std::move(means)) {
  const int k = static_cast<int>(M.cols());
  MatrixXd gram = M.transpose() * M;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("MeanEnsemble: Grammian eigendecomposition failed");
  const VectorXd& evals = eig.eigenvalues();  // ascending
  const double cutoff = kRankCutoff * std::max(evals(k - 1), 0.0);
  int r = 0;
  for (int i = 0; i < k; ++i)
    if (evals(i) > cutoff) ++r;
  V.resize(k, r);
  sigma.resize(r);
  for (int j = 0; j < r; ++j) {
    const int src = k - 1 - j;  // descending order
    V.col(j) = eig.eigenvectors().col(src);
    sigma(j) = std::sqrt(evals(src));
  }
}

MatrixXd MeanEnsemble::grammian() const {
  return V * sigma.array().square().matrix().asDiagonal() * V.transpose();
}

MatrixXd MeanEnsemble::sigma_vt() const {
  return sigma.asDiagonal() * V.transpose();
}

void MeanEnsemble::check_invariants() const {
  const int r = rank();
  if ((V.transpose() * V - MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff() >
      1e-10)
    throw std::runtime_error("MeanEnsemble: V columns not orthonormal");
  if (r > 0 && sigma.minCoeff() <= 0.0)
    throw std::runtime_error("MeanEnsemble: nonpositive singular value");
  const MatrixXd gram = M.transpose() * M;
  const double scale = std::max(gram.cwiseAbs().maxCoeff(), 1.0);
  if ((grammian() - gram).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw std::runtime_error("MeanEnsemble: V Sigma^2 V^T does not match M^T M");
}

PriorSpec::PriorSpec(VectorXd p) : pi(std::move(p)) {
  if (pi.size() == 0) throw std::invalid_argument("PriorSpec: empty");
  if (pi.minCoeff() < 0.0)
    throw std::invalid_argument("PriorSpec: negative entry");
  if (std::fabs(pi.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("PriorSpec: entries must sum to 1");
}

PriorSpec PriorSpec::uniform(int k) {
  return PriorSpec(VectorXd::Constant(k, 1.0 / k));
}

GmmInstance::GmmInstance(MeanEnsemble m, PriorSpec p, double noise_sd)
    : means(std::move(m)), priors(std::move(p)), sigma(noise_sd) {
  if (!(sigma > 0.0)) throw std::invalid_argument("GmmInstance: sigma must be > 0");
  if (priors.classes() != means.classes())
    throw std::invalid_argument("GmmInstance: prior/mean class mismatch");
}

void Dataset::check_invariants() const {
  const int n = size();
  if (labels.size() != n || Y.cols() != n)
    throw std::runtime_error("Dataset: size mismatch");
  for (int i = 0; i < n; ++i) {
    if (labels(i) < 0 || labels(i) >= classes())
      throw std::runtime_error("Dataset: label out of range");
    for (int c = 0; c < classes(); ++c) {
      const double want = (c == labels(i)) ? 1.0 : 0.0;
      if (Y(c, i) != want) throw std::runtime_error("Dataset: Y not one-hot");
    }
  }
}

std::string rule_name(Rule r) {
  switch (r) {
    case Rule::Avg: return "Avg";
    case Rule::LS: return "LS";
    case Rule::WLS: return "WLS";
    case Rule::CE: return "CE";
  }
  return "?";
}

Rule rule_from_name(const std::string& name) {
  if (name == "Avg") return Rule::Avg;
  if (name == "LS") return Rule::LS;
  if (name == "WLS") return Rule::WLS;
  if (name == "CE") return Rule::CE;
  throw std::invalid_argument("unknown classifier rule: " + name);
}

WeightSpec::WeightSpec(VectorXd w) : omega(std::move(w)) {
  if (omega.size() == 0) throw std::invalid_argument("WeightSpec: empty");
  if (omega.minCoeff() < 0.0)
    throw std::invalid_argument("WeightSpec: negative weight");
  if (omega.maxCoeff() <= 0.0)
    throw std::invalid_argument("WeightSpec: all weights zero");
}

WeightSpec WeightSpec::ones(int k) { return WeightSpec(VectorXd::Ones(k)); }

WeightSpec WeightSpec::inv_sqrt_prior(const VectorXd& pi) {
  VectorXd w(pi.size());
  for (int i = 0; i < pi.size(); ++i) {
    if (!(pi(i) > 0.0))
      throw std::invalid_argument("inv_sqrt_prior: prior must be positive");
    w(i) = 1.0 / std::sqrt(pi(i));
  }
  return WeightSpec(std::move(w));
}

void CorrelationSummary::check_invariants() const {
  if ((Sww - Sww.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::runtime_error("CorrelationSummary: Sww not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Sww);
  if (eig.eigenvalues().minCoeff() < -1e-8 * std::max(Sww.trace(), 1e-300))
    throw std::runtime_error("CorrelationSummary: Sww not PSD");
}

double SoftmaxMoments::max_se() const {
  double m = 0.0;
  if (pi_se.size()) m = pi_se.maxCoeff();
  if (Pi_se.size()) m = std::max(m, Pi_se.maxCoeff());
  return m;
}

void SoftmaxMoments::check_invariants(double se_mult) const {
  const double tol = std::max(se_mult * max_se(), 1e-12);
  if (pi.minCoeff() <= 0.0 || pi.maxCoeff() > 1.0)
    throw std::runtime_error("SoftmaxMoments: pi out of (0,1]");
  if (std::fabs(pi.sum() - 1.0) > tol)
    throw std::runtime_error("SoftmaxMoments: pi does not sum to 1");
  if ((Pi - Pi.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::runtime_error("SoftmaxMoments: Pi not symmetric");
  if (Pi.minCoeff() < 0.0)
    throw std::runtime_error("SoftmaxMoments: Pi has negative entry");
  if ((Pi.rowwise().sum() - pi).cwiseAbs().maxCoeff() > tol)
    throw std::runtime_error("SoftmaxMoments: Pi 1 != pi");
}

TailProblem::TailProblem(MatrixXd a, VectorXd tt)
    : A(std::move(a)), t(std::move(tt)) {
  if (A.rows() != A.cols() || A.rows() != t.size())
    throw std::invalid_argument("TailProblem: dimension mismatch");
  if ((A - A.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * std::max(1.0, A.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("TailProblem: A not symmetric");
}

}  // namespace mcl
