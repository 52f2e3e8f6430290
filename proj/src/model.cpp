#include "mcl/model.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <ostream>

#include "mcl/rng.hpp"

namespace mcl {

namespace {

int draw_categorical(const VectorXd& probs, double u) {
  double acc = 0.0;
  const int k = static_cast<int>(probs.size());
  for (int c = 0; c < k; ++c) {
    acc += probs(c);
    if (u < acc) return c;
  }
  return k - 1;  // guard against accumulated rounding
}

Dataset make_dataset(int d, int k, int n) {
  Dataset data;
  data.X.resize(d, n);
  data.Y.setZero(k, n);
  data.labels.resize(n);
  return data;
}

}  // namespace

Dataset sample_gmm(const GmmInstance& inst, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_gmm: n must be >= 1");
  const int d = inst.means.dim();
  const int k = inst.means.classes();
  Dataset data = make_dataset(d, k, n);
  for (int i = 0; i < n; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    const int label = draw_categorical(inst.priors.pi, rng.next_uniform());
    data.labels(i) = label;
    data.Y(label, i) = 1.0;
    for (int j = 0; j < d; ++j)
      data.X(j, i) = inst.sigma * rng.next_gaussian();
    data.X.col(i) += inst.means.M.col(label);
  }
  return data;
}

Dataset sample_mlm(const MlmInstance& inst, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_mlm: n must be >= 1");
  const int d = inst.means.dim();
  const int k = inst.means.classes();
  Dataset data = make_dataset(d, k, n);
  VectorXd scores(k), probs(k);
  for (int i = 0; i < n; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    for (int j = 0; j < d; ++j) data.X(j, i) = rng.next_gaussian();
    scores.noalias() = inst.means.M.transpose() * data.X.col(i);
    const double m = scores.maxCoeff();
    probs = (scores.array() - m).exp();
    probs /= probs.sum();
    const int label = draw_categorical(probs, rng.next_uniform());
    data.labels(i) = label;
    data.Y(label, i) = 1.0;
  }
  return data;
}

MeanEnsemble make_orthogonal_ensemble(int k, int d, const VectorXd& norms,
                                      double pairwise_corr) {
  if (d < k) throw std::invalid_argument("make_orthogonal_ensemble: need d >= k");
  if (norms.size() != k)
    throw std::invalid_argument("make_orthogonal_ensemble: norms size != k");
  if (norms.minCoeff() <= 0.0)
    throw std::invalid_argument("make_orthogonal_ensemble: norms must be > 0");
  // Gram = diag(norms) (corr 11^T + (1-corr) I) diag(norms)
  MatrixXd gram(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      gram(i, j) = (i == j ? 1.0 : pairwise_corr) * norms(i) * norms(j);
  Eigen::LLT<MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument(
        "make_orthogonal_ensemble: correlation makes the Gram matrix non-PSD");
  MatrixXd M = MatrixXd::Zero(d, k);
  M.topRows(k) = llt.matrixL().transpose();  // M^T M = L L^T = Gram
  return MeanEnsemble(std::move(M));
}

MeanEnsemble make_orthogonal_ensemble(int k, int d, double norm,
                                      double pairwise_corr) {
  return make_orthogonal_ensemble(k, d, VectorXd::Constant(k, norm),
                                  pairwise_corr);
}

void write_dataset_csv(const Dataset& data, std::ostream& os) {
  const int d = data.dim();
  for (int j = 0; j < d; ++j) os << "x_" << (j + 1) << ",";
  os << "label\n";
  char buf[32];
  for (int i = 0; i < data.size(); ++i) {
    for (int j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.X(j, i));
      os << buf << ",";
    }
    os << data.labels(i) << "\n";
  }
}

}  // namespace mcl
