#include "mcl/classifiers.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace mcl {

namespace detail {

namespace {

// Apply the pseudo-inverse of a symmetric PSD matrix through its
// eigendecomposition, dropping eigenvalues below 1e-10 of the largest.
MatrixXd pinv_solve(const MatrixXd& S, const MatrixXd& rhs) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(S);
  const VectorXd& ev = eig.eigenvalues();
  const double cutoff = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
  VectorXd inv = VectorXd::Zero(ev.size());
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) > cutoff) inv(i) = 1.0 / ev(i);
  return eig.eigenvectors() * inv.asDiagonal() *
         (eig.eigenvectors().transpose() * rhs);
}

// Solve S x = rhs for symmetric PSD S. Nonsingular systems go through LDLT;
// singular ones fall back to the eigendecomposition pseudo-inverse when the
// dimension allows, or to LDLT with diagonal jitter 1e-12*trace otherwise
// (the ridge limit of the min-norm solution).
MatrixXd psd_solve(const MatrixXd& S, const MatrixXd& rhs) {
  constexpr int kExactPinvMaxDim = 1500;
  const double trace = S.trace();
  Eigen::LDLT<MatrixXd> ldlt(S);
  if (ldlt.info() == Eigen::Success &&
      ldlt.vectorD().minCoeff() > 1e-10 * std::max(trace, 1e-300))
    return ldlt.solve(rhs);
  if (S.rows() <= kExactPinvMaxDim) return pinv_solve(S, rhs);
  MatrixXd jittered = S;
  jittered.diagonal().array() += 1e-12 * trace;
  return jittered.ldlt().solve(rhs);
}

}  // namespace

void solve_affine_ls(const MatrixXd& X, const MatrixXd& T, const VectorXd& u,
                     MatrixXd& W, VectorXd& b) {
  const int d = static_cast<int>(X.rows());
  const int n = static_cast<int>(X.cols());
  const Eigen::ArrayXd u2 = u.array().square();
  const double sw2 = u2.sum();
  if (!(sw2 > 0.0))
    throw std::invalid_argument("solve_affine_ls: all sample weights zero");

  // Eliminating the unpenalized intercept centers features and targets at
  // their weighted means.
  const VectorXd xbar = (X * u2.matrix()) / sw2;
  const VectorXd tbar = (T * u2.matrix()) / sw2;
  MatrixXd A = (X.colwise() - xbar) * u.asDiagonal();   // d x n
  MatrixXd Tc = (T.colwise() - tbar) * u.asDiagonal();  // k x n

  if (d <= n) {
    MatrixXd N(d, d);
    N.setZero();
    N.selfadjointView<Eigen::Lower>().rankUpdate(A);
    N.triangularView<Eigen::Upper>() = N.transpose();
    const MatrixXd R = A * Tc.transpose();  // d x k
    W = psd_solve(N, R).transpose();
  } else {
    // Overparameterized route through the Gram matrix: w = A (A^T A)^+ t.
    MatrixXd G(n, n);
    G.setZero();
    G.selfadjointView<Eigen::Lower>().rankUpdate(A.transpose());
    G.triangularView<Eigen::Upper>() = G.transpose();
    const MatrixXd S = psd_solve(G, Tc.transpose());  // n x k
    W = (A * S).transpose();
  }
  b = tbar - W * xbar;
}

}  // namespace detail

LinearClassifier fit_avg(const Dataset& data) {
  const double n = data.size();
  LinearClassifier clf;
  clf.W = data.Y * data.X.transpose() / n;
  clf.b = data.Y.rowwise().sum() / n;
  clf.rule = Rule::Avg;
  return clf;
}

LinearClassifier fit_ls(const Dataset& data) {
  LinearClassifier clf = fit_wls(data, WeightSpec::ones(data.classes()));
  clf.rule = Rule::LS;
  return clf;
}

LinearClassifier fit_wls(const Dataset& data, const WeightSpec& w) {
  if (w.omega.size() != data.classes())
    throw std::invalid_argument("fit_wls: weight/class mismatch");
  const int n = data.size();
  VectorXd u(n);
  for (int i = 0; i < n; ++i) {
    const double wi = w.omega(data.labels(i));
    if (wi <= 0.0)
      throw std::invalid_argument(
          "fit_wls: zero weight on a class present in the data");
    u(i) = wi;
  }
  LinearClassifier clf;
  detail::solve_affine_ls(data.X, data.Y, u, clf.W, clf.b);
  clf.rule = Rule::WLS;
  return clf;
}

namespace {

// Loss and softmax-probability matrix at (W, b); overflow-safe.
double ce_loss(const Dataset& data, const MatrixXd& W, const VectorXd& b,
               MatrixXd& P) {
  const int n = data.size();
  P.noalias() = W * data.X;
  P.colwise() += b;
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double m = P.col(i).maxCoeff();
    const double lse = m + std::log((P.col(i).array() - m).exp().sum());
    loss += lse - P(data.labels(i), i);
    P.col(i) = (P.col(i).array() - lse).exp();
  }
  return loss / n;
}

}  // namespace

LinearClassifier fit_ce(const Dataset& data, int steps, double lr,
                        CeReport* report, double norm_cap) {
  if (steps < 1) throw std::invalid_argument("fit_ce: steps must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("fit_ce: lr must be > 0");
  const int k = data.classes();
  const int d = data.dim();
  const double n = data.size();

  MatrixXd W = MatrixXd::Zero(k, d);
  VectorXd b = VectorXd::Zero(k);
  MatrixXd P;
  double loss = ce_loss(data, W, b, P);
  if (!std::isfinite(loss))
    throw std::runtime_error("fit_ce: non-finite loss at initialization");

  CeReport rep;
  rep.final_lr = lr;
  int step = 0;
  for (; step < steps; ++step) {
    const MatrixXd gW = (P - data.Y) * data.X.transpose() / n;
    const VectorXd gb = (P - data.Y).rowwise().sum() / n;
    MatrixXd Wn = W - rep.final_lr * gW;
    VectorXd bn = b - rep.final_lr * gb;
    double new_loss = ce_loss(data, Wn, bn, P);
    while (new_loss > loss && rep.final_lr > 1e-12) {
      rep.final_lr *= 0.5;
      Wn = W - rep.final_lr * gW;
      bn = b - rep.final_lr * gb;
      new_loss = ce_loss(data, Wn, bn, P);
    }
    if (!std::isfinite(new_loss))
      throw std::runtime_error("fit_ce: non-finite loss during descent");
    W.swap(Wn);
    b.swap(bn);
    loss = new_loss;
    const double norm = std::sqrt(W.squaredNorm() + b.squaredNorm());
    if (norm > norm_cap) {
      rep.separable_capped = true;
      ++step;
      break;
    }
  }
  rep.steps_run = step;
  rep.final_loss = loss;
  if (report) *report = rep;

  LinearClassifier clf;
  clf.W = std::move(W);
  clf.b = std::move(b);
  clf.rule = Rule::CE;
  return clf;
}

int predict(const LinearClassifier& clf, const VectorXd& x) {
  const VectorXd scores = clf.W * x + clf.b;
  int best = 0;
  for (int j = 1; j < scores.size(); ++j)
    if (scores(j) > scores(best)) best = j;  // strict: ties keep lowest index
  return best;
}

VectorXi predict_batch(const LinearClassifier& clf, const MatrixXd& X) {
  const int n = static_cast<int>(X.cols());
  MatrixXd scores = clf.W * X;
  scores.colwise() += clf.b;
  VectorXi out(n);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < scores.rows(); ++j)
      if (scores(j, i) > scores(best, i)) best = j;
    out(i) = best;
  }
  return out;
}

CorrelationSummary summarize(const LinearClassifier& clf,
                             const MeanEnsemble& means) {
  if (clf.dim() != means.dim())
    throw std::invalid_argument("summarize: dimension mismatch");
  CorrelationSummary s;
  s.b = clf.b;
  s.Swm = clf.W * means.M;
  s.Sww = clf.W * clf.W.transpose();
  s.Sww = 0.5 * (s.Sww + s.Sww.transpose().eval());
  s.Smm = means.M.transpose() * means.M;
  return s;
}

EmpiricalError empirical_error(const LinearClassifier& clf,
                               const Dataset& test) {
  if (test.size() < 1) throw std::invalid_argument("empirical_error: empty test set");
  const int k = test.classes();
  const VectorXi pred = predict_batch(clf, test.X);
  VectorXd wrong = VectorXd::Zero(k), count = VectorXd::Zero(k);
  for (int i = 0; i < test.size(); ++i) {
    count(test.labels(i)) += 1.0;
    if (pred(i) != test.labels(i)) wrong(test.labels(i)) += 1.0;
  }
  EmpiricalError e;
  e.total = wrong.sum() / test.size();
  e.freq = count / test.size();
  e.classwise.resize(k);
  for (int c = 0; c < k; ++c)
    e.classwise(c) = count(c) > 0.0
                         ? wrong(c) / count(c)
                         : std::numeric_limits<double>::quiet_NaN();
  return e;
}

void write_classifier_csv(const LinearClassifier& clf, std::ostream& os) {
  char buf[32];
  for (int c = 0; c < clf.classes(); ++c) {
    for (int j = 0; j < clf.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", clf.W(c, j));
      os << buf << ",";
    }
    std::snprintf(buf, sizeof(buf), "%.17g", clf.b(c));
    os << buf << "\n";
  }
}

LinearClassifier read_classifier_csv(std::istream& is, Rule rule) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("read_classifier_csv: no rows");
  const int k = static_cast<int>(rows.size());
  const int d = static_cast<int>(rows[0].size()) - 1;
  LinearClassifier clf;
  clf.W.resize(k, d);
  clf.b.resize(k);
  clf.rule = rule;
  for (int c = 0; c < k; ++c) {
    if (static_cast<int>(rows[c].size()) != d + 1)
      throw std::runtime_error("read_classifier_csv: ragged rows");
    for (int j = 0; j < d; ++j) clf.W(c, j) = rows[c][j];
    clf.b(c) = rows[c][d];
  }
  return clf;
}

}  // namespace mcl
