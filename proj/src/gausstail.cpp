#include "mcl/gausstail.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <vector>

#include "mcl/mathutil.hpp"
#include "mcl/rng.hpp"

namespace mcl {

namespace detail {

MatrixXd psd_sqrt(const MatrixXd& A, double* clamped_fraction) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(A);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("psd_sqrt: eigendecomposition failed");
  VectorXd ev = eig.eigenvalues();
  double clamped = 0.0;
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) < 0.0) {
      clamped += -ev(i);
      ev(i) = 0.0;
    }
  if (clamped_fraction) {
    const double tr = std::max(A.trace(), 1e-300);
    *clamped_fraction = clamped / tr;
  }
  return eig.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

void gmm_tail_inputs(const CorrelationSummary& summary, double sigma, int c,
                     MatrixXd& Sc, VectorXd& tc) {
  const int k = summary.classes();
  if (c < 0 || c >= k)
    throw std::invalid_argument("classwise_error_gmm: class out of range");
  if (k < 2)
    throw std::invalid_argument("classwise_error_gmm: needs k >= 2");
  Sc.resize(k - 1, k - 1);
  tc.resize(k - 1);
  // [t_c]_j = <w_j - w_c, mu_c> + b_j - b_c
  // [S_c]_ij = <w_c - w_j, w_c - w_i>, both in terms of Swm / Sww entries.
  int jj = 0;
  for (int j = 0; j < k; ++j) {
    if (j == c) continue;
    tc(jj) = summary.Swm(j, c) - summary.Swm(c, c) + summary.b(j) -
             summary.b(c);
    int ii = 0;
    for (int i = 0; i < k; ++i) {
      if (i == c) continue;
      Sc(ii, jj) = summary.Sww(c, c) - summary.Sww(c, i) - summary.Sww(j, c) +
                   summary.Sww(j, i);
      ++ii;
    }
    ++jj;
  }
  Sc *= sigma * sigma;
  Sc = 0.5 * (Sc + Sc.transpose().eval());
}

namespace {

constexpr int kJackknifeBlocks = 10;

double jackknife_se_counts(const std::vector<double>& blk,
                           const std::vector<std::size_t>& sizes, double total,
                           std::size_t n) {
  const int B = static_cast<int>(blk.size());
  std::vector<double> loo(B);
  double mean = 0.0;
  for (int b = 0; b < B; ++b) {
    loo[b] = (total - blk[b]) / static_cast<double>(n - sizes[b]);
    mean += loo[b];
  }
  mean /= B;
  double ss = 0.0;
  for (int b = 0; b < B; ++b) ss += (loo[b] - mean) * (loo[b] - mean);
  return std::sqrt((B - 1.0) / B * ss);
}

// Detects A = s (I + 11^T), t = tau 1 within relative tolerance 1e-9 and
// reports (s, tau).
bool is_rank_one_symmetric(const MatrixXd& A, const VectorXd& t, double* s,
                           double* tau) {
  const int m = static_cast<int>(A.rows());
  if (m == 0) return false;
  const double off = (m > 1) ? A(0, 1) : 0.5 * A(0, 0);
  const double scale = std::max(std::fabs(A(0, 0)), 1e-300);
  if (off <= 0.0) return false;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const double want = (i == j) ? 2.0 * off : off;
      if (std::fabs(A(i, j) - want) > 1e-9 * scale) return false;
    }
  const double t0 = t(0);
  const double tscale = std::max(std::fabs(t0), 1e-300);
  for (int i = 1; i < m; ++i)
    if (std::fabs(t(i) - t0) > 1e-9 * tscale) return false;
  *s = off;
  *tau = t0;
  return true;
}

}  // namespace

}  // namespace detail

ProbEstimate tail_prob_mc(const TailProblem& p, std::size_t n_samples,
                          std::uint64_t seed) {
  if (n_samples < 1000)
    throw std::invalid_argument("tail_prob_mc: need n_samples >= 1e3");
  const int m = p.dim();
  double clamped = 0.0;
  const MatrixXd root = detail::psd_sqrt(p.A, &clamped);
  double total = 0.0;
  std::vector<double> blk(detail::kJackknifeBlocks, 0.0);
  std::vector<std::size_t> blk_n(detail::kJackknifeBlocks, 0);
  VectorXd z(m);
  for (std::size_t i = 0; i < n_samples; ++i) {
    CounterRng rng(seed, i);
    for (int j = 0; j < m; ++j) z(j) = rng.next_gaussian();
    const VectorXd y = root * z;
    bool all = true;
    for (int j = 0; j < m; ++j)
      if (y(j) < p.t(j)) {
        all = false;
        break;
      }
    const int b = static_cast<int>(i * detail::kJackknifeBlocks / n_samples);
    if (all) {
      total += 1.0;
      blk[b] += 1.0;
    }
    ++blk_n[b];
  }
  ProbEstimate est;
  est.value = total / static_cast<double>(n_samples);
  est.std_err = detail::jackknife_se_counts(blk, blk_n, total, n_samples);
  est.method = EstimateMethod::MC;
  if (clamped > 1e-4) est.warning = "psd clamping above 1e-4 of trace";
  return est;
}

ProbEstimate rank_one_tail(int k, double t) {
  if (k < 1) throw std::invalid_argument("rank_one_tail: need k >= 1");
  // Condition on G_0: P{G_0 + max G_i >= t} = 1 - E[Phi(t - G_0)^k].
  const double inside = gaussian_expectation(
      [k, t](double g0) { return std::pow(phi_cdf(t - g0), k); }, 1e-13);
  ProbEstimate est;
  est.value = std::min(std::max(1.0 - inside, 0.0), 1.0);
  est.std_err = 0.0;
  est.method = EstimateMethod::ClosedForm;
  return est;
}

ProbEstimate classwise_error_gmm(const CorrelationSummary& summary,
                                 const MeanEnsemble& means, double sigma,
                                 int c, std::size_t n_samples,
                                 std::uint64_t seed) {
  if (means.classes() != summary.classes())
    throw std::invalid_argument("classwise_error_gmm: means/summary mismatch");
  MatrixXd Sc;
  VectorXd tc;
  detail::gmm_tail_inputs(summary, sigma, c, Sc, tc);
  double s = 0.0, tau = 0.0;
  if (detail::is_rank_one_symmetric(Sc, tc, &s, &tau)) {
    // Covariance s (I + 11^T): by the G_0 decomposition and symmetry,
    // P{S^{1/2} z >= tau 1} = E[Phi(-tau/sqrt(s) - G_0)^{k-1}].
    ProbEstimate est = rank_one_tail(static_cast<int>(tc.size()),
                                     -tau / std::sqrt(s));
    return est;
  }
  ProbEstimate inner = tail_prob_mc(TailProblem(Sc, tc), n_samples, seed);
  inner.value = std::min(std::max(1.0 - inner.value, 0.0), 1.0);
  return inner;
}

ProbEstimate total_error_gmm(const CorrelationSummary& summary,
                             const MeanEnsemble& means, double sigma,
                             const PriorSpec& priors, std::size_t n_samples,
                             std::uint64_t seed) {
  const int k = summary.classes();
  if (priors.classes() != k)
    throw std::invalid_argument("total_error_gmm: priors/summary mismatch");
  ProbEstimate est;
  est.method = EstimateMethod::MC;
  double var = 0.0;
  bool closed = true;
  for (int c = 0; c < k; ++c) {
    const ProbEstimate pc = classwise_error_gmm(summary, means, sigma, c,
                                                n_samples,
                                                derive_seed(seed, c));
    est.value += priors.pi(c) * pc.value;
    var += priors.pi(c) * priors.pi(c) * pc.std_err * pc.std_err;
    closed = closed && pc.method == EstimateMethod::ClosedForm;
    if (!pc.warning.empty()) est.warning = pc.warning;
  }
  est.std_err = std::sqrt(var);
  if (closed) est.method = EstimateMethod::ClosedForm;
  return est;
}

ProbEstimate total_error_mlm(const CorrelationSummary& summary,
                             std::size_t n_samples, std::uint64_t seed) {
  const int k = summary.classes();
  MatrixXd joint(2 * k, 2 * k);
  joint.topLeftCorner(k, k) = summary.Sww;
  joint.topRightCorner(k, k) = summary.Swm;
  joint.bottomLeftCorner(k, k) = summary.Swm.transpose();
  joint.bottomRightCorner(k, k) = summary.Smm;
  joint = 0.5 * (joint + joint.transpose().eval());
  double clamped = 0.0;
  const MatrixXd root = detail::psd_sqrt(joint, &clamped);

  double total = 0.0;
  std::vector<double> blk(detail::kJackknifeBlocks, 0.0);
  std::vector<std::size_t> blk_n(detail::kJackknifeBlocks, 0);
  VectorXd z(2 * k), gh(2 * k), probs(k);
  for (std::size_t i = 0; i < n_samples; ++i) {
    CounterRng rng(seed, i);
    for (int j = 0; j < 2 * k; ++j) z(j) = rng.next_gaussian();
    gh.noalias() = root * z;
    // label from softmax(h)
    const auto h = gh.tail(k);
    const double m = h.maxCoeff();
    probs = (h.array() - m).exp();
    probs /= probs.sum();
    const double u = rng.next_uniform();
    int label = k - 1;
    double acc = 0.0;
    for (int c = 0; c < k; ++c) {
      acc += probs(c);
      if (u < acc) {
        label = c;
        break;
      }
    }
    // argmax(g + b)
    int best = 0;
    double bs = gh(0) + summary.b(0);
    for (int c = 1; c < k; ++c) {
      const double v = gh(c) + summary.b(c);
      if (v > bs) {
        bs = v;
        best = c;
      }
    }
    const int b = static_cast<int>(i * detail::kJackknifeBlocks / n_samples);
    if (best != label) {
      total += 1.0;
      blk[b] += 1.0;
    }
    ++blk_n[b];
  }
  ProbEstimate est;
  est.value = total / static_cast<double>(n_samples);
  est.std_err = detail::jackknife_se_counts(blk, blk_n, total, n_samples);
  est.method = EstimateMethod::MC;
  if (clamped > 1e-4)
    est.warning = "joint covariance clamping above 1e-4 of trace";
  return est;
}

ProbEstimate classwise_error_mlm(const CorrelationSummary& summary, int c,
                                 std::size_t n_outer, std::size_t n_inner,
                                 std::uint64_t seed) {
  const int k = summary.classes();
  if (c < 0 || c >= k)
    throw std::invalid_argument("classwise_error_mlm: class out of range");
  if (k < 2) throw std::invalid_argument("classwise_error_mlm: needs k >= 2");
  if (n_outer < 1000 || n_inner < 10)
    throw std::invalid_argument("classwise_error_mlm: sample counts too small");

  // Schur complement K = Sww - Swm Smm^+ Swm^T governs the conditional
  // fluctuations of the scores given h.
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(summary.Smm);
  VectorXd inv = VectorXd::Zero(k);
  const double cutoff =
      1e-10 * std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), 0.0);
  for (int i = 0; i < k; ++i)
    if (eig.eigenvalues()(i) > cutoff) inv(i) = 1.0 / eig.eigenvalues()(i);
  const MatrixXd SmmPinv =
      eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  const MatrixXd Reg = summary.Swm * SmmPinv;  // k x k regression matrix
  MatrixXd K = summary.Sww - Reg * summary.Swm.transpose();
  K = 0.5 * (K + K.transpose().eval());

  MatrixXd Sc(k - 1, k - 1);
  int jj = 0;
  std::vector<int> others;
  for (int j = 0; j < k; ++j)
    if (j != c) others.push_back(j);
  for (int j : others) {
    int ii = 0;
    for (int i : others) {
      Sc(ii, jj) = K(c, c) - K(c, i) - K(j, c) + K(j, i);
      ++ii;
    }
    ++jj;
  }
  Sc = 0.5 * (Sc + Sc.transpose().eval());
  double clamped_inner = 0.0, clamped_outer = 0.0;
  const MatrixXd Sc_root = detail::psd_sqrt(Sc, &clamped_inner);
  const MatrixXd Smm_root = detail::psd_sqrt(summary.Smm, &clamped_outer);

  double wsum = 0.0, esum = 0.0;
  std::vector<double> blk_w(detail::kJackknifeBlocks, 0.0);
  std::vector<double> blk_e(detail::kJackknifeBlocks, 0.0);
  VectorXd zh(k), h(k), tch(k - 1), z(k - 1);
  for (std::size_t i = 0; i < n_outer; ++i) {
    CounterRng rng(seed, i);
    for (int j = 0; j < k; ++j) zh(j) = rng.next_gaussian();
    h.noalias() = Smm_root * zh;
    const double m = h.maxCoeff();
    const double weight =
        std::exp(h(c) - m) / (h.array() - m).exp().sum();
    // t_c(h)_j = b_j - b_c + [Reg h]_j - [Reg h]_c
    const VectorXd rh = Reg * h;
    for (std::size_t jx = 0; jx < others.size(); ++jx) {
      const int j = others[jx];
      tch(static_cast<int>(jx)) =
          summary.b(j) - summary.b(c) + rh(j) - rh(c);
    }
    std::size_t hits = 0;
    for (std::size_t s = 0; s < n_inner; ++s) {
      for (int j = 0; j < k - 1; ++j) z(j) = rng.next_gaussian();
      const VectorXd y = Sc_root * z;
      bool all = true;
      for (int j = 0; j < k - 1; ++j)
        if (y(j) < tch(j)) {
          all = false;
          break;
        }
      if (all) ++hits;
    }
    const double p_in = static_cast<double>(hits) / n_inner;
    const int b = static_cast<int>(i * detail::kJackknifeBlocks / n_outer);
    wsum += weight;
    esum += weight * (1.0 - p_in);
    blk_w[b] += weight;
    blk_e[b] += weight * (1.0 - p_in);
  }
  ProbEstimate est;
  est.value = esum / wsum;
  // Jackknife of the self-normalized ratio.
  const int B = detail::kJackknifeBlocks;
  std::vector<double> loo(B);
  double mean = 0.0;
  for (int b = 0; b < B; ++b) {
    loo[b] = (esum - blk_e[b]) / (wsum - blk_w[b]);
    mean += loo[b];
  }
  mean /= B;
  double ss = 0.0;
  for (int b = 0; b < B; ++b) ss += (loo[b] - mean) * (loo[b] - mean);
  est.std_err = std::sqrt((B - 1.0) / B * ss);
  est.method = EstimateMethod::MC;
  if (clamped_inner > 1e-4 || clamped_outer > 1e-4)
    est.warning = "psd clamping above 1e-4 of trace";
  return est;
}

ProbEstimate classwise_error_mlm(const CorrelationSummary& summary, int c,
                                 std::uint64_t seed) {
  return classwise_error_mlm(summary, c, 200000, 1000, seed);
}

double union_bound_gmm(const CorrelationSummary& summary,
                       const MeanEnsemble& means, double sigma, int c) {
  if (means.classes() != summary.classes())
    throw std::invalid_argument("union_bound_gmm: means/summary mismatch");
  MatrixXd Sc;
  VectorXd tc;
  detail::gmm_tail_inputs(summary, sigma, c, Sc, tc);
  double sum = 0.0;
  for (int j = 0; j < tc.size(); ++j) {
    const double sd = std::sqrt(std::max(Sc(j, j), 0.0));
    if (sd <= 0.0) {
      if (tc(j) >= 0.0) sum += 1.0;  // deterministic loss against class j
      continue;
    }
    sum += q_func(-tc(j) / sd);
  }
  return std::min(sum, 1.0);
}

double union_bound_diag_only(const CorrelationSummary& summary,
                             const MeanEnsemble& means, double sigma, int c) {
  if (means.classes() != summary.classes())
    throw std::invalid_argument("union_bound_diag_only: means/summary mismatch");
  const int k = summary.classes();
  MatrixXd Sc;
  VectorXd tc;
  detail::gmm_tail_inputs(summary, sigma, c, Sc, tc);
  if (tc.maxCoeff() >= 0.0) return 1.0;  // bound is vacuous unless t_c < 0
  double sum = 0.0;
  int jj = 0;
  const double wc = std::sqrt(std::max(summary.Sww(c, c), 0.0));
  for (int j = 0; j < k; ++j) {
    if (j == c) continue;
    const double wj = std::sqrt(std::max(summary.Sww(j, j), 0.0));
    const double denom = sigma * (wc + wj);
    if (denom <= 0.0)
      sum += (tc(jj) >= 0.0) ? 1.0 : 0.0;
    else
      sum += q_func(-tc(jj) / denom);
    ++jj;
  }
  return std::min(sum, 1.0);
}

std::optional<double> slepian_bound(const TailProblem& p) {
  const int m = p.dim();
  const double a = p.A.minCoeff();
  if (a < 0.0) return std::nullopt;
  // Comparison covariance (diag(A) - a I) + a 11^T dominates A entry-wise
  // with equal diagonal, so its union probability upper bounds the exact
  // one. Decompose z_j = sqrt(a) G_0 + sqrt(A_jj - a) G_j and integrate
  // over G_0. Zero-variance coordinates (A_jj = a) contribute indicators
  // 1{sqrt(a) G_0 <= t_j}, folded into the upper integration limit so the
  // integrand stays smooth.
  VectorXd sd(m);
  for (int j = 0; j < m; ++j) sd(j) = std::sqrt(std::max(p.A(j, j) - a, 0.0));
  const double sqrt_a = std::sqrt(a);
  double hi = 9.0;
  for (int j = 0; j < m; ++j) {
    if (sd(j) > 0.0) continue;
    if (sqrt_a > 0.0)
      hi = std::min(hi, p.t(j) / sqrt_a);
    else if (p.t(j) < 0.0)
      return 1.0;  // a fully degenerate coordinate always exceeds t_j
  }
  double inside = 0.0;
  if (hi > -9.0)
    inside = integrate(
        [&](double g0) {
          double prod = phi_pdf(g0);
          for (int j = 0; j < m; ++j)
            if (sd(j) > 0.0) prod *= phi_cdf((p.t(j) - sqrt_a * g0) / sd(j));
          return prod;
        },
        -9.0, hi, 1e-13);
  return std::min(std::max(1.0 - inside, 0.0), 1.0);
}

SatheBounds sathe_bounds(double rho, const VectorXd& x) {
  if (!(rho >= 0.0 && rho < 1.0))
    throw std::invalid_argument("sathe_bounds: need 0 <= rho < 1");
  const int n = static_cast<int>(x.size());
  const double b = 1.0 - rho;
  const double c = 1.0 + (n - 1) * rho;
  const double xbar = x.mean();
  const double s2 = (x.array() - xbar).square().sum();
  SatheBounds out;
  double lower = std::sqrt(b / c) *
                 std::exp(-n * rho * xbar * xbar / (2.0 * c * c));
  double upper = std::pow(c / b, (n - 1) / 2.0) *
                 std::exp(n * rho * s2 / (2.0 * b * b));
  for (int i = 0; i < n; ++i) {
    lower *= q_func(x(i) / std::sqrt(b) - n * xbar * rho / (c * std::sqrt(b)));
    upper *= q_func(x(i) * std::sqrt(c) / b - n * xbar * rho / (b * std::sqrt(c)));
  }
  out.lower = std::min(std::max(lower, 0.0), 1.0);
  out.upper = std::min(std::max(upper, 0.0), 1.0);
  return out;
}

double genie_lower_bound(const MeanEnsemble& means, const PriorSpec& priors,
                         double sigma) {
  const int k = means.classes();
  if (!(sigma > 0.0))
    throw std::invalid_argument("genie_lower_bound: sigma must be > 0");
  double sum = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      const double pi = priors.pi(i), pj = priors.pi(j);
      if (pi + pj <= 0.0) continue;
      const double dist =
          (means.M.col(i) - means.M.col(j)).norm() / sigma;
      double pair;
      if (dist < 1e-12) {
        // Coincident means: the binary Bayes error degenerates to the
        // smaller prior.
        pair = std::min(pi, pj);
      } else {
        const double shift = std::log(pi / pj) / dist;
        pair = pi * q_func(0.5 * dist + shift) + pj * q_func(0.5 * dist - shift);
      }
      sum += pi / (pi + pj) * pair;
    }
  return std::min(2.0 / k * sum, 1.0);
}

}  // namespace mcl
