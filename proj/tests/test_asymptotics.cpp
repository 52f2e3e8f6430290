#include <Eigen/Eigenvalues>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mcl/asymptotics.hpp"
#include "mcl/classifiers.hpp"
#include "mcl/gausstail.hpp"
#include "mcl/mathutil.hpp"
#include "mcl/model.hpp"
#include "mcl/moments.hpp"
#include "mcl/rng.hpp"
#include "oracles.hpp"

using namespace mcl;

namespace {

MeanEnsemble random_ensemble(int k, int d, std::uint64_t seed,
                             double scale = 1.0) {
  CounterRng rng(seed, 0);
  MatrixXd M(d, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < d; ++i) M(i, j) = scale * rng.next_gaussian();
  return MeanEnsemble(std::move(M));
}

double max_summary_gap(const CorrelationSummary& a,
                       const CorrelationSummary& b) {
  return std::max({(a.b - b.b).cwiseAbs().maxCoeff(),
                   (a.Swm - b.Swm).cwiseAbs().maxCoeff(),
                   (a.Sww - b.Sww).cwiseAbs().maxCoeff()});
}

CorrelationSummary mean_empirical_summary(const GmmInstance& inst, int n,
                                          int trials, Rule rule,
                                          const WeightSpec* w,
                                          std::uint64_t seed) {
  CorrelationSummary acc;
  const int k = inst.means.classes();
  acc.b = VectorXd::Zero(k);
  acc.Swm = MatrixXd::Zero(k, k);
  acc.Sww = MatrixXd::Zero(k, k);
  acc.Smm = inst.means.grammian();
  for (int t = 0; t < trials; ++t) {
    const Dataset data = sample_gmm(inst, n, derive_seed(seed, t));
    LinearClassifier clf;
    if (rule == Rule::Avg)
      clf = fit_avg(data);
    else if (rule == Rule::WLS)
      clf = fit_wls(data, *w);
    else
      clf = fit_ls(data);
    const CorrelationSummary s = summarize(clf, inst.means);
    acc.b += s.b;
    acc.Swm += s.Swm;
    acc.Sww += s.Sww;
  }
  acc.b /= trials;
  acc.Swm /= trials;
  acc.Sww /= trials;
  return acc;
}

}  // namespace

// ---------------------------------------------------------------- solve_eta

TEST_CASE("solve_eta: unit weights give the closed form 1/gamma - 1") {
  const WlsFixedPoint fp =
      solve_eta(PriorSpec::uniform(4), WeightSpec::ones(4), 0.25);
  REQUIRE(fp.eta == Catch::Approx(3.0).margin(1e-9));
  REQUIRE((fp.pi_tilde - VectorXd::Constant(4, 0.25)).cwiseAbs().maxCoeff() <
          1e-12);
  REQUIRE(fp.zeta == Catch::Approx(1.0 / (1.0 - 0.25)).margin(1e-9));
}

TEST_CASE("solve_eta: single class with omega=2, gamma=0.5 gives eta=4") {
  VectorXd pi(1), w(1);
  pi << 1.0;
  w << 2.0;
  const WlsFixedPoint fp = solve_eta(PriorSpec(pi), WeightSpec(w), 0.5);
  REQUIRE(fp.eta == Catch::Approx(4.0).margin(1e-9));
}

TEST_CASE("solve_eta: uniform weights leave any priors unchanged") {
  VectorXd pi(3);
  pi << 0.6, 0.3, 0.1;
  for (double g : {0.1, 0.45, 0.8}) {
    const WlsFixedPoint fp = solve_eta(PriorSpec(pi), WeightSpec::ones(3), g);
    REQUIRE((fp.pi_tilde - pi).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(std::fabs(fp.pi_tilde.sum() - 1.0) < 1e-10);
  }
}

TEST_CASE("solve_eta: gamma outside the range of F is rejected") {
  VectorXd pi(2), w(2);
  pi << 0.7, 0.3;
  w << 1.0, 0.0;  // zero-weight class: F range is (0, 0.7)
  REQUIRE_THROWS_AS(solve_eta(PriorSpec(pi), WeightSpec(w), 0.8),
                    std::invalid_argument);
  REQUIRE_NOTHROW(solve_eta(PriorSpec(pi), WeightSpec(w), 0.5));
}

// ------------------------------------------------------------ GMM averaging

TEST_CASE("predict_avg_gmm: zero means collapse to pure noise") {
  GmmInstance inst(MeanEnsemble(MatrixXd::Zero(10, 3)), PriorSpec::uniform(3),
                   1.3);
  const CorrelationSummary s = predict_avg_gmm(inst, AspectRatio(0.4));
  REQUIRE(s.Swm.cwiseAbs().maxCoeff() == 0.0);
  const MatrixXd want =
      0.4 * 1.3 * 1.3 * MatrixXd(VectorXd::Constant(3, 1.0 / 3).asDiagonal());
  REQUIRE((s.Sww - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("predict_avg_gmm: two-class antipodal error equals the Q formula") {
  // mu_1 = -mu_2, ||mu|| = 1, balanced, gamma = 0.5, sigma = 1:
  // P_{e|1} -> Q(mu^2 / sqrt(mu^2 + gamma sigma^2)) = Q(1/sqrt(1.5))
  MatrixXd M = MatrixXd::Zero(8, 2);
  M(0, 0) = 1.0;
  M(0, 1) = -1.0;
  GmmInstance inst(MeanEnsemble(M), PriorSpec::uniform(2), 1.0);
  const CorrelationSummary s = predict_avg_gmm(inst, AspectRatio(0.5));
  const ProbEstimate err = classwise_error_gmm(s, inst.means, 1.0, 0, 200000, 5);
  const double want = q_func(1.0 / std::sqrt(1.5));
  // frozen reference: Q(1/sqrt(1.5)) = 0.20710808912126256 (mpmath, 30 digits)
  REQUIRE(want == Catch::Approx(0.20710808912126256).margin(1e-12));
  REQUIRE(std::fabs(err.value - want) <=
          std::max(3.0 * err.std_err, 1e-9));
}

TEST_CASE("predict_avg_gmm matches empirical averaging at scale") {
  // Summary fluctuations scale with ||mu||^2 sqrt(pi/n), so unit-norm means
  // keep the 0.01 tolerance meaningful at this n.
  const int k = 3, d = 1000, n = 100000;
  GmmInstance inst(make_orthogonal_ensemble(k, d, 1.0), PriorSpec::uniform(k),
                   1.0);
  const CorrelationSummary theory =
      predict_avg_gmm(inst, AspectRatio(double(d) / n));
  const CorrelationSummary emp =
      mean_empirical_summary(inst, n, 2, Rule::Avg, nullptr, 301);
  REQUIRE(max_summary_gap(emp, theory) < 0.01);
}

// ------------------------------------------------------------------- GMM LS

TEST_CASE("predict_ls_gmm: rank-zero means collapse") {
  GmmInstance inst(MeanEnsemble(MatrixXd::Zero(6, 3)), PriorSpec::uniform(3),
                   1.0);
  const double gamma = 0.3;
  const CorrelationSummary s = predict_ls_gmm(inst, AspectRatio(gamma));
  const VectorXd pi = inst.priors.pi;
  const MatrixXd P = MatrixXd(pi.asDiagonal()) - pi * pi.transpose();
  REQUIRE((s.b - pi).cwiseAbs().maxCoeff() < 1e-14);
  REQUIRE(s.Swm.cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((s.Sww - gamma / (1.0 - gamma) * P).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("predict_ls_gmm rejects gamma >= 1") {
  GmmInstance inst(make_orthogonal_ensemble(2, 5, 1.0), PriorSpec::uniform(2),
                   1.0);
  REQUIRE_THROWS_AS(predict_ls_gmm(inst, AspectRatio(1.2)),
                    std::invalid_argument);
}

TEST_CASE("predict_ls_gmm: per-row proof form matricizes to the theorem") {
  VectorXd pi(3);
  pi << 0.5, 0.3, 0.2;
  const MeanEnsemble means = random_ensemble(3, 7, 401, 1.4);
  GmmInstance inst(means, PriorSpec(pi), 0.9);
  const double gamma = 0.35, s2 = 0.81;
  const CorrelationSummary s = predict_ls_gmm(inst, AspectRatio(gamma));
  const MatrixXd G = means.sigma_vt();
  const int r = means.rank();
  const MatrixXd P = MatrixXd(pi.asDiagonal()) - pi * pi.transpose();
  const MatrixXd Delta =
      s2 * MatrixXd::Identity(r, r) + G * P * G.transpose();
  const MatrixXd GtDG = G.transpose() * Delta.ldlt().solve(G);
  for (int l = 0; l < 3; ++l) {
    // M^T w_l -> pi_l V S Delta^-1 S V^T (e_l - pi); row l of Swm transposed
    const VectorXd row = pi(l) * GtDG * (VectorXd::Unit(3, l) - pi);
    REQUIRE((s.Swm.row(l).transpose() - row).cwiseAbs().maxCoeff() < 1e-12);
    const double bl = pi(l) * (1.0 - (VectorXd::Unit(3, l) - pi).dot(GtDG * pi));
    REQUIRE(s.b(l) == Catch::Approx(bl).margin(1e-12));
  }
}

TEST_CASE("predict_ls_gmm: symmetric geometry reduces to the rank-one tail") {
  const int k = 4;
  const double mu2 = 15.0, gamma = 0.3;
  GmmInstance inst(make_orthogonal_ensemble(k, 12, std::sqrt(mu2)),
                   PriorSpec::uniform(k), 1.0);
  const CorrelationSummary s = predict_ls_gmm(inst, AspectRatio(gamma));
  const ProbEstimate err = classwise_error_gmm(s, inst.means, 1.0, 0, 1000, 7);
  REQUIRE(err.method == EstimateMethod::ClosedForm);  // dispatched
  const UValues u = u_values(std::sqrt(mu2), 1.0, k, gamma);
  const ProbEstimate want = rank_one_tail(k - 1, u.u_ls);
  REQUIRE(err.value == Catch::Approx(want.value).margin(1e-9));
}

TEST_CASE("predict_ls_gmm matches empirical LS at desk scale") {
  const int k = 3, d = 1000, n = 5000;
  GmmInstance inst(make_orthogonal_ensemble(k, d, std::sqrt(15.0)),
                   PriorSpec::uniform(k), 1.0);
  const CorrelationSummary theory =
      predict_ls_gmm(inst, AspectRatio(double(d) / n));
  const CorrelationSummary emp =
      mean_empirical_summary(inst, n, 4, Rule::LS, nullptr, 501);
  REQUIRE(max_summary_gap(emp, theory) < 0.05);
}

// --------------------------------------------------------- GMM min-norm LS

TEST_CASE("predict_minnorm_ls_gmm: gamma -> infinity recovers Avg-like b") {
  GmmInstance inst(make_orthogonal_ensemble(3, 9, 2.0), PriorSpec::uniform(3),
                   1.0);
  const MinNormLsPrediction pred =
      predict_minnorm_ls_gmm(inst, AspectRatio(1e6));
  REQUIRE((pred.b - inst.priors.pi).cwiseAbs().maxCoeff() < 1e-4);
  REQUIRE(pred.Swm.cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("predict_minnorm_ls_gmm: rank-zero norms collapse") {
  VectorXd pi(2);
  pi << 0.7, 0.3;
  GmmInstance inst(MeanEnsemble(MatrixXd::Zero(8, 2)), PriorSpec(pi), 1.0);
  const double gamma = 2.5;
  const MinNormLsPrediction pred =
      predict_minnorm_ls_gmm(inst, AspectRatio(gamma));
  for (int l = 0; l < 2; ++l)
    REQUIRE(pred.norms_sq(l) ==
            Catch::Approx(pi(l) * (1.0 - pi(l)) / (gamma - 1.0)).margin(1e-12));
}

TEST_CASE("predict_minnorm_ls_gmm rejects gamma <= 1") {
  GmmInstance inst(make_orthogonal_ensemble(2, 5, 1.0), PriorSpec::uniform(2),
                   1.0);
  REQUIRE_THROWS_AS(predict_minnorm_ls_gmm(inst, AspectRatio(0.9)),
                    std::invalid_argument);
}

TEST_CASE("predict_minnorm_ls_gmm matches empirical min-norm LS") {
  const int k = 2, d = 400, n = 200;  // gamma = 2
  GmmInstance inst(make_orthogonal_ensemble(k, d, std::sqrt(15.0)),
                   PriorSpec::uniform(k), 1.0);
  const MinNormLsPrediction pred =
      predict_minnorm_ls_gmm(inst, AspectRatio(double(d) / n));
  VectorXd mean_b = VectorXd::Zero(k), mean_norm = VectorXd::Zero(k);
  const int trials = 10;
  for (int t = 0; t < trials; ++t) {
    const Dataset data = sample_gmm(inst, n, derive_seed(601, t));
    const LinearClassifier clf = fit_ls(data);
    mean_b += clf.b;
    for (int l = 0; l < k; ++l) mean_norm(l) += clf.W.row(l).norm();
  }
  mean_b /= trials;
  mean_norm /= trials;
  REQUIRE((mean_b - pred.b).cwiseAbs().maxCoeff() < 0.05);
  REQUIRE((mean_norm - pred.norms).cwiseAbs().maxCoeff() < 0.05);
}

// ----------------------------------------------------------------- GMM WLS

TEST_CASE("predict_wls_gmm: b and Swm equal LS under the effective priors") {
  VectorXd pi(3), w(3);
  pi << 0.6, 0.3, 0.1;
  w << 1.0 / std::sqrt(0.6), 1.0 / std::sqrt(0.3), 1.0 / std::sqrt(0.1);
  const MeanEnsemble means = random_ensemble(3, 8, 701, 1.2);
  GmmInstance inst(means, PriorSpec(pi), 1.0);
  const double gamma = 0.25;
  const WlsFixedPoint fp = solve_eta(inst.priors, WeightSpec(w), gamma);
  const CorrelationSummary wls =
      predict_wls_gmm(inst, AspectRatio(gamma), WeightSpec(w));
  GmmInstance tilted(means, PriorSpec(fp.pi_tilde), 1.0);
  const CorrelationSummary ls = predict_ls_gmm(tilted, AspectRatio(gamma));
  REQUIRE((wls.b - ls.b).cwiseAbs().maxCoeff() < 1e-10);
  REQUIRE((wls.Swm - ls.Swm).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("predict_wls_gmm: omega=1 reduces exactly to LS") {
  VectorXd pi(3);
  pi << 0.5, 0.3, 0.2;
  const MeanEnsemble means = random_ensemble(3, 9, 707, 1.5);
  GmmInstance inst(means, PriorSpec(pi), 1.2);
  for (double gamma : {0.15, 0.4, 0.7}) {
    const CorrelationSummary ls = predict_ls_gmm(inst, AspectRatio(gamma));
    const CorrelationSummary wls =
        predict_wls_gmm(inst, AspectRatio(gamma), WeightSpec::ones(3));
    REQUIRE(max_summary_gap(wls, ls) < 1e-8);
  }
}

TEST_CASE("predict_wls_gmm matches empirical WLS at desk scale") {
  const int k = 3, d = 1000, n = 5000;
  VectorXd pi(3);
  pi << 0.5, 0.3, 0.2;
  GmmInstance inst(make_orthogonal_ensemble(k, d, std::sqrt(15.0)),
                   PriorSpec(pi), 1.0);
  const WeightSpec w = WeightSpec::inv_sqrt_prior(pi);
  const CorrelationSummary theory =
      predict_wls_gmm(inst, AspectRatio(double(d) / n), w);
  const CorrelationSummary emp =
      mean_empirical_summary(inst, n, 4, Rule::WLS, &w, 809);
  REQUIRE(max_summary_gap(emp, theory) < 0.05);
}

// -------------------------------------------------------------- MLM Avg/LS

TEST_CASE("predict_avg_mlm: zero means give gamma/k identity covariance") {
  MlmInstance inst{MeanEnsemble(MatrixXd::Zero(6, 4))};
  const SoftmaxMoments mom = estimate_moments(inst.means, 1000, 1);
  const CorrelationSummary s = predict_avg_mlm(inst, AspectRatio(0.8), mom);
  REQUIRE(s.Swm.cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((s.Sww - 0.2 * MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <
          1e-14);
}

TEST_CASE("predict_avg_mlm: Schur complement equals gamma diag(pi)") {
  const MeanEnsemble means = random_ensemble(3, 6, 901, 0.8);
  MlmInstance inst{means};
  const SoftmaxMoments mom = oracles::quadrature_moments(means, 48);
  const double gamma = 0.37;
  const CorrelationSummary s = predict_avg_mlm(inst, AspectRatio(gamma), mom);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s.Smm);
  VectorXd inv = VectorXd::Zero(3);
  for (int i = 0; i < 3; ++i)
    if (eig.eigenvalues()(i) > 1e-10 * eig.eigenvalues().maxCoeff())
      inv(i) = 1.0 / eig.eigenvalues()(i);
  const MatrixXd pinv =
      eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  const MatrixXd schur = s.Sww - s.Swm * pinv * s.Swm.transpose();
  const MatrixXd want = gamma * MatrixXd(mom.pi.asDiagonal());
  REQUIRE((schur - want).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("predict_avg_mlm matches empirical averaging on MLM data") {
  const int k = 3, d = 100, n = 100000;
  const MeanEnsemble means = make_orthogonal_ensemble(k, d, 2.0);
  MlmInstance inst{means};
  const SoftmaxMoments mom = estimate_moments(means, 200000, 11);
  const CorrelationSummary theory =
      predict_avg_mlm(inst, AspectRatio(double(d) / n), mom);
  const Dataset data = sample_mlm(inst, n, 903);
  const CorrelationSummary emp = summarize(fit_avg(data), means);
  REQUIRE(max_summary_gap(emp, theory) < 0.02 + 3.0 * mom.max_se());
}

TEST_CASE("predict_ls_mlm: Swm identical to Avg, coefficients limit at 0") {
  const MeanEnsemble means = random_ensemble(3, 7, 905, 1.0);
  MlmInstance inst{means};
  const SoftmaxMoments mom = oracles::quadrature_moments(means, 48);
  const CorrelationSummary avg = predict_avg_mlm(inst, AspectRatio(0.2), mom);
  const CorrelationSummary ls = predict_ls_mlm(inst, AspectRatio(0.2), mom);
  REQUIRE((ls.Swm - avg.Swm).cwiseAbs().maxCoeff() == 0.0);
  const CorrelationSummary avg0 =
      predict_avg_mlm(inst, AspectRatio(1e-12), mom);
  const CorrelationSummary ls0 = predict_ls_mlm(inst, AspectRatio(1e-12), mom);
  REQUIRE((ls0.Sww - avg0.Sww).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("predict_ls_mlm matches empirical LS on MLM data") {
  const int k = 3, d = 500, n = 2500;  // gamma = 0.2
  const MeanEnsemble means = make_orthogonal_ensemble(k, d, 2.0);
  MlmInstance inst{means};
  const SoftmaxMoments mom = estimate_moments(means, 200000, 13);
  const CorrelationSummary theory =
      predict_ls_mlm(inst, AspectRatio(double(d) / n), mom);
  CorrelationSummary acc;
  acc.b = VectorXd::Zero(k);
  acc.Swm = MatrixXd::Zero(k, k);
  acc.Sww = MatrixXd::Zero(k, k);
  const int trials = 6;
  for (int t = 0; t < trials; ++t) {
    const Dataset data = sample_mlm(inst, n, derive_seed(907, t));
    const CorrelationSummary s = summarize(fit_ls(data), means);
    acc.b += s.b;
    acc.Swm += s.Swm;
    acc.Sww += s.Sww;
  }
  acc.b /= trials;
  acc.Swm /= trials;
  acc.Sww /= trials;
  REQUIRE(max_summary_gap(acc, theory) < 0.05 + 3.0 * mom.max_se());
}

// ----------------------------------------------------------------- MLM WLS

TEST_CASE("predict_wls_mlm: omega=1 equals LS within MC noise") {
  const MeanEnsemble means = random_ensemble(3, 6, 911, 1.1);
  MlmInstance inst{means};
  const SoftmaxMoments mom = oracles::quadrature_moments(means, 48);
  const std::size_t n = 200000;
  const CorrelationSummary ls = predict_ls_mlm(inst, AspectRatio(0.3), mom);
  const CorrelationSummary wls = predict_wls_mlm(
      inst, AspectRatio(0.3), WeightSpec::ones(3), mom, {n, 913});
  REQUIRE(max_summary_gap(wls, ls) < 5.0 / std::sqrt(double(n)) * 3.0);
}

TEST_CASE("predict_wls_mlm: rank-zero means zero out Swm") {
  MlmInstance inst{MeanEnsemble(MatrixXd::Zero(5, 3))};
  const SoftmaxMoments mom = estimate_moments(inst.means, 1000, 1);
  VectorXd w(3);
  w << 2.0, 1.0, 0.5;
  const CorrelationSummary s = predict_wls_mlm(inst, AspectRatio(0.4),
                                               WeightSpec(w), mom, {1000, 2});
  REQUIRE(s.Swm.cwiseAbs().maxCoeff() == 0.0);
  s.check_invariants();
}

TEST_CASE("predict_wls_mlm matches empirical WLS on MLM data") {
  // Moderate gamma so the cross-correlation block (not just the aligned
  // part) carries weight in Sigma_ww.
  const int k = 3, d = 500, n = 2500;
  VectorXd norms(3);
  norms << 2.0, 1.0, 1.0;
  const MeanEnsemble means = make_orthogonal_ensemble(k, d, norms);
  MlmInstance inst{means};
  const SoftmaxMoments mom = estimate_moments(means, 200000, 17);
  const WeightSpec w = WeightSpec::inv_sqrt_prior(mom.pi);
  const CorrelationSummary theory = predict_wls_mlm(
      inst, AspectRatio(double(d) / n), w, mom, {200000, 919});
  CorrelationSummary acc;
  acc.b = VectorXd::Zero(k);
  acc.Swm = MatrixXd::Zero(k, k);
  acc.Sww = MatrixXd::Zero(k, k);
  const int trials = 5;
  for (int t = 0; t < trials; ++t) {
    const Dataset data = sample_mlm(inst, n, derive_seed(921, t));
    const CorrelationSummary s = summarize(fit_wls(data, w), means);
    acc.b += s.b;
    acc.Swm += s.Swm;
    acc.Sww += s.Sww;
  }
  acc.b /= trials;
  acc.Swm /= trials;
  acc.Sww /= trials;
  REQUIRE(max_summary_gap(acc, theory) < 0.05 + 3.0 * mom.max_se());
}

TEST_CASE("predict_wls_mlm holds up under strongly skewed weights") {
  // nu far from 1 puts real weight on the cross-correlation block of
  // Sigma_ww, which is where transcription errors would show.
  const int k = 3, d = 500, n = 2500;
  VectorXd norms(3), wv(3);
  norms << 2.0, 1.0, 1.0;
  wv << 3.0, 1.0, 0.5;
  const MeanEnsemble means = make_orthogonal_ensemble(k, d, norms);
  MlmInstance inst{means};
  const SoftmaxMoments mom = estimate_moments(means, 200000, 17);
  const WeightSpec w(wv);
  const CorrelationSummary theory = predict_wls_mlm(
      inst, AspectRatio(double(d) / n), w, mom, {200000, 919});
  MatrixXd emp = MatrixXd::Zero(k, k);
  VectorXd emp_b = VectorXd::Zero(k);
  const int trials = 6;
  for (int t = 0; t < trials; ++t) {
    const Dataset data = sample_mlm(inst, n, derive_seed(923, t));
    const auto s = summarize(fit_wls(data, w), means);
    emp += s.Sww;
    emp_b += s.b;
  }
  emp /= trials;
  emp_b /= trials;
  REQUIRE((emp - theory.Sww).cwiseAbs().maxCoeff() <
          0.05 + 3.0 * mom.max_se());
  REQUIRE((emp_b - theory.b).cwiseAbs().maxCoeff() < 0.05);
}

// ------------------------------------------------------------ scalar cases

TEST_CASE("u_values identities") {
  CounterRng rng(1001, 0);
  for (int i = 0; i < 50; ++i) {
    const double mu = 0.5 + 3.0 * rng.next_uniform();
    const double sigma = 0.5 + 1.5 * rng.next_uniform();
    const int k = 2 + static_cast<int>(rng.next_uniform() * 8);
    const double gamma = 0.05 + 0.9 * rng.next_uniform();
    const UValues u = u_values(mu, sigma, k, gamma);
    REQUIRE(u.u_ls == Catch::Approx(u.u_avg * std::sqrt(1.0 - gamma))
                          .epsilon(1e-14));
    REQUIRE(u.u_bayes == u.u_avg);
  }
  // gamma -> 0 limit: u_avg -> mu / sigma
  const UValues u0 = u_values(2.0, 0.5, 5, 1e-14);
  REQUIRE(u0.u_avg == Catch::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("gamma_star: small mu limit and range") {
  const GammaStar tiny = gamma_star(0.01, 3, 200000, 1003);
  REQUIRE(tiny.value > 0.0);
  REQUIRE(tiny.value < 1e-4);  // ~ mu^2/k
  for (double mu : {0.5, 1.0, 2.0, 3.0})
    for (int k : {2, 3, 5, 10}) {
      const GammaStar gs = gamma_star(mu, k, 50000, 1005);
      REQUIRE(gs.value > 0.0);
      REQUIRE(gs.value < 1.0);
    }
}

TEST_CASE("gamma_star: mu=1, k=2 against the Gauss-Hermite oracle") {
  const GammaStar gs = gamma_star(1.0, 2, 400000, 1007);
  const double pi11 = oracles::gaussian_expect(2, 64, [](const VectorXd& g) {
    const double e1 = std::exp(g(0)), e2 = std::exp(g(1));
    return e1 * e1 / ((e1 + e2) * (e1 + e2));
  });
  const double want = 1.0 * 2.0 * (1.0 - 2.0 * pi11) * (1.0 - 2.0 * pi11);
  REQUIRE(std::fabs(gs.value - want) <= 3.0 * gs.std_err);
}

// -------------------------------------------------------------- invariants

TEST_CASE("every predictor returns a symmetric PSD Sww") {
  const MeanEnsemble means = random_ensemble(4, 9, 1101, 1.0);
  VectorXd pi(4);
  pi << 0.4, 0.3, 0.2, 0.1;
  GmmInstance gmm(means, PriorSpec(pi), 1.1);
  MlmInstance mlm{means};
  const SoftmaxMoments mom = estimate_moments(means, 100000, 1103);
  VectorXd w(4);
  w << 1.5, 1.0, 0.7, 2.0;
  predict_avg_gmm(gmm, AspectRatio(0.5)).check_invariants();
  predict_ls_gmm(gmm, AspectRatio(0.5)).check_invariants();
  predict_wls_gmm(gmm, AspectRatio(0.5), WeightSpec(w)).check_invariants();
  predict_avg_mlm(mlm, AspectRatio(0.5), mom).check_invariants();
  predict_ls_mlm(mlm, AspectRatio(0.45), mom).check_invariants();
  predict_wls_mlm(mlm, AspectRatio(0.45), WeightSpec(w), mom, {100000, 7})
      .check_invariants();
}

TEST_CASE("GMM LS Schur complement is PSD") {
  const MeanEnsemble means = random_ensemble(3, 8, 1109, 1.2);
  VectorXd pi(3);
  pi << 0.5, 0.25, 0.25;
  GmmInstance inst(means, PriorSpec(pi), 1.0);
  for (double gamma : {0.1, 0.5, 0.9}) {
    const CorrelationSummary s = predict_ls_gmm(inst, AspectRatio(gamma));
    Eigen::SelfAdjointEigenSolver<MatrixXd> eigS(s.Smm);
    VectorXd inv = VectorXd::Zero(3);
    for (int i = 0; i < 3; ++i)
      if (eigS.eigenvalues()(i) > 1e-10 * eigS.eigenvalues().maxCoeff())
        inv(i) = 1.0 / eigS.eigenvalues()(i);
    const MatrixXd pinv = eigS.eigenvectors() * inv.asDiagonal() *
                          eigS.eigenvectors().transpose();
    const MatrixXd schur = s.Sww - s.Swm * pinv * s.Swm.transpose();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(schur);
    REQUIRE(eig.eigenvalues().minCoeff() >= -1e-10 * schur.trace());
  }
}

TEST_CASE("predictions are equivariant under class permutations") {
  VectorXd pi(3), w(3);
  pi << 0.5, 0.3, 0.2;
  w << 2.0, 1.0, 0.5;
  const MeanEnsemble means = random_ensemble(3, 7, 1117, 1.3);
  GmmInstance inst(means, PriorSpec(pi), 1.0);
  const CorrelationSummary base =
      predict_wls_gmm(inst, AspectRatio(0.3), WeightSpec(w));

  const std::vector<int> perm = {2, 0, 1};  // new index p -> old perm[p]
  MatrixXd Mp(means.M.rows(), 3);
  VectorXd pip(3), wp(3);
  for (int p = 0; p < 3; ++p) {
    Mp.col(p) = means.M.col(perm[p]);
    pip(p) = pi(perm[p]);
    wp(p) = w(perm[p]);
  }
  GmmInstance pinst(MeanEnsemble(Mp), PriorSpec(pip), 1.0);
  const CorrelationSummary permuted =
      predict_wls_gmm(pinst, AspectRatio(0.3), WeightSpec(wp));
  for (int p = 0; p < 3; ++p) {
    REQUIRE(permuted.b(p) == Catch::Approx(base.b(perm[p])).margin(1e-10));
    for (int q = 0; q < 3; ++q) {
      REQUIRE(permuted.Swm(p, q) ==
              Catch::Approx(base.Swm(perm[p], perm[q])).margin(1e-10));
      REQUIRE(permuted.Sww(p, q) ==
              Catch::Approx(base.Sww(perm[p], perm[q])).margin(1e-10));
    }
  }
}

TEST_CASE("summary CSV round-trip") {
  const MeanEnsemble means = random_ensemble(3, 6, 1123);
  GmmInstance inst(means, PriorSpec::uniform(3), 1.0);
  const CorrelationSummary s = predict_ls_gmm(inst, AspectRatio(0.4));
  std::stringstream ss;
  write_summary_csv(s, ss);
  const CorrelationSummary back = read_summary_csv(ss);
  REQUIRE((back.b - s.b).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.Swm - s.Swm).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.Sww - s.Sww).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((back.Smm - s.Smm).cwiseAbs().maxCoeff() == 0.0);
}
