#include "mcl/asymptotics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "mcl/moments.hpp"
#include "mcl/rng.hpp"

namespace mcl {

namespace {

MatrixXd outer_sub_diag(const VectorXd& p) {
  // diag(p) - p p^T
  MatrixXd P = -p * p.transpose();
  P.diagonal() += p;
  return P;
}

}  // namespace

WlsFixedPoint solve_eta(const PriorSpec& priors, const WeightSpec& w,
                        double gamma) {
  const int k = priors.classes();
  if (w.omega.size() != k)
    throw std::invalid_argument("solve_eta: weight/prior size mismatch");
  const VectorXd w2 = w.omega.array().square();
  auto F = [&](double eta) {
    double s = 0.0;
    for (int l = 0; l < k; ++l)
      if (w2(l) > 0.0) s += priors.pi(l) * w2(l) / (w2(l) + eta);
    return s;
  };
  double mass = 0.0;
  for (int l = 0; l < k; ++l)
    if (w2(l) > 0.0) mass += priors.pi(l);
  if (!(gamma > 0.0 && gamma < mass))
    throw std::invalid_argument(
        "solve_eta: gamma outside the range of F, need 0 < gamma < " +
        std::to_string(mass));

  double lo = 0.0, hi = w2.maxCoeff();
  while (F(hi) >= gamma) hi *= 2.0;  // F strictly decreasing; bracket the root
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (F(mid) > gamma)
      lo = mid;
    else
      hi = mid;
  }
  WlsFixedPoint fp;
  fp.eta = 0.5 * (lo + hi);
  if (std::fabs(F(fp.eta) - gamma) > 1e-12)
    throw std::runtime_error("solve_eta: bisection residual too large");
  fp.pi_tilde.resize(k);
  fp.nu.resize(k);
  double zsum = 0.0;
  for (int l = 0; l < k; ++l) {
    fp.nu(l) = w2(l) / (gamma * (w2(l) + fp.eta));
    fp.pi_tilde(l) = priors.pi(l) * fp.nu(l);
    zsum += priors.pi(l) * w2(l) / ((w2(l) + fp.eta) * (w2(l) + fp.eta));
  }
  fp.zeta = gamma / (fp.eta * zsum);
  return fp;
}

CorrelationSummary predict_avg_gmm(const GmmInstance& inst,
                                   AspectRatio gamma) {
  const MatrixXd Smm = inst.means.grammian();
  const MatrixXd Dpi = inst.priors.pi.asDiagonal();
  CorrelationSummary s;
  s.b = inst.priors.pi;
  s.Swm = Dpi * Smm;
  s.Sww = gamma.gamma * inst.sigma * inst.sigma * Dpi + Dpi * Smm * Dpi;
  s.Sww = 0.5 * (s.Sww + s.Sww.transpose().eval());
  s.Smm = Smm;
  return s;
}

namespace {

// Shared core of the LS and WLS GMM predictions: given priors p (actual or
// effective) builds P = diag(p) - p p^T, Delta = sigma^2 I + SV P SV^T and
// the b / Sigma_{w,mu} blocks plus the common part of Sigma_{w,w} with
// noise coefficient `coef` (gamma/((1-gamma) sigma^2) for LS, zeta/sigma^2
// for WLS).
struct LsCore {
  MatrixXd P;          // k x k
  MatrixXd G;          // r x k, Sigma V^T
  MatrixXd Delta;      // r x r
  MatrixXd DeltaInvG;  // r x k
  VectorXd b;
  MatrixXd Swm;
  MatrixXd Sww_common;
};

LsCore ls_core(const MeanEnsemble& means, const VectorXd& p, double sigma,
               double coef) {
  LsCore c;
  const int r = means.rank();
  c.P = outer_sub_diag(p);
  c.G = means.sigma_vt();
  c.Delta = sigma * sigma * MatrixXd::Identity(r, r) +
            c.G * c.P * c.G.transpose();
  c.DeltaInvG = c.Delta.ldlt().solve(c.G);
  const MatrixXd GtDG = c.G.transpose() * c.DeltaInvG;  // V S Delta^-1 S V^T
  c.b = p - c.P * (GtDG * p);
  c.Swm = c.P * GtDG;
  // P V S Delta^-1 (Delta^-1 - coef I) S V^T P
  const MatrixXd DeltaInv = c.Delta.ldlt().solve(MatrixXd::Identity(r, r));
  const MatrixXd mid = DeltaInv * (DeltaInv - coef * MatrixXd::Identity(r, r));
  c.Sww_common = coef * c.P + c.P * c.G.transpose() * mid * c.G * c.P;
  c.Sww_common = 0.5 * (c.Sww_common + c.Sww_common.transpose().eval());
  return c;
}

}  // namespace

CorrelationSummary predict_ls_gmm(const GmmInstance& inst, AspectRatio gamma) {
  if (!(gamma.gamma < 1.0))
    throw std::invalid_argument(
        "predict_ls_gmm: needs gamma < 1; use predict_minnorm_ls_gmm for the "
        "overparameterized regime");
  const double s2 = inst.sigma * inst.sigma;
  const double coef = gamma.gamma / ((1.0 - gamma.gamma) * s2);
  LsCore core = ls_core(inst.means, inst.priors.pi, inst.sigma, coef);
  CorrelationSummary s;
  s.b = core.b;
  s.Swm = core.Swm;
  s.Sww = core.Sww_common;
  s.Smm = inst.means.grammian();
  return s;
}

MinNormLsPrediction predict_minnorm_ls_gmm(const GmmInstance& inst,
                                           AspectRatio gamma) {
  if (!(gamma.gamma > 1.0))
    throw std::invalid_argument("predict_minnorm_ls_gmm: needs gamma > 1");
  const int k = inst.means.classes();
  const int r = inst.means.rank();
  const double s2 = inst.sigma * inst.sigma;
  const VectorXd& pi = inst.priors.pi;
  const MatrixXd P = outer_sub_diag(pi);
  const MatrixXd G = inst.means.sigma_vt();
  // Delta_gamma = sigma^2 (gamma - 1) I + Delta = sigma^2 gamma I + SV P SV^T
  const MatrixXd DeltaG =
      s2 * gamma.gamma * MatrixXd::Identity(r, r) + G * P * G.transpose();
  const MatrixXd GtDG = G.transpose() * DeltaG.ldlt().solve(G);
  MinNormLsPrediction pred;
  pred.b.resize(k);
  pred.Swm.resize(k, k);
  pred.norms_sq.resize(k);
  pred.norms.resize(k);
  for (int l = 0; l < k; ++l) {
    VectorXd dl = pi - VectorXd::Unit(k, l);
    const double quad = dl.dot(GtDG * dl);
    pred.b(l) = pi(l) * (1.0 + pi.dot(GtDG * dl));
    pred.Swm.row(l) = -pi(l) * (GtDG * dl).transpose();
    pred.norms_sq(l) =
        (pi(l) * (1.0 - pi(l)) - pi(l) * pi(l) * quad) /
        (s2 * (gamma.gamma - 1.0));
    pred.norms(l) = std::sqrt(std::max(pred.norms_sq(l), 0.0));
  }
  return pred;
}

CorrelationSummary predict_wls_gmm(const GmmInstance& inst, AspectRatio gamma,
                                   const WeightSpec& w) {
  if (!(gamma.gamma < 1.0))
    throw std::invalid_argument("predict_wls_gmm: needs gamma < 1");
  const WlsFixedPoint fp = solve_eta(inst.priors, w, gamma.gamma);
  const int r = inst.means.rank();
  const double s2 = inst.sigma * inst.sigma;

  // b and Sigma_{w,mu} are the LS formulas under the effective priors.
  LsCore core = ls_core(inst.means, fp.pi_tilde, inst.sigma, fp.zeta / s2);

  // Q correction, assembled term by term with the proof's named objects:
  //   pi_tilde' = pi . nu',  nu'_l = -(1/gamma) w_l^2/(w_l^2+eta)^2
  //   A  = [[sigma^2 I + G diag(pt) G^T, G pt], [pt^T G^T, 1]]
  //   A' = [[sigma^2 (1^T pt') I + G diag(pt') G^T, G pt'], [pt'^T G^T, 1^T pt']]
  //   C  = [G; 1^T],  B = A^-1 C diag(pt)
  //   Q  = diag(pt') + B^T A' B - diag(pt') C^T A^-1 C diag(pt) - (sym.)
  const VectorXd& pt = fp.pi_tilde;
  VectorXd ptp(pt.size());
  const VectorXd w2 = w.omega.array().square();
  for (int l = 0; l < pt.size(); ++l)
    ptp(l) = -inst.priors.pi(l) * w2(l) /
             (gamma.gamma * (w2(l) + fp.eta) * (w2(l) + fp.eta));
  const MatrixXd& G = core.G;
  const int k = inst.means.classes();
  MatrixXd A(r + 1, r + 1), Ap(r + 1, r + 1), C(r + 1, k);
  A.topLeftCorner(r, r) =
      s2 * MatrixXd::Identity(r, r) + G * pt.asDiagonal() * G.transpose();
  A.topRightCorner(r, 1) = G * pt;
  A.bottomLeftCorner(1, r) = (G * pt).transpose();
  A(r, r) = 1.0;
  const double ptp_sum = ptp.sum();
  Ap.topLeftCorner(r, r) =
      s2 * ptp_sum * MatrixXd::Identity(r, r) +
      G * ptp.asDiagonal() * G.transpose();
  Ap.topRightCorner(r, 1) = G * ptp;
  Ap.bottomLeftCorner(1, r) = (G * ptp).transpose();
  Ap(r, r) = ptp_sum;
  C.topRows(r) = G;
  C.row(r).setOnes();

  const MatrixXd AinvC = A.ldlt().solve(C);
  const MatrixXd K = C.transpose() * AinvC;       // C^T A^-1 C
  const MatrixXd B = AinvC * pt.asDiagonal();     // A^-1 C diag(pt)
  const MatrixXd Kp = ptp.asDiagonal() * K * pt.asDiagonal();
  MatrixXd Q = MatrixXd(ptp.asDiagonal()) + B.transpose() * Ap * B - Kp -
               Kp.transpose();

  CorrelationSummary s;
  s.b = core.b;
  s.Swm = core.Swm;
  s.Sww = core.Sww_common + (fp.eta * fp.zeta / s2) * Q;
  s.Sww = 0.5 * (s.Sww + s.Sww.transpose().eval());
  s.Smm = inst.means.grammian();
  return s;
}

namespace {

// Common blocks of the MLM averaging/LS predictions.
struct MlmCore {
  MatrixXd Smm;
  MatrixXd DmP;   // diag(pi) - Pi
  MatrixXd Swm;   // (diag(pi) - Pi) Smm
  MatrixXd cross; // (diag(pi) - Pi) Smm (diag(pi) - Pi)
};

MlmCore mlm_core(const MlmInstance& inst, const SoftmaxMoments& mom) {
  if (mom.classes() != inst.means.classes())
    throw std::invalid_argument("MLM predictor: moments/means class mismatch");
  MlmCore c;
  c.Smm = inst.means.grammian();
  c.DmP = MatrixXd(mom.pi.asDiagonal()) - mom.Pi;
  c.Swm = c.DmP * c.Smm;
  c.cross = c.DmP * c.Smm * c.DmP;
  c.cross = 0.5 * (c.cross + c.cross.transpose().eval());
  return c;
}

}  // namespace

CorrelationSummary predict_avg_mlm(const MlmInstance& inst, AspectRatio gamma,
                                   const SoftmaxMoments& mom) {
  MlmCore c = mlm_core(inst, mom);
  CorrelationSummary s;
  s.b = mom.pi;
  s.Swm = c.Swm;
  s.Sww = gamma.gamma * MatrixXd(mom.pi.asDiagonal()) + c.cross;
  s.Smm = c.Smm;
  return s;
}

CorrelationSummary predict_ls_mlm(const MlmInstance& inst, AspectRatio gamma,
                                  const SoftmaxMoments& mom) {
  if (!(gamma.gamma < 1.0))
    throw std::invalid_argument("predict_ls_mlm: needs gamma < 1");
  const double g = gamma.gamma;
  MlmCore c = mlm_core(inst, mom);
  CorrelationSummary s;
  s.b = mom.pi;
  s.Swm = c.Swm;
  s.Sww = g / (1.0 - g) * outer_sub_diag(mom.pi) +
          (1.0 - 2.0 * g) / (1.0 - g) * c.cross;
  s.Sww = 0.5 * (s.Sww + s.Sww.transpose().eval());
  s.Smm = c.Smm;
  return s;
}

CorrelationSummary predict_wls_mlm(const MlmInstance& inst, AspectRatio gamma,
                                   const WeightSpec& w,
                                   const SoftmaxMoments& mom,
                                   const McOptions& wgg) {
  if (!(gamma.gamma < 1.0))
    throw std::invalid_argument("predict_wls_mlm: needs gamma < 1");
  const int k = inst.means.classes();
  const int r = inst.means.rank();
  const WlsFixedPoint fp = solve_eta(PriorSpec(mom.pi), w, gamma.gamma);
  const VectorXd& nu = fp.nu;
  const VectorXd& pt = fp.pi_tilde;
  const VectorXd nu2 = nu.array().square();

  const MatrixXd DmP = MatrixXd(mom.pi.asDiagonal()) - mom.Pi;
  const MatrixXd SV = inst.means.sigma_vt();      // r x k
  const MatrixXd G = SV * DmP;                    // Sigma V^T (diag(pi)-Pi)
  const MatrixXd Egg =
      estimate_weighted_ggT(inst.means, nu, wgg.n_samples,
                            derive_seed(wgg.seed, 1));
  const MatrixXd Egg2 =
      estimate_weighted_ggT(inst.means, nu2, wgg.n_samples,
                            derive_seed(wgg.seed, 2));

  const VectorXd Gnu = G * nu;
  MatrixXd Delta = Egg - Gnu * Gnu.transpose();
  Delta = 0.5 * (Delta + Delta.transpose().eval());
  MatrixXd HDinv = MatrixXd::Zero(k, r);  // diag(nu)(I - pi nu^T) G^T Delta^-1
  if (r > 0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Delta);
    if (eig.eigenvalues().minCoeff() <= 0.0)
      throw std::runtime_error(
          "predict_wls_mlm: Delta not positive definite; increase the Monte "
          "Carlo sample count for the weighted moments");
    const MatrixXd H =
        nu.asDiagonal() *
        ((MatrixXd::Identity(k, k) - mom.pi * nu.transpose()) * G.transpose());
    HDinv = Delta.ldlt().solve(H.transpose()).transpose();
  }

  CorrelationSummary s;
  s.b = pt - HDinv * Gnu;
  s.Swm = HDinv * SV;
  s.Smm = inst.means.grammian();

  // Sigma_{w,w}: aligned part + the alpha_0^2 block through A, A', C.
  MatrixXd A(r + 1, r + 1), Ap(r + 1, r + 1), C(r + 1, k);
  A.topLeftCorner(r, r) = Egg;
  A.topRightCorner(r, 1) = Gnu;
  A.bottomLeftCorner(1, r) = Gnu.transpose();
  A(r, r) = 1.0;
  Ap.topLeftCorner(r, r) = Egg2;
  Ap.topRightCorner(r, 1) = G * nu2;
  Ap.bottomLeftCorner(1, r) = (G * nu2).transpose();
  Ap(r, r) = nu2.dot(mom.pi);
  C.topRows(r) = G * nu.asDiagonal();
  C.row(r) = pt.transpose();

  const double denom = 1.0 / gamma.gamma - pt.dot(nu);
  if (!(denom > 0.0))
    throw std::runtime_error("predict_wls_mlm: nonpositive variance factor");
  const MatrixXd AinvC = A.ldlt().solve(C);
  const MatrixXd K = C.transpose() * AinvC;
  const MatrixXd Kw = AinvC.transpose() * Ap * AinvC;
  const MatrixXd nuK = nu.asDiagonal() * K;

  s.Sww = HDinv * HDinv.transpose() +
          (Kw - nuK - nuK.transpose() +
           MatrixXd((nu.array() * pt.array()).matrix().asDiagonal())) /
              denom;
  s.Sww = 0.5 * (s.Sww + s.Sww.transpose().eval());
  return s;
}

UValues u_values(double mu, double sigma, int k, double gamma) {
  if (!(mu > 0.0) || !(sigma > 0.0))
    throw std::invalid_argument("u_values: mu and sigma must be > 0");
  UValues u;
  const double mu2 = mu * mu;
  u.u_avg = mu2 / sigma * std::sqrt(1.0 / (mu2 + k * gamma * sigma * sigma));
  u.u_bayes = u.u_avg;
  if (gamma < 1.0)
    u.u_ls = mu2 / sigma *
             std::sqrt((1.0 - gamma) / (mu2 + k * gamma * sigma * sigma));
  else
    u.u_ls = std::numeric_limits<double>::quiet_NaN();
  return u;
}

GammaStar gamma_star(double mu, int k, std::size_t n_samples,
                     std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("gamma_star: need k >= 2");
  if (!(mu > 0.0)) throw std::invalid_argument("gamma_star: mu must be > 0");
  // Pi11 = E[e^{2 mu G_1} / (sum_l e^{mu G_l})^2] = E[softmax_1^2].
  double sum = 0.0, sumsq = 0.0;
  VectorXd g(k);
  for (std::size_t i = 0; i < n_samples; ++i) {
    CounterRng rng(seed, i);
    for (int j = 0; j < k; ++j) g(j) = mu * rng.next_gaussian();
    const double m = g.maxCoeff();
    const double v1 = std::exp(g(0) - m);
    const double denom = (g.array() - m).exp().sum();
    const double s = v1 / denom;
    sum += s * s;
    sumsq += s * s * s * s;
  }
  const double n = static_cast<double>(n_samples);
  GammaStar gs;
  gs.pi11 = sum / n;
  const double se_pi11 =
      std::sqrt(std::max(sumsq / n - gs.pi11 * gs.pi11, 0.0) / n);
  const double pref = mu * mu * k / ((k - 1.0) * (k - 1.0));
  gs.value = pref * (1.0 - k * gs.pi11) * (1.0 - k * gs.pi11);
  gs.std_err = pref * 2.0 * std::fabs(1.0 - k * gs.pi11) * k * se_pi11;
  return gs;
}

void write_summary_csv(const CorrelationSummary& s, std::ostream& os) {
  char buf[32];
  auto row = [&](const VectorXd& v) {
    for (int i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", v(i));
      os << (i ? "," : "") << buf;
    }
    os << "\n";
  };
  row(s.b);
  for (int i = 0; i < s.Swm.rows(); ++i) row(s.Swm.row(i));
  for (int i = 0; i < s.Sww.rows(); ++i) row(s.Sww.row(i));
  for (int i = 0; i < s.Smm.rows(); ++i) row(s.Smm.row(i));
}

CorrelationSummary read_summary_csv(std::istream& is) {
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
  if (rows.empty()) throw std::runtime_error("read_summary_csv: empty");
  const int k = static_cast<int>(rows[0].size());
  if (static_cast<int>(rows.size()) != 1 + 3 * k)
    throw std::runtime_error("read_summary_csv: expected 1 + 3k rows");
  CorrelationSummary s;
  s.b.resize(k);
  s.Swm.resize(k, k);
  s.Sww.resize(k, k);
  s.Smm.resize(k, k);
  for (int i = 0; i < k; ++i) s.b(i) = rows[0].at(i);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      s.Swm(i, j) = rows[1 + i].at(j);
      s.Sww(i, j) = rows[1 + k + i].at(j);
      s.Smm(i, j) = rows[1 + 2 * k + i].at(j);
    }
  return s;
}

}  // namespace mcl
