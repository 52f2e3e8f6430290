#include "mcl/moments.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "mcl/rng.hpp"

namespace mcl {

namespace {

constexpr int kJackknifeBlocks = 10;

void check_sample_count(std::size_t n) {
  if (n < 1000)
    throw std::invalid_argument("moments: need n_samples >= 1e3");
}

// softmax(V Sigma g) with max subtraction; rejects non-finite results.
void softmax_draw(const MatrixXd& VS, CounterRng& rng, VectorXd& g,
                  VectorXd& v) {
  for (int j = 0; j < g.size(); ++j) g(j) = rng.next_gaussian();
  v.noalias() = VS * g;
  const double m = v.maxCoeff();
  v = (v.array() - m).exp();
  const double s = v.sum();
  if (!std::isfinite(s) || s <= 0.0)
    throw std::runtime_error("moments: non-finite softmax draw");
  v /= s;
}

// Jackknife standard error of a mean from per-block sums.
// block_sums[b] holds the sum over block b; sizes[b] the block sample count.
double jackknife_se(const std::vector<double>& block_sums,
                    const std::vector<std::size_t>& sizes, double total_sum,
                    std::size_t n) {
  const int B = static_cast<int>(block_sums.size());
  std::vector<double> loo(B);
  double mean = 0.0;
  for (int b = 0; b < B; ++b) {
    loo[b] = (total_sum - block_sums[b]) / static_cast<double>(n - sizes[b]);
    mean += loo[b];
  }
  mean /= B;
  double ss = 0.0;
  for (int b = 0; b < B; ++b) ss += (loo[b] - mean) * (loo[b] - mean);
  return std::sqrt((B - 1.0) / B * ss);
}

}  // namespace

SoftmaxMoments estimate_moments(const MeanEnsemble& means,
                                std::size_t n_samples, std::uint64_t seed) {
  check_sample_count(n_samples);
  const int k = means.classes();
  const int r = means.rank();
  SoftmaxMoments mom;
  mom.n_samples = n_samples;
  mom.seed = seed;
  if (r == 0) {
    // All means zero: softmax is exactly uniform, no sampling needed.
    mom.pi = VectorXd::Constant(k, 1.0 / k);
    mom.Pi = MatrixXd::Constant(k, k, 1.0 / (k * double(k)));
    mom.pi_se = VectorXd::Zero(k);
    mom.Pi_se = MatrixXd::Zero(k, k);
    return mom;
  }

  const MatrixXd VS = means.V * means.sigma.asDiagonal();  // k x r
  VectorXd g(r), v(k);
  VectorXd sum_v = VectorXd::Zero(k);
  MatrixXd sum_vv = MatrixXd::Zero(k, k);
  std::vector<MatrixXd> blk_vv(kJackknifeBlocks, MatrixXd::Zero(k, k));
  std::vector<VectorXd> blk_v(kJackknifeBlocks, VectorXd::Zero(k));
  std::vector<std::size_t> blk_n(kJackknifeBlocks, 0);

  for (std::size_t i = 0; i < n_samples; ++i) {
    CounterRng rng(seed, i);
    softmax_draw(VS, rng, g, v);
    const int b = static_cast<int>(i * kJackknifeBlocks / n_samples);
    sum_v += v;
    sum_vv.selfadjointView<Eigen::Lower>().rankUpdate(v);
    blk_v[b] += v;
    blk_vv[b].selfadjointView<Eigen::Lower>().rankUpdate(v);
    ++blk_n[b];
  }
  sum_vv.triangularView<Eigen::Upper>() = sum_vv.transpose();
  for (auto& m : blk_vv) m.triangularView<Eigen::Upper>() = m.transpose();

  const double n = static_cast<double>(n_samples);
  mom.pi = sum_v / n;
  mom.Pi = sum_vv / n;
  mom.Pi = 0.5 * (mom.Pi + mom.Pi.transpose().eval());
  mom.pi_se.resize(k);
  mom.Pi_se.resize(k, k);
  std::vector<double> bs(kJackknifeBlocks);
  for (int a = 0; a < k; ++a) {
    for (int b2 = 0; b2 < kJackknifeBlocks; ++b2) bs[b2] = blk_v[b2](a);
    mom.pi_se(a) = jackknife_se(bs, blk_n, sum_v(a), n_samples);
  }
  for (int a = 0; a < k; ++a)
    for (int c = 0; c <= a; ++c) {
      for (int b2 = 0; b2 < kJackknifeBlocks; ++b2) bs[b2] = blk_vv[b2](a, c);
      mom.Pi_se(a, c) = mom.Pi_se(c, a) =
          jackknife_se(bs, blk_n, sum_vv(a, c), n_samples);
    }
  return mom;
}

MatrixXd estimate_cross_moment(const MeanEnsemble& means,
                               std::size_t n_samples, std::uint64_t seed,
                               MatrixXd* se) {
  check_sample_count(n_samples);
  const int k = means.classes();
  const int r = means.rank();
  if (r == 0) {
    if (se) *se = MatrixXd::Zero(k, 0);
    return MatrixXd::Zero(k, 0);
  }
  const MatrixXd VS = means.V * means.sigma.asDiagonal();
  VectorXd g(r), v(k);
  MatrixXd sum = MatrixXd::Zero(k, r);
  std::vector<MatrixXd> blk(kJackknifeBlocks, MatrixXd::Zero(k, r));
  std::vector<std::size_t> blk_n(kJackknifeBlocks, 0);
  for (std::size_t i = 0; i < n_samples; ++i) {
    CounterRng rng(seed, i);
    softmax_draw(VS, rng, g, v);
    const int b = static_cast<int>(i * kJackknifeBlocks / n_samples);
    sum.noalias() += v * g.transpose();
    blk[b].noalias() += v * g.transpose();
    ++blk_n[b];
  }
  MatrixXd est = sum / static_cast<double>(n_samples);
  if (se) {
    se->resize(k, r);
    std::vector<double> bs(kJackknifeBlocks);
    for (int a = 0; a < k; ++a)
      for (int j = 0; j < r; ++j) {
        for (int b2 = 0; b2 < kJackknifeBlocks; ++b2) bs[b2] = blk[b2](a, j);
        (*se)(a, j) = jackknife_se(bs, blk_n, sum(a, j), n_samples);
      }
  }
  return est;
}

MatrixXd estimate_weighted_ggT(const MeanEnsemble& means,
                               const VectorXd& weight, std::size_t n_samples,
                               std::uint64_t seed, MatrixXd* se) {
  check_sample_count(n_samples);
  if (weight.size() != means.classes())
    throw std::invalid_argument("estimate_weighted_ggT: weight size mismatch");
  const int r = means.rank();
  if (r == 0) {
    if (se) *se = MatrixXd::Zero(0, 0);
    return MatrixXd::Zero(0, 0);
  }
  const MatrixXd VS = means.V * means.sigma.asDiagonal();
  VectorXd g(r), v(means.classes());
  MatrixXd sum = MatrixXd::Zero(r, r);
  std::vector<MatrixXd> blk(kJackknifeBlocks, MatrixXd::Zero(r, r));
  std::vector<std::size_t> blk_n(kJackknifeBlocks, 0);
  for (std::size_t i = 0; i < n_samples; ++i) {
    CounterRng rng(seed, i);
    softmax_draw(VS, rng, g, v);
    const double wv = weight.dot(v);
    const int b = static_cast<int>(i * kJackknifeBlocks / n_samples);
    sum.selfadjointView<Eigen::Lower>().rankUpdate(g, wv);
    blk[b].selfadjointView<Eigen::Lower>().rankUpdate(g, wv);
    ++blk_n[b];
  }
  sum.triangularView<Eigen::Upper>() = sum.transpose();
  for (auto& m : blk) m.triangularView<Eigen::Upper>() = m.transpose();
  MatrixXd est = sum / static_cast<double>(n_samples);
  est = 0.5 * (est + est.transpose().eval());
  if (se) {
    se->resize(r, r);
    std::vector<double> bs(kJackknifeBlocks);
    for (int a = 0; a < r; ++a)
      for (int c = 0; c <= a; ++c) {
        for (int b2 = 0; b2 < kJackknifeBlocks; ++b2) bs[b2] = blk[b2](a, c);
        (*se)(a, c) = (*se)(c, a) =
            jackknife_se(bs, blk_n, sum(a, c), n_samples);
      }
  }
  return est;
}

void write_moments_csv(const SoftmaxMoments& mom, std::ostream& os) {
  const int k = mom.classes();
  os << "meta," << k << "," << mom.n_samples << "," << mom.seed << "\n";
  char buf[32];
  auto row = [&](const char* tag, const VectorXd& v) {
    os << tag;
    for (int i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", v(i));
      os << "," << buf;
    }
    os << "\n";
  };
  row("pi", mom.pi);
  row("pi_se", mom.pi_se);
  for (int i = 0; i < k; ++i) row("Pi", mom.Pi.row(i));
  for (int i = 0; i < k; ++i) row("Pi_se", mom.Pi_se.row(i));
}

SoftmaxMoments read_moments_csv(std::istream& is) {
  SoftmaxMoments mom;
  std::string line;
  int k = -1, pi_row = 0, se_row = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tag;
    std::getline(ss, tag, ',');
    std::vector<double> vals;
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (tag == "meta") {
      k = static_cast<int>(vals.at(0));
      mom.n_samples = static_cast<std::size_t>(vals.at(1));
      mom.seed = static_cast<std::uint64_t>(vals.at(2));
      mom.pi.resize(k);
      mom.pi_se.resize(k);
      mom.Pi.resize(k, k);
      mom.Pi_se.resize(k, k);
    } else if (tag == "pi") {
      for (int i = 0; i < k; ++i) mom.pi(i) = vals.at(i);
    } else if (tag == "pi_se") {
      for (int i = 0; i < k; ++i) mom.pi_se(i) = vals.at(i);
    } else if (tag == "Pi") {
      for (int i = 0; i < k; ++i) mom.Pi(pi_row, i) = vals.at(i);
      ++pi_row;
    } else if (tag == "Pi_se") {
      for (int i = 0; i < k; ++i) mom.Pi_se(se_row, i) = vals.at(i);
      ++se_row;
    }
  }
  if (k < 0 || pi_row != k || se_row != k)
    throw std::runtime_error("read_moments_csv: malformed file");
  return mom;
}

}  // namespace mcl
