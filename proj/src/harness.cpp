#include "mcl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <ostream>
#include <sstream>

#include "mcl/asymptotics.hpp"
#include "mcl/classifiers.hpp"
#include "mcl/gausstail.hpp"
#include "mcl/model.hpp"
#include "mcl/moments.hpp"
#include "mcl/rng.hpp"

namespace mcl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

VectorXd to_vector(const nlohmann::json& j) {
  VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (k < 1 || d < k) throw std::invalid_argument("config: need d >= k >= 1");
  if (gamma_grid.empty()) throw std::invalid_argument("config: empty gamma grid");
  for (double g : gamma_grid) {
    if (!(g > 0.0)) throw std::invalid_argument("config: gamma must be > 0");
    const int n = static_cast<int>(std::lround(d / g));
    if (n < k) throw std::invalid_argument("config: n = round(d/gamma) < k");
  }
  if (priors.size() != k) throw std::invalid_argument("config: priors size");
  if (norms.size() != k) throw std::invalid_argument("config: norms size");
  if (classifiers.empty())
    throw std::invalid_argument("config: no classifiers selected");
  if (trials < 0) throw std::invalid_argument("config: trials < 0");
  if (!(sigma > 0.0)) throw std::invalid_argument("config: sigma must be > 0");
}

ExperimentConfig parse_config(std::istream& is) {
  nlohmann::json j;
  is >> j;
  ExperimentConfig cfg;
  const std::string model = j.value("model", "GMM");
  if (model == "GMM")
    cfg.model = ModelKind::GMM;
  else if (model == "MLM")
    cfg.model = ModelKind::MLM;
  else
    throw std::invalid_argument("config: model must be GMM or MLM");
  cfg.k = j.at("k").get<int>();
  cfg.d = j.at("d").get<int>();
  for (const auto& g : j.at("gamma_grid")) cfg.gamma_grid.push_back(g.get<double>());
  cfg.priors = j.contains("priors") ? to_vector(j["priors"])
                                    : VectorXd::Constant(cfg.k, 1.0 / cfg.k);
  if (j.contains("norms"))
    cfg.norms = to_vector(j["norms"]);
  else if (j.contains("norm"))
    cfg.norms = VectorXd::Constant(cfg.k, j["norm"].get<double>());
  else
    throw std::invalid_argument("config: need norm or norms");
  cfg.pairwise_corr = j.value("pairwise_corr", 0.0);
  cfg.sigma = j.value("sigma", 1.0);
  for (const auto& c : j.at("classifiers"))
    cfg.classifiers.push_back(rule_from_name(c.get<std::string>()));
  if (j.contains("weights")) cfg.weights = to_vector(j["weights"]);
  cfg.trials = j.value("trials", 5);
  cfg.n_mc = j.value("n_mc", std::size_t{200000});
  cfg.n_moments = j.value("n_moments", std::size_t{200000});
  cfg.n_test = j.value("n_test", 20000);
  cfg.classwise = j.value("classwise", true);
  cfg.ce_steps = j.value("ce_steps", 300);
  cfg.ce_lr = j.value("ce_lr", 1.0);
  cfg.seed = j.value("seed", std::uint64_t{1});
  cfg.name = j.value("name", "");
  cfg.note = j.value("note", "");
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  return parse_config(f);
}

namespace {

struct TheoryCell {
  double total = kNaN;
  double total_se = kNaN;
  VectorXd classwise;
  VectorXd classwise_se;
};

WeightSpec resolve_weights(const ExperimentConfig& cfg, const VectorXd& pi) {
  if (cfg.weights.size()) return WeightSpec(cfg.weights);
  return WeightSpec::inv_sqrt_prior(pi);
}

// Theory prediction + error evaluation for one (gamma, rule) cell.
TheoryCell theory_cell(const ExperimentConfig& cfg, const MeanEnsemble& means,
                       const SoftmaxMoments* mom, Rule rule, double gamma,
                       std::uint64_t seed) {
  TheoryCell cell;
  cell.classwise = VectorXd::Constant(cfg.k, kNaN);
  cell.classwise_se = VectorXd::Constant(cfg.k, kNaN);
  if (rule == Rule::CE) return cell;  // empirical-only

  const AspectRatio g(gamma);
  if (cfg.model == ModelKind::GMM) {
    GmmInstance inst(means, PriorSpec(cfg.priors), cfg.sigma);
    CorrelationSummary s;
    switch (rule) {
      case Rule::Avg: s = predict_avg_gmm(inst, g); break;
      case Rule::LS: s = predict_ls_gmm(inst, g); break;
      case Rule::WLS:
        s = predict_wls_gmm(inst, g, resolve_weights(cfg, cfg.priors));
        break;
      default: return cell;
    }
    double var = 0.0;
    cell.total = 0.0;
    for (int c = 0; c < cfg.k; ++c) {
      const ProbEstimate pc = classwise_error_gmm(
          s, means, cfg.sigma, c, cfg.n_mc, derive_seed(seed, 100 + c));
      cell.classwise(c) = pc.value;
      cell.classwise_se(c) = pc.std_err;
      cell.total += cfg.priors(c) * pc.value;
      var += cfg.priors(c) * cfg.priors(c) * pc.std_err * pc.std_err;
    }
    cell.total_se = std::sqrt(var);
  } else {
    MlmInstance inst(means);
    CorrelationSummary s;
    switch (rule) {
      case Rule::Avg: s = predict_avg_mlm(inst, g, *mom); break;
      case Rule::LS: s = predict_ls_mlm(inst, g, *mom); break;
      case Rule::WLS:
        s = predict_wls_mlm(inst, g, resolve_weights(cfg, mom->pi), *mom,
                            {cfg.n_moments, derive_seed(seed, 7)});
        break;
      default: return cell;
    }
    const ProbEstimate tot = total_error_mlm(s, cfg.n_mc, derive_seed(seed, 3));
    cell.total = tot.value;
    cell.total_se = tot.std_err;
    if (cfg.classwise) {
      const std::size_t n_outer = std::max<std::size_t>(cfg.n_mc / 10, 2000);
      for (int c = 0; c < cfg.k; ++c) {
        const ProbEstimate pc = classwise_error_mlm(
            s, c, n_outer, 1000, derive_seed(seed, 200 + c));
        cell.classwise(c) = pc.value;
        cell.classwise_se(c) = pc.std_err;
      }
    }
  }
  return cell;
}

struct EmpiricalCell {
  double total = kNaN;
  double total_se = kNaN;
  VectorXd classwise;
  VectorXd classwise_se;
};

EmpiricalCell empirical_cell(const ExperimentConfig& cfg,
                             const MeanEnsemble& means, Rule rule, double gamma,
                             int n, std::uint64_t seed) {
  EmpiricalCell cell;
  cell.classwise =
      cfg.classwise ? VectorXd::Constant(cfg.k, kNaN) : VectorXd();
  cell.classwise_se = cell.classwise;
  if (cfg.trials <= 0) return cell;

  std::vector<double> totals(cfg.trials);
  MatrixXd classwise(cfg.k, cfg.trials);
  for (int t = 0; t < cfg.trials; ++t) {
    const std::uint64_t strain = derive_seed(seed, 2 * t);
    const std::uint64_t stest = derive_seed(seed, 2 * t + 1);
    Dataset train, test;
    if (cfg.model == ModelKind::GMM) {
      GmmInstance inst(means, PriorSpec(cfg.priors), cfg.sigma);
      train = sample_gmm(inst, n, strain);
      test = sample_gmm(inst, cfg.n_test, stest);
    } else {
      MlmInstance inst(means);
      train = sample_mlm(inst, n, strain);
      test = sample_mlm(inst, cfg.n_test, stest);
    }
    LinearClassifier clf;
    switch (rule) {
      case Rule::Avg: clf = fit_avg(train); break;
      case Rule::LS: clf = fit_ls(train); break;
      case Rule::WLS: {
        VectorXd pi_for_w = cfg.priors;
        if (cfg.model == ModelKind::MLM) {
          // Weight by the empirical class frequencies of the training set.
          pi_for_w = train.Y.rowwise().sum() / train.size();
          pi_for_w = pi_for_w.cwiseMax(1.0 / train.size());
          pi_for_w /= pi_for_w.sum();
        }
        clf = fit_wls(train, resolve_weights(cfg, pi_for_w));
        break;
      }
      case Rule::CE: clf = fit_ce(train, cfg.ce_steps, cfg.ce_lr); break;
    }
    const EmpiricalError err = empirical_error(clf, test);
    totals[t] = err.total;
    classwise.col(t) = err.classwise;
  }
  auto mean_se = [&](const std::vector<double>& v, double& m, double& se) {
    m = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    se = v.size() > 1 ? std::sqrt(ss / (v.size() - 1.0) / v.size()) : 0.0;
  };
  mean_se(totals, cell.total, cell.total_se);
  if (cfg.classwise) {
    for (int c = 0; c < cfg.k; ++c) {
      std::vector<double> vc;
      for (int t = 0; t < cfg.trials; ++t)
        if (std::isfinite(classwise(c, t))) vc.push_back(classwise(c, t));
      if (!vc.empty()) {
        double m, se;
        mean_se(vc, m, se);
        cell.classwise(c) = m;
        cell.classwise_se(c) = se;
      }
    }
  }
  return cell;
}

double safe_ratio(double emp, double theory) {
  if (!std::isfinite(emp) || !std::isfinite(theory) || theory == 0.0)
    return kNaN;
  return emp / theory;
}

}  // namespace

SweepTable run_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  MeanEnsemble means =
      make_orthogonal_ensemble(cfg.k, cfg.d, cfg.norms, cfg.pairwise_corr);
  SoftmaxMoments mom;
  if (cfg.model == ModelKind::MLM)
    mom = estimate_moments(means, cfg.n_moments, derive_seed(cfg.seed, 999));

  std::vector<double> grid = cfg.gamma_grid;
  std::sort(grid.begin(), grid.end());
  SweepTable table;
  std::uint64_t cell_index = 0;
  for (double gamma : grid) {
    const int n = static_cast<int>(std::lround(cfg.d / gamma));
    for (Rule rule : cfg.classifiers) {
      const std::uint64_t cell_seed = derive_seed(cfg.seed, ++cell_index);
      TheoryCell th;
      EmpiricalCell em;
      std::string error;
      try {
        th = theory_cell(cfg, means, &mom, rule, gamma,
                         derive_seed(cell_seed, 1));
        em = empirical_cell(cfg, means, rule, gamma, n,
                            derive_seed(cell_seed, 2));
      } catch (const std::exception& e) {
        error = e.what();
        th.classwise = VectorXd::Constant(cfg.k, kNaN);
        th.classwise_se = th.classwise;
      }
      SweepRow total_row;
      total_row.gamma = gamma;
      total_row.classifier = rule;
      total_row.class_id = 0;
      total_row.empirical = em.total;
      total_row.emp_se = em.total_se;
      total_row.theory = th.total;
      total_row.theory_se = th.total_se;
      total_row.ratio = safe_ratio(em.total, th.total);
      total_row.error = error;
      table.push_back(total_row);
      if (cfg.classwise && error.empty()) {
        for (int c = 0; c < cfg.k; ++c) {
          SweepRow row = total_row;
          row.class_id = c + 1;
          row.empirical = em.classwise.size() ? em.classwise(c) : kNaN;
          row.emp_se = em.classwise_se.size() ? em.classwise_se(c) : kNaN;
          row.theory = th.classwise(c);
          row.theory_se = th.classwise_se(c);
          row.ratio = safe_ratio(row.empirical, row.theory);
          table.push_back(row);
        }
      }
    }
  }
  return table;
}

CrossoverResult run_crossover(const ExperimentConfig& cfg) {
  if (cfg.model != ModelKind::MLM)
    throw std::invalid_argument("run_crossover: MLM config required");
  if ((cfg.norms.array() != cfg.norms(0)).any() || cfg.pairwise_corr != 0.0)
    throw std::invalid_argument(
        "run_crossover: needs orthogonal equal-energy means");
  const double mu = cfg.norms(0);
  CrossoverResult res;
  const GammaStar gs =
      gamma_star(mu, cfg.k, cfg.n_mc, derive_seed(cfg.seed, 41));
  res.gamma_star = gs.value;
  res.gamma_star_se = gs.std_err;

  MeanEnsemble means = make_orthogonal_ensemble(cfg.k, cfg.d, cfg.norms, 0.0);
  MlmInstance inst(means);
  const SoftmaxMoments mom =
      estimate_moments(means, cfg.n_moments, derive_seed(cfg.seed, 999));

  std::vector<double> grid = cfg.gamma_grid;
  grid.push_back(std::max(res.gamma_star - 0.05, 1e-3));
  grid.push_back(std::min(res.gamma_star + 0.05, 0.999));
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::map<double, std::pair<ProbEstimate, ProbEstimate>> errs;  // avg, ls
  std::uint64_t idx = 0;
  for (double gamma : grid) {
    if (!(gamma > 0.0 && gamma < 1.0)) continue;
    const AspectRatio g(gamma);
    const CorrelationSummary sa = predict_avg_mlm(inst, g, mom);
    const CorrelationSummary sl = predict_ls_mlm(inst, g, mom);
    const ProbEstimate ea =
        total_error_mlm(sa, cfg.n_mc, derive_seed(cfg.seed, 1000 + idx));
    const ProbEstimate el =
        total_error_mlm(sl, cfg.n_mc, derive_seed(cfg.seed, 2000 + idx));
    ++idx;
    errs[gamma] = {ea, el};
    for (Rule rule : {Rule::Avg, Rule::LS}) {
      SweepRow row;
      row.gamma = gamma;
      row.classifier = rule;
      row.class_id = 0;
      row.empirical = kNaN;
      row.emp_se = kNaN;
      const ProbEstimate& e = (rule == Rule::Avg) ? ea : el;
      row.theory = e.value;
      row.theory_se = e.std_err;
      row.ratio = kNaN;
      res.table.push_back(row);
    }
  }
  // Sign check across the grid (which straddles gamma* by construction):
  // LS better below gamma*, Avg better above, up to the combined Monte
  // Carlo uncertainty.
  res.sign_flips = true;
  for (const auto& [gamma, pair] : errs) {
    const auto& [ea, el] = pair;
    const double diff = el.value - ea.value;
    const double tol = 3.0 * (ea.std_err + el.std_err);
    if (gamma < res.gamma_star) {
      if (diff > tol) res.sign_flips = false;
    } else {
      if (diff < -tol) res.sign_flips = false;
    }
  }
  return res;
}

namespace {

std::string fmt_cell(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void emit_csv(const SweepTable& table, std::ostream& os) {
  os << "gamma,classifier,class_id,empirical,emp_se,theory,theory_se,ratio\n";
  for (const SweepRow& r : table) {
    os << fmt_cell(r.gamma) << "," << rule_name(r.classifier) << ","
       << r.class_id << "," << fmt_cell(r.empirical) << ","
       << fmt_cell(r.emp_se) << "," << fmt_cell(r.theory) << ","
       << fmt_cell(r.theory_se) << "," << fmt_cell(r.ratio) << "\n";
  }
}

void emit_csv_file(const SweepTable& table, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  emit_csv(table, f);
}

SweepTable parse_sweep_csv(std::istream& is) {
  SweepTable table;
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("parse_sweep_csv: empty file");
  if (line != "gamma,classifier,class_id,empirical,emp_se,theory,theory_se,ratio")
    throw std::runtime_error("parse_sweep_csv: unexpected header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    cells.resize(8);
    auto num = [](const std::string& s) {
      return s.empty() ? kNaN : std::stod(s);
    };
    SweepRow r;
    r.gamma = num(cells[0]);
    r.classifier = rule_from_name(cells[1]);
    r.class_id = std::stoi(cells[2]);
    r.empirical = num(cells[3]);
    r.emp_se = num(cells[4]);
    r.theory = num(cells[5]);
    r.theory_se = num(cells[6]);
    r.ratio = num(cells[7]);
    table.push_back(r);
  }
  return table;
}

void emit_plot_script(const SweepTable& table, const std::string& csv_path,
                      std::ostream& os) {
  (void)table;
  os << "#!/usr/bin/env python3\n"
        "# Error-vs-gamma overlay: theory curves as lines, empirical means\n"
        "# as markers with error bars. Reads only the CSV emitted next to\n"
        "# this script.\n"
        "import csv\n"
        "import matplotlib\n"
        "matplotlib.use('Agg')\n"
        "import matplotlib.pyplot as plt\n\n"
        "CSV_PATH = '"
     << csv_path
     << "'\n\n"
        "rows = []\n"
        "with open(CSV_PATH) as f:\n"
        "    for row in csv.DictReader(f):\n"
        "        if row['class_id'] != '0':\n"
        "            continue\n"
        "        rows.append(row)\n\n"
        "def col(rs, key):\n"
        "    return [float(r[key]) for r in rs if r[key] != '']\n\n"
        "fig, ax = plt.subplots(figsize=(5, 4))\n"
        "for clf in sorted({r['classifier'] for r in rows}):\n"
        "    rs = [r for r in rows if r['classifier'] == clf]\n"
        "    rs.sort(key=lambda r: float(r['gamma']))\n"
        "    th = [r for r in rs if r['theory'] != '']\n"
        "    if th:\n"
        "        ax.plot([float(r['gamma']) for r in th],\n"
        "                [float(r['theory']) for r in th], label=clf + ' theory')\n"
        "    em = [r for r in rs if r['empirical'] != '']\n"
        "    if em:\n"
        "        ax.errorbar([float(r['gamma']) for r in em],\n"
        "                    [float(r['empirical']) for r in em],\n"
        "                    yerr=[float(r['emp_se'] or 0) for r in em],\n"
        "                    fmt='o', ms=4, capsize=2, label=clf + ' empirical')\n"
        "ax.set_xlabel('gamma = d/n')\n"
        "ax.set_ylabel('probability of error')\n"
        "ax.legend(fontsize=8)\n"
        "fig.tight_layout()\n"
        "fig.savefig(CSV_PATH.replace('.csv', '.png'), dpi=150)\n"
        "print('wrote', CSV_PATH.replace('.csv', '.png'))\n";
}

}  // namespace mcl
