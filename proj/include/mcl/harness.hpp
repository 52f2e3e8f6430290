#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mcl/types.hpp"

namespace mcl {

enum class ModelKind { GMM, MLM };

// One experiment: a mean geometry, a gamma grid, a classifier set, and the
// Monte Carlo budgets. Parsed from JSON (see presets/).
struct ExperimentConfig {
  ModelKind model = ModelKind::GMM;
  int k = 2;
  int d = 100;
  std::vector<double> gamma_grid;
  VectorXd priors;          // GMM only; defaults to uniform
  VectorXd norms;           // per-class mean norms
  double pairwise_corr = 0.0;
  double sigma = 1.0;       // GMM noise level
  std::vector<Rule> classifiers;
  VectorXd weights;         // WLS omega; empty means 1/sqrt(prior)
  int trials = 5;
  std::size_t n_mc = 200000;   // theory-side Monte Carlo samples
  std::size_t n_moments = 200000;
  int n_test = 20000;          // per-trial test set size
  bool classwise = true;       // per-class theory columns
  int ce_steps = 300;
  double ce_lr = 1.0;
  std::uint64_t seed = 1;
  std::string name;
  std::string note;

  void validate() const;
};

ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);

// One sweep cell. class_id 0 is the total error; 1..k are class-wise.
// Missing values (CE theory, failed cells, trials = 0) are NaN.
struct SweepRow {
  double gamma = 0.0;
  Rule classifier = Rule::Avg;
  int class_id = 0;
  double empirical = 0.0;
  double emp_se = 0.0;
  double theory = 0.0;
  double theory_se = 0.0;
  double ratio = 0.0;
  std::string error;  // per-cell failure, sweep continues
};

using SweepTable = std::vector<SweepRow>;

// Runs trials empirical replicates per (gamma, classifier) cell against the
// matching asymptotic prediction. Deterministic for a given config.
SweepTable run_sweep(const ExperimentConfig& cfg);

struct CrossoverResult {
  double gamma_star = 0.0;
  double gamma_star_se = 0.0;
  bool sign_flips = true;
  SweepTable table;  // theory errors for Avg and LS on the gamma grid
};

// Locates the LS-vs-Avg crossover for an MLM config with orthogonal
// equal-energy means and evaluates the theory errors on a grid straddling
// gamma*.
CrossoverResult run_crossover(const ExperimentConfig& cfg);

void emit_csv(const SweepTable& table, std::ostream& os);
void emit_csv_file(const SweepTable& table, const std::string& path);
SweepTable parse_sweep_csv(std::istream& is);

// Self-contained matplotlib script reproducing an error-vs-gamma overlay
// from the emitted CSV.
void emit_plot_script(const SweepTable& table, const std::string& csv_path,
                      std::ostream& os);

}  // namespace mcl
