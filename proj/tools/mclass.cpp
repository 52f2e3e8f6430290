// Command-line front end: theory predictions, empirical sweeps, the
// LS-vs-Avg crossover search, softmax-moment caching, and the validation
// battery.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mcl/acceptance.hpp"
#include "mcl/asymptotics.hpp"
#include "mcl/gausstail.hpp"
#include "mcl/harness.hpp"
#include "mcl/model.hpp"
#include "mcl/moments.hpp"
#include "mcl/rng.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config;
  std::string out_dir = ".";
  std::int64_t seed = -1;       // -1: keep the config seed
  std::int64_t trials = -1;     // -1: keep the config trials
  std::int64_t mc_samples = -1; // -1: keep the config n_mc
};

mcl::ExperimentConfig load(const CommonArgs& args) {
  mcl::ExperimentConfig cfg = mcl::load_config(args.config);
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  if (args.trials >= 0) cfg.trials = static_cast<int>(args.trials);
  if (args.mc_samples > 0) cfg.n_mc = static_cast<std::size_t>(args.mc_samples);
  return cfg;
}

void add_common(CLI::App* sub, CommonArgs& args, bool need_config = true) {
  auto* opt = sub->add_option("--config", args.config, "experiment config (JSON)");
  if (need_config) opt->required();
  sub->add_option("--out-dir", args.out_dir, "output directory");
  sub->add_option("--seed", args.seed, "override the config seed");
  sub->add_option("--trials", args.trials, "override the config trial count");
  sub->add_option("--mc-samples", args.mc_samples,
                  "override the theory-side Monte Carlo sample count");
}

std::string stem(const mcl::ExperimentConfig& cfg, const char* fallback) {
  return cfg.name.empty() ? fallback : cfg.name;
}

int cmd_predict(const CommonArgs& args) {
  mcl::ExperimentConfig cfg = load(args);
  cfg.trials = 0;  // theory only
  const mcl::SweepTable table = mcl::run_sweep(cfg);
  fs::create_directories(args.out_dir);
  const std::string path =
      (fs::path(args.out_dir) / (stem(cfg, "predict") + "_theory.csv")).string();
  mcl::emit_csv_file(table, path);
  mcl::emit_csv(table, std::cout);
  std::cerr << "wrote " << path << "\n";

  // Also emit the correlation-summary contract files per (gamma, rule).
  const mcl::MeanEnsemble means = mcl::make_orthogonal_ensemble(
      cfg.k, cfg.d, cfg.norms, cfg.pairwise_corr);
  mcl::SoftmaxMoments mom;
  if (cfg.model == mcl::ModelKind::MLM)
    mom = mcl::estimate_moments(means, cfg.n_moments,
                                mcl::derive_seed(cfg.seed, 999));
  for (double gamma : cfg.gamma_grid) {
    for (mcl::Rule rule : cfg.classifiers) {
      if (rule == mcl::Rule::CE) continue;  // no asymptotic theory for CE
      mcl::CorrelationSummary s;
      try {
        const mcl::AspectRatio g(gamma);
        if (cfg.model == mcl::ModelKind::GMM) {
          mcl::GmmInstance inst(means, mcl::PriorSpec(cfg.priors), cfg.sigma);
          if (rule == mcl::Rule::Avg)
            s = mcl::predict_avg_gmm(inst, g);
          else if (rule == mcl::Rule::LS)
            s = mcl::predict_ls_gmm(inst, g);
          else
            s = mcl::predict_wls_gmm(
                inst, g,
                cfg.weights.size()
                    ? mcl::WeightSpec(cfg.weights)
                    : mcl::WeightSpec::inv_sqrt_prior(cfg.priors));
        } else {
          mcl::MlmInstance inst(means);
          if (rule == mcl::Rule::Avg)
            s = mcl::predict_avg_mlm(inst, g, mom);
          else if (rule == mcl::Rule::LS)
            s = mcl::predict_ls_mlm(inst, g, mom);
          else
            s = mcl::predict_wls_mlm(
                inst, g,
                cfg.weights.size()
                    ? mcl::WeightSpec(cfg.weights)
                    : mcl::WeightSpec::inv_sqrt_prior(mom.pi),
                mom, {cfg.n_moments, mcl::derive_seed(cfg.seed, 7)});
        }
      } catch (const std::exception& e) {
        std::cerr << "skip summary for " << mcl::rule_name(rule)
                  << " at gamma=" << gamma << ": " << e.what() << "\n";
        continue;
      }
      char tag[64];
      std::snprintf(tag, sizeof(tag), "_%s_gamma%g_summary.csv",
                    mcl::rule_name(rule).c_str(), gamma);
      std::ofstream f(fs::path(args.out_dir) /
                      (stem(cfg, "predict") + tag));
      mcl::write_summary_csv(s, f);
    }
  }
  return 0;
}

int cmd_sweep(const CommonArgs& args) {
  const mcl::ExperimentConfig cfg = load(args);
  const mcl::SweepTable table = mcl::run_sweep(cfg);
  fs::create_directories(args.out_dir);
  const fs::path base = fs::path(args.out_dir) / stem(cfg, "sweep");
  const std::string csv = base.string() + ".csv";
  mcl::emit_csv_file(table, csv);
  std::ofstream plot(base.string() + "_plot.py");
  mcl::emit_plot_script(table, csv, plot);
  std::cerr << "wrote " << csv << " and " << base.string() << "_plot.py\n";
  return 0;
}

int cmd_crossover(const CommonArgs& args) {
  const mcl::ExperimentConfig cfg = load(args);
  const mcl::CrossoverResult res = mcl::run_crossover(cfg);
  fs::create_directories(args.out_dir);
  const std::string csv =
      (fs::path(args.out_dir) / (stem(cfg, "crossover") + ".csv")).string();
  mcl::emit_csv_file(res.table, csv);
  std::cout << "gamma_star = " << res.gamma_star << " +- " << res.gamma_star_se
            << "\nsign_flips = " << (res.sign_flips ? "yes" : "no") << "\n";
  std::cerr << "wrote " << csv << "\n";
  return res.sign_flips ? 0 : 1;
}

int cmd_moments(const CommonArgs& args) {
  const mcl::ExperimentConfig cfg = load(args);
  const mcl::MeanEnsemble means = mcl::make_orthogonal_ensemble(
      cfg.k, cfg.d, cfg.norms, cfg.pairwise_corr);
  const mcl::SoftmaxMoments mom = mcl::estimate_moments(
      means, cfg.n_moments, mcl::derive_seed(cfg.seed, 999));
  fs::create_directories(args.out_dir);
  const std::string path =
      (fs::path(args.out_dir) / (stem(cfg, "moments") + "_moments.csv"))
          .string();
  std::ofstream f(path);
  mcl::write_moments_csv(mom, f);
  std::cerr << "wrote " << path << "\n";
  return 0;
}

int cmd_validate(const CommonArgs& args) {
  mcl::acceptance::Options opt;
  if (args.seed >= 0) opt.seed = static_cast<std::uint64_t>(args.seed);
  return mcl::acceptance::run_and_print(opt, std::cout) == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sharp asymptotics for linear multiclass classification"};
  app.require_subcommand(1);

  CommonArgs a_predict, a_sweep, a_cross, a_moments, a_validate;
  auto* predict = app.add_subcommand(
      "predict", "theory summaries and error curves for a config");
  add_common(predict, a_predict);
  auto* sweep = app.add_subcommand(
      "sweep", "empirical-vs-theory sweep over the gamma grid");
  add_common(sweep, a_sweep);
  auto* cross = app.add_subcommand(
      "crossover", "locate the LS-vs-Avg crossover for an MLM config");
  add_common(cross, a_cross);
  auto* moments = app.add_subcommand(
      "moments", "estimate and cache softmax moments for a config");
  add_common(moments, a_moments);
  auto* validate =
      app.add_subcommand("validate", "run the acceptance battery");
  add_common(validate, a_validate, /*need_config=*/false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (predict->parsed()) return cmd_predict(a_predict);
    if (sweep->parsed()) return cmd_sweep(a_sweep);
    if (cross->parsed()) return cmd_crossover(a_cross);
    if (moments->parsed()) return cmd_moments(a_moments);
    if (validate->parsed()) return cmd_validate(a_validate);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
