// robustlin CLI: train linear and conv-linear classifiers under controlled
// optimization biases, attack them with lp and Fourier-linf perturbations,
// certify maximal robustness against the convex minimum-norm oracle, and
// reproduce the linear-model figure data at desk scale.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 solver failure.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "robustlin/harness.hpp"

namespace {

using namespace robustlin;

void add_config_flags(CLI::App* app, ExperimentConfig& cfg, std::string& config_path) {
  app->add_option("--config", config_path, "JSON config file (flags override it)");
  app->add_option("--d", cfg.d, "feature dimension");
  app->add_option("--ratios", cfg.ratios, "d/n overparametrization ratios");
  app->add_option("--seeds", cfg.seeds, "dataset seeds");
  app->add_option("--loss", cfg.loss, "exponential|logistic|hinge");
  app->add_option("--steps", cfg.steps, "training steps");
  app->add_option("--ls-grid", cfg.ls_grid, "line-search max steps (gd tuning)");
  app->add_option("--lr-grid", cfg.lr_grid, "fixed rates (cd/signgd tuning)");
  app->add_option("--conv-d", cfg.conv_d, "conv figure dimension");
  app->add_option("--conv-ratios", cfg.conv_ratios, "conv figure d/n ratios");
  app->add_option("--conv-steps", cfg.conv_steps, "conv training steps");
  app->add_option("--conv-ls-grid", cfg.conv_ls_grid, "conv line-search max steps");
  app->add_option("--lambda-grid", cfg.lambda_grid, "regularization path lambdas");
  app->add_option("--prox-steps", cfg.prox_steps, "proximal iterations per lambda");
  app->add_option("--advtrain-steps", cfg.advtrain_steps, "adversarial training steps");
  app->add_option("--advtrain-lr", cfg.advtrain_lr, "adversarial training outer rate");
  app->add_option("--advtrain-eps-multipliers", cfg.advtrain_eps_multipliers,
                  "training eps as multiples of the certified eps");
  app->add_option("--advtrain-ratio", cfg.advtrain_ratio, "d/n for the trade-off figure");
  app->add_option("--attacks", cfg.attacks, "attack norms to sweep");
  app->add_option("--methods", cfg.methods, "methods for the figure-3 panels");
  app->add_option("--eps-step", cfg.eps_step, "epsilon grid resolution");
  app->add_option("--slack", cfg.slack, "allowed robust-accuracy slack");
  app->add_option("--parallelism", cfg.parallelism, "worker threads (0 = cores)");
  app->add_option("--out", cfg.out_dir, "output directory");
  app->add_flag("--svg", cfg.svg, "also render SVG line plots");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maximally robust linear classification workbench"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::string config_path;

  CLI::App* gen = app.add_subcommand("gen", "generate synthetic datasets");
  add_config_flags(gen, cfg, config_path);

  CLI::App* sweep = app.add_subcommand("sweep", "full figure-data sweep over d/n and seeds");
  add_config_flags(sweep, cfg, config_path);

  CLI::App* report = app.add_subcommand("report", "re-validate and re-aggregate figure CSVs");
  std::string report_dir = "out";
  bool report_svg = false;
  report->add_option("--in", report_dir, "directory with fig*.csv files");
  report->add_flag("--svg", report_svg, "also render SVG line plots");

  CLI::App* train = app.add_subcommand("train", "train one model on one dataset");
  TrainRequest treq;
  train->add_option("--data", treq.data_path, "dataset JSON")->required();
  train->add_option("--method", treq.method,
                    "cd|gd|signgd|conv2-gd|prox-l1|prox-l2|prox-linf|prox-fourier-l1|advtrain")
      ->required();
  train->add_option("--steps", treq.steps, "training steps");
  train->add_option("--loss", treq.loss, "loss kind");
  double train_lr = 0.0;
  train->add_option("--lr", train_lr, "fixed step size (default: line search)");
  train->add_option("--max-step", treq.max_step, "line-search max step");
  train->add_option("--lambda", treq.lambda, "regularization constant (prox methods)");
  train->add_option("--eps", treq.eps, "perturbation budget (advtrain)");
  train->add_option("--advtrain-norm", treq.advtrain_norm, "attack norm for advtrain");
  train->add_option("--record-every", treq.record_every, "trajectory sampling stride");
  std::int64_t init_seed = -1;
  train->add_option("--init-seed", init_seed, "random init seed (default: zero init)");
  train->add_option("--out-prefix", treq.out_prefix, "output file prefix");

  CLI::App* atk = app.add_subcommand("attack", "attack a trained model over a dataset");
  AttackRequest areq;
  atk->add_option("--data", areq.data_path, "dataset JSON")->required();
  atk->add_option("--model", areq.model_path, "model checkpoint JSON")->required();
  atk->add_option("--norm", areq.norm, "l1|l2|linf|fourier-linf");
  atk->add_option("--eps", areq.eps, "perturbation budget");
  std::string band;
  atk->add_option("--band", band, "low|high frequency band mask (fourier-linf)");
  atk->add_option("--cutoff", areq.band_cutoff, "band cutoff fraction");
  atk->add_option("--steps", areq.steps, "attack steps");
  atk->add_option("--mode", areq.mode, "projected|accumulate");
  atk->add_option("--loss", areq.loss, "loss kind");
  atk->add_option("--out", areq.out_csv, "report CSV path");

  CLI::App* eval = app.add_subcommand("eval", "robust accuracy over an epsilon grid");
  EvalRequest ereq;
  eval->add_option("--data", ereq.data_path, "dataset JSON")->required();
  eval->add_option("--model", ereq.model_path, "model checkpoint JSON")->required();
  eval->add_option("--norm", ereq.norm, "attack norm");
  double eval_eps_max = 0.0;
  eval->add_option("--eps-max", eval_eps_max, "grid top (default: 1.5x margin)");
  eval->add_option("--eps-step", ereq.eps_step, "grid resolution");
  eval->add_option("--slack", ereq.slack, "allowed accuracy slack");
  eval->add_option("--loss", ereq.loss, "loss kind");
  eval->add_option("--out-prefix", ereq.out_prefix, "output file prefix");

  CLI::App* oracle_cmd = app.add_subcommand("oracle", "certify the minimum-norm classifier");
  std::string oracle_data, oracle_norm = "linf", oracle_out = "certificate.json";
  oracle_cmd->add_option("--data", oracle_data, "dataset JSON")->required();
  oracle_cmd->add_option("--norm", oracle_norm, "attack norm");
  oracle_cmd->add_option("--out", oracle_out, "certificate JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (!config_path.empty()) {
      // config file first, then re-parse so explicit flags win
      cfg = robustlin::load_config(config_path);
      try {
        app.clear();
        app.parse(argc, argv);
      } catch (const CLI::ParseError&) {
        return 1;
      }
    }

    if (gen->parsed()) {
      auto files = cmd_gen(cfg);
      std::printf("wrote %zu dataset files under %s\n", files.size(), cfg.out_dir.c_str());
    } else if (sweep->parsed()) {
      auto files = cmd_sweep(cfg);
      for (const std::string& f : files) std::printf("%s\n", f.c_str());
    } else if (report->parsed()) {
      auto files = cmd_report(report_dir, report_svg);
      for (const std::string& f : files) std::printf("%s\n", f.c_str());
    } else if (train->parsed()) {
      if (train->count("--lr") > 0) treq.fixed_lr = train_lr;
      if (init_seed >= 0) treq.init_seed = std::uint64_t(init_seed);
      TrainOutcome out = cmd_train(treq);
      std::printf("%s\n%s\n", out.trajectory_csv.c_str(), out.checkpoint_json.c_str());
    } else if (atk->parsed()) {
      if (!band.empty()) areq.band = band;
      std::printf("%s\n", cmd_attack(areq).c_str());
    } else if (eval->parsed()) {
      if (eval->count("--eps-max") > 0) ereq.eps_max = eval_eps_max;
      auto [csv, json] = cmd_eval(ereq);
      std::printf("%s\n%s\n", csv.c_str(), json.c_str());
    } else if (oracle_cmd->parsed()) {
      std::printf("%s\n", cmd_oracle(oracle_data, oracle_norm, oracle_out).c_str());
    }
  } catch (const robustlin::solver_failure& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return 3;
  } catch (const robustlin::step_size_too_large& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
