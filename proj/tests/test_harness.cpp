#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "robustlin/harness.hpp"
#include "robustlin/oracle.hpp"

using namespace robustlin;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

ExperimentConfig tiny_config(const std::string& out) {
  ExperimentConfig cfg;
  cfg.d = 12;
  cfg.ratios = {2, 4};
  cfg.seeds = {0, 1};
  cfg.steps = 2000;
  cfg.lr_grid = {0.01, 0.1, 0.3};
  cfg.ls_grid = {10, 100};
  cfg.conv_d = 8;
  cfg.conv_ratios = {2};
  cfg.conv_steps = 10000;
  cfg.prox_steps = 20000;
  cfg.lambda_grid = {1e-2, 1e-3};
  cfg.advtrain_steps = 4000;
  cfg.advtrain_lr = 0.05;
  cfg.advtrain_eps_multipliers = {0.5, 1.0};
  cfg.advtrain_ratio = 4;
  cfg.eps_step = 0.01;
  cfg.out_dir = out;
  cfg.parallelism = 2;
  return cfg;
}

}  // namespace

TEST_CASE("format_double round-trips doubles exactly") {
  Xoshiro256pp rng(91);
  for (int t = 0; t < 2000; ++t) {
    double x = std::exp(20.0 * rng.next_gaussian());
    if (t % 2) x = -x;
    CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  }
  CHECK(format_double(0.25) == "0.25");
  CHECK(format_double(1.0) == "1");
}

TEST_CASE("csv validation catches schema drift") {
  TempDir dir("robustlin_csvtest");
  std::string path = dir.str() + "/t.csv";
  write_file(path, "a,b\n1,2\n3,4\n");
  CHECK_NOTHROW(validate_csv(path, {"a", "b"}, {0, 1}));
  CHECK_THROWS_AS(validate_csv(path, {"a", "c"}, {0, 1}), malformed_file);
  write_file(path, "a,b\n1\n");
  CHECK_THROWS_AS(validate_csv(path, {"a", "b"}, {0}), malformed_file);
  write_file(path, "a,b\n1,x\n");
  CHECK_THROWS_AS(validate_csv(path, {"a", "b"}, {0, 1}), malformed_file);
}

TEST_CASE("gen writes the full grid deterministically") {
  TempDir dir("robustlin_gentest");
  ExperimentConfig cfg;
  cfg.out_dir = dir.str();
  cfg.d = 32;  // the default ratio grid runs down to n = 1
  auto files = cmd_gen(cfg);
  CHECK(files.size() == 18);  // 6 ratios x 3 seeds
  std::string before = slurp(files.front());
  auto files2 = cmd_gen(cfg);
  CHECK(slurp(files2.front()) == before);  // identical bytes on rerun

  ExperimentConfig bad = cfg;
  bad.ratios = {0.0};
  CHECK_THROWS_AS(cmd_gen(bad), invalid_input);
  bad.ratios = {double(cfg.d) * 2};  // implies n = 0
  CHECK_THROWS_AS(cmd_gen(bad), invalid_input);
  bad = cfg;
  bad.methods.clear();
  CHECK_THROWS_AS(cmd_sweep(bad), invalid_input);
}

TEST_CASE("train/eval loop matches the certified epsilon") {
  TempDir dir("robustlin_traintest");
  Dataset ds = generate(12, 6, 3);
  std::string data_path = dir.str() + "/data.json";
  save(ds, data_path);

  TrainRequest treq;
  treq.data_path = data_path;
  treq.method = "gd";
  treq.steps = 4000;
  treq.out_prefix = dir.str() + "/gd";
  TrainOutcome out = cmd_train(treq);
  CHECK(fs::exists(out.trajectory_csv));
  CHECK(fs::exists(out.checkpoint_json));

  EvalRequest ereq;
  ereq.data_path = data_path;
  ereq.model_path = out.checkpoint_json;
  ereq.norm = "l2";
  ereq.eps_step = 0.01;
  ereq.out_prefix = dir.str() + "/gd_eval";
  auto [csv, json] = cmd_eval(ereq);
  nlohmann::json summary;
  std::ifstream(json) >> summary;

  Certificate cert = min_norm(ds, NormKind::L2);
  REQUIRE(cert.status == SolveStatus::Optimal);
  CHECK(std::abs(summary["max_eps"].get<double>() - cert.implied_max_eps) <= 0.011);
}

TEST_CASE("train handles every method name") {
  TempDir dir("robustlin_methods");
  Dataset ds = generate(8, 4, 5);
  std::string data_path = dir.str() + "/data.json";
  save(ds, data_path);
  for (std::string method : {"cd", "signgd", "prox-l1", "prox-fourier-l1", "conv2-gd"}) {
    TrainRequest treq;
    treq.data_path = data_path;
    treq.method = method;
    treq.steps = 500;
    treq.fixed_lr = method == "signgd" ? std::optional<double>(0.01) : std::nullopt;
    treq.lambda = 1e-3;
    treq.init_seed = 0;
    treq.out_prefix = dir.str() + "/" + method;
    TrainOutcome out = cmd_train(treq);
    CHECK(fs::exists(out.checkpoint_json));
  }
  TrainRequest adv;
  adv.data_path = data_path;
  adv.method = "advtrain";
  adv.steps = 500;
  adv.eps = 0.1;
  adv.fixed_lr = 0.05;
  adv.out_prefix = dir.str() + "/adv";
  CHECK_NOTHROW(cmd_train(adv));
  TrainRequest bad = adv;
  bad.method = "mystery";
  CHECK_THROWS_AS(cmd_train(bad), invalid_input);
}

TEST_CASE("attack report distinguishes the band budgets") {
  TempDir dir("robustlin_bandtest");
  Dataset ds = generate(16, 5, 7);
  std::string data_path = dir.str() + "/data.json";
  save(ds, data_path);
  TrainRequest treq;
  treq.data_path = data_path;
  treq.method = "gd";
  treq.steps = 1000;
  treq.out_prefix = dir.str() + "/gd";
  TrainOutcome model = cmd_train(treq);

  AttackRequest high;
  high.data_path = data_path;
  high.model_path = model.checkpoint_json;
  high.norm = "fourier-linf";
  high.eps = 15.0 / 255.0;
  high.band = "high";
  high.out_csv = dir.str() + "/high.csv";
  cmd_attack(high);

  AttackRequest low = high;
  low.eps = 45.0 / 255.0;
  low.band = "low";
  low.out_csv = dir.str() + "/low.csv";
  cmd_attack(low);

  std::string high_csv = slurp(high.out_csv), low_csv = slurp(low.out_csv);
  CHECK(high_csv.find(format_double(15.0 / 255.0)) != std::string::npos);
  CHECK(low_csv.find(format_double(45.0 / 255.0)) != std::string::npos);
  CHECK(high_csv != low_csv);
}

TEST_CASE("oracle command reports infeasibility as a result") {
  TempDir dir("robustlin_oracletest");
  Dataset ds;
  ds.d = 2;
  ds.n = 2;
  ds.features = {1.0, 0.0, 1.0, 0.0};
  ds.labels = {+1, -1};
  std::string data_path = dir.str() + "/bad.json";
  save(ds, data_path);
  std::string cert_path = dir.str() + "/cert.json";
  cmd_oracle(data_path, "linf", cert_path);
  nlohmann::json j;
  std::ifstream(cert_path) >> j;
  CHECK(j["status"] == "infeasible");
  CHECK(j.contains("farkas"));
}

TEST_CASE("sweep emits schema-valid figures and honors theory at d/n = 4") {
  TempDir dir("robustlin_sweeptest");
  ExperimentConfig cfg = tiny_config(dir.str());
  cfg.methods = {"cd", "gd", "signgd", "oracle"};
  cfg.attacks = {"linf", "fourier-linf"};
  auto files = cmd_sweep(cfg);
  CHECK(fs::exists(dir.path / "fig3_linf.csv"));
  CHECK(fs::exists(dir.path / "fig4_fourier_linf.csv"));
  CHECK(fs::exists(dir.path / "fig5a_advtrain_linf.csv"));
  CHECK(fs::exists(dir.path / "fig5b_regpath_linf.csv"));
  CHECK(fs::exists(dir.path / "sweep_log.csv"));

  // no failed cells
  std::string log = slurp((dir.path / "sweep_log.csv").string());
  CHECK(log.find("failed") == std::string::npos);

  // parse fig3_linf and check the lemma-1 consistency plus CD dominance at d/n = 4
  std::ifstream in(dir.path / "fig3_linf.csv");
  std::string line;
  std::getline(in, line);
  std::map<std::string, std::vector<double>> margins_at_4;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string ratio_s, method, seed_s, eps_s, margin_s;
    std::getline(ss, ratio_s, ',');
    std::getline(ss, method, ',');
    std::getline(ss, seed_s, ',');
    std::getline(ss, eps_s, ',');
    std::getline(ss, margin_s, ',');
    double est = std::stod(eps_s), mu = std::stod(margin_s);
    CHECK(std::abs(est - mu) <= cfg.eps_step + 1e-9);  // lemma-1 loop per cell
    if (std::stod(ratio_s) == 4.0) margins_at_4[method].push_back(mu);
  }
  auto avg = [&](const std::string& m) {
    double s = 0.0;
    for (double v : margins_at_4[m]) s += v;
    return s / double(margins_at_4[m].size());
  };
  CHECK(avg("cd") > avg("gd"));
  CHECK(avg("cd") > avg("signgd"));
  CHECK(avg("oracle") >= avg("cd") - 1e-9);

  // reporting re-validates and reproduces the aggregate byte for byte
  std::string mean_before = slurp((dir.path / "fig3_linf_mean.csv").string());
  cmd_report(dir.str(), false);
  CHECK(slurp((dir.path / "fig3_linf_mean.csv").string()) == mean_before);
}

TEST_CASE("sweep bytes do not depend on the worker count") {
  TempDir a("robustlin_par1"), b("robustlin_par2");
  ExperimentConfig cfg_a = tiny_config(a.str());
  cfg_a.methods = {"cd", "gd"};
  cfg_a.attacks = {"linf"};
  cfg_a.advtrain_eps_multipliers = {};
  cfg_a.lambda_grid = {};
  cfg_a.parallelism = 1;
  ExperimentConfig cfg_b = cfg_a;
  cfg_b.out_dir = b.str();
  cfg_b.parallelism = 4;
  cmd_sweep(cfg_a);
  cmd_sweep(cfg_b);
  CHECK(slurp(a.str() + "/fig3_linf.csv") == slurp(b.str() + "/fig3_linf.csv"));
}

TEST_CASE("config json round trip and validation") {
  TempDir dir("robustlin_cfgtest");
  std::string path = dir.str() + "/cfg.json";
  write_file(path, R"({"d": 24, "ratios": [2], "seeds": [5], "eps_step": 0.25,
                       "methods": ["gd"], "attacks": ["l2"], "svg": true})");
  ExperimentConfig cfg = load_config(path);
  CHECK(cfg.d == 24);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{5});
  CHECK(cfg.eps_step == 0.25);
  CHECK(cfg.svg);
  CHECK_NOTHROW(validate_config(cfg));

  write_file(path, R"({"d": "many"})");
  CHECK_THROWS_AS(load_config(path), malformed_file);
}

TEST_CASE("svg plot contains every series") {
  SvgSeries s1{"alpha", {1, 2, 4}, {0.1, 0.2, 0.3}, {0.01, 0.01, 0.01}};
  SvgSeries s2{"beta", {1, 2, 4}, {0.3, 0.2, 0.1}, {}};
  std::string svg = render_svg_plot("demo", "d/n", "eps", {s1, s2});
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("alpha") != std::string::npos);
  CHECK(svg.find("beta") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.rfind("</svg>\n") == svg.size() - 7);
}
