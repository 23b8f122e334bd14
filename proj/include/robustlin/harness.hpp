#pragma once

// Experiment harness behind the CLI: dataset generation, tuned training
// runs, attacks, robustness sweeps over d/n and seeds, oracle certification,
// and figure-data CSV/SVG emission. Everything here is deterministic given
// the config; CSV bytes depend only on (config, seeds).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "robustlin/attack.hpp"
#include "robustlin/dataset.hpp"
#include "robustlin/errors.hpp"
#include "robustlin/margin.hpp"
#include "robustlin/model.hpp"
#include "robustlin/optim.hpp"
#include "robustlin/oracle.hpp"
#include "robustlin/robusteval.hpp"

namespace robustlin {

// Shortest representation that parses back to the same double.
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  double back = std::strtod(buf, nullptr);
  if (back == x) {
    for (int prec = 1; prec < 17; ++prec) {
      char probe[32];
      std::snprintf(probe, sizeof(probe), "%.*g", prec, x);
      if (std::strtod(probe, nullptr) == x) return probe;
    }
  }
  return buf;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row) {
    if (row.size() != header.size()) throw invalid_input("csv row arity mismatch");
    rows.push_back(std::move(row));
  }

  std::string to_string() const {
    std::ostringstream out;
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
    for (const auto& row : rows) {
      for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
      out << '\n';
    }
    return out.str();
  }
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw io_error("write failed: " + path);
}

// Header + arity + numeric-field validation for every emitted CSV.
inline void validate_csv(const std::string& path, const std::vector<std::string>& expect_header,
                         const std::vector<std::size_t>& numeric_columns) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw malformed_file(path + ": empty");
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      std::size_t pos = s.find(',', start);
      out.push_back(s.substr(start, pos == std::string::npos ? pos : pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    return out;
  };
  std::vector<std::string> header = split(line);
  if (header != expect_header) throw malformed_file(path + ": unexpected header");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields = split(line);
    if (fields.size() != header.size())
      throw malformed_file(path + ": wrong arity at line " + std::to_string(lineno));
    for (std::size_t col : numeric_columns) {
      char* end = nullptr;
      std::strtod(fields[col].c_str(), &end);
      if (end == fields[col].c_str() || *end != '\0')
        throw malformed_file(path + ": non-numeric field at line " + std::to_string(lineno));
    }
  }
}

// ---------------------------------------------------------------------------
// SVG line plots (no external renderer; enough for mean+-err curves)
// ---------------------------------------------------------------------------

struct SvgSeries {
  std::string label;
  std::vector<double> x, y, err;
};

inline std::string render_svg_plot(const std::string& title, const std::string& x_label,
                                   const std::string& y_label,
                                   const std::vector<SvgSeries>& series) {
  const double width = 640, height = 420, ml = 70, mr = 150, mt = 40, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      double e = i < s.err.size() ? s.err[i] : 0.0;
      ymin = std::min(ymin, s.y[i] - e);
      ymax = std::max(ymax, s.y[i] + e);
    }
  }
  if (xmin > xmax) { xmin = 0; xmax = 1; }
  if (ymin > ymax) { ymin = 0; ymax = 1; }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr); };
  auto py = [&](double y) { return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb); };
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                           "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << title << "</text>\n";
  // axes
  out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << height - mb << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    double xv = xmin + t * (xmax - xmin) / 4, yv = ymin + t * (ymax - ymin) / 4;
    out << "<text x=\"" << px(xv) << "\" y=\"" << height - mb + 18
        << "\" text-anchor=\"middle\">" << format_double(std::round(xv * 100) / 100)
        << "</text>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
        << format_double(std::round(yv * 1000) / 1000) << "</text>\n";
  }
  out << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  out << "<text x=\"18\" y=\"" << (mt + height - mb) / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << (mt + height - mb) / 2
      << ")\">" << y_label << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = palette[s % 8];
    std::ostringstream pts;
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      pts << (i ? " " : "") << px(series[s].x[i]) << "," << py(series[s].y[i]);
      if (i < series[s].err.size() && series[s].err[i] > 0.0) {
        double e = series[s].err[i];
        out << "<line x1=\"" << px(series[s].x[i]) << "\" y1=\"" << py(series[s].y[i] - e)
            << "\" x2=\"" << px(series[s].x[i]) << "\" y2=\"" << py(series[s].y[i] + e)
            << "\" stroke=\"" << color << "\" stroke-width=\"1\"/>\n";
      }
    }
    out << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\"/>\n";
    double ly = mt + 16.0 * double(s);
    out << "<line x1=\"" << width - mr + 10 << "\" y1=\"" << ly << "\" x2=\"" << width - mr + 30
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << width - mr + 35 << "\" y=\"" << ly + 4 << "\">" << series[s].label
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Experiment configuration (Table-1 defaults at desk scale)
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  // data
  std::size_t d = 64;  // reference runs use d = 100; this default keeps sweeps fast
  std::vector<double> ratios{1, 2, 4, 8, 16, 32};  // d/n
  std::vector<std::uint64_t> seeds{0, 1, 2};

  // training
  std::string loss = "exponential";
  long steps = 10000;
  std::vector<double> ls_grid{1, 10, 100, 1000};  // GD line-search max steps
  std::vector<double> lr_grid{1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1, 1};

  // conv model (figure-4 style runs)
  std::size_t conv_d = 32;
  std::vector<double> conv_ratios{2, 4, 8};
  long conv_steps = 100000;
  std::vector<double> conv_ls_grid{0.03, 0.1, 0.3};
  double conv_init_scale = 0.1;

  // explicit regularization
  double prox_lambda = 1e-4;
  std::vector<double> lambda_grid{1e-1, 1e-2, 1e-3, 1e-4};
  long prox_steps = 100000;
  double prox_max_step = 10.0;

  // adversarial training
  long advtrain_steps = 50000;
  double advtrain_lr = 0.03;
  long advtrain_inner_steps = 10;
  double advtrain_inner_lr = 0.1;
  std::vector<double> advtrain_eps_multipliers{0.25, 0.5, 1.0, 1.5};
  double advtrain_ratio = 4;  // d/n for the trade-off figure

  // evaluation
  std::vector<std::string> attacks{"linf", "l2", "l1", "fourier-linf"};
  std::vector<std::string> methods{"cd", "gd", "signgd", "prox-l1", "prox-l2", "prox-linf",
                                   "oracle"};
  double eps_step = 0.005;
  double slack = 0.0;

  // execution
  int parallelism = 0;  // 0 = hardware concurrency
  std::string out_dir = "out";
  bool svg = false;
};

inline void from_json_into(const nlohmann::json& j, ExperimentConfig& c) {
  try {
    if (j.contains("d")) c.d = j["d"].get<std::size_t>();
    if (j.contains("ratios")) c.ratios = j["ratios"].get<std::vector<double>>();
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("loss")) c.loss = j["loss"].get<std::string>();
    if (j.contains("steps")) c.steps = j["steps"].get<long>();
    if (j.contains("ls_grid")) c.ls_grid = j["ls_grid"].get<std::vector<double>>();
    if (j.contains("lr_grid")) c.lr_grid = j["lr_grid"].get<std::vector<double>>();
    if (j.contains("conv_d")) c.conv_d = j["conv_d"].get<std::size_t>();
    if (j.contains("conv_ratios")) c.conv_ratios = j["conv_ratios"].get<std::vector<double>>();
    if (j.contains("conv_steps")) c.conv_steps = j["conv_steps"].get<long>();
    if (j.contains("conv_ls_grid")) c.conv_ls_grid = j["conv_ls_grid"].get<std::vector<double>>();
    if (j.contains("conv_init_scale")) c.conv_init_scale = j["conv_init_scale"].get<double>();
    if (j.contains("prox_lambda")) c.prox_lambda = j["prox_lambda"].get<double>();
    if (j.contains("lambda_grid")) c.lambda_grid = j["lambda_grid"].get<std::vector<double>>();
    if (j.contains("prox_steps")) c.prox_steps = j["prox_steps"].get<long>();
    if (j.contains("prox_max_step")) c.prox_max_step = j["prox_max_step"].get<double>();
    if (j.contains("advtrain_steps")) c.advtrain_steps = j["advtrain_steps"].get<long>();
    if (j.contains("advtrain_lr")) c.advtrain_lr = j["advtrain_lr"].get<double>();
    if (j.contains("advtrain_inner_steps"))
      c.advtrain_inner_steps = j["advtrain_inner_steps"].get<long>();
    if (j.contains("advtrain_inner_lr")) c.advtrain_inner_lr = j["advtrain_inner_lr"].get<double>();
    if (j.contains("advtrain_eps_multipliers"))
      c.advtrain_eps_multipliers = j["advtrain_eps_multipliers"].get<std::vector<double>>();
    if (j.contains("advtrain_ratio")) c.advtrain_ratio = j["advtrain_ratio"].get<double>();
    if (j.contains("attacks")) c.attacks = j["attacks"].get<std::vector<std::string>>();
    if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
    if (j.contains("eps_step")) c.eps_step = j["eps_step"].get<double>();
    if (j.contains("slack")) c.slack = j["slack"].get<double>();
    if (j.contains("parallelism")) c.parallelism = j["parallelism"].get<int>();
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("svg")) c.svg = j["svg"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw malformed_file(std::string("config: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw malformed_file(path + ": " + e.what());
  }
  ExperimentConfig c;
  from_json_into(j, c);
  return c;
}

inline void validate_config(const ExperimentConfig& c) {
  if (c.d < 1) throw invalid_input("config: d must be positive");
  if (c.ratios.empty() || c.seeds.empty()) throw invalid_input("config: empty grid");
  for (double r : c.ratios) {
    if (r <= 0.0) throw invalid_input("config: ratios must be positive");
    if (std::size_t(c.d / r) < 1) throw invalid_input("config: ratio implies n = 0");
  }
  if (c.methods.empty()) throw invalid_input("config: empty method list");
  for (const std::string& a : c.attacks) norm_kind_from_string(a);
  loss_kind_from_string(c.loss);
  if (c.eps_step <= 0.0) throw invalid_input("config: eps_step must be positive");
}

// ---------------------------------------------------------------------------
// Tuned method runners. GD tolerates line search (max step tuned); CD and
// SignGD converge in direction only with small bounded steps, so they tune a
// fixed-rate grid instead.
// ---------------------------------------------------------------------------

inline LinearParams tuned_steepest(const Dataset& ds, SteepestKind kind, long steps,
                                   LossKind loss_kind, const std::vector<double>& ls_grid,
                                   const std::vector<double>& lr_grid) {
  NormKind attack_norm = dual(geometry_norm(kind));
  double best = -std::numeric_limits<double>::infinity();
  LinearParams best_model;
  auto consider = [&](const std::variant<double, LineSearch>& policy) {
    TrainConfig cfg;
    cfg.steps = steps;
    cfg.loss = loss_kind;
    cfg.step_size = policy;
    cfg.record_every = steps;
    Trajectory<LinearParams> traj = train_steepest(ds, kind, cfg);
    if (detail::is_all_zero(traj.final_params.w)) return;
    double mu = margin(traj.final_params.w, ds, attack_norm);
    if (mu > best) {
      best = mu;
      best_model = traj.final_params;
    }
  };
  if (kind == SteepestKind::GradientDescent) {
    for (double ms : ls_grid) consider(LineSearch{ms});
  } else {
    for (double lr : lr_grid) consider(lr);
  }
  if (best == -std::numeric_limits<double>::infinity())
    throw solver_failure("tuned_steepest: no run produced a usable model");
  return best_model;
}

inline ConvParams tuned_conv(const Dataset& ds, long steps, LossKind loss_kind,
                             const std::vector<double>& ls_grid, double init_scale,
                             std::uint64_t init_seed) {
  double best = -std::numeric_limits<double>::infinity();
  ConvParams best_model;
  for (double ms : ls_grid) {
    TrainConfig cfg;
    cfg.steps = steps;
    cfg.loss = loss_kind;
    cfg.step_size = LineSearch{ms};
    cfg.record_every = steps;
    cfg.init_seed = init_seed;
    cfg.init_scale = init_scale;
    Trajectory<ConvParams> traj = train_steepest_conv(ds, SteepestKind::GradientDescent, cfg);
    RealVec eff = effective_weight(traj.final_params);
    if (detail::is_all_zero(eff) || !all_finite(eff)) continue;
    double mu = margin(eff, ds, NormKind::FourierLInf);
    if (mu > best) {
      best = mu;
      best_model = traj.final_params;
    }
  }
  if (best == -std::numeric_limits<double>::infinity())
    throw solver_failure("tuned_conv: no run produced a usable model");
  return best_model;
}

// A sweep method applied to one dataset: returns the classifier vector the
// robustness of which the figure reports.
inline RealVec run_sweep_method(const std::string& method, const Dataset& ds,
                                const ExperimentConfig& cfg, NormKind attack_norm) {
  LossKind loss_kind = loss_kind_from_string(cfg.loss);
  if (method == "cd" || method == "gd" || method == "signgd") {
    return tuned_steepest(ds, steepest_kind_from_string(method), cfg.steps, loss_kind,
                          cfg.ls_grid, cfg.lr_grid)
        .w;
  }
  if (method == "oracle") {
    Certificate cert = min_norm(ds, attack_norm);
    if (cert.status != SolveStatus::Optimal)
      throw solver_failure("oracle method: dataset not separable");
    return cert.w;
  }
  if (method.rfind("prox-", 0) == 0) {
    NormKind penalty = norm_kind_from_string(method.substr(5));
    TrainConfig tc;
    tc.steps = cfg.prox_steps;
    tc.loss = loss_kind;
    tc.step_size = LineSearch{cfg.prox_max_step};
    std::vector<double> lambdas;
    for (double lam : cfg.lambda_grid)
      if (lambdas.empty() || lam < lambdas.back()) lambdas.push_back(lam);
    auto path = regularization_path(ds, penalty, lambdas, tc);
    return path.back().params.w;
  }
  if (method == "conv2-gd") {
    ConvParams p = tuned_conv(ds, cfg.conv_steps, loss_kind, cfg.conv_ls_grid,
                              cfg.conv_init_scale, ds.seed);
    return effective_weight(p);
  }
  if (method.rfind("advtrain", 0) == 0) {
    double mult = 1.0;
    if (method.size() > 9 && method[8] == '@') mult = std::stod(method.substr(9));
    Certificate cert = min_norm(ds, attack_norm);
    if (cert.status != SolveStatus::Optimal)
      throw solver_failure("advtrain: dataset not separable");
    TrainConfig tc;
    tc.steps = cfg.advtrain_steps;
    tc.loss = loss_kind;
    tc.step_size = cfg.advtrain_lr;
    return adversarial_train(ds, mult * cert.implied_max_eps, attack_norm, tc,
                             cfg.advtrain_inner_steps, cfg.advtrain_inner_lr)
        .w;
  }
  throw invalid_input("unknown method: " + method);
}

// ---------------------------------------------------------------------------
// Bounded worker pool for sweep cells
// ---------------------------------------------------------------------------

inline void run_parallel(std::vector<std::function<void()>> jobs, int parallelism) {
  if (parallelism <= 0) parallelism = int(std::thread::hardware_concurrency());
  if (parallelism < 1) parallelism = 1;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      jobs[i]();
    }
  };
  std::vector<std::thread> threads;
  for (int t = 1; t < parallelism && t < int(jobs.size()); ++t) threads.emplace_back(worker);
  worker();
  for (auto& th : threads) th.join();
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

inline std::string dataset_filename(std::size_t d, std::size_t n, std::uint64_t seed) {
  return "data_d" + std::to_string(d) + "_n" + std::to_string(n) + "_s" + std::to_string(seed) +
         ".json";
}

inline std::vector<std::string> cmd_gen(const ExperimentConfig& cfg) {
  validate_config(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  std::vector<std::string> written;
  for (double ratio : cfg.ratios) {
    std::size_t n = std::size_t(double(cfg.d) / ratio);
    if (n < 1) throw invalid_input("cmd_gen: ratio too large for d");
    for (std::uint64_t seed : cfg.seeds) {
      Dataset ds = generate(cfg.d, n, seed);
      std::string path = cfg.out_dir + "/" + dataset_filename(cfg.d, n, seed);
      save(ds, path);
      written.push_back(path);
    }
  }
  return written;
}

struct TrainOutcome {
  std::string trajectory_csv;
  std::string checkpoint_json;
};

inline const std::vector<std::string> kTrajectoryHeader{"step", "risk", "margin", "norm_of_w"};

inline double iterate_l2_norm(const LinearParams& p) { return l2_norm(p.w); }
inline double iterate_l2_norm(const ConvParams& p) { return l2_norm(effective_weight(p)); }

template <class Params>
CsvTable trajectory_table(const Trajectory<Params>& traj) {
  CsvTable table;
  table.header = kTrajectoryHeader;
  for (const auto& pt : traj.points) {
    table.add_row({std::to_string(pt.step), format_double(pt.risk), format_double(pt.margin),
                   format_double(iterate_l2_norm(pt.params))});
  }
  return table;
}

struct TrainRequest {
  std::string data_path;
  std::string method;            // cd|gd|signgd|conv2-gd|prox-<norm>|advtrain
  long steps = 10000;
  std::string loss = "exponential";
  std::optional<double> fixed_lr;     // fixed step if set, else line search
  double max_step = 100.0;            // line-search cap
  double lambda = 1e-4;               // prox methods
  double eps = 0.0;                   // advtrain
  std::string advtrain_norm = "linf";
  long record_every = 100;
  std::optional<std::uint64_t> init_seed;
  std::string out_prefix = "run";
};

inline TrainOutcome cmd_train(const TrainRequest& req) {
  Dataset ds = load(req.data_path);
  TrainConfig cfg;
  cfg.steps = req.steps;
  cfg.loss = loss_kind_from_string(req.loss);
  cfg.record_every = req.record_every;
  cfg.init_seed = req.init_seed;
  if (req.fixed_lr) cfg.step_size = *req.fixed_lr;
  else cfg.step_size = LineSearch{req.max_step};

  TrainOutcome out;
  out.trajectory_csv = req.out_prefix + "_trajectory.csv";
  out.checkpoint_json = req.out_prefix + "_model.json";

  if (req.method == "cd" || req.method == "gd" || req.method == "signgd") {
    Trajectory<LinearParams> traj =
        train_steepest(ds, steepest_kind_from_string(req.method), cfg);
    write_file(out.trajectory_csv, trajectory_table(traj).to_string());
    save_checkpoint(traj.final_params, out.checkpoint_json);
  } else if (req.method == "conv2-gd") {
    Trajectory<ConvParams> traj = train_steepest_conv(ds, SteepestKind::GradientDescent, cfg);
    write_file(out.trajectory_csv, trajectory_table(traj).to_string());
    save_checkpoint(traj.final_params, out.checkpoint_json);
  } else if (req.method.rfind("prox-", 0) == 0) {
    NormKind penalty = norm_kind_from_string(req.method.substr(5));
    ProxResult res = train_proximal(ds, RegKind{penalty, req.lambda}, cfg);
    CsvTable table;
    table.header = kTrajectoryHeader;
    double mu = detail::is_all_zero(res.params.w)
                    ? 0.0
                    : margin(res.params.w, ds, dual(penalty));
    table.add_row({std::to_string(res.iterations), format_double(res.objective),
                   format_double(mu), format_double(l2_norm(res.params.w))});
    write_file(out.trajectory_csv, table.to_string());
    save_checkpoint(res.params, out.checkpoint_json);
  } else if (req.method == "advtrain") {
    LinearParams p = adversarial_train(ds, req.eps, norm_kind_from_string(req.advtrain_norm), cfg);
    CsvTable table;
    table.header = kTrajectoryHeader;
    double mu = detail::is_all_zero(p.w)
                    ? 0.0
                    : margin(p.w, ds, norm_kind_from_string(req.advtrain_norm));
    table.add_row({std::to_string(req.steps), format_double(risk(p, ds, cfg.loss)),
                   format_double(mu), format_double(l2_norm(p.w))});
    write_file(out.trajectory_csv, table.to_string());
    save_checkpoint(p, out.checkpoint_json);
  } else {
    throw invalid_input("unknown method: " + req.method);
  }
  validate_csv(out.trajectory_csv, kTrajectoryHeader, {1, 2, 3});
  return out;
}

struct AttackRequest {
  std::string data_path;
  std::string model_path;
  std::string norm = "linf";
  double eps = 8.0 / 255.0;
  std::optional<std::string> band;  // "low" | "high"
  double band_cutoff = 0.5;
  long steps = 1;
  std::string mode = "projected";  // or "accumulate"
  std::string loss = "exponential";
  std::string out_csv = "attack_report.csv";
};

inline const std::vector<std::string> kAttackHeader{"sample_index", "norm_kind", "epsilon",
                                                    "steps",        "loss_before", "loss_after",
                                                    "flipped",      "achieved_norm"};

template <class Model>
CsvTable attack_report_table(const Model& model, const Dataset& ds, const AttackSpec& spec,
                             LossKind loss_kind, double eps_label) {
  CsvTable table;
  table.header = kAttackHeader;
  for (std::size_t i = 0; i < ds.n; ++i) {
    auto x = ds.sample(i);
    int y = ds.labels[i];
    double before = loss(loss_kind, y * detail::forward_of(model, x));
    Perturbation pert = attack(model, x, y, spec, loss_kind);
    RealVec moved(x.begin(), x.end());
    for (std::size_t j = 0; j < pert.delta.size(); ++j) moved[j] += pert.delta[j];
    double z_after = y * detail::forward_of(model, std::span<const double>(moved));
    bool flipped = y * detail::forward_of(model, x) > 0.0 && z_after <= 0.0;
    table.add_row({std::to_string(i), to_string(spec.norm), format_double(eps_label),
                   std::to_string(spec.steps), format_double(before),
                   format_double(loss(loss_kind, z_after)), flipped ? "1" : "0",
                   format_double(pert.achieved_norm)});
  }
  return table;
}

inline std::string cmd_attack(const AttackRequest& req) {
  Dataset ds = load(req.data_path);
  nlohmann::json model_json = load_checkpoint_json(req.model_path);
  LossKind loss_kind = loss_kind_from_string(req.loss);
  NormKind norm_kind = norm_kind_from_string(req.norm);
  AttackMode mode;
  if (req.mode == "projected") mode = AttackMode::Projected;
  else if (req.mode == "accumulate") mode = AttackMode::Accumulate;
  else throw invalid_input("unknown attack mode: " + req.mode);

  AttackSpec spec;
  if (req.band) {
    if (norm_kind != NormKind::FourierLInf)
      throw invalid_input("band masks require the fourier-linf norm");
    Band band;
    if (*req.band == "low") band = Band::Low;
    else if (*req.band == "high") band = Band::High;
    else throw invalid_input("band must be low or high");
    spec = AttackSpec::masked(band_mask(ds.d, band, req.eps, req.band_cutoff), req.steps, mode);
  } else {
    spec = AttackSpec::ball(norm_kind, req.eps, req.steps, mode);
  }

  CsvTable table;
  std::string kind = model_json.at("kind").get<std::string>();
  if (kind == "linear") {
    table = attack_report_table(linear_from_json(model_json), ds, spec, loss_kind, req.eps);
  } else if (kind == "conv2") {
    table = attack_report_table(conv_from_json(model_json), ds, spec, loss_kind, req.eps);
  } else {
    throw malformed_file("unknown model kind: " + kind);
  }
  write_file(req.out_csv, table.to_string());
  validate_csv(req.out_csv, kAttackHeader, {2, 4, 5, 7});
  return req.out_csv;
}

struct EvalRequest {
  std::string data_path;
  std::string model_path;
  std::string norm = "linf";
  std::optional<double> eps_max;  // default: 1.5x the model margin
  double eps_step = 0.005;
  double slack = 0.0;
  std::string loss = "exponential";
  std::string out_prefix = "eval";
};

inline const std::vector<std::string> kRobustHeader{"eps", "robust_accuracy"};

inline std::pair<std::string, std::string> cmd_eval(const EvalRequest& req) {
  Dataset ds = load(req.data_path);
  nlohmann::json model_json = load_checkpoint_json(req.model_path);
  NormKind norm_kind = norm_kind_from_string(req.norm);
  LossKind loss_kind = loss_kind_from_string(req.loss);
  if (model_json.at("kind").get<std::string>() != "linear")
    throw invalid_input("cmd_eval expects a linear checkpoint (conv models evaluate through "
                        "their effective weight; export one with train)");
  LinearParams model = linear_from_json(model_json);

  std::optional<double> mu;
  if (!detail::is_all_zero(model.w)) mu = margin(model.w, ds, norm_kind);
  double top = req.eps_max.value_or(mu && *mu > 0.0 ? 1.5 * *mu : 1.0);
  if (top < req.eps_step) top = req.eps_step;
  RobustReport rep =
      robust_report(model, ds, norm_kind, eps_grid(top, req.eps_step), loss_kind, req.slack);
  rep.margin = mu;

  CsvTable table;
  table.header = kRobustHeader;
  for (std::size_t i = 0; i < rep.eps_grid.size(); ++i) {
    table.add_row({format_double(rep.eps_grid[i]), format_double(rep.accuracy[i])});
  }
  std::string csv_path = req.out_prefix + "_robustness.csv";
  write_file(csv_path, table.to_string());
  validate_csv(csv_path, kRobustHeader, {0, 1});

  nlohmann::json summary{{"norm", to_string(norm_kind)},
                         {"max_eps", rep.max_eps},
                         {"slack", rep.slack},
                         {"grid_step", req.eps_step}};
  if (rep.margin) summary["margin"] = *rep.margin;
  std::string json_path = req.out_prefix + "_summary.json";
  write_file(json_path, summary.dump(2) + "\n");
  return {csv_path, json_path};
}

inline std::string cmd_oracle(const std::string& data_path, const std::string& norm,
                              const std::string& out_json) {
  Dataset ds = load(data_path);
  Certificate cert = min_norm(ds, norm_kind_from_string(norm));
  nlohmann::json j = to_json(cert);
  if (cert.status == SolveStatus::Optimal) {
    CertificateCheck check = check_certificate(cert, ds);
    j["check"] = {{"pass", check.pass},
                  {"feasibility_residual", check.feasibility_residual},
                  {"stationarity_residual", check.stationarity_residual},
                  {"comp_slack_residual", check.comp_slack_residual},
                  {"duality_gap", check.duality_gap},
                  {"margin_identity_residual", check.margin_identity_residual}};
    if (!check.pass) throw solver_failure("oracle: certificate failed verification");
  }
  write_file(out_json, j.dump(2) + "\n");
  return out_json;
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

inline const std::vector<std::string> kFigureHeader{"d_over_n", "method", "seed", "max_eps",
                                                    "margin"};
inline const std::vector<std::string> kMeanHeader{"d_over_n", "method", "mean_max_eps",
                                                  "err_max_eps", "mean_margin", "err_margin"};
inline const std::vector<std::string> kSweepLogHeader{"figure", "d_over_n", "seed", "method",
                                                      "status", "detail"};

struct FigureRow {
  double d_over_n;
  std::string method;
  std::uint64_t seed;
  double max_eps;
  double margin_value;
};

namespace detail {

struct SweepState {
  std::mutex mu;
  std::map<std::string, std::vector<FigureRow>> figures;
  CsvTable log;
};

inline void record_row(SweepState& state, const std::string& figure, FigureRow row) {
  std::lock_guard<std::mutex> lock(state.mu);
  state.log.add_row({figure, format_double(row.d_over_n), std::to_string(row.seed), row.method,
                     "ok", ""});
  state.figures[figure].push_back(std::move(row));
}

inline void record_failure(SweepState& state, const std::string& figure, double ratio,
                           std::uint64_t seed, const std::string& method,
                           const std::string& what) {
  std::lock_guard<std::mutex> lock(state.mu);
  state.log.add_row({figure, format_double(ratio), std::to_string(seed), method, "failed", what});
}

}  // namespace detail

// One sweep cell: a (figure, ratio, seed, method) evaluation, reporting the
// margin in the attack geometry and the attack-estimated maximal epsilon.
inline FigureRow evaluate_classifier(const RealVec& w, const Dataset& ds, NormKind attack_norm,
                                     double ratio, std::uint64_t seed, const std::string& method,
                                     LossKind loss_kind, double eps_step, double slack) {
  LinearParams model{w};
  double mu = margin(w, ds, attack_norm);
  double top = std::max(mu > 0.0 ? 1.2 * mu : 1.0, 2.0 * eps_step);
  double est = max_robust_eps(model, ds, attack_norm, eps_grid(top, eps_step), loss_kind, slack);
  return FigureRow{ratio, method, seed, est, mu};
}

inline std::vector<std::string> cmd_sweep(const ExperimentConfig& cfg) {
  validate_config(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  LossKind loss_kind = loss_kind_from_string(cfg.loss);

  detail::SweepState state;
  state.log.header = kSweepLogHeader;
  std::vector<std::function<void()>> jobs;

  // figure-3 style: one figure per lp attack norm, linear methods
  for (const std::string& attack_name : cfg.attacks) {
    NormKind attack_norm = norm_kind_from_string(attack_name);
    if (attack_norm == NormKind::FourierLInf) continue;  // figure 4 handles the fourier panel
    std::string figure = "fig3_" + attack_name;
    for (double ratio : cfg.ratios) {
      std::size_t n = std::size_t(double(cfg.d) / ratio);
      for (std::uint64_t seed : cfg.seeds) {
        for (const std::string& method : cfg.methods) {
          jobs.push_back([&, figure, ratio, n, seed, method, attack_norm] {
            try {
              Dataset ds = generate(cfg.d, n, seed);
              RealVec w = run_sweep_method(method, ds, cfg, attack_norm);
              detail::record_row(state, figure,
                                 evaluate_classifier(w, ds, attack_norm, ratio, seed, method,
                                                     loss_kind, cfg.eps_step, cfg.slack));
            } catch (const std::exception& e) {
              detail::record_failure(state, figure, ratio, seed, method, e.what());
            }
          });
        }
      }
    }
  }

  // figure-4 style: fourier-linf attack, conv net and fourier-l1 path vs oracle
  bool want_fourier = std::find(cfg.attacks.begin(), cfg.attacks.end(),
                                std::string("fourier-linf")) != cfg.attacks.end();
  if (want_fourier) {
    for (double ratio : cfg.conv_ratios) {
      std::size_t n = std::size_t(double(cfg.conv_d) / ratio);
      if (n < 1) continue;
      for (std::uint64_t seed : cfg.seeds) {
        for (std::string method : {std::string("conv2-gd"), std::string("prox-fourier-l1"),
                                   std::string("oracle")}) {
          jobs.push_back([&, ratio, n, seed, method] {
            try {
              Dataset ds = generate(cfg.conv_d, n, seed);
              RealVec w = run_sweep_method(method, ds, cfg, NormKind::FourierLInf);
              detail::record_row(state, "fig4_fourier_linf",
                                 evaluate_classifier(w, ds, NormKind::FourierLInf, ratio, seed,
                                                     method, loss_kind, cfg.eps_step, cfg.slack));
            } catch (const std::exception& e) {
              detail::record_failure(state, "fig4_fourier_linf", ratio, seed, method, e.what());
            }
          });
        }
      }
    }
  }

  // figure-5a style: adversarial training trade-off at one ratio, linf attack
  if (!cfg.advtrain_eps_multipliers.empty()) {
    std::size_t n = std::size_t(double(cfg.d) / cfg.advtrain_ratio);
    for (std::uint64_t seed : cfg.seeds) {
      for (double mult : cfg.advtrain_eps_multipliers) {
        std::string method = "advtrain@" + format_double(mult);
        jobs.push_back([&, n, seed, mult, method] {
          try {
            Dataset ds = generate(cfg.d, n, seed);
            RealVec w = run_sweep_method(method, ds, cfg, NormKind::LInf);
            FigureRow row = evaluate_classifier(w, ds, NormKind::LInf, mult, seed, method,
                                                loss_kind, cfg.eps_step, cfg.slack);
            // x-axis of the trade-off figure is the training-eps multiplier
            detail::record_row(state, "fig5a_advtrain_linf", row);
          } catch (const std::exception& e) {
            detail::record_failure(state, "fig5a_advtrain_linf", mult, seed, method, e.what());
          }
        });
      }
    }
  }

  // figure-5b style: l1 regularization path at one ratio, linf attack
  if (!cfg.lambda_grid.empty()) {
    std::size_t n = std::size_t(double(cfg.d) / cfg.advtrain_ratio);
    for (std::uint64_t seed : cfg.seeds) {
      jobs.push_back([&, n, seed] {
        try {
          Dataset ds = generate(cfg.d, n, seed);
          TrainConfig tc;
          tc.steps = cfg.prox_steps;
          tc.loss = loss_kind;
          tc.step_size = LineSearch{cfg.prox_max_step};
          std::vector<double> lambdas = cfg.lambda_grid;
          std::sort(lambdas.begin(), lambdas.end(), std::greater<double>());
          auto path = regularization_path(ds, NormKind::L1, lambdas, tc);
          for (const auto& pt : path) {
            if (detail::is_all_zero(pt.params.w)) continue;
            FigureRow row = evaluate_classifier(pt.params.w, ds, NormKind::LInf, pt.lambda, seed,
                                                "prox-l1", loss_kind, cfg.eps_step, cfg.slack);
            detail::record_row(state, "fig5b_regpath_linf", row);
          }
        } catch (const std::exception& e) {
          detail::record_failure(state, "fig5b_regpath_linf", cfg.advtrain_ratio, seed, "prox-l1",
                                 e.what());
        }
      });
    }
  }

  run_parallel(std::move(jobs), cfg.parallelism);

  // single-threaded aggregation, deterministic order
  std::vector<std::string> written;
  for (auto& [figure, rows] : state.figures) {
    std::sort(rows.begin(), rows.end(), [](const FigureRow& a, const FigureRow& b) {
      if (a.d_over_n != b.d_over_n) return a.d_over_n < b.d_over_n;
      if (a.method != b.method) return a.method < b.method;
      return a.seed < b.seed;
    });
    CsvTable table;
    table.header = kFigureHeader;
    for (const FigureRow& row : rows) {
      table.add_row({format_double(row.d_over_n), row.method, std::to_string(row.seed),
                     format_double(row.max_eps), format_double(row.margin_value)});
    }
    std::string path = cfg.out_dir + "/" + figure + ".csv";
    write_file(path, table.to_string());
    validate_csv(path, kFigureHeader, {0, 3, 4});
    written.push_back(path);

    // mean and error bars over seeds
    std::map<std::pair<double, std::string>, std::vector<const FigureRow*>> groups;
    for (const FigureRow& row : rows) groups[{row.d_over_n, row.method}].push_back(&row);
    CsvTable mean_table;
    mean_table.header = kMeanHeader;
    std::map<std::string, SvgSeries> series;
    for (const auto& [key, group] : groups) {
      auto stats = [&](auto&& get) {
        double mean = 0.0;
        for (const FigureRow* r : group) mean += get(*r);
        mean /= double(group.size());
        double var = 0.0;
        for (const FigureRow* r : group) var += (get(*r) - mean) * (get(*r) - mean);
        double err = group.size() > 1 ? std::sqrt(var / double(group.size() - 1)) : 0.0;
        return std::pair<double, double>(mean, err);
      };
      auto [mean_eps, err_eps] = stats([](const FigureRow& r) { return r.max_eps; });
      auto [mean_margin, err_margin] = stats([](const FigureRow& r) { return r.margin_value; });
      mean_table.add_row({format_double(key.first), key.second, format_double(mean_eps),
                          format_double(err_eps), format_double(mean_margin),
                          format_double(err_margin)});
      SvgSeries& s = series[key.second];
      s.label = key.second;
      s.x.push_back(key.first);
      s.y.push_back(mean_eps);
      s.err.push_back(err_eps);
    }
    std::string mean_path = cfg.out_dir + "/" + figure + "_mean.csv";
    write_file(mean_path, mean_table.to_string());
    validate_csv(mean_path, kMeanHeader, {0, 2, 3, 4, 5});
    written.push_back(mean_path);

    if (cfg.svg) {
      std::vector<SvgSeries> all;
      for (auto& [name, s] : series) all.push_back(std::move(s));
      std::string x_label = figure.rfind("fig5a", 0) == 0 ? "training eps / certified eps"
                            : figure.rfind("fig5b", 0) == 0 ? "lambda"
                                                            : "d/n";
      std::string svg_path = cfg.out_dir + "/" + figure + ".svg";
      write_file(svg_path, render_svg_plot(figure, x_label, "maximally robust eps", all));
      written.push_back(svg_path);
    }
  }
  std::string log_path = cfg.out_dir + "/sweep_log.csv";
  write_file(log_path, state.log.to_string());
  written.push_back(log_path);
  return written;
}

// Re-validate and re-aggregate previously written figure CSVs.
inline std::vector<std::string> cmd_report(const std::string& dir, bool svg) {
  std::vector<std::string> produced;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("fig", 0) != 0 || entry.path().extension() != ".csv") continue;
    if (name.find("_mean") != std::string::npos) continue;
    validate_csv(entry.path().string(), kFigureHeader, {0, 3, 4});

    std::ifstream in(entry.path());
    std::string line;
    std::getline(in, line);
    std::map<std::pair<double, std::string>, std::vector<std::pair<double, double>>> groups;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string ratio_s, method, seed_s, eps_s, margin_s;
      std::getline(ss, ratio_s, ',');
      std::getline(ss, method, ',');
      std::getline(ss, seed_s, ',');
      std::getline(ss, eps_s, ',');
      std::getline(ss, margin_s, ',');
      groups[{std::stod(ratio_s), method}].push_back({std::stod(eps_s), std::stod(margin_s)});
    }
    CsvTable mean_table;
    mean_table.header = kMeanHeader;
    std::map<std::string, SvgSeries> series;
    for (const auto& [key, vals] : groups) {
      auto stats = [&](auto&& get) {
        double mean = 0.0;
        for (const auto& v : vals) mean += get(v);
        mean /= double(vals.size());
        double var = 0.0;
        for (const auto& v : vals) var += (get(v) - mean) * (get(v) - mean);
        return std::pair<double, double>(
            mean, vals.size() > 1 ? std::sqrt(var / double(vals.size() - 1)) : 0.0);
      };
      auto [mean_eps, err_eps] = stats([](const std::pair<double, double>& v) { return v.first; });
      auto [mean_margin, err_margin] =
          stats([](const std::pair<double, double>& v) { return v.second; });
      mean_table.add_row({format_double(key.first), key.second, format_double(mean_eps),
                          format_double(err_eps), format_double(mean_margin),
                          format_double(err_margin)});
      SvgSeries& s = series[key.second];
      s.label = key.second;
      s.x.push_back(key.first);
      s.y.push_back(mean_eps);
      s.err.push_back(err_eps);
    }
    std::string stem = entry.path().stem().string();
    std::string mean_path = dir + "/" + stem + "_mean.csv";
    write_file(mean_path, mean_table.to_string());
    validate_csv(mean_path, kMeanHeader, {0, 2, 3, 4, 5});
    produced.push_back(mean_path);
    if (svg) {
      std::vector<SvgSeries> all;
      for (auto& [name2, s] : series) all.push_back(std::move(s));
      std::string svg_path = dir + "/" + stem + ".svg";
      write_file(svg_path, render_svg_plot(stem, "x", "maximally robust eps", all));
      produced.push_back(svg_path);
    }
  }
  return produced;
}

}  // namespace robustlin
