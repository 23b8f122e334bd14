#pragma once

// Steepest-descent training in l1/l2/linf geometry, proximal-gradient
// training for explicitly regularized objectives, and the prox/projection
// operators both need.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "robustlin/dataset.hpp"
#include "robustlin/errors.hpp"
#include "robustlin/margin.hpp"
#include "robustlin/model.hpp"
#include "robustlin/numerics.hpp"
#include "robustlin/rng.hpp"

namespace robustlin {

// Steepest descent w.r.t. l1 (coordinate descent), l2 (gradient descent),
// and linf (sign gradient descent) geometry.
enum class SteepestKind { CoordinateDescent, GradientDescent, SignGradientDescent };

inline const char* to_string(SteepestKind k) {
  switch (k) {
    case SteepestKind::CoordinateDescent: return "cd";
    case SteepestKind::GradientDescent: return "gd";
    case SteepestKind::SignGradientDescent: return "signgd";
  }
  return "?";
}

inline SteepestKind steepest_kind_from_string(const std::string& s) {
  if (s == "cd") return SteepestKind::CoordinateDescent;
  if (s == "gd") return SteepestKind::GradientDescent;
  if (s == "signgd") return SteepestKind::SignGradientDescent;
  throw invalid_input("unknown optimizer: " + s);
}

// The norm whose unit ball defines the update; training with this geometry
// maximizes the margin measured in the same norm.
inline NormKind geometry_norm(SteepestKind k) {
  switch (k) {
    case SteepestKind::CoordinateDescent: return NormKind::L1;
    case SteepestKind::GradientDescent: return NormKind::L2;
    case SteepestKind::SignGradientDescent: return NormKind::LInf;
  }
  throw invalid_input("unknown optimizer");
}

// Minimizer of <g, v> + 0.5*||v||^2 in the geometry norm of `k`, in closed
// form. sign(0) = 0, so a zero gradient maps to a zero step.
inline RealVec steepest_step(const RealVec& g, SteepestKind k) {
  if (!all_finite(g)) throw invalid_input("steepest_step: non-finite gradient");
  switch (k) {
    case SteepestKind::GradientDescent: {
      return scaled(g, -1.0);
    }
    case SteepestKind::SignGradientDescent: {
      double l1 = l1_norm(g);
      RealVec v(g.size(), 0.0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] > 0.0) v[i] = -l1;
        else if (g[i] < 0.0) v[i] = l1;
      }
      return v;
    }
    case SteepestKind::CoordinateDescent: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < g.size(); ++i) {
        if (std::abs(g[i]) > std::abs(g[best])) best = i;  // ties keep lowest index
      }
      RealVec v(g.size(), 0.0);
      v[best] = -g[best];
      return v;
    }
  }
  throw invalid_input("unknown optimizer");
}

struct LineSearch {
  double max_step = 100.0;
};

struct TrainConfig {
  long steps = 10000;
  std::variant<double, LineSearch> step_size = LineSearch{};
  LossKind loss = LossKind::Exponential;
  long record_every = 100;
  // When set, parameters start from init_scale * N(0, I) drawn from this
  // seed; otherwise linear models start at zero. Convolutional models always
  // random-init (zero is a stationary point of the product parameterization)
  // using init_seed or 0.
  std::optional<std::uint64_t> init_seed;
  double init_scale = 0.1;
};

template <class Params>
struct TrajectoryPoint {
  long step;
  Params params;
  double risk;
  RealVec direction;  // classifier vector scaled to unit l2 norm
  double margin;
};

template <class Params>
struct Trajectory {
  std::vector<TrajectoryPoint<Params>> points;
  Params final_params;
  NormKind margin_attack_norm;  // margins above are w.r.t. this attack norm
  long steps_run = 0;
};

namespace detail {

constexpr double kArmijoC = 1e-4;
constexpr double kMinLineSearchStep = 1e-20;

// Model adapters give the trainer a uniform view: current sample margins,
// the stacked parameter gradient, cheap evaluation of all margins along a
// ray params + gamma*delta, and the flat classifier vector for recording.

struct LinearState {
  LinearParams p;
  const Dataset* ds;
  RealVec z;           // y_i phi(x_i)
  RealVec dz;          // y_i <delta, x_i> for the current direction

  LinearState(LinearParams init, const Dataset& data) : p(std::move(init)), ds(&data) {
    z = sample_margins(p, *ds);
  }

  std::size_t stacked_dim() const { return p.w.size(); }

  RealVec stacked_grad(const RealVec& u) const {
    RealVec g(ds->d, 0.0);
    for (std::size_t i = 0; i < ds->n; ++i) axpy(u[i] * ds->labels[i], ds->sample(i), g);
    return g;
  }

  void set_direction(const RealVec& delta) {
    dz.assign(ds->n, 0.0);
    for (std::size_t i = 0; i < ds->n; ++i) dz[i] = ds->labels[i] * dot(delta, ds->sample(i));
  }

  void margins_at(double gamma, RealVec& out) const {
    out.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] + gamma * dz[i];
  }

  void commit(const RealVec& delta, double gamma) {
    axpy(gamma, delta, p.w);
    z = sample_margins(p, *ds);  // exact refresh, no incremental drift
  }

  bool params_finite() const { return all_finite(p.w); }

  RealVec classifier() const { return p.w; }
};

struct ConvState {
  ConvParams p;
  const Dataset* ds;
  RealVec z;
  RealVec dz_lin;   // linear coefficient of z_i(gamma)
  RealVec dz_quad;  // quadratic coefficient
  std::vector<RealVec> conv_w1_x;  // w1 * x_i, refreshed each step

  ConvState(ConvParams init, const Dataset& data) : p(std::move(init)), ds(&data) {
    refresh();
  }

  void refresh() {
    conv_w1_x.resize(ds->n);
    z.resize(ds->n);
    for (std::size_t i = 0; i < ds->n; ++i) {
      conv_w1_x[i] = circ_conv(p.w1, ds->sample(i));
      z[i] = ds->labels[i] * dot(p.w2, conv_w1_x[i]);
    }
  }

  std::size_t stacked_dim() const { return 2 * ds->d; }

  RealVec stacked_grad(const RealVec& u) const {
    RealVec g(2 * ds->d, 0.0);
    std::span<double> g1(g.data(), ds->d);
    std::span<double> g2(g.data() + ds->d, ds->d);
    for (std::size_t i = 0; i < ds->n; ++i) {
      const double c = u[i] * ds->labels[i];
      RealVec a = circ_corr(p.w2, ds->sample(i));
      for (std::size_t j = 0; j < ds->d; ++j) {
        g1[j] += c * a[j];
        g2[j] += c * conv_w1_x[i][j];
      }
    }
    return g;
  }

  void set_direction(const RealVec& delta) {
    // phi is bilinear in (w1, w2), so along the ray each margin is an exact
    // quadratic in gamma.
    std::span<const double> d1(delta.data(), ds->d);
    std::span<const double> d2(delta.data() + ds->d, ds->d);
    dz_lin.assign(ds->n, 0.0);
    dz_quad.assign(ds->n, 0.0);
    for (std::size_t i = 0; i < ds->n; ++i) {
      RealVec conv_d1_x = circ_conv(d1, ds->sample(i));
      double lin = dot(d2, conv_w1_x[i]) + dot(std::span<const double>(p.w2), conv_d1_x);
      double quad = dot(d2, conv_d1_x);
      dz_lin[i] = ds->labels[i] * lin;
      dz_quad[i] = ds->labels[i] * quad;
    }
  }

  void margins_at(double gamma, RealVec& out) const {
    out.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
      out[i] = z[i] + gamma * dz_lin[i] + gamma * gamma * dz_quad[i];
  }

  void commit(const RealVec& delta, double gamma) {
    std::span<const double> d1(delta.data(), ds->d);
    std::span<const double> d2(delta.data() + ds->d, ds->d);
    for (std::size_t j = 0; j < ds->d; ++j) {
      p.w1[j] += gamma * d1[j];
      p.w2[j] += gamma * d2[j];
    }
    refresh();
  }

  bool params_finite() const { return all_finite(p.w1) && all_finite(p.w2); }

  RealVec classifier() const { return effective_weight(p); }
};

inline bool is_all_zero(const RealVec& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

template <class State, class Params>
Trajectory<Params> run_steepest(State state, SteepestKind kind, const TrainConfig& cfg,
                                NormKind margin_attack_norm) {
  if (cfg.steps < 1) throw invalid_input("train: steps must be >= 1");
  if (cfg.record_every < 1) throw invalid_input("train: record_every must be >= 1");
  const Dataset& ds = *state.ds;

  Trajectory<Params> traj;
  traj.margin_attack_norm = margin_attack_norm;

  auto record = [&](long step) {
    RealVec w = state.classifier();
    if (is_all_zero(w) || !all_finite(w)) return;
    TrajectoryPoint<Params> pt;
    pt.step = step;
    pt.params = state.p;
    pt.risk = risk(state.p, ds, cfg.loss);
    double nrm = l2_norm(w);
    pt.direction = scaled(w, 1.0 / nrm);
    pt.margin = margin(w, ds, margin_attack_norm);
    traj.points.push_back(std::move(pt));
  };

  record(0);

  RealVec trial;
  double objective = train_objective(cfg.loss, state.z);
  long last_finite_step = 0;
  for (long t = 1; t <= cfg.steps; ++t) {
    RealVec u = train_objective_weights(cfg.loss, state.z);
    RealVec g = state.stacked_grad(u);
    RealVec delta = steepest_step(g, kind);
    if (is_all_zero(delta)) {
      traj.steps_run = t - 1;
      break;  // exact stationary point; nothing further can change
    }
    state.set_direction(delta);
    double slope = dot(g, delta);

    double gamma = 0.0;
    if (std::holds_alternative<LineSearch>(cfg.step_size)) {
      double cand = std::get<LineSearch>(cfg.step_size).max_step;
      while (cand > kMinLineSearchStep) {
        state.margins_at(cand, trial);
        double f = train_objective(cfg.loss, trial);
        if (std::isfinite(f) && f <= objective + kArmijoC * cand * slope) {
          gamma = cand;
          objective = f;
          break;
        }
        cand *= 0.5;
      }
      if (gamma == 0.0) {
        traj.steps_run = t - 1;
        break;  // no admissible step remains at this precision
      }
    } else {
      gamma = std::get<double>(cfg.step_size);
      state.margins_at(gamma, trial);
      double f = train_objective(cfg.loss, trial);
      if (!std::isfinite(f)) {
        throw step_size_too_large("train_steepest: risk diverged at step " + std::to_string(t) +
                                  "; last finite step " + std::to_string(last_finite_step));
      }
      objective = f;
    }

    state.commit(delta, gamma);
    if (!state.params_finite()) {
      throw step_size_too_large("train_steepest: parameters diverged at step " +
                                std::to_string(t) + "; last finite step " +
                                std::to_string(last_finite_step));
    }
    last_finite_step = t;
    traj.steps_run = t;
    if (t % cfg.record_every == 0 && t != cfg.steps) record(t);
  }
  record(traj.steps_run == 0 ? 0 : traj.steps_run);
  // drop a duplicate of step 0 if nothing moved
  if (traj.points.size() >= 2 &&
      traj.points.back().step == traj.points[traj.points.size() - 2].step) {
    traj.points.pop_back();
  }
  traj.final_params = state.p;
  return traj;
}

inline RealVec random_normal_vec(std::size_t d, std::uint64_t seed, double scale) {
  Xoshiro256pp rng(seed);
  RealVec v(d);
  for (double& x : v) x = scale * rng.next_gaussian();
  return v;
}

}  // namespace detail

inline Trajectory<LinearParams> train_steepest(const Dataset& ds, SteepestKind kind,
                                               const TrainConfig& cfg) {
  LinearParams init;
  init.w = cfg.init_seed ? detail::random_normal_vec(ds.d, *cfg.init_seed, cfg.init_scale)
                         : RealVec(ds.d, 0.0);
  return detail::run_steepest<detail::LinearState, LinearParams>(
      detail::LinearState(std::move(init), ds), kind, cfg, dual(geometry_norm(kind)));
}

inline Trajectory<LinearParams> train_steepest(LinearParams init, const Dataset& ds,
                                               SteepestKind kind, const TrainConfig& cfg) {
  return detail::run_steepest<detail::LinearState, LinearParams>(
      detail::LinearState(std::move(init), ds), kind, cfg, dual(geometry_norm(kind)));
}

// Convolutional models follow the gradient-descent bias result only;
// margins are recorded in the Fourier-l1 geometry of the effective weight.
inline Trajectory<ConvParams> train_steepest_conv(const Dataset& ds, SteepestKind kind,
                                                  const TrainConfig& cfg) {
  if (kind != SteepestKind::GradientDescent)
    throw invalid_input("train_steepest_conv: only gradient descent is supported");
  ConvParams init;
  std::uint64_t seed = cfg.init_seed.value_or(0);
  init.w1 = detail::random_normal_vec(ds.d, seed * 2 + 1, cfg.init_scale);
  init.w2 = detail::random_normal_vec(ds.d, seed * 2 + 2, cfg.init_scale);
  return detail::run_steepest<detail::ConvState, ConvParams>(
      detail::ConvState(std::move(init), ds), kind, cfg, NormKind::FourierLInf);
}

// ---------------------------------------------------------------------------
// Proximal operators
// ---------------------------------------------------------------------------

// Euclidean projection onto {u : ||u||_1 <= r} by sorted thresholding.
inline RealVec project_l1_ball(const RealVec& v, double r) {
  if (r <= 0.0) throw invalid_input("project_l1_ball: radius must be positive");
  if (l1_norm(v) <= r) return v;
  RealVec mags(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) mags[i] = std::abs(v[i]);
  std::sort(mags.begin(), mags.end(), std::greater<double>());
  double running = 0.0;
  double tau = 0.0;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    running += mags[k];
    double candidate = (running - r) / double(k + 1);
    if (k + 1 < mags.size() && mags[k + 1] > candidate) continue;
    tau = candidate;
    break;
  }
  RealVec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double mag = std::max(0.0, std::abs(v[i]) - tau);
    out[i] = v[i] < 0.0 ? -mag : mag;
  }
  return out;
}

// Euclidean projection onto the ball {u : ||u||_k <= r} for the real norms.
inline RealVec project_ball(const RealVec& v, double r, NormKind k) {
  if (r < 0.0) throw invalid_input("project_ball: radius must be nonnegative");
  switch (k) {
    case NormKind::L2: {
      double n = l2_norm(v);
      return n <= r ? v : scaled(v, r / n);
    }
    case NormKind::LInf: {
      RealVec out(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp(v[i], -r, r);
      return out;
    }
    case NormKind::L1:
      if (r == 0.0) return RealVec(v.size(), 0.0);
      return project_l1_ball(v, r);
    default:
      throw invalid_input("project_ball: unsupported norm kind");
  }
}

// argmin_u  t*||u||_k + 0.5*||u - v||_2^2 in closed form.
inline RealVec prox(NormKind k, double t, const RealVec& v) {
  if (t < 0.0 || !std::isfinite(t)) throw invalid_input("prox: bad threshold");
  if (!all_finite(v)) throw invalid_input("prox: non-finite input");
  switch (k) {
    case NormKind::L1: {
      RealVec out(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        double mag = std::max(0.0, std::abs(v[i]) - t);
        out[i] = v[i] < 0.0 ? -mag : mag;
      }
      return out;
    }
    case NormKind::L2: {
      double n = l2_norm(v);
      if (n <= t) return RealVec(v.size(), 0.0);
      return scaled(v, 1.0 - t / n);
    }
    case NormKind::LInf: {
      // Moreau decomposition against the l1 ball of radius t.
      if (t == 0.0) return v;
      RealVec proj = project_l1_ball(v, t);
      RealVec out(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - proj[i];
      return out;
    }
    case NormKind::FourierL1: {
      // Unitary invariance turns the penalty into an independent complex
      // soft-threshold per frequency; moduli shrink, phases are kept, so
      // Hermitian symmetry survives and the result is real.
      ComplexVec c = dft(v);
      for (Complex& ci : c) {
        double m = std::abs(ci);
        ci = m <= t ? Complex(0.0, 0.0) : ci * ((m - t) / m);
      }
      return idft(c);
    }
    default:
      throw invalid_input("prox: unsupported norm kind");
  }
}

// ---------------------------------------------------------------------------
// Proximal-gradient training
// ---------------------------------------------------------------------------

struct RegKind {
  NormKind norm = NormKind::L1;  // one of L1, L2, LInf, FourierL1
  double lambda = 1e-4;
};

struct ProxResult {
  LinearParams params;
  double objective = 0.0;
  long iterations = 0;
};

namespace detail {
constexpr double kProxRelStop = 1e-12;
}

// norm() rejects the all-zero vector only in the margin path; the penalty of
// the zero vector is plainly zero.
inline double norm_or_zero(const RealVec& w, NormKind k) {
  return detail::is_all_zero(w) ? 0.0 : norm(w, k);
}

inline ProxResult train_proximal(const Dataset& ds, const RegKind& reg, const TrainConfig& cfg,
                                 std::optional<RealVec> warm_start = std::nullopt) {
  if (reg.lambda <= 0.0) throw invalid_input("train_proximal: lambda must be positive");
  if (reg.norm == NormKind::FourierLInf)
    throw invalid_input("train_proximal: unsupported penalty norm");
  LinearParams p;
  p.w = warm_start ? std::move(*warm_start)
                   : (cfg.init_seed ? detail::random_normal_vec(ds.d, *cfg.init_seed, cfg.init_scale)
                                    : RealVec(ds.d, 0.0));
  if (p.w.size() != ds.d) throw invalid_input("train_proximal: warm start dimension mismatch");

  double smooth = risk(p, ds, cfg.loss);
  double objective = smooth + reg.lambda * norm_or_zero(p.w, reg.norm);
  ProxResult result;
  result.iterations = 0;

  for (long t = 1; t <= cfg.steps; ++t) {
    RealVec g = risk_grad(p, ds, cfg.loss);
    LinearParams next = p;
    double gamma;
    if (std::holds_alternative<LineSearch>(cfg.step_size)) {
      // Backtrack until the quadratic upper model at step gamma majorizes
      // the smooth part; guarantees monotone objective decrease.
      gamma = std::get<LineSearch>(cfg.step_size).max_step;
      while (true) {
        RealVec moved = p.w;
        axpy(-gamma, g, moved);
        next.w = prox(reg.norm, reg.lambda * gamma, moved);
        double smooth_next = risk(next, ds, cfg.loss);
        double lin = 0.0, sq = 0.0;
        for (std::size_t j = 0; j < ds.d; ++j) {
          double diff = next.w[j] - p.w[j];
          lin += g[j] * diff;
          sq += diff * diff;
        }
        if (std::isfinite(smooth_next) && smooth_next <= smooth + lin + sq / (2.0 * gamma)) {
          smooth = smooth_next;
          break;
        }
        gamma *= 0.5;
        if (gamma < detail::kMinLineSearchStep) {
          next = p;  // no progress possible at this precision
          break;
        }
      }
    } else {
      gamma = std::get<double>(cfg.step_size);
      RealVec moved = p.w;
      axpy(-gamma, g, moved);
      next.w = prox(reg.norm, reg.lambda * gamma, moved);
      double smooth_next = risk(next, ds, cfg.loss);
      if (!std::isfinite(smooth_next))
        throw step_size_too_large("train_proximal: risk diverged at step " + std::to_string(t));
      smooth = smooth_next;
    }

    double next_objective = smooth + reg.lambda * norm_or_zero(next.w, reg.norm);
    p = std::move(next);
    result.iterations = t;
    double decrease = objective - next_objective;
    objective = next_objective;
    if (decrease <= detail::kProxRelStop * std::max(1.0, std::abs(objective))) break;
  }

  result.params = std::move(p);
  result.objective = objective;
  return result;
}

struct PathPoint {
  double lambda = 0.0;
  LinearParams params;
  double objective = 0.0;
  double margin = 0.0;  // w.r.t. the dual of the penalty norm
};

// Warm-started solves along a strictly decreasing lambda sequence. As
// lambda -> 0 the normalized solutions approach the maximum-margin
// classifier in the penalty norm, i.e. the maximally robust classifier
// against dual-norm attacks.
inline std::vector<PathPoint> regularization_path(const Dataset& ds, NormKind penalty,
                                                  const std::vector<double>& lambdas,
                                                  const TrainConfig& cfg) {
  if (lambdas.empty()) throw invalid_input("regularization_path: empty lambda sequence");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (lambdas[i] <= 0.0) throw invalid_input("regularization_path: lambdas must be positive");
    if (i > 0 && lambdas[i] >= lambdas[i - 1])
      throw invalid_input("regularization_path: lambdas must be strictly decreasing");
  }
  std::vector<PathPoint> path;
  std::optional<RealVec> warm;
  for (double lam : lambdas) {
    ProxResult res = train_proximal(ds, RegKind{penalty, lam}, cfg, warm);
    PathPoint pt;
    pt.lambda = lam;
    pt.objective = res.objective;
    pt.margin = detail::is_all_zero(res.params.w)
                    ? -std::numeric_limits<double>::infinity()
                    : margin(res.params.w, ds, dual(penalty));
    warm = res.params.w;
    pt.params = std::move(res.params);
    path.push_back(std::move(pt));
  }
  return path;
}

}  // namespace robustlin
