#pragma once

// Robust accuracy under attack, grid estimation of the maximal robust
// epsilon, and the adversarial-training baseline.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "robustlin/attack.hpp"
#include "robustlin/dataset.hpp"
#include "robustlin/errors.hpp"
#include "robustlin/margin.hpp"
#include "robustlin/model.hpp"
#include "robustlin/numerics.hpp"
#include "robustlin/optim.hpp"

namespace robustlin {

struct RobustReport {
  NormKind norm = NormKind::LInf;
  std::vector<double> eps_grid;
  std::vector<double> accuracy;  // robust accuracy per grid point
  double max_eps = 0.0;          // largest grid eps with accuracy >= 1 - slack
  double slack = 0.0;
  std::optional<double> margin;  // for models with a linear representation
};

// Fraction of samples classified correctly both before and after attack().
template <class Model>
double robust_accuracy(const Model& model, const Dataset& ds, const AttackSpec& spec,
                       LossKind loss_kind) {
  std::size_t good = 0;
  for (std::size_t i = 0; i < ds.n; ++i) {
    auto x = ds.sample(i);
    int y = ds.labels[i];
    if (y * detail::forward_of(model, x) <= 0.0) continue;
    Perturbation pert = attack(model, x, y, spec, loss_kind);
    RealVec moved(x.begin(), x.end());
    for (std::size_t j = 0; j < pert.delta.size(); ++j) moved[j] += pert.delta[j];
    if (y * detail::forward_of(model, std::span<const double>(moved)) > 0.0) ++good;
  }
  return double(good) / double(ds.n);
}

// Largest grid epsilon at which robust accuracy stays >= 1 - slack, or 0 if
// even the smallest budget breaks that bar. The scan stops at the first
// failing grid point; with the single-step optimal attacks on linear models
// accuracy is exactly non-increasing in epsilon, so nothing is missed.
template <class Model>
double max_robust_eps(const Model& model, const Dataset& ds, NormKind norm_kind,
                      const std::vector<double>& grid, LossKind loss_kind, double slack = 0.0) {
  if (grid.empty()) throw invalid_input("max_robust_eps: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1]) throw invalid_input("max_robust_eps: grid must be increasing");
  double best = 0.0;
  for (double eps : grid) {
    double acc = robust_accuracy(model, ds, AttackSpec::ball(norm_kind, eps), loss_kind);
    if (acc >= 1.0 - slack) best = eps;
    else break;
  }
  return best;
}

// Bisection alternative to the grid scan. Faster, but correct only when
// robust accuracy is monotone in epsilon: a multi-step attack that happens to
// fail at some small budget while succeeding at a larger one would steer the
// bracket wrong. The closed-form single-step attacks on linear models are
// monotone, so there it agrees with the grid to `resolution`.
template <class Model>
double max_robust_eps_bisect(const Model& model, const Dataset& ds, NormKind norm_kind,
                             double eps_hi, double resolution, LossKind loss_kind,
                             double slack = 0.0) {
  if (eps_hi <= 0.0 || resolution <= 0.0) throw invalid_input("max_robust_eps_bisect: bad range");
  auto robust_at = [&](double eps) {
    return robust_accuracy(model, ds, AttackSpec::ball(norm_kind, eps), loss_kind) >= 1.0 - slack;
  };
  double lo = 0.0, hi = eps_hi;
  if (robust_at(hi)) return hi;
  while (hi - lo > resolution) {
    double mid = 0.5 * (lo + hi);
    (robust_at(mid) ? lo : hi) = mid;
  }
  return lo;
}

inline std::vector<double> eps_grid(double max_eps, double step) {
  if (step <= 0.0 || max_eps < step) throw invalid_input("eps_grid: bad range");
  std::vector<double> grid;
  for (double e = step; e <= max_eps + 0.5 * step; e += step) grid.push_back(e);
  return grid;
}

template <class Model>
RobustReport robust_report(const Model& model, const Dataset& ds, NormKind norm_kind,
                           const std::vector<double>& grid, LossKind loss_kind,
                           double slack = 0.0) {
  RobustReport report;
  report.norm = norm_kind;
  report.slack = slack;
  report.eps_grid = grid;
  report.accuracy.reserve(grid.size());
  for (double eps : grid) {
    report.accuracy.push_back(
        robust_accuracy(model, ds, AttackSpec::ball(norm_kind, eps), loss_kind));
  }
  report.max_eps = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (report.accuracy[i] >= 1.0 - slack) report.max_eps = grid[i];
    else break;
  }
  return report;
}

// Saddle-point training: inner maximization by projected steepest ascent in
// the attack geometry (step inner_lr * eps along the unit ascent direction),
// outer steepest-descent step on the risk of the perturbed samples. With
// eps = 0 the inner problem is trivial and the run is exactly empirical risk
// minimization, bit for bit.
inline LinearParams adversarial_train(const Dataset& ds, double eps, NormKind attack_norm,
                                      const TrainConfig& cfg, long inner_steps = 10,
                                      double inner_lr = 0.1,
                                      SteepestKind outer = SteepestKind::GradientDescent) {
  if (eps < 0.0) throw invalid_input("adversarial_train: eps must be nonnegative");
  if (inner_steps < 1) throw invalid_input("adversarial_train: inner_steps must be >= 1");
  if (eps == 0.0) return train_steepest(ds, outer, cfg).final_params;

  LinearParams p;
  p.w = cfg.init_seed ? detail::random_normal_vec(ds.d, *cfg.init_seed, cfg.init_scale)
                      : RealVec(ds.d, 0.0);

  Dataset perturbed = ds;
  RealVec trial;
  long last_finite_step = 0;
  for (long t = 1; t <= cfg.steps; ++t) {
    // inner maximization, fresh perturbation per sample
    for (std::size_t i = 0; i < ds.n; ++i) {
      auto x = ds.sample(i);
      int y = ds.labels[i];
      RealVec delta(ds.d, 0.0);
      RealVec moved(x.begin(), x.end());
      for (long s = 0; s < inner_steps; ++s) {
        RealVec g = detail::loss_ascent_gradient(p, std::span<const double>(moved), y, cfg.loss,
                                                 ds.d);
        RealVec dir = detail::ascent_direction(g, attack_norm);
        if (detail::is_all_zero(dir)) break;
        axpy(inner_lr * eps, dir, delta);
        if (attack_norm == NormKind::FourierLInf) {
          delta = idft(complex_linf_project(dft(delta), eps));
        } else {
          delta = project_ball(delta, eps, attack_norm);
        }
        for (std::size_t j = 0; j < ds.d; ++j) moved[j] = x[j] + delta[j];
      }
      std::copy(moved.begin(), moved.end(), perturbed.features.begin() + i * ds.d);
    }

    // one steepest-descent step on the adversarial risk
    detail::LinearState state(p, perturbed);
    RealVec u = train_objective_weights(cfg.loss, state.z);
    RealVec g = state.stacked_grad(u);
    RealVec delta_w = steepest_step(g, outer);
    if (detail::is_all_zero(delta_w)) break;
    state.set_direction(delta_w);
    double objective = train_objective(cfg.loss, state.z);
    double slope = dot(g, delta_w);
    double gamma = 0.0;
    if (std::holds_alternative<LineSearch>(cfg.step_size)) {
      double cand = std::get<LineSearch>(cfg.step_size).max_step;
      while (cand > detail::kMinLineSearchStep) {
        state.margins_at(cand, trial);
        double f = train_objective(cfg.loss, trial);
        if (std::isfinite(f) && f <= objective + detail::kArmijoC * cand * slope) {
          gamma = cand;
          break;
        }
        cand *= 0.5;
      }
      if (gamma == 0.0) break;
    } else {
      gamma = std::get<double>(cfg.step_size);
      state.margins_at(gamma, trial);
      if (!std::isfinite(train_objective(cfg.loss, trial))) {
        throw step_size_too_large("adversarial_train: risk diverged at step " + std::to_string(t) +
                                  "; last finite step " + std::to_string(last_finite_step));
      }
    }
    state.commit(delta_w, gamma);
    p = state.p;
    last_finite_step = t;
  }
  return p;
}

}  // namespace robustlin
