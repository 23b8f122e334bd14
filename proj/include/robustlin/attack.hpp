#pragma once

// Norm-bounded steepest-ascent attacks: l1/l2/linf in the sample domain and
// the Fourier-linf attack, where the perturbation budget constrains the
// modulus of each DFT coefficient, either uniformly or through a
// per-frequency mask.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "robustlin/errors.hpp"
#include "robustlin/model.hpp"
#include "robustlin/numerics.hpp"
#include "robustlin/optim.hpp"

namespace robustlin {

// `Accumulate` re-derives an epsilon-sized step from the current gradient
// each iteration and adds it without projection — the plain iterative scheme,
// whose total perturbation may reach m*epsilon after m steps. `Projected`
// (default) projects the running perturbation back onto the budget after
// every step and returns the feasible iterate with the highest loss.
enum class AttackMode { Projected, Accumulate };

struct AttackSpec {
  NormKind norm = NormKind::LInf;
  std::optional<double> epsilon;
  std::optional<RealVec> eps_mask;  // Fourier-linf only; circularly symmetric
  long steps = 1;
  AttackMode mode = AttackMode::Projected;

  static AttackSpec ball(NormKind k, double eps, long steps = 1,
                         AttackMode mode = AttackMode::Projected) {
    AttackSpec s;
    s.norm = k;
    s.epsilon = eps;
    s.steps = steps;
    s.mode = mode;
    return s;
  }
  static AttackSpec masked(const RealVec& mask, long steps = 1,
                           AttackMode mode = AttackMode::Projected) {
    AttackSpec s;
    s.norm = NormKind::FourierLInf;
    s.eps_mask = mask;
    s.steps = steps;
    s.mode = mode;
    return s;
  }
};

struct Perturbation {
  RealVec delta;
  double achieved_norm = 0.0;  // measured in the attack norm
};

// Complex moduli clipped to r, phases kept. Hermitian inputs stay Hermitian.
inline ComplexVec complex_linf_project(const ComplexVec& c, double r) {
  if (r <= 0.0) throw invalid_input("complex_linf_project: radius must be positive");
  ComplexVec out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    double m = std::abs(c[i]);
    out[i] = m > r ? c[i] * (r / m) : c[i];
  }
  return out;
}

// Per-frequency radii; a zero radius zeroes the coefficient.
inline ComplexVec complex_linf_project(const ComplexVec& c, const RealVec& radii) {
  if (radii.size() != c.size()) throw invalid_input("complex_linf_project: length mismatch");
  ComplexVec out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (radii[i] < 0.0) throw invalid_input("complex_linf_project: negative radius");
    double m = std::abs(c[i]);
    if (m > radii[i]) {
      out[i] = radii[i] == 0.0 ? Complex(0.0, 0.0) : c[i] * (radii[i] / m);
    } else {
      out[i] = c[i];
    }
  }
  return out;
}

inline void validate_fourier_mask(const RealVec& mask) {
  const std::size_t d = mask.size();
  if (d == 0) throw invalid_input("eps mask: empty");
  for (std::size_t i = 0; i < d; ++i) {
    if (!(mask[i] >= 0.0) || !std::isfinite(mask[i]))
      throw invalid_input("eps mask: entries must be finite and nonnegative");
    double mirror = mask[(d - i) % d];
    if (std::abs(mask[i] - mirror) > 1e-12 * std::max(1.0, std::abs(mask[i])))
      throw invalid_input("eps mask: not circularly symmetric");
  }
}

namespace detail {

// delta maximizing <g, delta> subject to |dft(delta)_i| <= eps_i:
// each spectral coefficient of delta takes the phase of the gradient
// spectrum at full budget. Dead frequencies contribute nothing and are left
// at zero; "dead" must be judged relative to the spectrum scale, or rounding
// noise gets normalized into a full-budget coefficient with garbage phase.
// The self-conjugate frequencies (0 and d/2) are pinned to the sign of their
// real part so the spectrum stays exactly Hermitian and delta exactly real.
inline RealVec fourier_linf_step_impl(std::span<const double> g, const RealVec& eps_per_freq) {
  const std::size_t d = g.size();
  ComplexVec ghat = dft(g);
  double peak = 0.0;
  for (const Complex& z : ghat) peak = std::max(peak, std::abs(z));
  const double dead = 1e-12 * peak;
  ComplexVec dhat(d, Complex(0.0, 0.0));
  for (std::size_t i = 0; i < d; ++i) {
    std::size_t mirror = (d - i) % d;
    if (i == mirror) {
      if (std::abs(ghat[i].real()) > dead)
        dhat[i] = Complex(ghat[i].real() > 0.0 ? eps_per_freq[i] : -eps_per_freq[i], 0.0);
      continue;
    }
    if (i > mirror) continue;  // filled by the conjugate below
    double m = std::abs(ghat[i]);
    if (m > dead) {
      dhat[i] = ghat[i] * (eps_per_freq[i] / m);
      dhat[mirror] = std::conj(dhat[i]);
    }
  }
  return idft(dhat);
}

}  // namespace detail

inline RealVec fourier_linf_step(std::span<const double> g, double eps) {
  if (!all_finite(g)) throw invalid_input("fourier_linf_step: non-finite gradient");
  if (eps < 0.0) throw invalid_input("fourier_linf_step: negative epsilon");
  return detail::fourier_linf_step_impl(g, RealVec(g.size(), eps));
}

inline RealVec fourier_linf_step(std::span<const double> g, const RealVec& mask) {
  if (!all_finite(g)) throw invalid_input("fourier_linf_step: non-finite gradient");
  if (mask.size() != g.size()) throw invalid_input("fourier_linf_step: mask length mismatch");
  validate_fourier_mask(mask);
  return detail::fourier_linf_step_impl(g, mask);
}

inline RealVec fourier_linf_step(const RealVec& g, double eps) {
  return fourier_linf_step(std::span<const double>(g), eps);
}

inline RealVec fourier_linf_step(const RealVec& g, const RealVec& mask) {
  return fourier_linf_step(std::span<const double>(g), mask);
}

enum class Band { Low, High };

// Per-frequency budget concentrated on a circular frequency band. Frequency
// of index i is min(i, d-i); `Low` budgets frequencies below cutoff*d/2,
// `High` the rest. Low and high masks with the same cutoff partition the
// spectrum. Circularly symmetric by construction.
inline RealVec band_mask(std::size_t d, Band band, double eps, double cutoff) {
  if (d == 0) throw invalid_input("band_mask: d must be positive");
  if (eps <= 0.0) throw invalid_input("band_mask: eps must be positive");
  if (!(cutoff > 0.0 && cutoff < 1.0)) throw invalid_input("band_mask: cutoff must be in (0,1)");
  const double split = cutoff * double(d) / 2.0;
  RealVec mask(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    double freq = double(std::min(i, d - i));  // min(0, d) = 0 covers i = 0
    bool low = freq < split;
    if ((band == Band::Low) == low) mask[i] = eps;
  }
  return mask;
}

namespace detail {

inline double forward_of(const LinearParams& p, std::span<const double> x) {
  return forward_linear(p, x);
}
inline double forward_of(const ConvParams& p, std::span<const double> x) {
  return forward_conv(p, x);
}

inline RealVec phi_input_grad(const LinearParams& p, std::size_t pdim) {
  return RealVec(p.w.begin(), p.w.begin() + pdim);
}
inline RealVec phi_input_grad(const ConvParams& p, std::size_t) { return effective_weight(p); }

// Direction of grad_x zeta(y*phi(x)). For the strictly decreasing losses the
// derivative factor is a negative scalar, so when it underflows (margins in
// the hundreds make exp(-z) exactly zero) the direction -y * grad_x phi is
// still exact; without the fallback a confident model would look
// unattackable at any epsilon.
template <class Model>
RealVec loss_ascent_gradient(const Model& model, std::span<const double> x, int y,
                             LossKind loss_kind, std::size_t pdim) {
  RealVec g_full = risk_grad_x(model, x, y, loss_kind);
  RealVec g(g_full.begin(), g_full.begin() + pdim);
  bool dead = std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; });
  if (dead && loss_kind != LossKind::Hinge) {
    g = phi_input_grad(model, pdim);
    for (double& v : g) v *= -double(y);
  }
  return g;
}

inline std::size_t perturbable_dim(const LinearParams& p, std::size_t xdim) {
  // The augmented constant-1 coordinate is never perturbed.
  if (p.augmented_bias && xdim == p.w.size()) return xdim - 1;
  return xdim;
}
inline std::size_t perturbable_dim(const ConvParams&, std::size_t xdim) { return xdim; }

// Unit steepest-ascent direction in the attack geometry: a maximizer of
// <g, v> over ||v|| <= 1, attaining the dual norm of g.
inline RealVec ascent_direction(const RealVec& g, NormKind k) {
  switch (k) {
    case NormKind::LInf: {
      RealVec v(g.size(), 0.0);
      for (std::size_t i = 0; i < g.size(); ++i) v[i] = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
      return v;
    }
    case NormKind::L2: {
      double n = l2_norm(g);
      return n == 0.0 ? RealVec(g.size(), 0.0) : scaled(g, 1.0 / n);
    }
    case NormKind::L1: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < g.size(); ++i)
        if (std::abs(g[i]) > std::abs(g[best])) best = i;
      RealVec v(g.size(), 0.0);
      if (g[best] != 0.0) v[best] = g[best] > 0.0 ? 1.0 : -1.0;
      return v;
    }
    case NormKind::FourierLInf:
      return fourier_linf_step(g, 1.0);
    default:
      throw invalid_input("attack: unsupported attack norm");
  }
}

inline RealVec project_attack_ball(const RealVec& delta, const AttackSpec& spec) {
  if (spec.norm == NormKind::FourierLInf) {
    ComplexVec spectrum = dft(delta);
    ComplexVec clipped = spec.eps_mask ? complex_linf_project(spectrum, *spec.eps_mask)
                                       : complex_linf_project(spectrum, *spec.epsilon);
    return idft(clipped);
  }
  return project_ball(delta, *spec.epsilon, spec.norm);
}

}  // namespace detail

template <class Model>
Perturbation attack(const Model& model, std::span<const double> x, int y, const AttackSpec& spec,
                    LossKind loss_kind) {
  if (spec.epsilon.has_value() == spec.eps_mask.has_value())
    throw invalid_input("attack: exactly one of epsilon/eps_mask must be set");
  if (spec.eps_mask && spec.norm != NormKind::FourierLInf)
    throw invalid_input("attack: eps_mask requires the fourier-linf norm");
  if (spec.steps < 1) throw invalid_input("attack: steps must be >= 1");
  if (spec.epsilon && (*spec.epsilon < 0.0 || !std::isfinite(*spec.epsilon)))
    throw invalid_input("attack: epsilon must be nonnegative");

  const std::size_t pdim = detail::perturbable_dim(model, x.size());
  RealVec mask;
  if (spec.eps_mask) {
    mask = *spec.eps_mask;
    if (mask.size() != pdim) throw invalid_input("attack: mask length mismatch");
    validate_fourier_mask(mask);
  }

  auto finish = [&](RealVec delta) {
    Perturbation out;
    out.achieved_norm = norm_or_zero(delta, spec.norm);
    out.delta = std::move(delta);
    return out;
  };

  const bool zero_budget = spec.epsilon ? *spec.epsilon == 0.0 : l1_norm(mask) == 0.0;
  if (zero_budget) return finish(RealVec(pdim, 0.0));

  RealVec x_cur(x.begin(), x.end());
  RealVec delta(pdim, 0.0);
  // track the attacked margin y*phi rather than the loss value: for the
  // monotone losses argmax loss == argmin margin, and the margin never
  // underflows the way exp(-z) does on confident models
  auto margin_at = [&]() { return y * detail::forward_of(model, x_cur); };

  RealVec best_delta = delta;
  double best_margin = margin_at();

  for (long step = 0; step < spec.steps; ++step) {
    RealVec g = detail::loss_ascent_gradient(model, std::span<const double>(x_cur), y, loss_kind,
                                             pdim);
    RealVec move;
    if (spec.eps_mask) {
      move = detail::fourier_linf_step_impl(g, mask);
    } else {
      move = detail::ascent_direction(g, spec.norm);
      for (double& v : move) v *= *spec.epsilon;
    }
    bool stalled = detail::is_all_zero(move);
    if (stalled) break;
    for (std::size_t j = 0; j < pdim; ++j) delta[j] += move[j];
    if (spec.mode == AttackMode::Projected) {
      delta = detail::project_attack_ball(delta, spec);
    }
    for (std::size_t j = 0; j < pdim; ++j) x_cur[j] = x[j] + delta[j];
    if (spec.mode == AttackMode::Projected) {
      double z = margin_at();
      if (z < best_margin) {
        best_margin = z;
        best_delta = delta;
      }
    }
  }

  // accumulate mode returns the final sum of steps; feasibility is only
  // per-step, not cumulative
  if (spec.mode == AttackMode::Accumulate) return finish(std::move(delta));
  return finish(std::move(best_delta));
}

template <class Model>
Perturbation attack(const Model& model, const RealVec& x, int y, const AttackSpec& spec,
                    LossKind loss_kind) {
  return attack(model, std::span<const double>(x), y, spec, loss_kind);
}

}  // namespace robustlin
