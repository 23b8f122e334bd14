#pragma once

// Linear and two-layer circular-convolution classifiers, monotone losses,
// and empirical risk with gradients in parameters and inputs.

#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "robustlin/dataset.hpp"
#include "robustlin/errors.hpp"
#include "robustlin/numerics.hpp"

namespace robustlin {

struct LinearParams {
  RealVec w;
  // When set, the last coordinate of w multiplies a constant-1 feature.
  // forward accepts the raw feature vector (length w.size()-1) in that case.
  bool augmented_bias = false;

  std::size_t input_dim() const { return w.size() - (augmented_bias ? 1 : 0); }
};

struct ConvParams {
  RealVec w1;  // convolution layer
  RealVec w2;  // final linear layer
};

enum class LossKind { Exponential, Logistic, Hinge };

inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::Exponential: return "exponential";
    case LossKind::Logistic: return "logistic";
    case LossKind::Hinge: return "hinge";
  }
  return "?";
}

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "exponential") return LossKind::Exponential;
  if (s == "logistic") return LossKind::Logistic;
  if (s == "hinge") return LossKind::Hinge;
  throw invalid_input("unknown loss kind: " + s);
}

inline double loss(LossKind k, double z) {
  switch (k) {
    case LossKind::Exponential: return std::exp(-z);
    case LossKind::Logistic:
      // softplus(-z), evaluated on the safe branch
      return z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
    case LossKind::Hinge: return std::max(0.0, 1.0 - z);
  }
  throw invalid_input("unknown loss kind");
}

inline double loss_deriv(LossKind k, double z) {
  switch (k) {
    case LossKind::Exponential: return -std::exp(-z);
    case LossKind::Logistic: return -1.0 / (1.0 + std::exp(z));
    case LossKind::Hinge: return z < 1.0 ? -1.0 : 0.0;
  }
  throw invalid_input("unknown loss kind");
}

inline double forward_linear(const LinearParams& p, std::span<const double> x) {
  if (x.size() == p.w.size()) return dot(p.w, x);
  if (p.augmented_bias && x.size() + 1 == p.w.size()) {
    double s = p.w.back();
    for (std::size_t j = 0; j < x.size(); ++j) s += p.w[j] * x[j];
    return s;
  }
  throw invalid_input("forward_linear: dimension mismatch");
}

inline double forward_linear(const LinearParams& p, const RealVec& x) {
  return forward_linear(p, std::span<const double>(x));
}

inline double forward_conv(const ConvParams& p, std::span<const double> x) {
  if (p.w1.size() != p.w2.size() || p.w1.size() != x.size())
    throw invalid_input("forward_conv: dimension mismatch");
  return dot(p.w2, circ_conv(p.w1, x));
}

inline double forward_conv(const ConvParams& p, const RealVec& x) {
  return forward_conv(p, std::span<const double>(x));
}

// The unique vector with <w_eff, x> = forward_conv(p, x) for all x:
//   w_eff[j] = (1/sqrt(d)) sum_i w2[i] w1[(i-j) mod d],
// whose spectrum is dft(w2) .* conj(dft(w1)); in particular the spectral
// moduli multiply, which is all the Fourier-l1 norm sees.
inline RealVec effective_weight(const ConvParams& p) {
  if (p.w1.size() != p.w2.size()) throw invalid_input("effective_weight: dimension mismatch");
  return circ_corr(p.w2, p.w1);
}

// z_i = y_i * phi(x_i) for every training sample.
inline RealVec sample_margins(const LinearParams& p, const Dataset& ds) {
  RealVec z(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) z[i] = ds.labels[i] * forward_linear(p, ds.sample(i));
  return z;
}

inline RealVec sample_margins(const ConvParams& p, const Dataset& ds) {
  RealVec z(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) z[i] = ds.labels[i] * forward_conv(p, ds.sample(i));
  return z;
}

template <class Params>
double risk(const Params& p, const Dataset& ds, LossKind k) {
  RealVec z = sample_margins(p, ds);
  if (k == LossKind::Exponential) {
    // exp(logsumexp(-z) - log n): identical value, immune to intermediate
    // overflow when a single margin is very negative.
    double m = -z[0];
    for (double zi : z) m = std::max(m, -zi);
    double s = 0.0;
    for (double zi : z) s += std::exp(-zi - m);
    return std::exp(m + std::log(s) - std::log(double(ds.n)));
  }
  double s = 0.0;
  for (double zi : z) s += loss(k, zi);
  return s / double(ds.n);
}

namespace detail {

// dF/dz_i for the mean risk; the parameter gradient is then
// sum_i u_i * y_i * dphi/dtheta(x_i) for any parameterization.
inline RealVec risk_weights(LossKind k, const RealVec& z) {
  RealVec u(z.size());
  const double inv_n = 1.0 / double(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) u[i] = inv_n * loss_deriv(k, z[i]);
  return u;
}

inline RealVec weighted_feature_sum(const Dataset& ds, const RealVec& u) {
  RealVec g(ds.d, 0.0);
  for (std::size_t i = 0; i < ds.n; ++i) axpy(u[i] * ds.labels[i], ds.sample(i), g);
  return g;
}

}  // namespace detail

inline RealVec risk_grad(const LinearParams& p, const Dataset& ds, LossKind k) {
  if (p.w.size() != ds.d) throw invalid_input("risk_grad: dimension mismatch");
  if (k == LossKind::Exponential) {
    // softmax-form gradient: weights exp(-z_i - m) are scaled back by
    // exp(m - log n) only once, after the stable accumulation.
    RealVec z = sample_margins(p, ds);
    double m = -z[0];
    for (double zi : z) m = std::max(m, -zi);
    RealVec u(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i) u[i] = -std::exp(-z[i] - m);
    RealVec g = detail::weighted_feature_sum(ds, u);
    double scale = std::exp(m - std::log(double(ds.n)));
    for (double& gi : g) gi *= scale;
    return g;
  }
  return detail::weighted_feature_sum(ds, detail::risk_weights(k, sample_margins(p, ds)));
}

struct ConvGrad {
  RealVec w1;
  RealVec w2;
};

inline ConvGrad risk_grad(const ConvParams& p, const Dataset& ds, LossKind k) {
  if (p.w1.size() != ds.d || p.w2.size() != ds.d)
    throw invalid_input("risk_grad: dimension mismatch");
  RealVec z = sample_margins(p, ds);
  RealVec u = detail::risk_weights(k, z);
  ConvGrad g{RealVec(ds.d, 0.0), RealVec(ds.d, 0.0)};
  for (std::size_t i = 0; i < ds.n; ++i) {
    auto x = ds.sample(i);
    const double c = u[i] * ds.labels[i];
    // dphi/dw2 = w1 * x, dphi/dw1 = corr(w2, x)
    axpy(c, circ_conv(p.w1, x), g.w2);
    axpy(c, circ_corr(p.w2, x), g.w1);
  }
  return g;
}

// Gradient of the per-sample loss zeta(y*phi(x)) with respect to the input.
inline RealVec risk_grad_x(const LinearParams& p, std::span<const double> x, int y, LossKind k) {
  double z = y * forward_linear(p, x);
  double c = loss_deriv(k, z) * y;
  RealVec g(p.w.begin(), p.w.begin() + x.size());  // bias coordinate, if any, excluded
  for (double& gi : g) gi *= c;
  return g;
}

inline RealVec risk_grad_x(const ConvParams& p, std::span<const double> x, int y, LossKind k) {
  double z = y * forward_conv(p, x);
  double c = loss_deriv(k, z) * y;
  RealVec g = effective_weight(p);
  for (double& gi : g) gi *= c;
  return g;
}

inline RealVec risk_grad_x(const LinearParams& p, const RealVec& x, int y, LossKind k) {
  return risk_grad_x(p, std::span<const double>(x), y, k);
}

inline RealVec risk_grad_x(const ConvParams& p, const RealVec& x, int y, LossKind k) {
  return risk_grad_x(p, std::span<const double>(x), y, k);
}

// ---------------------------------------------------------------------------
// Stable training objective.
//
// For the exponential loss the mean risk underflows to 0 as soon as all
// margins exceed ~745, which happens early in margin-maximizing runs. The
// trainers therefore descend log(risk) instead, whose value and gradient
// stay representable for arbitrarily large margins:
//   F(theta)  = logsumexp_i(-z_i) - log n,
//   dF/dz_i   = -softmax(-z)_i.
// log is monotone, so minimizers and steepest-descent directions agree with
// the raw risk. Other losses use the mean risk unchanged.
// ---------------------------------------------------------------------------

inline double train_objective(LossKind k, const RealVec& z) {
  if (k == LossKind::Exponential) {
    double m = -z[0];
    for (double zi : z) m = std::max(m, -zi);
    double s = 0.0;
    for (double zi : z) s += std::exp(-zi - m);
    return m + std::log(s) - std::log(double(z.size()));
  }
  double s = 0.0;
  for (double zi : z) s += loss(k, zi);
  return s / double(z.size());
}

// dF/dz_i for the stable objective.
inline RealVec train_objective_weights(LossKind k, const RealVec& z) {
  if (k == LossKind::Exponential) {
    double m = -z[0];
    for (double zi : z) m = std::max(m, -zi);
    double s = 0.0;
    RealVec u(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      u[i] = std::exp(-z[i] - m);
      s += u[i];
    }
    for (double& ui : u) ui = -ui / s;
    return u;
  }
  return detail::risk_weights(k, z);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const LinearParams& p) {
  return nlohmann::json{{"kind", "linear"},
                        {"d", p.w.size()},
                        {"augmented_bias", p.augmented_bias},
                        {"w", p.w}};
}

inline nlohmann::json to_json(const ConvParams& p) {
  return nlohmann::json{{"kind", "conv2"},
                        {"d", p.w1.size()},
                        {"augmented_bias", false},
                        {"w1", p.w1},
                        {"w2", p.w2}};
}

inline LinearParams linear_from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind").get<std::string>() != "linear") throw malformed_file("not a linear checkpoint");
    LinearParams p;
    p.w = j.at("w").get<RealVec>();
    p.augmented_bias = j.at("augmented_bias").get<bool>();
    if (p.w.size() != j.at("d").get<std::size_t>()) throw malformed_file("checkpoint: d mismatch");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw malformed_file(std::string("checkpoint: ") + e.what());
  }
}

inline ConvParams conv_from_json(const nlohmann::json& j) {
  try {
    if (j.at("kind").get<std::string>() != "conv2") throw malformed_file("not a conv2 checkpoint");
    ConvParams p;
    p.w1 = j.at("w1").get<RealVec>();
    p.w2 = j.at("w2").get<RealVec>();
    if (p.w1.size() != p.w2.size() || p.w1.size() != j.at("d").get<std::size_t>())
      throw malformed_file("checkpoint: d mismatch");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw malformed_file(std::string("checkpoint: ") + e.what());
  }
}

template <class Params>
void save_checkpoint(const Params& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << to_json(p).dump(2) << '\n';
  if (!out) throw io_error("write failed: " + path);
}

inline nlohmann::json load_checkpoint_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open for reading: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw malformed_file(path + ": " + e.what());
  }
  return j;
}

}  // namespace robustlin
