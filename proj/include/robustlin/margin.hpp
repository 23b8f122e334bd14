#pragma once

// Margin of a linear classifier in the geometry of a given attack norm:
//   min_i y_i <w, x_i> / ||w||_*   with ||.||_* the dual of the attack norm.
// Positive exactly when w separates the data, and equal to the largest
// epsilon the classifier withstands against attacks bounded in that norm.

#include <limits>
#include <span>

#include "robustlin/dataset.hpp"
#include "robustlin/errors.hpp"
#include "robustlin/model.hpp"
#include "robustlin/numerics.hpp"

namespace robustlin {

inline double margin(std::span<const double> w, const Dataset& ds, NormKind attack_norm) {
  if (w.size() != ds.d) throw invalid_input("margin: dimension mismatch");
  bool nonzero = false;
  for (double x : w)
    if (x != 0.0) { nonzero = true; break; }
  if (!nonzero) throw invalid_input("margin: zero weight vector");
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ds.n; ++i) {
    worst = std::min(worst, ds.labels[i] * dot(w, ds.sample(i)));
  }
  return worst / norm(w, dual(attack_norm));
}

inline double margin(const RealVec& w, const Dataset& ds, NormKind attack_norm) {
  return margin(std::span<const double>(w), ds, attack_norm);
}

inline double margin(const LinearParams& p, const Dataset& ds, NormKind attack_norm) {
  return margin(p.w, ds, attack_norm);
}

inline double margin(const ConvParams& p, const Dataset& ds, NormKind attack_norm) {
  return margin(effective_weight(p), ds, attack_norm);
}

}  // namespace robustlin
