#pragma once

// Dense real/complex vector arithmetic, p-norms and their duals, the unitary
// DFT and circular convolution. Everything downstream builds on this header.
//
// The DFT is the direct O(d^2) unitary transform: the dimensions in play are
// at most a few hundred, and d is not required to be a power of two, so a
// radix FFT buys nothing here. Twiddle factors are cached per dimension.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "robustlin/errors.hpp"

namespace robustlin {

using RealVec = std::vector<double>;
using Complex = std::complex<double>;
using ComplexVec = std::vector<Complex>;

enum class NormKind { L1, L2, LInf, FourierL1, FourierLInf };

inline const char* to_string(NormKind k) {
  switch (k) {
    case NormKind::L1: return "l1";
    case NormKind::L2: return "l2";
    case NormKind::LInf: return "linf";
    case NormKind::FourierL1: return "fourier-l1";
    case NormKind::FourierLInf: return "fourier-linf";
  }
  return "?";
}

inline NormKind norm_kind_from_string(const std::string& s) {
  if (s == "l1") return NormKind::L1;
  if (s == "l2") return NormKind::L2;
  if (s == "linf") return NormKind::LInf;
  if (s == "fourier-l1") return NormKind::FourierL1;
  if (s == "fourier-linf") return NormKind::FourierLInf;
  throw invalid_input("unknown norm kind: " + s);
}

// Dual pairs: (L1, LInf), (L2, L2), (FourierL1, FourierLInf).
inline NormKind dual(NormKind k) {
  switch (k) {
    case NormKind::L1: return NormKind::LInf;
    case NormKind::LInf: return NormKind::L1;
    case NormKind::L2: return NormKind::L2;
    case NormKind::FourierL1: return NormKind::FourierLInf;
    case NormKind::FourierLInf: return NormKind::FourierL1;
  }
  throw invalid_input("unknown norm kind");
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw invalid_input("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void axpy(double a, std::span<const double> x, RealVec& y) {
  if (x.size() != y.size()) throw invalid_input("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline RealVec scaled(std::span<const double> v, double a) {
  RealVec out(v.begin(), v.end());
  for (double& x : out) x *= a;
  return out;
}

inline double l1_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double linf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

namespace detail {

// Roots of unity for one dimension: w[m] = exp(-2*pi*i*m/d). Entry (i,k) of
// the DFT matrix is w[(i*k) % d] / sqrt(d), so a length-d table suffices.
struct DftPlan {
  std::size_t d;
  double inv_sqrt_d;
  ComplexVec w;

  explicit DftPlan(std::size_t dim) : d(dim), inv_sqrt_d(1.0 / std::sqrt(double(dim))), w(dim) {
    for (std::size_t m = 0; m < dim; ++m) {
      double angle = -2.0 * std::numbers::pi * double(m) / double(dim);
      w[m] = Complex(std::cos(angle), std::sin(angle));
    }
  }
};

inline const DftPlan& dft_plan(std::size_t d) {
  thread_local std::unordered_map<std::size_t, std::unique_ptr<DftPlan>> cache;
  auto& slot = cache[d];
  if (!slot) slot = std::make_unique<DftPlan>(d);
  return *slot;
}

}  // namespace detail

// Unitary forward transform of a real vector:
//   out[i] = (1/sqrt(d)) * sum_k v[k] exp(-2*pi*i*k*i/d).
// Preserves the l2 norm; the spectrum of a real input is Hermitian,
// out[i] == conj(out[(d-i) % d]).
inline ComplexVec dft(std::span<const double> v) {
  if (v.empty()) throw invalid_input("dft: empty input");
  if (!all_finite(v)) throw invalid_input("dft: non-finite entry");
  const auto& plan = detail::dft_plan(v.size());
  const std::size_t d = v.size();
  ComplexVec out(d);
  for (std::size_t i = 0; i < d; ++i) {
    Complex s(0.0, 0.0);
    for (std::size_t k = 0; k < d; ++k) s += v[k] * plan.w[(i * k) % d];
    out[i] = s * plan.inv_sqrt_d;
  }
  return out;
}

inline ComplexVec dft(const RealVec& v) { return dft(std::span<const double>(v)); }

constexpr double kHermitianTolerance = 1e-9;

// Unitary inverse transform. The input must be (numerically) the spectrum of
// a real vector; any imaginary residue up to `tol` is discarded, larger
// residue raises symmetry_violation.
inline RealVec idft(const ComplexVec& c, double tol = kHermitianTolerance) {
  if (c.empty()) throw invalid_input("idft: empty input");
  const auto& plan = detail::dft_plan(c.size());
  const std::size_t d = c.size();
  RealVec out(d);
  double residue = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    Complex s(0.0, 0.0);
    for (std::size_t i = 0; i < d; ++i) s += c[i] * std::conj(plan.w[(i * k) % d]);
    s *= plan.inv_sqrt_d;
    residue = std::max(residue, std::abs(s.imag()));
    out[k] = s.real();
  }
  if (residue > tol) {
    throw symmetry_violation("idft: imaginary residue " + std::to_string(residue) +
                             " exceeds tolerance; input spectrum is not Hermitian");
  }
  return out;
}

// Fully complex inverse, for callers that work with non-Hermitian spectra.
inline ComplexVec idft_complex(const ComplexVec& c) {
  if (c.empty()) throw invalid_input("idft: empty input");
  const auto& plan = detail::dft_plan(c.size());
  const std::size_t d = c.size();
  ComplexVec out(d);
  for (std::size_t k = 0; k < d; ++k) {
    Complex s(0.0, 0.0);
    for (std::size_t i = 0; i < d; ++i) s += c[i] * std::conj(plan.w[(i * k) % d]);
    out[k] = s * plan.inv_sqrt_d;
  }
  return out;
}

inline double norm(std::span<const double> v, NormKind k) {
  if (v.empty()) throw invalid_input("norm: empty input");
  if (!all_finite(v)) throw invalid_input("norm: non-finite entry");
  switch (k) {
    case NormKind::L1: return l1_norm(v);
    case NormKind::L2: return l2_norm(v);
    case NormKind::LInf: return linf_norm(v);
    case NormKind::FourierL1: {
      ComplexVec c = dft(v);
      double s = 0.0;
      for (const Complex& z : c) s += std::abs(z);
      return s;
    }
    case NormKind::FourierLInf: {
      ComplexVec c = dft(v);
      double m = 0.0;
      for (const Complex& z : c) m = std::max(m, std::abs(z));
      return m;
    }
  }
  throw invalid_input("unknown norm kind");
}

inline double norm(const RealVec& v, NormKind k) { return norm(std::span<const double>(v), k); }

// Circular convolution with the unitary scaling:
//   [w * x]_i = (1/sqrt(d)) sum_k w[(-k) mod d] x[(i+k) mod d].
// Satisfies dft(w * x) = dft(w) .* dft(x) elementwise, and sqrt(d)*e0 acts
// as the identity kernel.
inline RealVec circ_conv(std::span<const double> w, std::span<const double> x) {
  if (w.size() != x.size()) throw invalid_input("circ_conv: length mismatch");
  if (w.empty()) throw invalid_input("circ_conv: empty input");
  const std::size_t d = w.size();
  const double inv_sqrt_d = 1.0 / std::sqrt(double(d));
  RealVec out(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      s += w[(d - k) % d] * x[(i + k) % d];
    }
    out[i] = s * inv_sqrt_d;
  }
  return out;
}

inline RealVec circ_conv(const RealVec& w, const RealVec& x) {
  return circ_conv(std::span<const double>(w), std::span<const double>(x));
}

// Circular cross-correlation, out[j] = (1/sqrt(d)) sum_i a[i] b[(i-j) mod d].
// This is the adjoint of convolution by b and shows up in conv-net gradients
// and in the effective weight of a two-layer convolutional model.
inline RealVec circ_corr(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw invalid_input("circ_corr: length mismatch");
  if (a.empty()) throw invalid_input("circ_corr: empty input");
  const std::size_t d = a.size();
  const double inv_sqrt_d = 1.0 / std::sqrt(double(d));
  RealVec out(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      s += a[i] * b[(i + d - j) % d];
    }
    out[j] = s * inv_sqrt_d;
  }
  return out;
}

// Row-then-column separable unitary 2-D transform over a row-major
// rows x cols grid. Convenience for frequency-mask demos on small images;
// inherits unitarity and the round-trip property from the 1-D transform.
inline ComplexVec dft2(std::span<const double> grid, std::size_t rows, std::size_t cols) {
  if (grid.size() != rows * cols || rows == 0 || cols == 0)
    throw invalid_input("dft2: bad shape");
  ComplexVec tmp(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    ComplexVec row = dft(grid.subspan(r * cols, cols));
    std::copy(row.begin(), row.end(), tmp.begin() + r * cols);
  }
  const auto& plan = detail::dft_plan(rows);
  ComplexVec out(rows * cols);
  for (std::size_t ccol = 0; ccol < cols; ++ccol) {
    for (std::size_t i = 0; i < rows; ++i) {
      Complex s(0.0, 0.0);
      for (std::size_t k = 0; k < rows; ++k) s += tmp[k * cols + ccol] * plan.w[(i * k) % rows];
      out[i * cols + ccol] = s * plan.inv_sqrt_d;
    }
  }
  return out;
}

inline RealVec idft2(const ComplexVec& spec, std::size_t rows, std::size_t cols,
                     double tol = kHermitianTolerance) {
  if (spec.size() != rows * cols || rows == 0 || cols == 0)
    throw invalid_input("idft2: bad shape");
  const auto& plan = detail::dft_plan(rows);
  ComplexVec tmp(rows * cols);
  for (std::size_t ccol = 0; ccol < cols; ++ccol) {
    for (std::size_t k = 0; k < rows; ++k) {
      Complex s(0.0, 0.0);
      for (std::size_t i = 0; i < rows; ++i)
        s += spec[i * cols + ccol] * std::conj(plan.w[(i * k) % rows]);
      tmp[k * cols + ccol] = s * plan.inv_sqrt_d;
    }
  }
  RealVec out(rows * cols);
  double residue = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    ComplexVec row(tmp.begin() + r * cols, tmp.begin() + (r + 1) * cols);
    ComplexVec back = idft_complex(row);
    for (std::size_t c = 0; c < cols; ++c) {
      residue = std::max(residue, std::abs(back[c].imag()));
      out[r * cols + c] = back[c].real();
    }
  }
  if (residue > tol) {
    throw symmetry_violation("idft2: imaginary residue " + std::to_string(residue) +
                             " exceeds tolerance");
  }
  return out;
}

}  // namespace robustlin
