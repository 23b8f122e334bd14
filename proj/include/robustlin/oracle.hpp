#pragma once

// Independent convex solvers for the minimum-norm classification problem
//   min ||w||_*  s.t.  y_i <w, x_i> >= 1
// with primal-dual optimality certificates. ||.||_* is the dual of the
// attack norm, so 1/||w'||_* is the maximal robust epsilon. Four solvers:
//
//   attack linf  -> min l1 norm, LP via dense two-phase simplex
//   attack l1    -> min linf norm, epigraph LP via the same simplex
//   attack l2    -> quadratic dual, accelerated projected gradient ascent
//   attack F-linf-> min Fourier-l1, primal-dual splitting of the DFT map
//                   against the complex-modulus l1 term
//
// Every solve either returns a certificate whose residuals the caller can
// re-verify, reports infeasibility with a Farkas ray, or raises
// solver_failure; there is no silent approximate answer.

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "robustlin/dataset.hpp"
#include "robustlin/errors.hpp"
#include "robustlin/margin.hpp"
#include "robustlin/numerics.hpp"
#include "robustlin/optim.hpp"

namespace robustlin {

enum class SolveStatus { Optimal, Infeasible };

struct Certificate {
  SolveStatus status = SolveStatus::Optimal;
  NormKind attack_norm = NormKind::LInf;
  NormKind objective_norm = NormKind::L1;
  RealVec w;                    // primal minimum-norm classifier
  double objective = 0.0;       // ||w||_{objective_norm}
  RealVec alpha;                // constraint multipliers, alpha >= 0
  double dual_objective = 0.0;  // sum(alpha); dual feasible by construction
  double duality_gap = 0.0;     // objective - dual_objective
  double implied_max_eps = 0.0; // 1 / objective
  double stationarity_residual = 0.0;
  double comp_slack_residual = 0.0;
  RealVec farkas;               // infeasible case: sum(a)=1, sum a_i y_i x_i = 0
  std::string solver;
  long iterations = 0;
  double wall_seconds = 0.0;
};

struct CertificateCheck {
  bool pass = false;
  double feasibility_residual = 0.0;      // max(0, 1 - min_i y_i <w, x_i>)
  double stationarity_residual = 0.0;     // dual-ball violation + alignment defect
  double comp_slack_residual = 0.0;       // max_i alpha_i * (y_i <w, x_i> - 1)
  double duality_gap = 0.0;
  double margin_identity_residual = 0.0;  // |1/||w|| - margin(w)|
};

struct OracleOptions {
  long max_iterations = 1000000;
  double l2_gap_tol = 1e-8;
  double fourier_gap_tol = 1e-6;
};

inline CertificateCheck check_certificate(const Certificate& c, const Dataset& ds,
                                          double tol = 0.0);

// ---------------------------------------------------------------------------
// Dense two-phase simplex, Bland's rule:  min c'x  s.t.  A x >= b, x >= 0.
// Tiny problems only; anti-cycling matters more than speed here.
// ---------------------------------------------------------------------------

namespace lp {

enum class Status { Optimal, Infeasible, Unbounded };

struct Solution {
  Status status = Status::Optimal;
  RealVec x;
  RealVec duals;   // one per constraint row, >= 0 at optimality
  RealVec farkas;  // phase-1 duals when infeasible
  double objective = 0.0;
  long pivots = 0;
};

namespace detail {
constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-9;
}  // namespace detail

class SimplexTableau {
 public:
  SimplexTableau(const std::vector<RealVec>& A, const RealVec& b, const RealVec& c)
      : m_(A.size()), nv_(c.size()), cols_(nv_ + 2 * m_ + 1), c_(c) {
    for (double bi : b)
      if (bi < 0.0) throw invalid_input("simplex: rhs must be nonnegative");
    rows_.assign(m_, RealVec(cols_, 0.0));
    basis_.resize(m_);
    alive_.assign(m_, true);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < nv_; ++j) rows_[i][j] = A[i][j];
      rows_[i][nv_ + i] = -1.0;           // surplus
      rows_[i][nv_ + m_ + i] = 1.0;       // artificial
      rows_[i][cols_ - 1] = b[i];
      basis_[i] = nv_ + m_ + i;
    }
  }

  Solution solve() {
    Solution sol;
    // Phase 1: min sum of artificials.
    RealVec obj(cols_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) obj[nv_ + m_ + i] = 1.0;
    reduce(obj);
    iterate(obj, /*allow_artificial=*/false, sol.pivots);
    double phase1 = -obj[cols_ - 1];
    if (phase1 > 1e-8) {
      sol.status = Status::Infeasible;
      sol.farkas.resize(m_);
      for (std::size_t i = 0; i < m_; ++i) sol.farkas[i] = obj[nv_ + i];
      return sol;
    }
    purge_artificials();

    // Phase 2: the real objective.
    obj.assign(cols_, 0.0);
    for (std::size_t j = 0; j < nv_; ++j) obj[j] = c_[j];
    reduce(obj);
    if (!iterate(obj, /*allow_artificial=*/false, sol.pivots)) {
      sol.status = Status::Unbounded;
      return sol;
    }

    sol.status = Status::Optimal;
    sol.x.assign(nv_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      if (alive_[i] && basis_[i] < nv_) sol.x[basis_[i]] = rows_[i][cols_ - 1];
    }
    sol.duals.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) sol.duals[i] = alive_[i] ? obj[nv_ + i] : 0.0;
    sol.objective = 0.0;
    for (std::size_t j = 0; j < nv_; ++j) sol.objective += c_[j] * sol.x[j];
    return sol;
  }

 private:
  // Subtract basic rows so `obj` holds reduced costs and, in its last cell,
  // the negated objective value.
  void reduce(RealVec& obj) {
    for (std::size_t i = 0; i < m_; ++i) {
      if (!alive_[i]) continue;
      double coef = obj[basis_[i]];
      if (coef != 0.0) {
        for (std::size_t j = 0; j < cols_; ++j) obj[j] -= coef * rows_[i][j];
      }
    }
  }

  // Returns false if unbounded.
  bool iterate(RealVec& obj, bool allow_artificial, long& pivots) {
    const std::size_t limit = nv_ + (allow_artificial ? 2 * m_ : m_);
    while (true) {
      std::size_t enter = cols_;
      for (std::size_t j = 0; j < limit; ++j) {  // Bland: lowest improving index
        if (obj[j] < -detail::kCostTol) { enter = j; break; }
      }
      if (enter == cols_) return true;
      std::size_t leave = m_;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m_; ++i) {
        if (!alive_[i] || rows_[i][enter] <= detail::kPivotTol) continue;
        double ratio = rows_[i][cols_ - 1] / rows_[i][enter];
        if (ratio < best_ratio - 1e-12 ||
            (ratio < best_ratio + 1e-12 && (leave == m_ || basis_[i] < basis_[leave]))) {
          best_ratio = ratio;
          leave = i;
        }
      }
      if (leave == m_) return false;
      pivot(leave, enter, obj);
      ++pivots;
    }
  }

  void pivot(std::size_t row, std::size_t col, RealVec& obj) {
    double p = rows_[row][col];
    for (std::size_t j = 0; j < cols_; ++j) rows_[row][j] /= p;
    rows_[row][col] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == row || !alive_[i]) continue;
      double f = rows_[i][col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < cols_; ++j) rows_[i][j] -= f * rows_[row][j];
      rows_[i][col] = 0.0;
    }
    double f = obj[col];
    if (f != 0.0) {
      for (std::size_t j = 0; j < cols_; ++j) obj[j] -= f * rows_[row][j];
      obj[col] = 0.0;
    }
    basis_[row] = col;
  }

  // After phase 1, pivot leftover artificials out of the basis; rows that
  // offer no pivot are redundant and dropped.
  void purge_artificials() {
    RealVec dummy(cols_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      if (!alive_[i] || basis_[i] < nv_ + m_) continue;
      std::size_t col = cols_;
      for (std::size_t j = 0; j < nv_ + m_; ++j) {
        if (std::abs(rows_[i][j]) > detail::kPivotTol) { col = j; break; }
      }
      if (col == cols_) {
        alive_[i] = false;
      } else {
        pivot(i, col, dummy);
      }
    }
  }

  std::size_t m_, nv_, cols_;
  RealVec c_;
  std::vector<RealVec> rows_;
  std::vector<std::size_t> basis_;
  std::vector<bool> alive_;
};

inline Solution solve(const std::vector<RealVec>& A, const RealVec& b, const RealVec& c) {
  return SimplexTableau(A, b, c).solve();
}

}  // namespace lp

// ---------------------------------------------------------------------------

namespace detail {

inline NormKind objective_norm_for(NormKind attack_norm) { return dual(attack_norm); }

// y_i * x_i rows as a dense matrix.
inline std::vector<RealVec> signed_rows(const Dataset& ds) {
  std::vector<RealVec> rows(ds.n, RealVec(ds.d));
  for (std::size_t i = 0; i < ds.n; ++i) {
    auto x = ds.sample(i);
    for (std::size_t j = 0; j < ds.d; ++j) rows[i][j] = ds.labels[i] * x[j];
  }
  return rows;
}

inline RealVec combine(const std::vector<RealVec>& rows, const RealVec& alpha) {
  RealVec s(rows.empty() ? 0 : rows[0].size(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) axpy(alpha[i], rows[i], s);
  return s;
}

inline double min_activation(const std::vector<RealVec>& rows, const RealVec& w) {
  double m = std::numeric_limits<double>::infinity();
  for (const RealVec& r : rows) m = std::min(m, dot(r, w));
  return m;
}

// Largest eigenvalue of the Gram matrix K_ij = <rows_i, rows_j> by power
// iteration; an upper bound scale for first-order step sizes.
inline double gram_spectral_norm(const std::vector<RealVec>& K) {
  const std::size_t n = K.size();
  RealVec v(n, 1.0 / std::sqrt(double(n)));
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    RealVec kv(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) kv[i] = dot(K[i], v);
    double nrm = l2_norm(kv);
    if (nrm == 0.0) return 0.0;
    lambda = nrm;
    for (std::size_t i = 0; i < n; ++i) v[i] = kv[i] / nrm;
  }
  return lambda;
}

// Phase-1 feasibility of y_i <w, x_i> >= 1 over free w (split w = p - q).
// Returns an empty vector when feasible, otherwise the normalized Farkas
// multipliers: a >= 0, sum(a) = 1, sum_i a_i y_i x_i = 0.
inline RealVec farkas_ray(const std::vector<RealVec>& srows) {
  const std::size_t n = srows.size(), d = srows[0].size();
  std::vector<RealVec> A(n, RealVec(2 * d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      A[i][j] = srows[i][j];
      A[i][d + j] = -srows[i][j];
    }
  }
  lp::Solution sol = lp::solve(A, RealVec(n, 1.0), RealVec(2 * d, 0.0));
  if (sol.status != lp::Status::Infeasible) return {};
  double total = 0.0;
  for (double& a : sol.farkas) {
    a = std::max(a, 0.0);
    total += a;
  }
  if (total <= 0.0) throw solver_failure("oracle: degenerate Farkas ray");
  for (double& a : sol.farkas) a /= total;
  return sol.farkas;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// min_norm
// ---------------------------------------------------------------------------

inline Certificate min_norm(const Dataset& ds, NormKind attack_norm,
                            const OracleOptions& opt = {}) {
  if (attack_norm == NormKind::FourierL1)
    throw invalid_input("min_norm: fourier-l1 attacks are not supported");
  const auto t_start = std::chrono::steady_clock::now();
  auto seconds = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  Certificate cert;
  cert.attack_norm = attack_norm;
  cert.objective_norm = detail::objective_norm_for(attack_norm);

  std::vector<RealVec> srows = detail::signed_rows(ds);
  const std::size_t n = ds.n, d = ds.d;

  RealVec ray = detail::farkas_ray(srows);
  if (!ray.empty()) {
    cert.status = SolveStatus::Infeasible;
    cert.farkas = std::move(ray);
    cert.solver = "simplex-phase1";
    cert.wall_seconds = seconds();
    return cert;
  }

  if (attack_norm == NormKind::LInf) {
    // min ||w||_1 with w = p - q.
    std::vector<RealVec> A(n, RealVec(2 * d));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        A[i][j] = srows[i][j];
        A[i][d + j] = -srows[i][j];
      }
    lp::Solution sol = lp::solve(A, RealVec(n, 1.0), RealVec(2 * d, 1.0));
    if (sol.status != lp::Status::Optimal) throw solver_failure("min_norm/l1: LP not optimal");
    cert.w.resize(d);
    for (std::size_t j = 0; j < d; ++j) cert.w[j] = sol.x[j] - sol.x[d + j];
    cert.alpha = sol.duals;
    cert.solver = "simplex";
    cert.iterations = sol.pivots;
  } else if (attack_norm == NormKind::L1) {
    // min ||w||_inf: epigraph variable t, w = u - v, |w_j| <= t.
    const std::size_t nv = 2 * d + 1;
    std::vector<RealVec> A;
    RealVec b;
    A.reserve(n + 2 * d);
    for (std::size_t i = 0; i < n; ++i) {
      RealVec row(nv, 0.0);
      for (std::size_t j = 0; j < d; ++j) {
        row[j] = srows[i][j];
        row[d + j] = -srows[i][j];
      }
      A.push_back(std::move(row));
      b.push_back(1.0);
    }
    for (std::size_t j = 0; j < d; ++j) {
      RealVec row(nv, 0.0);
      row[j] = -1.0;
      row[d + j] = 1.0;
      row[2 * d] = 1.0;  // t - w_j >= 0
      A.push_back(std::move(row));
      b.push_back(0.0);
      RealVec row2(nv, 0.0);
      row2[j] = 1.0;
      row2[d + j] = -1.0;
      row2[2 * d] = 1.0;  // t + w_j >= 0
      A.push_back(std::move(row2));
      b.push_back(0.0);
    }
    RealVec c(nv, 0.0);
    c[2 * d] = 1.0;
    lp::Solution sol = lp::solve(A, b, c);
    if (sol.status != lp::Status::Optimal) throw solver_failure("min_norm/linf: LP not optimal");
    cert.w.resize(d);
    for (std::size_t j = 0; j < d; ++j) cert.w[j] = sol.x[j] - sol.x[d + j];
    cert.alpha.assign(sol.duals.begin(), sol.duals.begin() + n);
    cert.solver = "simplex";
    cert.iterations = sol.pivots;
  } else if (attack_norm == NormKind::L2) {
    // Dual of min 0.5||w||^2: max 1'a - 0.5 ||sum a_i y_i x_i||^2 over a >= 0,
    // by accelerated projected gradient ascent with adaptive restart. The
    // iterate is certified through the scale-invariant norm-form pair
    // (w/min_activation, a/||sum a y x||).
    std::vector<RealVec> K(n, RealVec(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) K[i][j] = dot(srows[i], srows[j]);
    double L = std::max(detail::gram_spectral_norm(K), 1e-12);
    RealVec alpha(n, 0.0), momentum(n, 0.0), prev(n, 0.0);
    double theta = 1.0;
    double last_dual = -std::numeric_limits<double>::infinity();
    bool certified = false;
    for (long it = 1; it <= opt.max_iterations; ++it) {
      RealVec grad(n);
      for (std::size_t i = 0; i < n; ++i) grad[i] = 1.0 - dot(K[i], momentum);
      prev = alpha;
      for (std::size_t i = 0; i < n; ++i)
        alpha[i] = std::max(0.0, momentum[i] + grad[i] / L);
      double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
      double beta = (theta - 1.0) / theta_next;
      for (std::size_t i = 0; i < n; ++i)
        momentum[i] = alpha[i] + beta * (alpha[i] - prev[i]);
      theta = theta_next;
      cert.iterations = it;

      if (it % 32 == 0 || it == opt.max_iterations) {
        RealVec w_raw = detail::combine(srows, alpha);
        double dual_qp = 0.0;
        for (std::size_t i = 0; i < n; ++i) dual_qp += alpha[i];
        dual_qp -= 0.5 * dot(w_raw, w_raw);
        if (dual_qp < last_dual) { theta = 1.0; momentum = alpha; }  // restart
        last_dual = dual_qp;
        double act = detail::min_activation(srows, w_raw);
        double nu = l2_norm(w_raw);
        if (act > 0.0 && nu > 0.0) {
          RealVec w_feas = scaled(w_raw, 1.0 / act);
          double primal = l2_norm(w_feas);
          double dual_norm_form = 0.0;
          for (double a : alpha) dual_norm_form += a;
          dual_norm_form /= nu;
          if (primal - dual_norm_form <= opt.l2_gap_tol * std::max(1.0, primal)) {
            cert.w = std::move(w_feas);
            cert.alpha = scaled(alpha, 1.0 / nu);
            certified = true;
            break;
          }
        }
      }
    }
    if (!certified)
      throw solver_failure("min_norm/l2: duality gap not certified within iteration ceiling");
    cert.solver = "dual-apgd";
  } else {  // FourierLInf
    // min ||F w||_1 by primal-dual splitting: the data constraints enter
    // through their dual variable, the Fourier-l1 term through its prox
    // (per-frequency complex soft threshold).
    std::vector<RealVec> K(n, RealVec(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) K[i][j] = dot(srows[i], srows[j]);
    double Anorm = std::sqrt(std::max(detail::gram_spectral_norm(K), 1e-12));
    double sigma = 0.95 / Anorm, tau = 0.95 / Anorm;
    RealVec w(d, 0.0), w_bar(d, 0.0), z(n, 0.0);
    bool certified = false;
    for (long it = 1; it <= opt.max_iterations; ++it) {
      for (std::size_t i = 0; i < n; ++i)
        z[i] = std::min(0.0, z[i] + sigma * dot(srows[i], w_bar) - sigma);
      RealVec step = w;
      for (std::size_t i = 0; i < n; ++i) axpy(-tau * z[i], srows[i], step);
      RealVec w_next = prox(NormKind::FourierL1, tau, step);
      for (std::size_t j = 0; j < d; ++j) w_bar[j] = 2.0 * w_next[j] - w[j];
      w = std::move(w_next);
      cert.iterations = it;

      if (it % 64 == 0 || it == opt.max_iterations) {
        double act = detail::min_activation(srows, w);
        RealVec alpha = scaled(z, -1.0);
        RealVec s_raw = detail::combine(srows, alpha);
        double nu = detail::is_all_zero(s_raw) ? 0.0 : norm(s_raw, NormKind::FourierLInf);
        if (act > 0.0 && nu > 0.0) {
          RealVec w_feas = scaled(w, 1.0 / act);
          double primal = norm(w_feas, NormKind::FourierL1);
          double dual_norm_form = 0.0;
          for (double a : alpha) dual_norm_form += a;
          dual_norm_form /= nu;
          if (primal - dual_norm_form <= opt.fourier_gap_tol * std::max(1.0, primal)) {
            cert.w = std::move(w_feas);
            cert.alpha = scaled(alpha, 1.0 / nu);
            certified = true;
            break;
          }
        }
      }
    }
    if (!certified)
      throw solver_failure("min_norm/fourier: duality gap not certified within iteration ceiling");
    cert.solver = "chambolle-pock";
  }

  cert.objective = norm(cert.w, cert.objective_norm);
  cert.dual_objective = 0.0;
  for (double a : cert.alpha) cert.dual_objective += a;
  cert.duality_gap = cert.objective - cert.dual_objective;
  cert.implied_max_eps = 1.0 / cert.objective;
  CertificateCheck self = check_certificate(cert, ds);
  cert.stationarity_residual = self.stationarity_residual;
  cert.comp_slack_residual = self.comp_slack_residual;
  cert.wall_seconds = seconds();
  return cert;
}

// ---------------------------------------------------------------------------
// check_certificate
// ---------------------------------------------------------------------------

inline double default_check_tolerance(const Certificate& c) {
  return (c.attack_norm == NormKind::LInf || c.attack_norm == NormKind::L1) ? 1e-8 : 1e-6;
}

inline CertificateCheck check_certificate(const Certificate& c, const Dataset& ds, double tol) {
  if (tol <= 0.0) tol = default_check_tolerance(c);
  CertificateCheck out;
  std::vector<RealVec> srows = detail::signed_rows(ds);

  if (c.status == SolveStatus::Infeasible) {
    // A valid Farkas ray: a >= 0, sum(a) = 1, sum a_i y_i x_i = 0, which
    // makes the constraint system y_i <w, x_i> >= 1 inconsistent.
    double total = 0.0, neg = 0.0;
    for (double a : c.farkas) {
      total += a;
      neg = std::min(neg, a);
    }
    RealVec s = detail::combine(srows, c.farkas);
    out.stationarity_residual = linf_norm(s);
    out.feasibility_residual = std::abs(total - 1.0) + std::abs(neg);
    out.pass = out.stationarity_residual <= tol && out.feasibility_residual <= tol;
    return out;
  }

  double min_act = detail::min_activation(srows, c.w);
  out.feasibility_residual = std::max(0.0, 1.0 - min_act);

  double obj = norm(c.w, c.objective_norm);
  RealVec s = detail::combine(srows, c.alpha);
  double ball = detail::is_all_zero(s) ? 0.0 : norm(s, c.attack_norm);
  double align = (obj - dot(s, c.w)) / std::max(1.0, obj);
  double dual_neg = 0.0;
  for (double a : c.alpha) dual_neg = std::min(dual_neg, a);
  out.stationarity_residual =
      std::max({ball - 1.0, align, -dual_neg, 0.0});

  out.comp_slack_residual = 0.0;
  for (std::size_t i = 0; i < ds.n; ++i) {
    out.comp_slack_residual =
        std::max(out.comp_slack_residual, c.alpha[i] * (dot(srows[i], c.w) - 1.0));
  }
  out.comp_slack_residual /= std::max(1.0, obj);

  double dual_val = 0.0;
  for (double a : c.alpha) dual_val += a;
  out.duality_gap = obj - dual_val;

  out.margin_identity_residual = std::abs(1.0 / obj - margin(c.w, ds, c.attack_norm));

  out.pass = out.feasibility_residual <= 1e-9 && out.stationarity_residual <= tol &&
             out.comp_slack_residual <= tol &&
             std::abs(out.duality_gap) <= tol * std::max(1.0, obj) &&
             out.margin_identity_residual <= 1e-8 * std::max(1.0, 1.0 / obj);
  return out;
}

inline nlohmann::json to_json(const Certificate& c) {
  nlohmann::json j;
  j["status"] = c.status == SolveStatus::Optimal ? "optimal" : "infeasible";
  j["attack_norm"] = to_string(c.attack_norm);
  j["objective_norm"] = to_string(c.objective_norm);
  j["solver"] = c.solver;
  j["iterations"] = c.iterations;
  j["wall_seconds"] = c.wall_seconds;
  if (c.status == SolveStatus::Optimal) {
    j["w"] = c.w;
    j["objective"] = c.objective;
    j["alpha"] = c.alpha;
    j["dual_objective"] = c.dual_objective;
    j["duality_gap"] = c.duality_gap;
    j["implied_max_eps"] = c.implied_max_eps;
    j["stationarity_residual"] = c.stationarity_residual;
    j["comp_slack_residual"] = c.comp_slack_residual;
  } else {
    j["farkas"] = c.farkas;
  }
  return j;
}

}  // namespace robustlin
