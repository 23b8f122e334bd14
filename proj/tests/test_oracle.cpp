#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracle_helpers.hpp"
#include "robustlin/dataset.hpp"
#include "robustlin/margin.hpp"
#include "robustlin/oracle.hpp"
#include "robustlin/robusteval.hpp"

using namespace robustlin;

namespace {

Dataset make_dataset(std::vector<RealVec> xs, std::vector<int> ys) {
  Dataset ds;
  ds.n = xs.size();
  ds.d = xs[0].size();
  ds.labels = std::move(ys);
  for (const RealVec& x : xs) ds.features.insert(ds.features.end(), x.begin(), x.end());
  return ds;
}

const NormKind kAllAttacks[] = {NormKind::L1, NormKind::L2, NormKind::LInf,
                                NormKind::FourierLInf};

}  // namespace

TEST_CASE("hand-solved LP: weight concentrates on the strong coordinate") {
  Dataset ds = make_dataset({{2.0, 1.0}, {-2.0, -1.0}}, {+1, -1});
  Certificate cert = min_norm(ds, NormKind::LInf);
  REQUIRE(cert.status == SolveStatus::Optimal);
  CHECK(cert.w[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(cert.w[1] == doctest::Approx(0.0));
  CHECK(cert.objective == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(cert.implied_max_eps == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(check_certificate(cert, ds).pass);
}

TEST_CASE("hand-solved l2: unit separated pair") {
  Dataset ds = make_dataset({{1.0, 0.0}, {-1.0, 0.0}}, {+1, -1});
  Certificate cert = min_norm(ds, NormKind::L2);
  REQUIRE(cert.status == SolveStatus::Optimal);
  CHECK(cert.w[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(std::abs(cert.w[1]) < 1e-7);
  CHECK(cert.implied_max_eps == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(check_certificate(cert, ds).pass);
}

TEST_CASE("single sample: minimum l2 norm classifier is along the sample") {
  const double s = 1.0 / std::sqrt(3.0);
  Dataset ds = make_dataset({{s, s, s}}, {+1});
  Certificate cert = min_norm(ds, NormKind::L2);
  REQUIRE(cert.status == SolveStatus::Optimal);
  // implied eps = ||x||_2 = 1
  CHECK(cert.implied_max_eps == doctest::Approx(1.0).epsilon(1e-7));
  double ratio = cert.w[0] / s;
  for (int j = 1; j < 3; ++j) CHECK(cert.w[j] == doctest::Approx(ratio * s).epsilon(1e-6));
  CHECK(check_certificate(cert, ds).pass);
}

TEST_CASE("certificates verify on random instances for all four attack norms") {
  for (std::uint64_t seed : {0, 1, 2}) {
    for (std::size_t d : {6u, 16u}) {
      Dataset ds = generate(d, d / 2, seed);
      for (NormKind attack_norm : kAllAttacks) {
        Certificate cert = min_norm(ds, attack_norm);
        REQUIRE(cert.status == SolveStatus::Optimal);
        CertificateCheck check = check_certificate(cert, ds);
        INFO("attack norm ", to_string(attack_norm), " seed ", seed, " d ", d);
        INFO("feas ", check.feasibility_residual, " stat ", check.stationarity_residual,
             " cs ", check.comp_slack_residual, " gap ", check.duality_gap, " margin ",
             check.margin_identity_residual);
        CHECK(check.pass);
        CHECK(cert.implied_max_eps ==
              doctest::Approx(margin(cert.w, ds, attack_norm)).epsilon(1e-8));
        double tol = default_check_tolerance(cert);
        CHECK(cert.stationarity_residual <= tol);
        CHECK(cert.comp_slack_residual <= tol);
      }
    }
  }
}

TEST_CASE("duality gap bounds by solver family") {
  Dataset ds = generate(12, 6, 4);
  for (NormKind attack_norm : {NormKind::LInf, NormKind::L1}) {
    Certificate cert = min_norm(ds, attack_norm);
    CHECK(std::abs(cert.duality_gap) <= 1e-8 * std::max(1.0, cert.objective));
  }
  Certificate l2 = min_norm(ds, NormKind::L2);
  CHECK(std::abs(l2.duality_gap) <= 1e-8 * std::max(1.0, l2.objective));
  Certificate fr = min_norm(ds, NormKind::FourierLInf);
  CHECK(std::abs(fr.duality_gap) <= 1e-6 * std::max(1.0, fr.objective));
}

TEST_CASE("brute-force direction scan agrees at d <= 3") {
  for (std::uint64_t seed : {0, 1}) {
    for (std::size_t d : {2u, 3u}) {
      Dataset ds = generate(d, d + 1, 50 + seed);
      for (NormKind attack_norm : kAllAttacks) {
        Certificate cert = min_norm(ds, attack_norm);
        REQUIRE(cert.status == SolveStatus::Optimal);
        double bf = testing::brute_force_min_norm(ds, cert.objective_norm);
        INFO("attack ", to_string(attack_norm), " d ", d, " seed ", seed, " bf ", bf,
             " cert ", cert.objective);
        // the scan can only overshoot the true optimum
        CHECK(cert.objective <= bf + 1e-9);
        CHECK(bf <= cert.objective * 1.01);
      }
    }
  }
}

TEST_CASE("scaled and corrupted certificates fail verification") {
  Dataset ds = generate(8, 4, 7);
  Certificate cert = min_norm(ds, NormKind::LInf);
  REQUIRE(check_certificate(cert, ds).pass);

  Certificate doubled = cert;
  for (double& x : doubled.w) x *= 2.0;
  doubled.objective *= 2.0;
  CertificateCheck check = check_certificate(doubled, ds);
  CHECK_FALSE(check.pass);
  CHECK(check.comp_slack_residual > 1e-6);

  Certificate flipped = cert;
  Dataset bad = ds;
  for (int& y : bad.labels) y = -y;
  CertificateCheck check2 = check_certificate(flipped, bad);
  CHECK_FALSE(check2.pass);
  CHECK(check2.feasibility_residual > 1.0);
}

TEST_CASE("infeasibility is reported with a Farkas ray") {
  // same point with contradictory labels
  Dataset ds = make_dataset({{1.0, 0.5}, {1.0, 0.5}, {0.0, 1.0}}, {+1, -1, +1});
  for (NormKind attack_norm : kAllAttacks) {
    Certificate cert = min_norm(ds, attack_norm);
    REQUIRE(cert.status == SolveStatus::Infeasible);
    CHECK(cert.farkas.size() == ds.n);
    double total = 0.0;
    RealVec s(ds.d, 0.0);
    for (std::size_t i = 0; i < ds.n; ++i) {
      CHECK(cert.farkas[i] >= -1e-12);
      total += cert.farkas[i];
      axpy(cert.farkas[i] * ds.labels[i], ds.sample(i), s);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(linf_norm(s) <= 1e-8);
    CHECK(check_certificate(cert, ds).pass);
  }
}

TEST_CASE("LP solutions are basic: active constraints pin the support") {
  for (std::uint64_t seed : {11, 12, 13}) {
    Dataset ds = generate(10, 5, seed);
    for (NormKind attack_norm : {NormKind::LInf, NormKind::L1}) {
      Certificate cert = min_norm(ds, attack_norm);
      REQUIRE(cert.status == SolveStatus::Optimal);
      std::vector<RealVec> active;
      for (std::size_t i = 0; i < ds.n; ++i) {
        auto x = ds.sample(i);
        if (ds.labels[i] * dot(cert.w, x) <= 1.0 + 1e-8) {
          RealVec row(x.begin(), x.end());
          active.push_back(std::move(row));
        }
      }
      CHECK(active.size() <= ds.d);
      if (attack_norm == NormKind::LInf) {
        // min-l1 vertex: support size bounded by the rank of the active set
        std::size_t support = 0;
        for (double x : cert.w)
          if (std::abs(x) > 1e-10) ++support;
        CHECK(support <= testing::numerical_rank(active));
      }
    }
  }
}

TEST_CASE("max_robust_eps on the certified classifier closes the loop") {
  Dataset ds = generate(6, 4, 3);
  for (NormKind attack_norm : kAllAttacks) {
    Certificate cert = min_norm(ds, attack_norm);
    REQUIRE(cert.status == SolveStatus::Optimal);
    LinearParams model{cert.w};
    double top = cert.implied_max_eps * 1.5;
    std::vector<double> grid = eps_grid(top, 1e-3);
    double est = max_robust_eps(model, ds, attack_norm, grid, LossKind::Exponential);
    CHECK(std::abs(est - cert.implied_max_eps) <= 1e-3);
  }
}

TEST_CASE("certificate JSON carries solver metadata") {
  Dataset ds = generate(5, 3, 21);
  Certificate cert = min_norm(ds, NormKind::L2);
  nlohmann::json j = to_json(cert);
  CHECK(j["status"] == "optimal");
  CHECK(j["attack_norm"] == "l2");
  CHECK(j.contains("wall_seconds"));
  CHECK(j.contains("iterations"));
  CHECK(j["implied_max_eps"].get<double>() == doctest::Approx(cert.implied_max_eps));
}

TEST_CASE("fourier-l1 attacks are rejected") {
  Dataset ds = generate(4, 2, 1);
  CHECK_THROWS_AS(min_norm(ds, NormKind::FourierL1), invalid_input);
}
