#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "robustlin/dataset.hpp"
#include "robustlin/margin.hpp"
#include "robustlin/oracle.hpp"
#include "robustlin/robusteval.hpp"
#include "robustlin/rng.hpp"

using namespace robustlin;

namespace {

Dataset unit_pair() {
  Dataset ds;
  ds.d = 2;
  ds.n = 2;
  ds.features = {1.0, 0.0, -1.0, 0.0};
  ds.labels = {+1, -1};
  return ds;
}

RealVec random_vec(Xoshiro256pp& rng, std::size_t d, double scale = 1.0) {
  RealVec v(d);
  for (double& x : v) x = scale * rng.next_gaussian();
  return v;
}

}  // namespace

TEST_CASE("margin hand values") {
  Dataset ds = unit_pair();
  RealVec w{1.0, 0.0};
  CHECK(margin(w, ds, NormKind::L2) == doctest::Approx(1.0));
  CHECK(margin(w, ds, NormKind::LInf) == doctest::Approx(1.0));  // dual l1 norm is 1
  CHECK_THROWS_AS(margin(RealVec{0.0, 0.0}, ds, NormKind::L2), invalid_input);
  CHECK_THROWS_AS(margin(RealVec{1.0}, ds, NormKind::L2), invalid_input);
}

TEST_CASE("margin is scale invariant") {
  Xoshiro256pp rng(71);
  for (int t = 0; t < 20; ++t) {
    std::size_t d = 2 + t % 6;
    Dataset ds = generate(d, 3, 500 + t);
    RealVec w = random_vec(rng, d);
    double c = 0.1 + 3.0 * rng.next_unit();
    for (NormKind k : {NormKind::L1, NormKind::L2, NormKind::LInf, NormKind::FourierLInf}) {
      CHECK(margin(scaled(w, c), ds, k) == doctest::Approx(margin(w, ds, k)).epsilon(1e-10));
    }
  }
}

TEST_CASE("robust accuracy around the closed-form margin") {
  Dataset ds = generate(8, 4, 31);
  Trajectory<LinearParams> traj = train_steepest(ds, SteepestKind::GradientDescent,
                                                 TrainConfig{.steps = 500});
  LinearParams model = traj.final_params;
  for (NormKind k : {NormKind::L1, NormKind::L2, NormKind::LInf, NormKind::FourierLInf}) {
    double mu = margin(model.w, ds, k);
    REQUIRE(mu > 0.0);
    CHECK(robust_accuracy(model, ds, AttackSpec::ball(k, 0.0), LossKind::Exponential) == 1.0);
    CHECK(robust_accuracy(model, ds, AttackSpec::ball(k, 0.999 * mu), LossKind::Exponential) ==
          1.0);
    CHECK(robust_accuracy(model, ds, AttackSpec::ball(k, 1.001 * mu), LossKind::Exponential) <
          1.0);
  }
}

TEST_CASE("robust accuracy is non-increasing along an epsilon grid") {
  Dataset ds = generate(10, 5, 33);
  Trajectory<LinearParams> traj = train_steepest(ds, SteepestKind::CoordinateDescent,
                                                 TrainConfig{.steps = 400});
  LinearParams model = traj.final_params;
  for (NormKind k : {NormKind::L2, NormKind::LInf}) {
    RobustReport rep =
        robust_report(model, ds, k, eps_grid(2.0 * margin(model.w, ds, k), 0.05),
                      LossKind::Exponential);
    for (std::size_t i = 1; i < rep.accuracy.size(); ++i)
      CHECK(rep.accuracy[i] <= rep.accuracy[i - 1] + 1e-12);
    CHECK(rep.max_eps > 0.0);
  }
}

TEST_CASE("max_robust_eps tracks the margin within the grid step") {
  Dataset ds = generate(9, 4, 35);
  Trajectory<LinearParams> traj = train_steepest(ds, SteepestKind::GradientDescent,
                                                 TrainConfig{.steps = 600});
  LinearParams model = traj.final_params;
  for (NormKind k : {NormKind::L1, NormKind::L2, NormKind::LInf, NormKind::FourierLInf}) {
    double mu = margin(model.w, ds, k);
    const double step = 0.01;
    double est = max_robust_eps(model, ds, k, eps_grid(1.5 * mu, step), LossKind::Exponential);
    CHECK(std::abs(est - mu) <= step + 1e-12);
    CHECK(est <= mu + 1e-12);

    // scale invariance
    LinearParams doubled{scaled(model.w, 2.0)};
    CHECK(max_robust_eps(doubled, ds, k, eps_grid(1.5 * mu, step), LossKind::Exponential) ==
          doctest::Approx(est));

    // refinement walks the estimate up toward the margin, never past it
    double coarse = max_robust_eps(model, ds, k, eps_grid(1.5 * mu, 4 * step),
                                   LossKind::Exponential);
    CHECK(coarse <= est + 1e-12);
  }
}

TEST_CASE("bisection agrees with the grid scan on linear models") {
  Dataset ds = generate(10, 5, 36);
  Trajectory<LinearParams> traj = train_steepest(ds, SteepestKind::GradientDescent,
                                                 TrainConfig{.steps = 500});
  LinearParams model = traj.final_params;
  for (NormKind k : {NormKind::L2, NormKind::LInf}) {
    double mu = margin(model.w, ds, k);
    double est = max_robust_eps_bisect(model, ds, k, 2.0 * mu, 1e-4, LossKind::Exponential);
    CHECK(std::abs(est - mu) <= 1e-4 + 1e-12);
  }
  CHECK_THROWS_AS(max_robust_eps_bisect(model, ds, NormKind::L2, 0.0, 1e-3,
                                        LossKind::Exponential),
                  invalid_input);
}

TEST_CASE("a non-separating model has zero robust epsilon") {
  Dataset ds = unit_pair();
  LinearParams wrong{{-1.0, 0.0}};
  CHECK(max_robust_eps(wrong, ds, NormKind::L2, eps_grid(1.0, 0.1), LossKind::Exponential) ==
        0.0);
}

TEST_CASE("max_robust_eps validates its grid") {
  Dataset ds = unit_pair();
  LinearParams m{{1.0, 0.0}};
  CHECK_THROWS_AS(max_robust_eps(m, ds, NormKind::L2, {}, LossKind::Exponential), invalid_input);
  CHECK_THROWS_AS(max_robust_eps(m, ds, NormKind::L2, {0.2, 0.1}, LossKind::Exponential),
                  invalid_input);
}

TEST_CASE("adversarial training at eps = 0 is exactly the ERM run") {
  Dataset ds = generate(12, 6, 37);
  TrainConfig cfg;
  cfg.steps = 200;
  cfg.step_size = LineSearch{100.0};
  LinearParams adv = adversarial_train(ds, 0.0, NormKind::LInf, cfg);
  LinearParams erm = train_steepest(ds, SteepestKind::GradientDescent, cfg).final_params;
  CHECK(adv.w == erm.w);  // bitwise
}

TEST_CASE("adversarial training at the certified eps approaches it") {
  Dataset ds = generate(16, 4, 39);
  Certificate cert = min_norm(ds, NormKind::LInf);
  REQUIRE(cert.status == SolveStatus::Optimal);
  double eps_star = cert.implied_max_eps;
  // a small fixed outer rate converges in direction far more reliably here
  // than aggressive line search; the full tuned protocol lives in the
  // acceptance suite
  TrainConfig cfg;
  cfg.steps = 20000;
  cfg.step_size = 0.05;
  LinearParams model = adversarial_train(ds, eps_star, NormKind::LInf, cfg);
  double mu = margin(model.w, ds, NormKind::LInf);
  INFO("eps* ", eps_star, " achieved ", mu);
  CHECK(mu >= 0.90 * eps_star);

  LinearParams half = adversarial_train(ds, 0.5 * eps_star, NormKind::LInf, cfg);
  CHECK(margin(half.w, ds, NormKind::LInf) < mu);
}

TEST_CASE("adversarial training validates arguments") {
  Dataset ds = unit_pair();
  TrainConfig cfg;
  CHECK_THROWS_AS(adversarial_train(ds, -0.1, NormKind::L2, cfg), invalid_input);
  CHECK_THROWS_AS(adversarial_train(ds, 0.1, NormKind::L2, cfg, 0), invalid_input);
}
