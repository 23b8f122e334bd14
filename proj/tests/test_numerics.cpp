#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "robustlin/numerics.hpp"
#include "robustlin/rng.hpp"

using namespace robustlin;

namespace {

RealVec random_vec(Xoshiro256pp& rng, std::size_t d, double scale = 1.0) {
  RealVec v(d);
  for (double& x : v) x = scale * rng.next_gaussian();
  return v;
}

// Reference transform written against the definition, independent of the
// cached-plan implementation path.
ComplexVec dft_reference(const RealVec& v) {
  const std::size_t d = v.size();
  ComplexVec out(d);
  for (std::size_t i = 0; i < d; ++i) {
    Complex s(0.0, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
      double angle = -2.0 * std::numbers::pi * double(i) * double(k) / double(d);
      s += v[k] * Complex(std::cos(angle), std::sin(angle));
    }
    out[i] = s / std::sqrt(double(d));
  }
  return out;
}

}  // namespace

TEST_CASE("norms on hand values") {
  RealVec v{3.0, -4.0};
  CHECK(norm(v, NormKind::L1) == doctest::Approx(7.0));
  CHECK(norm(v, NormKind::L2) == doctest::Approx(5.0));
  CHECK(norm(v, NormKind::LInf) == doctest::Approx(4.0));
  // dft(1,-1) = (0, sqrt(2)) by the 2-point transform
  RealVec u{1.0, -1.0};
  CHECK(norm(u, NormKind::FourierLInf) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(norm(u, NormKind::FourierL1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("norm rejects invalid input") {
  CHECK_THROWS_AS(norm(RealVec{}, NormKind::L1), invalid_input);
  CHECK_THROWS_AS(norm(RealVec{1.0, std::numeric_limits<double>::quiet_NaN()}, NormKind::L2),
                  invalid_input);
  CHECK_THROWS_AS(norm(RealVec{std::numeric_limits<double>::infinity()}, NormKind::LInf),
                  invalid_input);
}

TEST_CASE("dual pairs and involution") {
  CHECK(dual(NormKind::L1) == NormKind::LInf);
  CHECK(dual(NormKind::LInf) == NormKind::L1);
  CHECK(dual(NormKind::L2) == NormKind::L2);
  CHECK(dual(NormKind::FourierL1) == NormKind::FourierLInf);
  CHECK(dual(NormKind::FourierLInf) == NormKind::FourierL1);
  for (NormKind k : {NormKind::L1, NormKind::L2, NormKind::LInf, NormKind::FourierL1,
                     NormKind::FourierLInf}) {
    CHECK(dual(dual(k)) == k);
  }
}

TEST_CASE("dft hand values") {
  RealVec e0{1.0, 0.0, 0.0, 0.0};
  ComplexVec c = dft(e0);
  for (const Complex& z : c) {
    CHECK(z.real() == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(std::abs(z.imag()) < 1e-14);
  }

  ComplexVec two = dft(RealVec{1.0, -1.0});
  CHECK(std::abs(two[0]) < 1e-15);
  CHECK(two[1].real() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(std::abs(two[1].imag()) < 1e-15);

  ComplexVec zeros = dft(RealVec(7, 0.0));
  for (const Complex& z : zeros) CHECK(std::abs(z) == 0.0);
}

TEST_CASE("dft matches the direct definition") {
  Xoshiro256pp rng(7);
  for (std::size_t d : {2u, 3u, 5u, 8u, 17u}) {
    RealVec v = random_vec(rng, d);
    ComplexVec a = dft(v);
    ComplexVec b = dft_reference(v);
    for (std::size_t i = 0; i < d; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
  }
}

TEST_CASE("idft hand values and symmetry enforcement") {
  RealVec back = idft(ComplexVec{Complex(0.0, 0.0), Complex(std::sqrt(2.0), 0.0)});
  CHECK(back[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(back[1] == doctest::Approx(-1.0).epsilon(1e-14));

  RealVec e0{1.0, 0.0, 0.0, 0.0};
  RealVec rt = idft(dft(e0));
  for (std::size_t i = 0; i < 4; ++i) CHECK(rt[i] == doctest::Approx(e0[i]).epsilon(1e-13));

  CHECK_THROWS_AS(idft(ComplexVec{Complex(0.0, 1.0), Complex(0.0, 0.0)}), symmetry_violation);
}

TEST_CASE("unitarity, round trip, hermitian symmetry") {
  Xoshiro256pp rng(21);
  for (std::size_t d : {1u, 2u, 3u, 16u, 31u, 64u}) {
    RealVec v = random_vec(rng, d, 3.0);
    ComplexVec c = dft(v);
    double spec_l2 = 0.0;
    for (const Complex& z : c) spec_l2 += std::norm(z);
    spec_l2 = std::sqrt(spec_l2);
    double vl2 = l2_norm(v);
    CHECK(std::abs(spec_l2 - vl2) <= 1e-12 * vl2);

    RealVec rt = idft(c);
    double err = 0.0;
    for (std::size_t i = 0; i < d; ++i) err = std::max(err, std::abs(rt[i] - v[i]));
    CHECK(err <= 1e-12 * std::max(1e-30, linf_norm(v)));

    for (std::size_t i = 0; i < d; ++i) {
      CHECK(std::abs(c[i] - std::conj(c[(d - i) % d])) <= 1e-12);
    }
  }
}

TEST_CASE("circular convolution") {
  Xoshiro256pp rng(3);

  SUBCASE("scaled impulse is the identity kernel") {
    for (std::size_t d : {2u, 5u, 12u}) {
      RealVec e0(d, 0.0);
      e0[0] = std::sqrt(double(d));
      RealVec x = random_vec(rng, d);
      RealVec y = circ_conv(e0, x);
      for (std::size_t i = 0; i < d; ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-13));
    }
  }

  SUBCASE("convolution theorem, 100 random pairs") {
    for (int trial = 0; trial < 100; ++trial) {
      std::size_t d = 2 + trial % 15;
      RealVec u = random_vec(rng, d), v = random_vec(rng, d);
      ComplexVec lhs = dft(circ_conv(u, v));
      ComplexVec cu = dft(u), cv = dft(v);
      double scale = 0.0;
      for (std::size_t i = 0; i < d; ++i) scale = std::max(scale, std::abs(cu[i] * cv[i]));
      for (std::size_t i = 0; i < d; ++i) {
        CHECK(std::abs(lhs[i] - cu[i] * cv[i]) <= 1e-12 * std::max(1.0, scale));
      }
    }
  }

  SUBCASE("commutativity") {
    for (int trial = 0; trial < 20; ++trial) {
      std::size_t d = 2 + trial % 9;
      RealVec u = random_vec(rng, d), v = random_vec(rng, d);
      RealVec uv = circ_conv(u, v), vu = circ_conv(v, u);
      for (std::size_t i = 0; i < d; ++i) CHECK(uv[i] == doctest::Approx(vu[i]).epsilon(1e-12));
    }
  }

  SUBCASE("length mismatch rejected") {
    CHECK_THROWS_AS(circ_conv(RealVec{1.0, 2.0}, RealVec{1.0}), invalid_input);
  }
}

TEST_CASE("convolution theorem at d = 64") {
  Xoshiro256pp rng(11);
  RealVec u = random_vec(rng, 64), v = random_vec(rng, 64);
  ComplexVec lhs = dft(circ_conv(u, v));
  ComplexVec cu = dft(u), cv = dft(v);
  double scale = 0.0;
  for (std::size_t i = 0; i < 64; ++i) scale = std::max(scale, std::abs(cu[i] * cv[i]));
  for (std::size_t i = 0; i < 64; ++i)
    CHECK(std::abs(lhs[i] - cu[i] * cv[i]) <= 1e-12 * std::max(1.0, scale));
}

TEST_CASE("dual norm inequality on random pairs, all five kinds") {
  Xoshiro256pp rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t d = 2 + trial % 12;
    RealVec u = random_vec(rng, d), v = random_vec(rng, d);
    double inner = std::abs(dot(u, v));
    for (NormKind k : {NormKind::L1, NormKind::L2, NormKind::LInf, NormKind::FourierL1,
                       NormKind::FourierLInf}) {
      CHECK(inner <= norm(u, k) * norm(v, dual(k)) * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("circ_corr is the adjoint of convolution") {
  Xoshiro256pp rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t d = 2 + trial % 7;
    RealVec a = random_vec(rng, d), b = random_vec(rng, d), c = random_vec(rng, d);
    // <a, b * c> = <corr(a, b), c>
    CHECK(dot(a, circ_conv(b, c)) ==
          doctest::Approx(dot(circ_corr(a, b), c)).epsilon(1e-11));
  }
}

TEST_CASE("2-D transform is unitary and invertible") {
  Xoshiro256pp rng(17);
  const std::size_t rows = 6, cols = 4;
  RealVec grid = random_vec(rng, rows * cols);
  ComplexVec spec = dft2(grid, rows, cols);
  double e = 0.0, g = 0.0;
  for (const Complex& z : spec) e += std::norm(z);
  for (double x : grid) g += x * x;
  CHECK(std::sqrt(e) == doctest::Approx(std::sqrt(g)).epsilon(1e-12));
  RealVec back = idft2(spec, rows, cols);
  for (std::size_t i = 0; i < grid.size(); ++i)
    CHECK(back[i] == doctest::Approx(grid[i]).epsilon(1e-11));
}
