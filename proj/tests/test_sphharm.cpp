#include <cmath>
#include <numbers>

#include "doctest.h"
#include "shprobe/errors.hpp"
#include "shprobe/rng.hpp"
#include "shprobe/sh.hpp"

using namespace shprobe;
using sh::Direction;

namespace {

constexpr double kPi = std::numbers::pi;

// Closed-form low-degree harmonics used as an independent oracle.
double oracle_y10(const Direction& d) { return std::sqrt(3.0 / (4.0 * kPi)) * d.z; }
double oracle_y20(const Direction& d) {
  return std::sqrt(5.0 / (16.0 * kPi)) * (3.0 * d.z * d.z - 1.0);
}

Direction random_dir(const CounterRng& rng, std::uint64_t i) {
  const double z = 2.0 * rng.uniform(2 * i) - 1.0;
  const double phi = 2.0 * kPi * rng.uniform(2 * i + 1);
  const double s = std::sqrt(1.0 - z * z);
  return Direction{s * std::cos(phi), s * std::sin(phi), z};
}

}  // namespace

TEST_CASE("constant harmonic") {
  const Direction zhat{0, 0, 1};
  CHECK(sh::eval_sh(0, 0, zhat) == doctest::Approx(0.28209479177387814).epsilon(1e-12));
  const Direction other = sh::normalized(0.3, -1.2, 0.5);
  CHECK(sh::eval_sh(0, 0, other) == doctest::Approx(0.28209479177387814).epsilon(1e-12));
}

TEST_CASE("closed-form Legendre oracle values") {
  const Direction zhat{0, 0, 1};
  CHECK(sh::eval_sh(1, 0, zhat) == doctest::Approx(0.4886025119029199).epsilon(1e-12));
  const Direction equator{1, 0, 0};
  CHECK(sh::eval_sh(2, 0, equator) ==
        doctest::Approx(-0.31539156525252005).epsilon(1e-12));

  const CounterRng rng(7);
  for (int i = 0; i < 20; ++i) {
    const Direction d = random_dir(rng, static_cast<std::uint64_t>(i));
    CHECK(sh::eval_sh(1, 0, d) == doctest::Approx(oracle_y10(d)).epsilon(1e-12));
    CHECK(sh::eval_sh(2, 0, d) == doctest::Approx(oracle_y20(d)).epsilon(1e-12));
  }
}

TEST_CASE("feature vector matches eval_sh and pole structure") {
  const Direction zhat{0, 0, 1};
  const sh::SHVector v = sh::feature_vector(1, zhat);
  REQUIRE(v.size() == 4);
  CHECK(v.coeffs[0] == doctest::Approx(0.28209479177387814).epsilon(1e-12));
  CHECK(v.at(1, -1) == doctest::Approx(0.0));
  CHECK(v.at(1, 0) == doctest::Approx(0.4886025119029199).epsilon(1e-12));
  CHECK(v.at(1, 1) == doctest::Approx(0.0));

  const CounterRng rng(3);
  const Direction d = random_dir(rng, 0);
  const sh::SHVector full = sh::feature_vector(6, d);
  for (int l = 0; l <= 6; ++l)
    for (int m = -l; m <= l; ++m)
      CHECK(full.at(l, m) == doctest::Approx(sh::eval_sh(l, m, d)).epsilon(1e-13));
}

TEST_CASE("addition theorem: per-degree power is direction independent") {
  const CounterRng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Direction d = random_dir(rng, static_cast<std::uint64_t>(i));
    const sh::SHVector v = sh::feature_vector(10, d);
    for (int l = 0; l <= 10; ++l) {
      const double expected = (2.0 * l + 1.0) / (4.0 * kPi);
      CHECK(std::abs(v.band_power(l) - expected) <= 1e-10);
    }
  }
}

TEST_CASE("argument validation") {
  const Direction zhat{0, 0, 1};
  CHECK_THROWS_AS(sh::eval_sh(13, 0, zhat), ArgumentError);
  CHECK_THROWS_AS(sh::eval_sh(-1, 0, zhat), ArgumentError);
  CHECK_THROWS_AS(sh::eval_sh(2, 3, zhat), ArgumentError);
  CHECK_THROWS_AS(sh::eval_sh(2, 0, Direction{0.5, 0.5, 0.5}), ArgumentError);
  CHECK_THROWS_AS(sh::build_grid(10), ArgumentError);
  CHECK_THROWS_AS(sh::normalized(0, 0, 0), ArgumentError);
}

TEST_CASE("quadrature grid measure and first moments") {
  const sh::QuadratureGrid grid = sh::build_grid(26);
  double total = 0.0;
  for (double w : grid.weights) total += w;
  CHECK(std::abs(total - 4.0 * kPi) <= 1e-10);

  double int_y00 = 0.0, int_y32 = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    int_y00 += grid.weights[k] * sh::eval_sh(0, 0, grid.nodes[k]);
    int_y32 += grid.weights[k] * sh::eval_sh(3, 2, grid.nodes[k]);
  }
  CHECK(std::abs(int_y00 - std::sqrt(4.0 * kPi)) <= 1e-10);
  CHECK(std::abs(int_y32) <= 1e-10);
}

TEST_CASE("orthonormality over the grid up to degree 10") {
  const sh::QuadratureGrid grid = sh::build_grid(26);
  const int block = 11 * 11;
  std::vector<double> gram(static_cast<std::size_t>(block) * block, 0.0);
  std::vector<double> basis(static_cast<std::size_t>(block));
  for (std::size_t k = 0; k < grid.size(); ++k) {
    sh::eval_basis(10, grid.nodes[k], basis.data());
    const double w = grid.weights[k];
    for (int a = 0; a < block; ++a)
      for (int b = a; b < block; ++b)
        gram[static_cast<std::size_t>(a) * block + b] += w * basis[a] * basis[b];
  }
  double worst = 0.0;
  for (int a = 0; a < block; ++a)
    for (int b = a; b < block; ++b) {
      const double expected = (a == b) ? 1.0 : 0.0;
      worst = std::max(worst,
                       std::abs(gram[static_cast<std::size_t>(a) * block + b] -
                                expected));
    }
  CHECK(worst <= 1e-10);
}

TEST_CASE("projection recovers pure and mixed harmonics") {
  const sh::QuadratureGrid grid = sh::build_grid(26);
  std::vector<double> samples(grid.size());

  SUBCASE("pure Y_4^1") {
    for (std::size_t k = 0; k < grid.size(); ++k)
      samples[k] = sh::eval_sh(4, 1, grid.nodes[k]);
    const sh::SHVector c = sh::project(samples, grid, 6);
    for (int l = 0; l <= 6; ++l)
      for (int m = -l; m <= l; ++m) {
        const double expected = (l == 4 && m == 1) ? 1.0 : 0.0;
        CHECK(std::abs(c.at(l, m) - expected) <= 1e-10);
      }
  }

  SUBCASE("linear combination 2 Y_0^0 + 3 Y_2^0") {
    for (std::size_t k = 0; k < grid.size(); ++k)
      samples[k] = 2.0 * sh::eval_sh(0, 0, grid.nodes[k]) +
                   3.0 * sh::eval_sh(2, 0, grid.nodes[k]);
    const sh::SHVector c = sh::project(samples, grid, 4);
    CHECK(c.at(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(c.at(2, 0) == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(std::abs(c.at(4, 0)) <= 1e-10);
  }

  SUBCASE("bandlimited round trip and Parseval") {
    sh::SHVector truth(5);
    const CounterRng rng(21);
    for (std::size_t j = 0; j < truth.size(); ++j)
      truth.coeffs[j] = rng.normal(j);
    for (std::size_t k = 0; k < grid.size(); ++k)
      samples[k] = sh::synthesize(truth, grid.nodes[k]);
    const sh::SHVector back = sh::project(samples, grid, 5);
    for (std::size_t j = 0; j < truth.size(); ++j)
      CHECK(std::abs(back.coeffs[j] - truth.coeffs[j]) <= 1e-9);
    // Resynthesis matches samples.
    for (std::size_t k = 0; k < grid.size(); k += 97)
      CHECK(std::abs(sh::synthesize(back, grid.nodes[k]) - samples[k]) <= 1e-9);
    // Parseval: sum of squared coefficients equals the grid inner product.
    double f2 = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k)
      f2 += grid.weights[k] * samples[k] * samples[k];
    double c2 = 0.0;
    for (double v : back.coeffs) c2 += v * v;
    CHECK(std::abs(c2 - f2) <= 1e-9);
  }

  SUBCASE("length mismatch rejected") {
    samples.pop_back();
    CHECK_THROWS_AS(sh::project(samples, grid, 3), ArgumentError);
  }
}

TEST_CASE("band gradient agrees with finite differences on the sphere") {
  const CounterRng rng(5);
  for (int l : {1, 2, 5, 9}) {
    std::vector<double> c(static_cast<std::size_t>(2 * l + 1));
    for (std::size_t m = 0; m < c.size(); ++m)
      c[m] = rng.normal(1000 * static_cast<std::uint64_t>(l) + m);
    for (int trial = 0; trial < 10; ++trial) {
      const Direction d =
          random_dir(rng, 77 + 10 * static_cast<std::uint64_t>(l) + trial);
      const sh::BandEval ev = sh::eval_band_with_gradient(l, c, d);

      // Tangential finite differences along two great circles.
      const double h = 1e-6;
      auto value_at = [&](double ax, double ay, double az) {
        const Direction u = sh::normalized(ax, ay, az);
        return sh::eval_band_with_gradient(l, c, u).value;
      };
      // Pick any tangent vector.
      Direction t1 = std::abs(d.z) < 0.9 ? Direction{0, 0, 1} : Direction{1, 0, 0};
      double tx = t1.x - (t1.x * d.x + t1.y * d.y + t1.z * d.z) * d.x;
      double ty = t1.y - (t1.x * d.x + t1.y * d.y + t1.z * d.z) * d.y;
      double tz = t1.z - (t1.x * d.x + t1.y * d.y + t1.z * d.z) * d.z;
      const double tn = std::sqrt(tx * tx + ty * ty + tz * tz);
      tx /= tn;
      ty /= tn;
      tz /= tn;
      const double fd =
          (value_at(d.x + h * tx, d.y + h * ty, d.z + h * tz) -
           value_at(d.x - h * tx, d.y - h * ty, d.z - h * tz)) /
          (2.0 * h);
      const double analytic = ev.grad[0] * tx + ev.grad[1] * ty + ev.grad[2] * tz;
      CHECK(analytic == doctest::Approx(fd).epsilon(1e-6));
      // Gradient is tangent.
      CHECK(std::abs(ev.grad[0] * d.x + ev.grad[1] * d.y + ev.grad[2] * d.z) <=
            1e-12);
    }
  }
}

TEST_CASE("gradient well defined at the poles") {
  std::vector<double> c = {0.3, -1.1, 0.7};
  const sh::BandEval north = sh::eval_band_with_gradient(1, c, Direction{0, 0, 1});
  // Y_1^{+-1} vary linearly in (x, y) near the pole.
  const double k = std::sqrt(3.0 / (4.0 * kPi));
  CHECK(north.grad[0] == doctest::Approx(0.7 * k).epsilon(1e-12));
  CHECK(north.grad[1] == doctest::Approx(0.3 * k).epsilon(1e-12));
  CHECK(north.grad[2] == doctest::Approx(0.0));
}
