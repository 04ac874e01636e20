#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tiedgmm/manifold.hpp"

using namespace tiedgmm;
using Catch::Matchers::WithinAbs;

namespace {

Matrix random_tangent(const Matrix& y, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix a(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = gauss(rng);
  a = skew(a);
  a *= scale / a.norm();
  return a * y;
}

}  // namespace

TEST_CASE("skew basics", "[manifold]") {
  REQUIRE(skew(Matrix::Identity(3, 3)).norm() == 0.0);

  Matrix m(2, 2);
  m << 0, 1, 0, 0;
  Matrix expected(2, 2);
  expected << 0, 1, -1, 0;
  REQUIRE((skew(m) - expected).norm() == 0.0);

  const Matrix r = Matrix::Random(5, 5);
  REQUIRE((skew(r) + skew(r).transpose()).norm() == 0.0);

  REQUIRE_THROWS_AS(skew(Matrix::Zero(2, 3)), DimensionError);
}

TEST_CASE("tangent projection", "[manifold]") {
  const Matrix g = Matrix::Random(4, 4);
  const Matrix at_identity = tangent_project(Matrix::Identity(4, 4), g);
  REQUIRE((at_identity - (g - g.transpose())).norm() < 1e-14);

  const Matrix sym = g + g.transpose();
  REQUIRE(tangent_project(Matrix::Identity(4, 4), sym).norm() < 1e-14);

  const Matrix y = random_orthogonal(5, 11);
  const Matrix grad = Matrix::Random(5, 5);
  const Matrix xi = tangent_project(y, grad);
  REQUIRE(tangency_defect(y, xi) < 1e-10);

  REQUIRE_THROWS_AS(tangent_project(y, Matrix::Zero(4, 4)), DimensionError);
}

TEST_CASE("projection forms and the factor-of-two convention", "[manifold]") {
  const Matrix y = random_orthogonal(6, 7);
  const Matrix g = Matrix::Random(6, 6);

  // On the manifold the offset form is exactly half the plain form.
  const Matrix first = tangent_project(y, g, ProjForm::SkewGy);
  const Matrix second = tangent_project(y, g, ProjForm::SkewHalfOffset);
  REQUIRE((second - 0.5 * first).norm() < 1e-12);
  REQUIRE(tangency_defect(y, second) < 1e-10);

  // Applying the projection to its own output doubles it (the Skew
  // convention carries a factor of two), and stays tangent.
  const Matrix twice = tangent_project(y, first, ProjForm::SkewGy);
  REQUIRE((twice - 2.0 * first).norm() < 1e-10);
}

TEST_CASE("vector transport is the identity", "[manifold]") {
  const Matrix y = random_orthogonal(4, 3);
  const Matrix xi = random_tangent(y, 5);
  REQUIRE((transport(xi) - xi).norm() == 0.0);
}

TEST_CASE("retractions fix zero and stay on the manifold", "[manifold]") {
  const Matrix y = random_orthogonal(5, 21);
  const Matrix zero = Matrix::Zero(5, 5);
  for (auto kind : {Retraction::Qr, Retraction::Polar, Retraction::Cayley}) {
    const Matrix at_zero = retract(y, zero, kind);
    REQUIRE((at_zero - y).norm() < 1e-12);

    const Matrix xi = random_tangent(y, 33);
    const Matrix moved = retract(y, xi, kind);
    REQUIRE(orthogonality_defect(moved) < 1e-10);
    REQUIRE_THAT(moved.determinant(), WithinAbs(1.0, 1e-8));
  }
}

TEST_CASE("retractions agree with Y + xi to first order", "[manifold]") {
  const Matrix y = random_orthogonal(5, 42);
  const Matrix xi = random_tangent(y, 43);
  for (auto kind : {Retraction::Qr, Retraction::Polar, Retraction::Cayley}) {
    double err[3];
    const double scales[3] = {1e-2, 1e-3, 1e-4};
    for (int i = 0; i < 3; ++i) {
      const Matrix step = scales[i] * xi;
      err[i] = (retract(y, step, kind) - (y + step)).norm();
    }
    for (int i = 0; i + 1 < 3; ++i) {
      const double ratio = err[i] / err[i + 1];
      REQUIRE(ratio > 50.0);
      REQUIRE(ratio < 200.0);
    }
  }
}

TEST_CASE("qr retraction with a tiny step", "[manifold]") {
  const Matrix y = Matrix::Identity(4, 4);
  Matrix xi = random_tangent(y, 9, 1e-6);
  const Matrix q = retract_qr(y, xi);
  REQUIRE((q - (y + xi)).norm() < 1e-10);
}

TEST_CASE("cayley transform closed form in 2D", "[manifold]") {
  const double theta = 0.2;
  Matrix a(2, 2);
  a << 0, theta, -theta, 0;
  const Matrix y = Matrix::Identity(2, 2);
  const Matrix out = retract_cayley(y, a * y);

  // (I - A/2)^{-1} (I + A/2) rotates by 2 atan(theta / 2).
  const double phi = 2.0 * std::atan(theta / 2.0);
  Matrix expected(2, 2);
  expected << std::cos(phi), std::sin(phi), -std::sin(phi), std::cos(phi);
  REQUIRE((out - expected).norm() < 1e-14);
}

TEST_CASE("random orthogonal matrices", "[manifold]") {
  const Matrix one = random_orthogonal(1, 0);
  REQUIRE(one.rows() == 1);
  REQUIRE_THAT(one(0, 0), WithinAbs(1.0, 1e-15));

  REQUIRE((random_orthogonal(6, 123) - random_orthogonal(6, 123)).norm() ==
          0.0);
  REQUIRE((random_orthogonal(6, 123) - random_orthogonal(6, 124)).norm() >
          1e-3);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix y = random_orthogonal(5, seed);
    REQUIRE(orthogonality_defect(y) <= 1e-8);
    REQUIRE_THAT(y.determinant(), WithinAbs(1.0, 1e-6));
  }

  REQUIRE_THROWS_AS(random_orthogonal(0, 1), DimensionError);
}
