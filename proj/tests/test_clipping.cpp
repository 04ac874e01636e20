#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "tiedgmm/clipping.hpp"
#include "tiedgmm/optimizer.hpp"

using namespace tiedgmm;
using Catch::Matchers::WithinAbs;

TEST_CASE("gclip", "[clipping]") {
  Eigen::MatrixXd m(2, 1);
  m << 1.2, 1.6;  // norm 2
  REQUIRE((gclip(5.0, m) - m).norm() == 0.0);

  Eigen::MatrixXd big(2, 1);
  big << 3.0, 4.0;  // norm 5
  const Eigen::MatrixXd clipped = gclip(1.0, big);
  REQUIRE_THAT(clipped(0, 0), WithinAbs(0.6, 1e-15));
  REQUIRE_THAT(clipped(1, 0), WithinAbs(0.8, 1e-15));

  REQUIRE(gclip(0.0, big).norm() == 0.0);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(3, 2);
  REQUIRE(gclip(1.0, zero).norm() == 0.0);
}

TEST_CASE("cclip", "[clipping]") {
  Eigen::MatrixXd tau(2, 1), m(2, 1);
  tau << 1.0, 1.0;
  m << 0.5, -3.0;
  const Eigen::MatrixXd out = cclip(tau, m);
  REQUIRE_THAT(out(0, 0), WithinAbs(0.5, 1e-15));
  REQUIRE_THAT(out(1, 0), WithinAbs(-1.0, 1e-15));

  Eigen::MatrixXd wide = Eigen::MatrixXd::Constant(2, 1, 10.0);
  REQUIRE((cclip(wide, m) - m).norm() == 0.0);
  REQUIRE(cclip(tau, Eigen::MatrixXd::Zero(2, 1)).norm() == 0.0);
  REQUIRE_THROWS_AS(cclip(tau, Eigen::MatrixXd::Zero(3, 1)), DimensionError);
}

TEST_CASE("acclip threshold degenerates to |g| when beta2 = 0", "[clipping]") {
  ClipConfig cfg;
  cfg.beta1 = 0.9;
  cfg.beta2 = 0.0;
  cfg.alpha = 2.0;
  AcclipState st = AcclipState::init(3, 1, 1.0);
  Eigen::MatrixXd g(3, 1);
  g << 0.5, -2.0, 7.0;
  acclip_step(st, g, cfg);
  REQUIRE((st.tau - g.cwiseAbs()).norm() < 1e-14);
}

TEST_CASE("acclip passes zeros through", "[clipping]") {
  ClipConfig cfg;
  AcclipState st = AcclipState::init(2, 2, 1.0);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
  for (int t = 0; t < 10; ++t) {
    REQUIRE(acclip_step(st, zero, cfg).norm() == 0.0);
  }
}

TEST_CASE("acclip threshold recurrence", "[clipping]") {
  ClipConfig cfg;
  cfg.beta2 = 0.99;
  cfg.alpha = 2.0;
  AcclipState st = AcclipState::init(1, 1, 1.0);
  Eigen::MatrixXd g(1, 1);
  g << 2.0;
  acclip_step(st, g, cfg);
  // tau_1 = sqrt(0.99 * 1 + 0.01 * 4)
  REQUIRE_THAT(st.tau(0, 0), WithinAbs(std::sqrt(1.03), 1e-14));
}

TEST_CASE("acclip threshold converges geometrically to |g|", "[clipping]") {
  ClipConfig cfg;
  cfg.beta2 = 0.9;
  cfg.alpha = 2.0;
  AcclipState st = AcclipState::init(1, 1, 1.0);
  Eigen::MatrixXd g(1, 1);
  g << 2.0;
  double gap = std::abs(1.0 - 4.0);  // tau^alpha distance from |g|^alpha
  for (int t = 0; t < 500; ++t) {
    acclip_step(st, g, cfg);
    const double new_gap = std::abs(std::pow(st.tau(0, 0), 2.0) - 4.0);
    REQUIRE(new_gap <= cfg.beta2 * gap + 1e-12);
    gap = new_gap;
  }
  REQUIRE_THAT(st.tau(0, 0), WithinAbs(2.0, 1e-12));
}

TEST_CASE("no clip mode ever grows a coordinate", "[clipping]") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 3.0);
  std::uniform_real_distribution<double> unif(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd m(4, 3), tau(4, 3);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m(i) = gauss(rng);
      tau(i) = unif(rng);
    }
    const double tau_g = unif(rng);
    const Eigen::MatrixXd by_norm = gclip(tau_g, m);
    const Eigen::MatrixXd by_coord = cclip(tau, m);
    const Eigen::MatrixXd adaptive = acclip(tau, m, 1e-8);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      REQUIRE(std::abs(by_norm(i)) <= std::abs(m(i)) + 1e-15);
      REQUIRE(std::abs(by_coord(i)) <= std::abs(m(i)) + 1e-15);
      REQUIRE(std::abs(adaptive(i)) <= std::abs(m(i)) + 1e-15);
    }
  }
}
