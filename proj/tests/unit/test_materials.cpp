#include "doctest.h"
#include "oracles.hpp"

#include "mmtopo/error.hpp"
#include "mmtopo/materials.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace mmtopo;

TEST_SUITE("materials") {
  TEST_CASE("permanent magnets") {
    CHECK((pm_model(0.0).polarization(Eigen::Vector2d(0.3, -2.0)) - Eigen::Vector2d(1, 0)).norm() <= 1e-15);
    CHECK((pm_model(90.0).polarization(Eigen::Vector2d::Zero()) - Eigen::Vector2d(0, 1)).norm() <= 1e-15);
    CHECK((pm_model(30.0).polarization(Eigen::Vector2d::Zero()) - Eigen::Vector2d(std::sqrt(3.0) / 2, 0.5)).norm() <= 1e-15);
    const MaterialModel m = pm_model(210.0);
    CHECK(m.linear());
    CHECK(m.current_density() == 0.0);
    CHECK(m.d_polarization_dB(Eigen::Vector2d(1, 1)).norm() == 0.0);
  }

  TEST_CASE("steel law") {
    const MaterialModel s = steel_model();
    CHECK_FALSE(s.linear());
    const double big = s.polarization(Eigen::Vector2d(1e9, 0)).norm();
    CHECK(big == doctest::Approx(1.9).epsilon(1e-6));
    CHECK(s.polarization(Eigen::Vector2d(1.0, 0)).x() == doctest::Approx(1.9 * 0.999 / (1.9 + 0.999)).epsilon(1e-14));
    CHECK(s.polarization(Eigen::Vector2d(1.0, 0)).x() == doctest::Approx(0.6549).epsilon(1e-4));
    const Eigen::Matrix2d d0 = s.d_polarization_dB(Eigen::Vector2d::Zero());
    CHECK((d0 - 0.999 * Eigen::Matrix2d::Identity()).norm() <= 1e-15);
    // Initial relative permeability 1 / (1 - a).
    CHECK(1.0 / (1.0 - d0(0, 0)) == doctest::Approx(1000.0).epsilon(1e-9));
    CHECK_THROWS_AS(steel_model(1.9, 1.0), Error);
    CHECK_THROWS_AS(steel_model(-1.0, 0.5), Error);
  }

  TEST_CASE("steel derivative matches finite differences") {
    const MaterialModel s = steel_model();
    std::vector<Eigen::Vector2d> points{{1e-6, 2e-6}, {0.3, -0.1}, {1.0, 1.0}, {2.5, 0.0}, {-1.5, 2.0}, {0.0, 2.5}};
    for (const auto& b : points) {
      CAPTURE(b.transpose());
      const Eigen::Matrix2d analytic = s.d_polarization_dB(b);
      const Eigen::MatrixXd fd = oracle::central_jacobian(
          [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(s.polarization(Eigen::Vector2d(x))); }, Eigen::VectorXd(b), 1e-7);
      CHECK((analytic - fd).norm() <= 1e-5 * analytic.norm());
      CHECK((analytic - analytic.transpose()).norm() <= 1e-15);
    }
  }

  TEST_CASE("monotone constitutive map") {
    const MaterialModel s = steel_model();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    int violations = 0;
    for (int k = 0; k < 10000; ++k) {
      const Eigen::Vector2d b1(u(rng), u(rng)), b2(u(rng), u(rng));
      const Eigen::Vector2d h1 = kNu0 * (b1 - s.polarization(b1));
      const Eigen::Vector2d h2 = kNu0 * (b2 - s.polarization(b2));
      if (!((h1 - h2).dot(b1 - b2) > 0.0)) ++violations;
    }
    CHECK(violations == 0);
  }

  TEST_CASE("finite everywhere up to 10 T") {
    const MaterialCatalogue cat = default_catalogue();
    for (const auto& m : cat.entries) {
      for (double r : {0.0, 1e-14, 0.5, 3.0, 10.0}) {
        const Eigen::Vector2d b(r * 0.6, -r * 0.8);
        CHECK(m.polarization(b).allFinite());
        CHECK(m.d_polarization_dB(b).allFinite());
        CHECK(m.polarization(b).norm() <= 1.9 + 1e-12);
      }
    }
  }

  TEST_CASE("conductors, air and catalogue") {
    CHECK(conductor_model(+1).current_density() == 1e7);
    CHECK(conductor_model(-1).current_density() == -1e7);
    CHECK(conductor_model(+1).polarization(Eigen::Vector2d(1, 1)).norm() == 0.0);
    CHECK(air_model().polarization(Eigen::Vector2d(5, -3)).norm() == 0.0);

    const MaterialCatalogue cat = default_catalogue();
    REQUIRE(cat.size() == 16);
    CHECK(cat.colors.size() == 16);
    for (int k = 0; k < 12; ++k) {
      const double t = k * std::numbers::pi / 6.0;
      CHECK(cat.entries[static_cast<std::size_t>(k)].name() == pm_name(k));
      CHECK((cat.entries[static_cast<std::size_t>(k)].polarization(Eigen::Vector2d::Zero()) - Eigen::Vector2d(std::cos(t), std::sin(t))).norm() <= 1e-15);
    }
    CHECK(cat.entries[12].current_density() == 1e7);
    CHECK(cat.entries[13].current_density() == -1e7);
    CHECK(cat.entries[14].name() == "steel");
    CHECK(cat.entries[15].name() == "air");
    CHECK(cat.index_of("cond-") == 13);
    CHECK(cat.index_of("unobtainium") == -1);
    CHECK_THROWS_AS(cat.at("unobtainium"), Error);
  }
}
