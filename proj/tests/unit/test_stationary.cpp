#include <cmath>
#include <numbers>

#include "doctest.h"
#include "sslab/evolve.hpp"
#include "sslab/stationary.hpp"

using namespace sslab;

TEST_SUITE("stationary") {
  TEST_CASE("kappa0 closed form") {
    CHECK(kappa0(3.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(kappa0(2.0) == doctest::Approx(6.0).epsilon(1e-15));
    // kappa0^{p-1} = 2(p+1)/(p-1)^2
    for (double p : {1.5, 2.5, 4.0, 7.0})
      CHECK(std::pow(kappa0(p), p - 1.0) == doctest::Approx(2.0 * (p + 1.0) / ((p - 1.0) * (p - 1.0))).epsilon(1e-13));
    CHECK_THROWS_AS(kappa0(1.0), ValidationError);
    CHECK_THROWS_AS(kappa0(1.0 + 1e-8), ValidationError);
  }

  TEST_CASE("soliton profile values") {
    const GridPtr g = build_grid(32, 3.0);
    const ScalarField k0 = kappa_profile(SolitonParams::from_d(0.0, 0.0), g);
    CHECK((k0.values.array() - kappa0(3.0)).abs().maxCoeff() < 1e-15);
    const ScalarField km = kappa_profile(SolitonParams::from_d(0.0, std::numbers::pi), g);
    CHECK((km.values.array() + kappa0(3.0)).abs().maxCoeff() < 1e-14);
    // kappa(d, y) = kappa0 (1-d^2)^{1/(p-1)} / (1 + d y)^{2/(p-1)}
    const Vec kd = kappa_values(*g, 0.5);
    for (int j = 0; j < g->size(); ++j) {
      const double y = g->nodes()(j);
      CHECK(kd(j) == doctest::Approx(std::sqrt(2.0) * std::sqrt(0.75) / (1.0 + 0.5 * y)).epsilon(1e-14));
    }
    CHECK_THROWS_AS(SolitonParams::from_d(1.0, 0.0), ValidationError);
  }

  TEST_CASE("rapidity chart round trip") {
    for (double d : {-0.99, -0.3, 0.0, 0.7}) {
      const SolitonParams sp = SolitonParams::from_d(d, 0.1);
      CHECK(SolitonParams::from_lambda(sp.lambda, 0.1).d == doctest::Approx(d).epsilon(1e-15));
    }
  }

  TEST_CASE("angular distance lies in (-pi, pi]") {
    CHECK(angular_distance(0.1, 0.0) == doctest::Approx(0.1));
    CHECK(angular_distance(2.0 * std::numbers::pi + 0.1, 0.0) == doctest::Approx(0.1));
    CHECK(angular_distance(-0.1, 2.0 * std::numbers::pi) == doctest::Approx(-0.1));
  }

  TEST_CASE("d derivative matches a centered difference") {
    const GridPtr g = build_grid(32, 5.0);
    const double h = 1e-5;
    const Vec fd = (kappa_values(*g, 0.3 + h) - kappa_values(*g, 0.3 - h)) / (2.0 * h);
    CHECK((kappa_d_derivative(*g, 0.3) - fd).cwiseAbs().maxCoeff() < 1e-8);
  }

  TEST_CASE("lorentz maps the constant to the soliton and is the identity at d = 0") {
    for (double p : {2.0, 3.0, 5.0}) {
      const GridPtr g = build_grid(48, p);
      const ScalarField c = ScalarField::from_real(g, Vec::Constant(48, kappa0(p)));
      const ScalarField k = lorentz(c, 0.4);
      CHECK((k.values - kappa_values(*g, 0.4).cast<cplx>()).cwiseAbs().maxCoeff() < 1e-12);
      const ScalarField f = ScalarField::from_real(g, Vec(g->nodes().array().cos()));
      CHECK((lorentz(f, 0.0).values - f.values).cwiseAbs().maxCoeff() < 1e-14);
    }
  }

  TEST_CASE("lorentz group law") {
    const GridPtr g = build_grid(64, 3.0);
    const ScalarField f = ScalarField::from_real(g, Vec((0.5 * g->nodes().array()).exp() + 1.0));
    const double d1 = 0.3, d2 = -0.5;
    const ScalarField lhs = lorentz(lorentz(f, d1), d2);
    const ScalarField rhs = lorentz(f, (d1 + d2) / (1.0 + d1 * d2));
    CHECK((lhs.values - rhs.values).cwiseAbs().maxCoeff() < 1e-8);
  }

  TEST_CASE("stationary residual vanishes on the family and not elsewhere") {
    const GridPtr g = build_grid(128, 3.0);
    for (double d : {0.0, 0.7, -0.7}) {
      const double r0 = stationary_residual(kappa_profile(SolitonParams::from_d(d, 0.0), g));
      const double r1 = stationary_residual(kappa_profile(SolitonParams::from_d(d, 1.1), g));
      CHECK(r0 < 1e-8);
      CHECK(std::abs(r0 - r1) < 1e-10);
    }
    ScalarField big = kappa_profile(SolitonParams::from_d(0.0, 0.0), g);
    big.values *= 1.1;
    CHECK(stationary_residual(big) > 1e-2);
  }

  TEST_CASE("family shares the soliton energy") {
    for (double p : {2.0, 3.0, 5.0}) {
      const GridPtr g = build_grid(128, p);
      const double e0 = energy(StateField::from_real(g, Vec::Constant(128, kappa0(p)), Vec::Zero(128)));
      for (double d : {0.5, -0.5})
        for (double th : {0.0, 1.0}) {
          const ScalarField k = kappa_profile(SolitonParams::from_d(d, th), g);
          CHECK(std::abs(energy(StateField(g, k.values, CVec::Zero(128))) - e0) < 1e-8);
        }
    }
  }

  TEST_CASE("connection ode: kcheck trajectory") {
    const ConnectionTrajectory t = integrate_connection_ode(cplx(kappa0(3.0)), cplx(0.0), 6.0, 3.0);
    double err = 0.0;
    for (std::size_t k = 0; k < t.xi.size(); ++k) err = std::max(err, std::abs(t.v[k] - kcheck(t.xi[k], 3.0)));
    CHECK(err < 1e-8);
    CHECK(std::abs(t.mu) < 1e-12);
    CHECK(t.decaying);
  }

  TEST_CASE("connection ode: rotation keeps the modulus and the phase") {
    const cplx rot = std::polar(1.0, std::numbers::pi / 4.0);
    const ConnectionTrajectory a = integrate_connection_ode(cplx(kappa0(3.0)), cplx(0.0), 4.0, 3.0);
    const ConnectionTrajectory b = integrate_connection_ode(rot * kappa0(3.0), cplx(0.0), 4.0, 3.0);
    REQUIRE(a.xi.size() == b.xi.size());
    for (std::size_t k = 0; k < a.xi.size(); ++k) {
      CHECK(std::abs(a.r[k] - b.r[k]) < 1e-9);
      CHECK(std::abs(angular_distance(std::arg(b.v[k]), std::numbers::pi / 4.0)) < 1e-9);
    }
  }

  TEST_CASE("connection ode: nonzero angular momentum stays away from zero") {
    const ConnectionTrajectory t = integrate_connection_ode(cplx(kappa0(3.0)), cplx(0.0, 0.3), 8.0, 3.0);
    // mu = (r^2 h)^2 at xi = 0 with h = Im(v'/v) = 0.3/kappa0
    const double h0 = 0.3 / kappa0(3.0);
    CHECK(t.mu == doctest::Approx(std::pow(kappa0(3.0) * kappa0(3.0) * h0, 2)).epsilon(1e-10));
    CHECK(t.inf_modulus > 0.0);
    CHECK_FALSE(t.decaying);
    CHECK(t.max_energy_drift < 1e-8);
  }

  TEST_CASE("classification") {
    const GridPtr g = build_grid(64, 3.0);
    CHECK(classify_stationary(ScalarField::zeros(g), 1e-10).kind == Classification::Kind::Zero);
    const Classification c = classify_stationary(kappa_profile(SolitonParams::from_d(-0.4, 1.3), g), 1e-6);
    REQUIRE(c.kind == Classification::Kind::Soliton);
    CHECK(std::abs(c.params.d + 0.4) < 1e-10);
    CHECK(std::abs(angular_distance(c.params.theta, 1.3)) < 1e-10);
    ScalarField f = kappa_profile(SolitonParams::from_d(0.0, 0.0), g);
    f.values += 0.1 * g->nodes().cast<cplx>();
    CHECK(classify_stationary(f, 1e-6).kind == Classification::Kind::NotStationary);
  }
}
