#include <cmath>
#include <random>

#include "doctest.h"
#include "sslab/spectral.hpp"
#include "sslab/wspace.hpp"

using namespace sslab;

namespace {

// int_{-1}^{1} y^k (1-y^2)^{e} dy for even k.
double beta_moment(int k, double e) {
  if (k % 2) return 0.0;
  return std::beta((k + 1) / 2.0, e + 1.0);
}

}  // namespace

TEST_SUITE("wspace") {
  TEST_CASE("nodes lie strictly inside and are symmetric") {
    for (double p : {2.0, 3.0, 5.0}) {
      const GridPtr g = build_grid(16, p);
      REQUIRE(g->size() == 16);
      const Vec& y = g->nodes();
      for (int j = 0; j < 16; ++j) {
        CHECK(std::abs(y(j)) < 1.0);
        CHECK(y(j) == doctest::Approx(-y(15 - j)).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("too few nodes is rejected") {
    CHECK_THROWS_AS(build_grid(4, 2.0), ValidationError);
    CHECK_THROWS_AS(build_grid(16, 1.0), ValidationError);
  }

  TEST_CASE("base weights integrate monomials to the exactness degree") {
    for (double p : {2.0, 3.0, 5.0}) {
      const GridPtr g = build_grid(24, p);
      const double e = g->a() - 1.0;
      const int deg = g->metadata().exactness_degree;
      REQUIRE(deg == 2 * 24 - 1);
      for (int k = 0; k <= deg; ++k) {
        const Vec f = g->nodes().array().pow(k).matrix();
        CHECK(std::abs(g->integrate_over_omega(f) - beta_moment(k, e)) < 1e-12);
      }
    }
  }

  TEST_CASE("unit weights are exact when the base weight is flat") {
    // p = 3 gives base exponent 0, so the rule is Gauss-Legendre.
    const GridPtr g = build_grid(20, 3.0);
    for (int k = 0; k <= 39; ++k) {
      const Vec f = g->nodes().array().pow(k).matrix();
      CHECK(std::abs(g->quad_weights().dot(f) - beta_moment(k, 0.0)) < 1e-12);
    }
  }

  TEST_CASE("rho integral for p = 3 is 4/3") {
    const GridPtr g = build_grid(32, 3.0);
    CHECK(std::abs(g->integrate(Vec(Vec::Ones(32))) - 4.0 / 3.0) < 1e-12);
    CHECK(std::abs(g->quad_weights().dot(g->rho()) - 4.0 / 3.0) < 1e-12);
  }

  TEST_CASE("eval_weight closed-form values") {
    CHECK(eval_weight(0.0, 2.0) == 1.0);
    CHECK(eval_weight(0.0, 7.0) == 1.0);
    CHECK(eval_weight(0.6, 3.0) == doctest::Approx(0.64).epsilon(1e-15));
    CHECK(eval_weight(0.99, 2.0) == doctest::Approx(0.0199 * 0.0199).epsilon(1e-12));
    CHECK_THROWS_AS(eval_weight(1.0, 3.0), ValidationError);
  }

  TEST_CASE("stored rho matches eval_weight exactly") {
    const GridPtr g = build_grid(40, 5.0);
    for (int j = 0; j < g->size(); ++j) CHECK(g->rho()(j) == eval_weight(g->nodes()(j), 5.0));
  }

  TEST_CASE("collocation derivative is exact on polynomials") {
    const GridPtr g = build_grid(32, 3.0);
    const Vec y = g->nodes();
    const CVec f = (y.array().pow(7) - 2.0 * y.array().pow(3)).matrix().cast<cplx>();
    const CVec df = (7.0 * y.array().pow(6) - 6.0 * y.array().square()).matrix().cast<cplx>();
    CHECK((g->derivative(f) - df).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("inner_phi of a real state with itself is the squared H norm") {
    const GridPtr g = build_grid(32, 3.0);
    const Vec y = g->nodes();
    const StateField q = StateField::from_real(g, Vec(y.array().square()), Vec(y.array() + 1.0));
    const cplx ip = inner_phi(q, q);
    CHECK(std::abs(ip.imag()) < 1e-15);
    CHECK(ip.real() > 0.0);
    CHECK(ip.real() == doctest::Approx(norms(q).H * norms(q).H).epsilon(1e-14));
    // int (y^4 + 4 y^2 (1-y^2) + (1+y)^2)(1-y^2) dy, term by term
    const double exact = 2.0 * (1.0 / 5 - 1.0 / 7) + 4.0 * 2.0 * (1.0 / 3 - 2.0 / 5 + 1.0 / 7) +
                         (2.0 * (1.0 - 1.0 / 3) + 2.0 * (1.0 / 3 - 1.0 / 5));
    CHECK(ip.real() == doctest::Approx(exact).epsilon(1e-13));
  }

  TEST_CASE("zero field has zero norms") {
    const GridPtr g = build_grid(16, 3.0);
    const Norms z = norms(StateField::zeros(g));
    CHECK(z.H == 0.0);
    CHECK(z.H0 == 0.0);
    CHECK(z.L2rho == 0.0);
    CHECK(z.Lp1rho == 0.0);
    CHECK(inner_phi(StateField::zeros(g), StateField::zeros(g)) == cplx(0.0));
  }

  TEST_CASE("constant field has H0 norm squared equal to the rho integral") {
    const GridPtr g = build_grid(32, 3.0);
    const double h0 = norms(ScalarField::from_real(g, Vec::Ones(32))).H0;
    CHECK(h0 * h0 == doctest::Approx(4.0 / 3.0).epsilon(1e-13));
  }

  TEST_CASE("hardy-sobolev ratio is finite on the corpus and rejects zero") {
    const GridPtr g = build_grid(64, 3.0);
    const BasisPtr b = build_eigenbasis(g, 12);
    for (int n = 0; n <= 10; ++n) {
      const double r = hardy_sobolev_ratio(ScalarField::from_real(g, b->mode(n)));
      CHECK(std::isfinite(r));
      CHECK(r <= 10.0);
    }
    CHECK_THROWS_AS(hardy_sobolev_ratio(ScalarField::zeros(g)), ValidationError);
  }

  TEST_CASE("state arithmetic and grid mismatch") {
    const GridPtr g = build_grid(16, 3.0), h = build_grid(16, 3.0);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    CVec a(16), b(16);
    for (int j = 0; j < 16; ++j) {
      a(j) = {nd(rng), nd(rng)};
      b(j) = {nd(rng), nd(rng)};
    }
    const StateField s(g, a, b);
    const StateField t = cplx(0, 1) * s;
    CHECK((t.first - cplx(0, 1) * a).cwiseAbs().maxCoeff() == 0.0);
    CHECK((s + s - 2.0 * s).first.cwiseAbs().maxCoeff() == 0.0);
    CHECK((s.real_part() + cplx(0, 1) * s.imag_part() - s).first.cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(s + StateField(h, a, b), ValidationError);
    CVec bad = a;
    bad(0) = std::nan("");
    CHECK_THROWS_AS(StateField(g, bad, b).validate(), ValidationError);
  }
}
