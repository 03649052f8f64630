#include <cmath>
#include <random>

#include "doctest.h"
#include "sslab/linop.hpp"
#include "sslab/spectral.hpp"
#include "sslab/stationary.hpp"

using namespace sslab;

TEST_SUITE("spectral") {
  TEST_CASE("eigenvalues of L") {
    CHECK(eigenvalue_L(0, 3.0) == 0.0);
    CHECK(eigenvalue_L(1, 3.0) == -4.0);
    CHECK(eigenvalue_L(2, 3.0) == -10.0);
    CHECK(eigenvalue_L(3, 2.0) == doctest::Approx(-3.0 * (3.0 + 5.0)));
  }

  TEST_CASE("eigenbasis: orthonormal, low modes are 1 and y") {
    for (double p : {2.0, 3.0, 5.0}) {
      const GridPtr g = build_grid(64, p);
      const BasisPtr b = build_eigenbasis(g, 20);
      for (int m = 0; m <= 20; ++m)
        for (int n = 0; n <= m; ++n) {
          const double ip = g->integrate(Vec(b->mode(m).cwiseProduct(b->mode(n))));
          CHECK(std::abs(ip - (m == n ? 1.0 : 0.0)) < 1e-10);
        }
      const Vec h0 = b->mode(0);
      CHECK((h0.array() - h0(0)).abs().maxCoeff() < 1e-13);
      const Vec h1 = b->mode(1);
      CHECK((h1 - (h1(0) / g->nodes()(0)) * g->nodes()).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("L acts diagonally on the eigenbasis") {
    const GridPtr g = build_grid(128, 3.0);
    const BasisPtr b = build_eigenbasis(g, 10);
    for (int n = 0; n <= 8; ++n) {
      const Vec r = apply_L(*g, b->mode(n)) - eigenvalue_L(n, 3.0) * b->mode(n);
      CHECK(r.cwiseAbs().maxCoeff() < 1e-8);
    }
    CHECK(apply_L(*g, Vec(Vec::Constant(128, 2.5))).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("soliton solves L kappa + psi-tilde kappa = 0") {
    for (double p : {2.0, 3.0, 5.0}) {
      const GridPtr g = build_grid(128, p);
      for (double d : {0.0, 0.5, -0.8}) {
        const Vec k = kappa_values(*g, d);
        const Vec r = apply_L(*g, k) + psi_tilde(*g, d).cwiseProduct(k);
        CHECK(l2rho_norm(g, CVec(r.cast<cplx>())) < 1e-8);
      }
    }
  }

  TEST_CASE("poincare gap") {
    const GridPtr g = build_grid(64, 3.0);
    const BasisPtr b = build_eigenbasis(g, 30);
    CHECK(std::abs(poincare_gap_check(ScalarField::from_real(g, b->mode(1)))) < 1e-10);
    // (gamma_2 - gamma_1) int h_2^2 rho
    CHECK(poincare_gap_check(ScalarField::from_real(g, b->mode(2))) == doctest::Approx(-10.0 + 4.0).epsilon(1e-10));
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 100; ++t) {
      Vec u = Vec::Zero(64);
      for (int k = 1; k <= 30; ++k) u += nd(rng) / (1.0 + k) * b->mode(k);
      CHECK(poincare_gap_check(ScalarField::from_real(g, u)) <= 1e-8);
    }
    CHECK_THROWS_AS(poincare_gap_check(ScalarField::from_real(g, b->mode(0))), ValidationError);
  }

  TEST_CASE("elliptic solve") {
    const GridPtr g = build_grid(64, 3.0);
    const BasisPtr b = build_eigenbasis(g, 40);
    const EllipticSolution s0 = elliptic_solve(ScalarField::from_real(g, b->mode(0)), *b);
    CHECK((s0.g.values - b->mode(0).cast<cplx>()).cwiseAbs().maxCoeff() < 1e-12);
    // 1 - gamma_2 = 11
    const EllipticSolution s2 = elliptic_solve(ScalarField::from_real(g, b->mode(2)), *b);
    CHECK((s2.g.values - (b->mode(2) / 11.0).cast<cplx>()).cwiseAbs().maxCoeff() < 1e-12);
    const Vec f = (g->nodes().array() * 0.7).exp().matrix();
    CHECK(elliptic_solve(ScalarField::from_real(g, f), *b).residual < 1e-8);
  }

  TEST_CASE("eps equation") {
    const GridPtr g = build_grid(64, 3.0);
    const BasisPtr b = build_eigenbasis(g, 20);
    CHECK(eps_coefficient(3.0) == 6.0);
    // eps c v = h0 with c = 6
    const EpsSolution s = solve_eps_equation(ScalarField::from_real(g, b->mode(0)), 0.01, *b);
    CHECK((s.v.values - (100.0 / 6.0 * b->mode(0)).cast<cplx>()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(s.resonant_mode_small);
    const EpsSolution s1 = solve_eps_equation(ScalarField::from_real(g, b->mode(1)), 1e-9, *b);
    CHECK((s1.v.values - (b->mode(1) / -4.0).cast<cplx>()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK_THROWS_AS(solve_eps_equation(ScalarField::from_real(g, b->mode(0)), 0.0, *b), ValidationError);
  }

  TEST_CASE("quadratic forms: symmetry and zero-mode annihilation") {
    const GridPtr g = build_grid(64, 3.0);
    const BasisPtr b = build_eigenbasis(g, 40);
    std::mt19937_64 rng(5);
    for (double d : {0.0, 0.5}) {
      const StateField q = random_smooth_state(*b, rng).real_part(), r = random_smooth_state(*b, rng).real_part();
      for (FormVariant v : {FormVariant::RealPart, FormVariant::ImagPart})
        CHECK(std::abs(quad_form(q, r, d, v) - quad_form(r, q, d, v)) < 1e-12);
      const LinearizedFrame fr = build_frame(d, g, b);
      CHECK(std::abs(quad_form(fr.Ft0, fr.Ft0, d, FormVariant::ImagPart)) < 1e-10);
    }
  }

  TEST_CASE("eps form agrees with its nodal quadrature") {
    const GridPtr g = build_grid(96, 3.0);
    const BasisPtr b = build_eigenbasis(g, 60);
    std::mt19937_64 rng(9);
    const StateField q = random_smooth_state(*b, rng).real_part();
    for (double d : {0.0, 0.3}) {
      const double a = quad_form(q, q, d, FormVariant::Eps, 0.05, b.get());
      const double c = quad_form_eps_direct(q, q, d, 0.05);
      CHECK(std::abs(a - c) < 1e-8 * std::max(1.0, std::abs(a)));
    }
  }

  TEST_CASE("hyperplane projection") {
    const GridPtr g = build_grid(64, 3.0);
    for (double d : {0.0, 0.4}) {
      const StateField k = StateField::from_real(g, kappa_values(*g, d), Vec::Zero(64));
      const StateField pk = hyperplane_project(k, d);
      CHECK(std::abs(hyperplane_functional(pk, d)) < 1e-12);
      const StateField again = hyperplane_project(pk, d);
      CHECK((again.first - pk.first).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("eps form is nonnegative on the hyperplane") {
    const GridPtr g = build_grid(64, 3.0);
    const BasisPtr b = build_eigenbasis(g, 40);
    std::mt19937_64 rng(21);
    const double eps = eps1_default(3.0);
    for (int t = 0; t < 20; ++t) {
      const StateField u = hyperplane_project(random_smooth_state(*b, rng).real_part(), 0.2);
      CHECK(quad_form(u, u, 0.2, FormVariant::Eps, eps, b.get()) >= -1e-10);
    }
  }
}
