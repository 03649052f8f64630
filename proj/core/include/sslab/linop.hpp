#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "sslab/spectral.hpp"
#include "sslab/wspace.hpp"

namespace sslab {

enum class Part { Real, Imag };

// Linearized operator around kappa(d, .): real part (Part::Real) or
// imaginary part (Part::Imag).  Input and output are real fields.
StateField apply_linearized(const StateField& q, double d, Part part);

// Adjoint with respect to phi.  The first component solves
// (-L+1) g = L r2 + psi r2 by eigen-expansion.
StateField apply_adjoint(const StateField& r, double d, Part part, const EigenBasis& basis);

// A dual eigenfunction W stored through the data that define it:
// g = (-L+1) W_1 (given as g (1-y^2), which is smooth even where g is not)
// and W_2.  Then phi(W, r) = int g r1 rho + int W_2 r2 rho.
struct DualFunctional {
  GridPtr grid;
  Vec g_omega;
  Vec second;

  double pair(const StateField& r) const;
  cplx pair_complex(const StateField& r) const;
};

// (-L+1) W_1 (1-y^2) for a dual with second component r2 and eigenvalue lambda.
Vec dual_rhs_weighted(const WeightedGrid& g, const Vec& r2, double lambda);

struct LinearizedFrame {
  double d = 0.0;
  GridPtr grid;
  StateField F1, F0, Ft0;
  DualFunctional W1_dual, W0_dual, Wt0_dual;
  // Full duals with first components from the eigen-expansion (empty in light frames).
  StateField W1, W0, Wt0;
  bool has_first_components = false;
  // Normalization constants actually used (absorbing every d-dependent factor).
  double c1 = 0.0, c0 = 0.0, ct0 = 0.0;
  // Closed-form candidates: cbar = 1/(2(2/(p-1)+lambda) int (y^2/(1-y^2))^{1-lambda} rho)
  // and ctilde0 = 1/((4 kappa0^2/(p-1)) int rho/(1-y^2)).
  double c1_formula = 0.0, c0_formula = 0.0, ct0_formula = 0.0;
  // Which d-factor reproduces the numerical normalization: "(1-d)", "(1-d^2)",
  // "both" (d = 0) or "neither".
  std::string w_check_variant;
  bool ct0_formula_matches = false;
};

LinearizedFrame build_frame(double d, const GridPtr& grid, const BasisPtr& basis = nullptr);

struct Projection {
  double a1 = 0.0;       // pi-check_1 of Re q
  double a0check = 0.0;  // pi-check_0 of Re q
  double a0tilde = 0.0;  // pi-tilde_0 of Im q
  StateField q_minus_real;
  StateField q_minus_imag;
};

Projection project(const StateField& q, const LinearizedFrame& frame);

// Random smooth real field: eigen-expansions of degree <= `degree` with
// coefficients decaying like `decay`^n.
StateField random_smooth_state(const EigenBasis& basis, std::mt19937_64& rng, int degree = 24, double decay = 0.7);

struct RatioRange {
  double min_ratio;
  double max_ratio;
};

// Extremal phi-form / ||.||_H^2 ratios over random remainders.
RatioRange norm_equivalence_sample(const LinearizedFrame& frame, const EigenBasis& basis, Part part, int trials,
                                   std::uint64_t seed = 20240611);

struct V0Result {
  double d = 0.0;
  double eps = 0.0;
  StateField V0;
  Vec v_coeffs;  // coefficients of T_{-d}(V0_1)
  double phi_eps_V0V0 = 0.0;
};

V0Result build_V0(const LinearizedFrame& frame, const EigenBasis& basis, double eps, double eps2 = 0.1);
// phi_{d,eps}(V0, r) through the Lorentz pull-back.
double pair_eps_V0(const V0Result& v0, const EigenBasis& basis, const StateField& r);

}  // namespace sslab
