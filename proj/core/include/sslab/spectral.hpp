#pragma once

#include <memory>

#include "sslab/wspace.hpp"

namespace sslab {

// L f = (1-y^2) f'' - 2 (p+1)/(p-1) y f'
CVec apply_L(const WeightedGrid& g, const CVec& f);
Vec apply_L(const WeightedGrid& g, const Vec& f);
ScalarField apply_L(const ScalarField& f);

// gamma_n = -n (n + (p+3)/(p-1))
double eigenvalue_L(int n, double p);

// Orthonormal (in L2_rho) eigenpolynomials of L, built from the Jacobi
// three-term recurrence for the weight rho.
class EigenBasis {
 public:
  static std::shared_ptr<const EigenBasis> build(const GridPtr& grid, int max_n = 64);

  int max_n() const { return max_n_; }
  double p() const { return grid_->p(); }
  const GridPtr& grid() const { return grid_; }
  const Vec& gamma() const { return gamma_; }
  double gamma(int n) const { return gamma_(n); }
  // values(j, n) = h_n(y_j)
  const Mat& values() const { return values_; }
  Vec mode(int n) const { return values_.col(n); }
  // h_n at arbitrary points of [-1,1].
  Vec eval(int n, const Vec& points) const;

  double orthogonality_defect() const { return orth_defect_; }
  double eigen_residual() const { return eigen_residual_; }

  // c_n = int f h_n rho
  Vec coefficients(const Vec& f) const;
  CVec coefficients(const CVec& f) const;
  // Coefficients of f when only f (1-y^2) is available (f may be unbounded at +-1).
  Vec coefficients_from_weighted(const Vec& f_omega) const;
  Vec synthesize(const Vec& c) const;
  CVec synthesize(const CVec& c) const;

 private:
  EigenBasis() = default;
  GridPtr grid_;
  int max_n_ = 0;
  Vec gamma_;
  Vec rec_s_;  // sqrt(beta_k) of the orthonormal recurrence
  double p0_ = 0.0;
  Mat values_;
  Mat proj_;  // (max_n+1) x n, maps nodal values to coefficients
  double orth_defect_ = 0.0;
  double eigen_residual_ = 0.0;
};

using BasisPtr = std::shared_ptr<const EigenBasis>;

inline BasisPtr build_eigenbasis(const GridPtr& grid, int max_n = 64) { return EigenBasis::build(grid, max_n); }

// int u L u rho - gamma_1 int u^2 rho for mean-zero u.
double poincare_gap_check(const ScalarField& u, double mean_tol = 1e-10);

struct EllipticSolution {
  ScalarField g;
  CVec coefficients;
  double residual;  // L2_rho norm of (-L+1) g - f; NaN if not evaluated
};

// (-L + 1) g = f by eigen-expansion truncated at the basis size.
EllipticSolution elliptic_solve(const ScalarField& f, const EigenBasis& basis, double tol = 1e-8);
// Same with the data given as coefficients int f h_n rho; no residual check.
Vec elliptic_solve_coefficients(const Vec& f_coeffs, const EigenBasis& basis);

// 2 p (p+1)/(p-1)^2
double eps_coefficient(double p);

struct EpsSolution {
  ScalarField v;
  Vec coefficients;
  bool resonant_mode_small;  // n = 0 denominator is O(eps)
};

// (1-eps) L v + eps c v = f with c = 2p(p+1)/(p-1)^2.
EpsSolution solve_eps_equation(const ScalarField& f, double eps, const EigenBasis& basis);
Vec solve_eps_coefficients(const Vec& f_coeffs, double eps, const EigenBasis& basis);

// psi-check = p kappa^{p-1} - 2(p+1)/(p-1)^2
Vec psi_check(const WeightedGrid& g, double d);
// psi-tilde = kappa^{p-1} - 2(p+1)/(p-1)^2
Vec psi_tilde(const WeightedGrid& g, double d);

// Default epsilon for the shifted form: min(1, gamma_1/(gamma_1 - c)).
double eps1_default(double p);

enum class FormVariant { RealPart, ImagPart, Eps };

// Real bilinear forms on real fields.  The Eps variant is evaluated through
// the Lorentz pull-back using the eigenvalues of L; `quad_form_eps_direct`
// is the nodal quadrature of the same form.
double quad_form(const StateField& q, const StateField& r, double d, FormVariant variant,
                 double eps = 0.0, const EigenBasis* basis = nullptr);
double quad_form_eps_direct(const StateField& q, const StateField& r, double d, double eps);

// int T_{-d}(q1) rho
cplx hyperplane_functional(const StateField& q, double d);
StateField hyperplane_project(const StateField& q, double d);

}  // namespace sslab
