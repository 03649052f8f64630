#include "sslab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sslab/stationary.hpp"

namespace sslab {

namespace {

double recurrence_beta(int k, double b) {
  if (k == 1) return 1.0 / (2.0 * b + 3.0);
  const double kk = k;
  return kk * (kk + 2.0 * b) / ((2.0 * kk + 2.0 * b + 1.0) * (2.0 * kk + 2.0 * b - 1.0));
}

double weight_mass(double b) {
  return std::exp(0.5 * std::log(std::numbers::pi) + std::lgamma(b + 1.0) - std::lgamma(b + 1.5));
}

double shift_constant(double p) { return 2.0 * (p + 1.0) / ((p - 1.0) * (p - 1.0)); }

}  // namespace

CVec apply_L(const WeightedGrid& g, const CVec& f) {
  CVec out(f.size());
  out.real() = apply_L(g, Vec(f.real()));
  out.imag() = apply_L(g, Vec(f.imag()));
  return out;
}

Vec apply_L(const WeightedGrid& g, const Vec& f) {
  const double c = 2.0 * (g.p() + 1.0) / (g.p() - 1.0);
  const Vec d1 = g.diff_matrix() * f;
  const Vec d2 = g.diff2_matrix() * f;
  return (g.omega().array() * d2.array() - c * g.nodes().array() * d1.array()).matrix();
}

ScalarField apply_L(const ScalarField& f) {
  f.validate();
  return ScalarField(f.grid, apply_L(*f.grid, f.values));
}

double eigenvalue_L(int n, double p) { return -n * (n + (p + 3.0) / (p - 1.0)); }

std::shared_ptr<const EigenBasis> EigenBasis::build(const GridPtr& grid, int max_n) {
  if (!grid) throw ValidationError("build_eigenbasis: null grid");
  const int n = grid->size();
  if (max_n < 0) throw ValidationError("build_eigenbasis: max_n must be >= 0");
  if (max_n > n - 2) throw ValidationError("build_eigenbasis: max_n exceeds half the grid exactness");
  std::shared_ptr<EigenBasis> b(new EigenBasis());
  b->grid_ = grid;
  b->max_n_ = max_n;
  const double p = grid->p();
  const double a = grid->a();
  b->gamma_.resize(max_n + 1);
  for (int k = 0; k <= max_n; ++k) b->gamma_(k) = eigenvalue_L(k, p);
  b->rec_s_.resize(max_n + 2);
  b->rec_s_(0) = 0.0;
  for (int k = 1; k <= max_n + 1; ++k) b->rec_s_(k) = std::sqrt(recurrence_beta(k, a));
  b->p0_ = 1.0 / std::sqrt(weight_mass(a));

  b->values_.resize(n, max_n + 1);
  for (int k = 0; k <= max_n; ++k) b->values_.col(k) = b->eval(k, grid->nodes());
  b->proj_ = b->values_.transpose() * grid->rho_weights().asDiagonal();

  const Mat gram = b->proj_ * b->values_;
  b->orth_defect_ = (gram - Mat::Identity(max_n + 1, max_n + 1)).cwiseAbs().maxCoeff();
  if (b->orth_defect_ > 1e-8)
    throw NumericalError("build_eigenbasis: loss of orthogonality beyond 1e-8 (grid too coarse)");
  double res = 0.0;
  for (int k = 0; k <= max_n; ++k) {
    const Vec hk = b->values_.col(k);
    const Vec r = apply_L(*grid, hk) - b->gamma_(k) * hk;
    res = std::max(res, l2rho_norm(grid, r.cast<cplx>()) / (1.0 + std::abs(b->gamma_(k))));
  }
  b->eigen_residual_ = res;
  if (res > 1e-6) throw NumericalError("build_eigenbasis: eigen-relation not satisfied on this grid");
  return b;
}

Vec EigenBasis::eval(int n, const Vec& points) const {
  if (n < 0 || n > max_n_ + 1) throw ValidationError("EigenBasis::eval: index out of range");
  Vec pm = Vec::Zero(points.size());
  Vec pc = Vec::Constant(points.size(), p0_);
  for (int k = 0; k < n; ++k) {
    Vec pn = ((points.array() * pc.array() - rec_s_(k) * pm.array()) / rec_s_(k + 1)).matrix();
    pm = std::move(pc);
    pc = std::move(pn);
  }
  return pc;
}

Vec EigenBasis::coefficients(const Vec& f) const { return proj_ * f; }

CVec EigenBasis::coefficients(const CVec& f) const {
  CVec out(max_n_ + 1);
  out.real() = proj_ * f.real();
  out.imag() = proj_ * f.imag();
  return out;
}

Vec EigenBasis::coefficients_from_weighted(const Vec& f_omega) const {
  return values_.transpose() * (grid_->base_weights().array() * f_omega.array()).matrix();
}

Vec EigenBasis::synthesize(const Vec& c) const { return values_ * c; }

CVec EigenBasis::synthesize(const CVec& c) const {
  CVec out(values_.rows());
  out.real() = values_ * c.real();
  out.imag() = values_ * c.imag();
  return out;
}

double poincare_gap_check(const ScalarField& u, double mean_tol) {
  u.validate();
  const WeightedGrid& g = *u.grid;
  if (std::abs(g.integrate(u.values)) > mean_tol) throw ValidationError("poincare_gap_check: field is not mean-zero");
  const CVec Lu = apply_L(g, u.values);
  const double uLu = g.integrate(CVec(u.values.conjugate().array() * Lu.array())).real();
  const double uu = g.integrate(Vec(u.values.array().abs2().matrix()));
  return uLu - eigenvalue_L(1, g.p()) * uu;
}

EllipticSolution elliptic_solve(const ScalarField& f, const EigenBasis& basis, double tol) {
  f.validate();
  if (f.grid != basis.grid()) throw ValidationError("elliptic_solve: grid mismatch");
  const CVec fc = basis.coefficients(f.values);
  CVec gc(fc.size());
  for (int k = 0; k < fc.size(); ++k) gc(k) = fc(k) / (1.0 - basis.gamma(k));
  ScalarField g(f.grid, basis.synthesize(gc));
  const CVec r = (-apply_L(*f.grid, g.values) + g.values - f.values).eval();
  const double residual = l2rho_norm(f.grid, r);
  if (tol > 0.0 && !(residual <= tol))
    throw NumericalError("elliptic_solve: truncation residual above tolerance");
  return {std::move(g), std::move(gc), residual};
}

Vec elliptic_solve_coefficients(const Vec& f_coeffs, const EigenBasis& basis) {
  Vec out(f_coeffs.size());
  for (int k = 0; k < f_coeffs.size(); ++k) out(k) = f_coeffs(k) / (1.0 - basis.gamma(k));
  return out;
}

double eps_coefficient(double p) { return 2.0 * p * (p + 1.0) / ((p - 1.0) * (p - 1.0)); }

double eps1_default(double p) {
  const double g1 = eigenvalue_L(1, p);
  return std::min(1.0, g1 / (g1 - eps_coefficient(p)));
}

Vec solve_eps_coefficients(const Vec& f_coeffs, double eps, const EigenBasis& basis) {
  if (!(eps >= 0.0 && eps < 0.5)) throw ValidationError("solve_eps_equation: eps must lie in [0, 1/2)");
  const double c = eps_coefficient(basis.p());
  Vec out(f_coeffs.size());
  for (int k = 0; k < f_coeffs.size(); ++k) {
    const double den = (1.0 - eps) * basis.gamma(k) + eps * c;
    if (std::abs(den) < 1e-14 * (1.0 + std::abs(basis.gamma(k)))) {
      if (std::abs(f_coeffs(k)) > 1e-14) throw ValidationError("solve_eps_equation: vanishing denominator");
      out(k) = 0.0;
      continue;
    }
    out(k) = f_coeffs(k) / den;
  }
  return out;
}

EpsSolution solve_eps_equation(const ScalarField& f, double eps, const EigenBasis& basis) {
  f.validate();
  if (f.grid != basis.grid()) throw ValidationError("solve_eps_equation: grid mismatch");
  if (f.values.imag().cwiseAbs().maxCoeff() > 0.0)
    throw ValidationError("solve_eps_equation: real data expected");
  const Vec fc = basis.coefficients(Vec(f.values.real()));
  Vec vc = solve_eps_coefficients(fc, eps, basis);
  const double c = eps_coefficient(basis.p());
  const double den0 = eps * c;
  const double den1 = std::abs((1.0 - eps) * basis.gamma(std::min(1, basis.max_n())) + eps * c);
  EpsSolution out{ScalarField::from_real(f.grid, basis.synthesize(vc)), vc, den0 < den1};
  return out;
}

Vec psi_check(const WeightedGrid& g, double d) {
  const double p = g.p();
  return (p * kappa_values(g, d).array().pow(p - 1.0) - shift_constant(p)).matrix();
}

Vec psi_tilde(const WeightedGrid& g, double d) {
  const double p = g.p();
  return (kappa_values(g, d).array().pow(p - 1.0) - shift_constant(p)).matrix();
}

double quad_form(const StateField& q, const StateField& r, double d, FormVariant variant, double eps,
                 const EigenBasis* basis) {
  if (q.grid != r.grid) throw ValidationError("quad_form: grid mismatch");
  const WeightedGrid& g = *q.grid;
  const Vec q1 = q.first.real(), q2 = q.second.real();
  const Vec r1 = r.first.real(), r2 = r.second.real();
  if (variant == FormVariant::Eps) {
    if (!basis) throw ValidationError("quad_form: the eps variant needs an eigenbasis");
    if (basis->grid() != q.grid) throw ValidationError("quad_form: basis grid mismatch");
    const Vec Q = lorentz_values(g, q1.cast<cplx>(), -d).real();
    const Vec R = lorentz_values(g, r1.cast<cplx>(), -d).real();
    const Vec qc = basis->coefficients(Q);
    const Vec rc = basis->coefficients(R);
    const double c = eps_coefficient(g.p());
    double acc = 0.0;
    for (int k = 0; k < qc.size(); ++k) acc += qc(k) * rc(k) * (-(1.0 - eps) * basis->gamma(k) - eps * c);
    return acc + (1.0 - eps) * g.integrate(Vec(q2.cwiseProduct(r2)));
  }
  const Vec psi = variant == FormVariant::RealPart ? psi_check(g, d) : psi_tilde(g, d);
  const Vec dq = g.derivative(q1), dr = g.derivative(r1);
  const Vec integrand =
      (-psi.array() * q1.array() * r1.array() + dq.array() * dr.array() * g.omega().array() + q2.array() * r2.array())
          .matrix();
  return g.integrate(integrand);
}

double quad_form_eps_direct(const StateField& q, const StateField& r, double d, double eps) {
  if (q.grid != r.grid) throw ValidationError("quad_form: grid mismatch");
  const WeightedGrid& g = *q.grid;
  const Vec q1 = q.first.real(), q2 = q.second.real();
  const Vec r1 = r.first.real(), r2 = r.second.real();
  const Vec psi = psi_tilde(g, d);
  const double c = eps_coefficient(g.p());
  const auto y = g.nodes().array();
  const Vec extra = (c * (1.0 - d * d) / (1.0 + d * y).square()).matrix();
  const Vec dq = g.derivative(q1), dr = g.derivative(r1);
  const Vec integrand = ((1.0 - eps) * (dq.array() * dr.array() * g.omega().array() - psi.array() * q1.array() * r1.array()) -
                         eps * extra.array() * q1.array() * r1.array() + (1.0 - eps) * q2.array() * r2.array())
                            .matrix();
  return g.integrate(integrand);
}

cplx hyperplane_functional(const StateField& q, double d) {
  q.validate();
  return q.grid->integrate(lorentz_values(*q.grid, q.first, -d));
}

StateField hyperplane_project(const StateField& q, double d) {
  q.validate();
  const WeightedGrid& g = *q.grid;
  const CVec u = (kappa_values(g, d) / kappa0(g.p())).cast<cplx>();
  const cplx den = g.integrate(lorentz_values(g, u, -d));
  const cplx c = hyperplane_functional(q, d) / den;
  StateField out = q;
  out.first -= c * u;
  return out;
}

}  // namespace sslab
