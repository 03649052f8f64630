#include "sslab/linop.hpp"

#include <cmath>
#include <limits>

#include "sslab/stationary.hpp"

namespace sslab {

namespace {

Vec real_of(const CVec& v) { return v.real(); }

double rel_close(double a, double b) { return std::abs(a - b) <= 1e-8 * std::max(std::abs(a), std::abs(b)); }

}  // namespace

StateField apply_linearized(const StateField& q, double d, Part part) {
  q.validate();
  const WeightedGrid& g = *q.grid;
  const double p = g.p();
  const Vec q1 = real_of(q.first), q2 = real_of(q.second);
  const Vec psi = part == Part::Real ? psi_check(g, d) : psi_tilde(g, d);
  const Vec second = (apply_L(g, q1).array() + psi.array() * q1.array() - ((p + 3.0) / (p - 1.0)) * q2.array() -
                      2.0 * g.nodes().array() * g.derivative(q2).array())
                         .matrix();
  return StateField::from_real(q.grid, q2, second);
}

StateField apply_adjoint(const StateField& r, double d, Part part, const EigenBasis& basis) {
  r.validate();
  const WeightedGrid& g = *r.grid;
  const double p = g.p();
  const Vec r1 = real_of(r.first), r2 = real_of(r.second);
  const Vec psi = part == Part::Real ? psi_check(g, d) : psi_tilde(g, d);
  const Vec rhs = apply_L(g, r2) + psi.cwiseProduct(r2);
  const Vec first = basis.synthesize(elliptic_solve_coefficients(basis.coefficients(rhs), basis));
  const Vec second = (-apply_L(g, r1).array() + r1.array() + ((p + 3.0) / (p - 1.0)) * r2.array() +
                      2.0 * g.nodes().array() * g.derivative(r2).array() -
                      (8.0 / (p - 1.0)) * r2.array() / g.omega().array())
                         .matrix();
  return StateField::from_real(r.grid, first, second);
}

double DualFunctional::pair(const StateField& r) const {
  return grid->base_weights().dot(g_omega.cwiseProduct(Vec(r.first.real()))) +
         grid->rho_weights().dot(second.cwiseProduct(Vec(r.second.real())));
}

cplx DualFunctional::pair_complex(const StateField& r) const {
  const CVec a = (g_omega.cast<cplx>().array() * r.first.conjugate().array()).matrix();
  const CVec b = (second.cast<cplx>().array() * r.second.conjugate().array()).matrix();
  return grid->integrate_over_omega(a) + grid->integrate(b);
}

Vec dual_rhs_weighted(const WeightedGrid& g, const Vec& r2, double lambda) {
  const double p = g.p();
  const Vec dr2 = g.derivative(r2);
  return (g.omega().array() * ((lambda - (p + 3.0) / (p - 1.0)) * r2.array() - 2.0 * g.nodes().array() * dr2.array()) +
          (8.0 / (p - 1.0)) * r2.array())
      .matrix();
}

LinearizedFrame build_frame(double d, const GridPtr& grid, const BasisPtr& basis) {
  if (!grid) throw ValidationError("build_frame: null grid");
  if (!(std::abs(d) < 1.0)) throw ValidationError("build_frame: |d| must be < 1");
  if (basis && basis->grid() != grid) throw ValidationError("build_frame: basis grid mismatch");
  const WeightedGrid& g = *grid;
  const double p = g.p();
  const auto y = g.nodes().array();
  const int n = g.size();
  LinearizedFrame fr;
  fr.d = d;
  fr.grid = grid;

  const Vec shape = (1.0 + d * y).pow(-(p + 1.0) / (p - 1.0)).matrix();
  const Vec f1 = std::pow(1.0 - d * d, p / (p - 1.0)) * shape;
  const Vec f0 = (std::pow(1.0 - d * d, 1.0 / (p - 1.0)) * (y + d) * shape.array()).matrix();
  const Vec kap = kappa_values(g, d);
  fr.F1 = StateField::from_real(grid, f1, f1);
  fr.F0 = StateField::from_real(grid, f0, Vec::Zero(n));
  fr.Ft0 = StateField::from_real(grid, kap, Vec::Zero(n));

  const auto make_dual = [&](const Vec& r2, double lambda) {
    return DualFunctional{grid, dual_rhs_weighted(g, r2, lambda), r2};
  };
  const auto normalize = [&](DualFunctional& w, const StateField& F) {
    const double c = 1.0 / w.pair(F);
    w.g_omega *= c;
    w.second *= c;
    return c;
  };

  DualFunctional w1 = make_dual(((1.0 - y.square()) * shape.array()).matrix(), 1.0);
  DualFunctional w0 = make_dual(((y + d) * shape.array()).matrix(), 0.0);
  DualFunctional wt = make_dual(kap, 0.0);
  fr.c1 = normalize(w1, fr.F1);
  fr.c0 = normalize(w0, fr.F0);
  fr.ct0 = normalize(wt, fr.Ft0);

  const double a = g.a();
  fr.c1_formula = 1.0 / (2.0 * (a + 1.0) * g.integrate(Vec(Vec::Ones(n))));
  fr.c0_formula = 1.0 / (2.0 * a * g.integrate_over_omega(Vec(g.nodes().array().square().matrix())));
  const double k0 = kappa0(p);
  fr.ct0_formula = 1.0 / ((4.0 * k0 * k0 / (p - 1.0)) * g.integrate_over_omega(Vec(Vec::Ones(n))));
  const double fa = std::pow(1.0 - d, 1.0 / (p - 1.0));
  const double fb = std::pow(1.0 - d * d, 1.0 / (p - 1.0));
  const bool ma = rel_close(fr.c1, fr.c1_formula * fa) && rel_close(fr.c0, fr.c0_formula * fa);
  const bool mb = rel_close(fr.c1, fr.c1_formula * fb) && rel_close(fr.c0, fr.c0_formula * fb);
  fr.w_check_variant = ma && mb ? "both" : ma ? "(1-d)" : mb ? "(1-d^2)" : "neither";
  fr.ct0_formula_matches = rel_close(fr.ct0, fr.ct0_formula);

  fr.W1_dual = std::move(w1);
  fr.W0_dual = std::move(w0);
  fr.Wt0_dual = std::move(wt);

  if (basis) {
    const auto full = [&](const DualFunctional& w) {
      const Vec gc = basis->coefficients_from_weighted(w.g_omega);
      const Vec first = basis->synthesize(elliptic_solve_coefficients(gc, *basis));
      return StateField::from_real(grid, first, w.second);
    };
    fr.W1 = full(fr.W1_dual);
    fr.W0 = full(fr.W0_dual);
    fr.Wt0 = full(fr.Wt0_dual);
    fr.has_first_components = true;
  }
  return fr;
}

Projection project(const StateField& q, const LinearizedFrame& frame) {
  q.validate();
  if (q.grid != frame.grid) throw ValidationError("project: grid mismatch");
  const StateField qr = q.real_part();
  const StateField qi = q.imag_part();
  Projection out;
  out.a1 = frame.W1_dual.pair(qr);
  out.a0check = frame.W0_dual.pair(qr);
  out.a0tilde = frame.Wt0_dual.pair(qi);
  out.q_minus_real = qr - out.a1 * frame.F1 - out.a0check * frame.F0;
  out.q_minus_imag = qi - out.a0tilde * frame.Ft0;
  return out;
}

StateField random_smooth_state(const EigenBasis& basis, std::mt19937_64& rng, int degree, double decay) {
  std::normal_distribution<double> nd(0.0, 1.0);
  const int m = std::min(degree, basis.max_n());
  Vec c1 = Vec::Zero(basis.max_n() + 1), c2 = Vec::Zero(basis.max_n() + 1);
  double scale = 1.0;
  for (int k = 0; k <= m; ++k) {
    c1(k) = scale * nd(rng);
    c2(k) = scale * nd(rng);
    scale *= decay;
  }
  return StateField::from_real(basis.grid(), basis.synthesize(c1), basis.synthesize(c2));
}

RatioRange norm_equivalence_sample(const LinearizedFrame& frame, const EigenBasis& basis, Part part, int trials,
                                   std::uint64_t seed) {
  if (trials < 1) throw ValidationError("norm_equivalence_sample: trials must be >= 1");
  std::mt19937_64 rng(seed);
  RatioRange out{std::numeric_limits<double>::infinity(), 0.0};
  for (int t = 0; t < trials; ++t) {
    StateField r = random_smooth_state(basis, rng);
    const FormVariant v = part == Part::Real ? FormVariant::RealPart : FormVariant::ImagPart;
    if (part == Part::Real) {
      const double a1 = frame.W1_dual.pair(r);
      const double a0 = frame.W0_dual.pair(r);
      r = r - a1 * frame.F1 - a0 * frame.F0;
    } else {
      r = r - frame.Wt0_dual.pair(r) * frame.Ft0;
    }
    const double nrm2 = inner_phi(r, r).real();
    const double ratio = quad_form(r, r, frame.d, v) / nrm2;
    out.min_ratio = std::min(out.min_ratio, ratio);
    out.max_ratio = std::max(out.max_ratio, ratio);
  }
  return out;
}

V0Result build_V0(const LinearizedFrame& frame, const EigenBasis& basis, double eps, double eps2) {
  if (!(eps > 0.0 && eps < eps2)) throw ValidationError("build_V0: eps must lie in (0, eps2)");
  if (basis.grid() != frame.grid) throw ValidationError("build_V0: grid mismatch");
  const WeightedGrid& g = *frame.grid;
  const double d = frame.d;
  // f0 (1-z^2) = -T_{-d}(g (1-y^2)) where g = (-L+1) W~0_1.
  const Vec f_omega = -lorentz_values(g, frame.Wt0_dual.g_omega.cast<cplx>(), -d).real();
  const Vec fc = basis.coefficients_from_weighted(f_omega);
  V0Result out;
  out.d = d;
  out.eps = eps;
  out.v_coeffs = solve_eps_coefficients(fc, eps, basis);
  const Vec v = basis.synthesize(out.v_coeffs);
  const Vec first = lorentz_values(g, v.cast<cplx>(), d).real();
  const Vec second = frame.Wt0_dual.second / (1.0 - eps);
  out.V0 = StateField::from_real(frame.grid, first, second);
  const double c = eps_coefficient(g.p());
  double acc = 0.0;
  for (int k = 0; k < out.v_coeffs.size(); ++k)
    acc += out.v_coeffs(k) * out.v_coeffs(k) * (-(1.0 - eps) * basis.gamma(k) - eps * c);
  out.phi_eps_V0V0 = acc + (1.0 - eps) * g.integrate(Vec(second.array().square().matrix()));
  return out;
}

double pair_eps_V0(const V0Result& v0, const EigenBasis& basis, const StateField& r) {
  const WeightedGrid& g = *r.grid;
  const Vec R = lorentz_values(g, r.first.real().cast<cplx>(), -v0.d).real();
  const Vec rc = basis.coefficients(R);
  const double c = eps_coefficient(g.p());
  double acc = 0.0;
  for (int k = 0; k < rc.size(); ++k)
    acc += v0.v_coeffs(k) * rc(k) * (-(1.0 - v0.eps) * basis.gamma(k) - v0.eps * c);
  return acc + (1.0 - v0.eps) * g.integrate(Vec(v0.V0.second.real().cwiseProduct(Vec(r.second.real()))));
}

}  // namespace sslab
