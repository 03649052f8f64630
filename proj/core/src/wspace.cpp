#include "sslab/wspace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace sslab {

namespace {

// Monic recurrence coefficient beta_k for the symmetric Jacobi weight (1-y^2)^b.
double jacobi_beta(int k, double b) {
  if (k == 1) return 1.0 / (2.0 * b + 3.0);
  const double kk = k;
  return kk * (kk + 2.0 * b) / ((2.0 * kk + 2.0 * b + 1.0) * (2.0 * kk + 2.0 * b - 1.0));
}

// int_{-1}^{1} (1-y^2)^b dy
double jacobi_mass(double b) {
  return std::exp(0.5 * std::log(std::numbers::pi) + std::lgamma(b + 1.0) - std::lgamma(b + 1.5));
}

// Fornberg's finite-difference weights: c(j, m) is the weight of x[j] for the
// m-th derivative at z.
Mat fornberg(double z, const std::vector<double>& x, int order) {
  const int n = static_cast<int>(x.size());
  Mat c = Mat::Zero(n, order + 1);
  double c1 = 1.0;
  double c4 = x[0] - z;
  c(0, 0) = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c(i, k) = c1 * (k * c(i - 1, k - 1) - c5 * c(i - 1, k)) / c2;
        c(i, 0) = -c1 * c5 * c(i - 1, 0) / c2;
      }
      for (int k = mn; k >= 1; --k) c(j, k) = (c4 * c(j, k) - k * c(j, k - 1)) / c3;
      c(j, 0) = c4 * c(j, 0) / c3;
    }
    c1 = c2;
  }
  return c;
}

constexpr int kUniformStencil = 7;

int stencil_start(int i, int n, int width) {
  int s = i - width / 2;
  return std::clamp(s, 0, n - width);
}

}  // namespace

std::string to_string(GridKind kind) {
  return kind == GridKind::GaussInterior ? "gauss-interior" : "uniform-interior";
}

GridKind grid_kind_from_string(const std::string& s) {
  if (s == "gauss-interior" || s == "gauss") return GridKind::GaussInterior;
  if (s == "uniform-interior" || s == "uniform") return GridKind::UniformInterior;
  throw ValidationError("unknown grid kind: " + s);
}

double eval_weight(double y, double p) {
  if (!(std::abs(y) < 1.0)) throw ValidationError("eval_weight: |y| must be < 1");
  if (!(p > 1.0)) throw ValidationError("eval_weight: p must be > 1");
  return std::pow(1.0 - y * y, 2.0 / (p - 1.0));
}

GridPtr WeightedGrid::build(int n, double p, GridKind kind) {
  if (n < 8) throw ValidationError("build_grid: n too small (need n >= 8)");
  if (n > 2048) throw ValidationError("build_grid: n too large for dense collocation");
  if (!(p > 1.0)) throw ValidationError("build_grid: p must be > 1");
  std::shared_ptr<WeightedGrid> g(new WeightedGrid());
  g->p_ = p;
  g->a_ = 2.0 / (p - 1.0);
  g->kind_ = kind;
  if (kind == GridKind::GaussInterior)
    g->build_gauss(n);
  else
    g->build_uniform(n);
  g->omega_ = (1.0 - g->nodes_.array().square()).matrix();
  g->rho_ = g->omega_.array().pow(g->a_).matrix();
  return g;
}

void WeightedGrid::build_gauss(int n) {
  const double b = a_ - 1.0;
  Vec s(n + 1);
  s(0) = 0.0;
  for (int k = 1; k <= n; ++k) s(k) = std::sqrt(jacobi_beta(k, b));

  Mat J = Mat::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = s(k);
  Eigen::SelfAdjointEigenSolver<Mat> es(J, Eigen::EigenvaluesOnly);
  Vec x = es.eigenvalues();

  const double p0 = 1.0 / std::sqrt(jacobi_mass(b));
  Vec w(n);
  for (int j = 0; j < n; ++j) {
    double xj = x(j);
    // Newton polish on the orthonormal p_n, then Christoffel weights.
    for (int it = 0; it < 3; ++it) {
      double pm = 0.0, pc = p0, dm = 0.0, dc = 0.0;
      for (int k = 0; k < n; ++k) {
        const double pn = (xj * pc - s(k) * pm) / s(k + 1);
        const double dn = (xj * dc + pc - s(k) * dm) / s(k + 1);
        pm = pc;
        pc = pn;
        dm = dc;
        dc = dn;
      }
      if (dc == 0.0) break;
      const double dx = pc / dc;
      xj -= dx;
      if (std::abs(dx) < 1e-17) break;
    }
    x(j) = xj;
    double pm = 0.0, pc = p0, sum = pc * pc;
    for (int k = 0; k + 1 < n; ++k) {
      const double pn = (xj * pc - s(k) * pm) / s(k + 1);
      pm = pc;
      pc = pn;
      sum += pc * pc;
    }
    w(j) = 1.0 / sum;
  }
  // Enforce exact symmetry of the symmetric rule.
  for (int j = 0; j < n / 2; ++j) {
    const double xm = 0.5 * (x(n - 1 - j) - x(j));
    const double wm = 0.5 * (w(j) + w(n - 1 - j));
    x(j) = -xm;
    x(n - 1 - j) = xm;
    w(j) = w(n - 1 - j) = wm;
  }
  if (n % 2 == 1) x(n / 2) = 0.0;

  nodes_ = x;
  base_weights_ = w;
  const Vec om = (1.0 - x.array().square()).matrix();
  rho_weights_ = (w.array() * om.array()).matrix();
  quad_weights_ = (w.array() * om.array().pow(1.0 - a_)).matrix();
  exactness_ = 2 * n - 1;

  // Barycentric weights via log-magnitudes to avoid overflow.
  Vec logb(n);
  bary_.resize(n);
  for (int j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int k = 0; k < n; ++k)
      if (k != j) acc -= std::log(std::abs(x(j) - x(k)));
    logb(j) = acc;
  }
  const double mx = logb.maxCoeff();
  for (int j = 0; j < n; ++j) bary_(j) = ((n - 1 - j) % 2 == 0 ? 1.0 : -1.0) * std::exp(logb(j) - mx);

  d1_ = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double diag = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = (bary_(j) / bary_(i)) / (x(i) - x(j));
      d1_(i, j) = v;
      diag -= v;
    }
    d1_(i, i) = diag;
  }
  d2_ = d1_ * d1_;
}

void WeightedGrid::build_uniform(int n) {
  const double h = 2.0 / n;
  nodes_.resize(n);
  for (int j = 0; j < n; ++j) nodes_(j) = -1.0 + (j + 0.5) * h;
  const Vec om = (1.0 - nodes_.array().square()).matrix();
  const Vec r = om.array().pow(a_).matrix();
  quad_weights_ = Vec::Constant(n, h);
  rho_weights_ = h * r;
  base_weights_ = (h * r.array() / om.array()).matrix();
  exactness_ = 1;
  d1_ = Mat::Zero(n, n);
  d2_ = Mat::Zero(n, n);
  std::vector<double> xs(kUniformStencil);
  for (int i = 0; i < n; ++i) {
    const int s0 = stencil_start(i, n, kUniformStencil);
    for (int k = 0; k < kUniformStencil; ++k) xs[k] = nodes_(s0 + k);
    const Mat c = fornberg(nodes_(i), xs, 2);
    for (int k = 0; k < kUniformStencil; ++k) {
      d1_(i, s0 + k) = c(k, 1);
      d2_(i, s0 + k) = c(k, 2);
    }
  }
}

GridMetadata WeightedGrid::metadata() const {
  GridMetadata m;
  m.n = size();
  m.p = p_;
  m.kind = kind_;
  m.exactness_degree = exactness_;
  m.base_weight_exponent = kind_ == GridKind::GaussInterior ? a_ - 1.0 : 0.0;
  m.node_family = kind_ == GridKind::GaussInterior ? "gauss-jacobi(alpha=beta=2/(p-1)-1)"
                                                    : "midpoint";
  return m;
}

cplx WeightedGrid::integrate(const CVec& f) const {
  return {rho_weights_.dot(f.real()), rho_weights_.dot(f.imag())};
}

cplx WeightedGrid::integrate_over_omega(const CVec& f) const {
  return {base_weights_.dot(f.real()), base_weights_.dot(f.imag())};
}

CVec WeightedGrid::derivative(const CVec& f) const {
  CVec out(f.size());
  out.real() = d1_ * f.real();
  out.imag() = d1_ * f.imag();
  return out;
}

Vec WeightedGrid::interpolate(const Vec& values, const Vec& points) const {
  CVec c = values.cast<cplx>();
  return interpolate(c, points).real();
}

CVec WeightedGrid::interpolate(const CVec& values, const Vec& points) const {
  const int n = size();
  if (values.size() != n) throw ValidationError("interpolate: length mismatch");
  CVec out(points.size());
  if (kind_ == GridKind::GaussInterior) {
    for (int i = 0; i < points.size(); ++i) {
      const double z = points(i);
      cplx num = 0.0;
      double den = 0.0;
      int exact = -1;
      for (int j = 0; j < n; ++j) {
        const double dz = z - nodes_(j);
        if (dz == 0.0) {
          exact = j;
          break;
        }
        const double t = bary_(j) / dz;
        num += t * values(j);
        den += t;
      }
      out(i) = exact >= 0 ? values(exact) : num / den;
    }
  } else {
    std::vector<double> xs(kUniformStencil + 1);
    const double h = 2.0 / n;
    for (int i = 0; i < points.size(); ++i) {
      const double z = points(i);
      const int near = std::clamp(static_cast<int>(std::floor((z + 1.0) / h - 0.5)), 0, n - 1);
      const int s0 = stencil_start(near, n, kUniformStencil + 1);
      for (int k = 0; k <= kUniformStencil; ++k) xs[k] = nodes_(s0 + k);
      const Mat c = fornberg(z, xs, 0);
      cplx acc = 0.0;
      for (int k = 0; k <= kUniformStencil; ++k) acc += c(k, 0) * values(s0 + k);
      out(i) = acc;
    }
  }
  return out;
}

ScalarField::ScalarField(GridPtr g, CVec v) : grid(std::move(g)), values(std::move(v)) { validate(); }

ScalarField ScalarField::zeros(GridPtr g) {
  const int n = g->size();
  return ScalarField(std::move(g), CVec::Zero(n));
}

ScalarField ScalarField::from_real(GridPtr g, const Vec& v) { return ScalarField(std::move(g), v.cast<cplx>()); }

void ScalarField::validate() const {
  if (!grid) throw ValidationError("field without grid");
  if (values.size() != grid->size()) throw ValidationError("field length does not match grid");
  if (!values.allFinite()) throw ValidationError("field has non-finite entries");
}

StateField::StateField(GridPtr g, CVec q1, CVec q2)
    : grid(std::move(g)), first(std::move(q1)), second(std::move(q2)) {
  validate();
}

StateField StateField::zeros(GridPtr g) {
  const int n = g->size();
  return StateField(std::move(g), CVec::Zero(n), CVec::Zero(n));
}

StateField StateField::from_real(GridPtr g, const Vec& q1, const Vec& q2) {
  return StateField(std::move(g), q1.cast<cplx>(), q2.cast<cplx>());
}

void StateField::validate() const {
  if (!grid) throw ValidationError("state without grid");
  if (first.size() != grid->size() || second.size() != grid->size())
    throw ValidationError("state length does not match grid");
  if (!first.allFinite() || !second.allFinite()) throw ValidationError("state has non-finite entries");
}

StateField StateField::real_part() const {
  StateField r = *this;
  r.first = first.real().cast<cplx>();
  r.second = second.real().cast<cplx>();
  return r;
}

StateField StateField::imag_part() const {
  StateField r = *this;
  r.first = first.imag().cast<cplx>();
  r.second = second.imag().cast<cplx>();
  return r;
}

static void require_same_grid(const StateField& a, const StateField& b) {
  if (a.grid != b.grid) throw ValidationError("grid mismatch");
}

StateField& StateField::operator+=(const StateField& o) {
  require_same_grid(*this, o);
  first += o.first;
  second += o.second;
  return *this;
}

StateField& StateField::operator-=(const StateField& o) {
  require_same_grid(*this, o);
  first -= o.first;
  second -= o.second;
  return *this;
}

StateField& StateField::operator*=(cplx c) {
  first *= c;
  second *= c;
  return *this;
}

StateField operator+(StateField a, const StateField& b) { return a += b; }
StateField operator-(StateField a, const StateField& b) { return a -= b; }
StateField operator*(cplx c, StateField a) { return a *= c; }
StateField operator*(double c, StateField a) { return a *= cplx(c, 0.0); }

cplx inner_phi(const StateField& q, const StateField& r) {
  require_same_grid(q, r);
  const WeightedGrid& g = *q.grid;
  const CVec dq = g.derivative(q.first);
  const CVec dr = g.derivative(r.first);
  const CVec integrand = (q.first.array() * r.first.array().conjugate() +
                          dq.array() * dr.array().conjugate() * g.omega().array() +
                          q.second.array() * r.second.array().conjugate())
                             .matrix();
  return g.integrate(integrand);
}

double h0_norm(const GridPtr& g, const CVec& f) {
  const CVec df = g->derivative(f);
  const Vec integrand = (df.array().abs2() * g->omega().array() + f.array().abs2()).matrix();
  return std::sqrt(std::max(0.0, g->integrate(integrand)));
}

double l2rho_norm(const GridPtr& g, const CVec& f) {
  return std::sqrt(std::max(0.0, g->integrate(Vec(f.array().abs2().matrix()))));
}

static double lp1_norm(const GridPtr& g, const CVec& f) {
  const double q = g->p() + 1.0;
  const Vec integrand = f.array().abs().pow(q).matrix();
  return std::pow(std::max(0.0, g->integrate(integrand)), 1.0 / q);
}

Norms norms(const StateField& f) {
  f.validate();
  Norms out;
  out.H = std::sqrt(std::max(0.0, inner_phi(f, f).real()));
  out.H0 = h0_norm(f.grid, f.first);
  out.L2rho = l2rho_norm(f.grid, f.first);
  out.Lp1rho = lp1_norm(f.grid, f.first);
  return out;
}

Norms norms(const ScalarField& f) {
  f.validate();
  Norms out;
  out.H0 = h0_norm(f.grid, f.values);
  out.H = out.H0;
  out.L2rho = l2rho_norm(f.grid, f.values);
  out.Lp1rho = lp1_norm(f.grid, f.values);
  return out;
}

double hardy_sobolev_ratio(const ScalarField& h) {
  h.validate();
  const GridPtr& g = h.grid;
  const double den = h0_norm(g, h.values);
  if (!(den > 0.0)) throw ValidationError("hardy_sobolev_ratio: zero field");
  const double hardy = std::sqrt(std::max(0.0, g->integrate_over_omega(Vec(h.values.array().abs2().matrix()))));
  const double sup = (h.values.array().abs() * g->omega().array().pow(1.0 / (g->p() - 1.0))).maxCoeff();
  return (hardy + lp1_norm(g, h.values) + sup) / den;
}

}  // namespace sslab
