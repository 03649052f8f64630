#pragma once

#include <complex>
#include <memory>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace sslab {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;

// Bad input or violated precondition.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A numerical procedure failed (non-convergence, loss of accuracy, blow-up).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class GridKind { GaussInterior, UniformInterior };

std::string to_string(GridKind kind);
GridKind grid_kind_from_string(const std::string& s);

struct GridMetadata {
  int n;
  double p;
  GridKind kind;
  int exactness_degree;
  double base_weight_exponent;
  std::string node_family;
};

// Collocation grid on (-1,1) for the weight rho = (1-y^2)^{2/(p-1)}.
//
// Gauss-interior nodes are Gauss-Jacobi points for the base weight
// (1-y^2)^{2/(p-1)-1}.  With that choice integrals against rho/(1-y^2)
// are exact up to degree 2n-1 and integrals against rho up to 2n-3.
class WeightedGrid {
 public:
  static std::shared_ptr<const WeightedGrid> build(int n, double p,
                                                   GridKind kind = GridKind::GaussInterior);

  int size() const { return static_cast<int>(nodes_.size()); }
  double p() const { return p_; }
  // 2/(p-1)
  double a() const { return a_; }
  GridKind kind() const { return kind_; }
  GridMetadata metadata() const;

  const Vec& nodes() const { return nodes_; }
  // Unit-weight weights: sum_j quad_weights_j f(y_j) ~ int f dy.
  const Vec& quad_weights() const { return quad_weights_; }
  // Weights for int f rho/(1-y^2) dy.
  const Vec& base_weights() const { return base_weights_; }
  // Weights for int f rho dy.
  const Vec& rho_weights() const { return rho_weights_; }
  const Vec& rho() const { return rho_; }
  // 1 - y_j^2
  const Vec& omega() const { return omega_; }
  const Mat& diff_matrix() const { return d1_; }
  const Mat& diff2_matrix() const { return d2_; }

  double integrate(const Vec& f) const { return rho_weights_.dot(f); }
  cplx integrate(const CVec& f) const;
  double integrate_over_omega(const Vec& f) const { return base_weights_.dot(f); }
  cplx integrate_over_omega(const CVec& f) const;

  CVec derivative(const CVec& f) const;
  Vec derivative(const Vec& f) const { return d1_ * f; }

  // Evaluate the grid interpolant of `values` at arbitrary points of [-1,1].
  CVec interpolate(const CVec& values, const Vec& points) const;
  Vec interpolate(const Vec& values, const Vec& points) const;

 private:
  WeightedGrid() = default;
  void build_gauss(int n);
  void build_uniform(int n);

  double p_ = 3.0;
  double a_ = 1.0;
  GridKind kind_ = GridKind::GaussInterior;
  int exactness_ = 0;
  Vec nodes_, quad_weights_, base_weights_, rho_weights_, rho_, omega_;
  Vec bary_;
  Mat d1_, d2_;
};

using GridPtr = std::shared_ptr<const WeightedGrid>;

inline GridPtr build_grid(int n, double p, GridKind kind = GridKind::GaussInterior) {
  return WeightedGrid::build(n, p, kind);
}

double eval_weight(double y, double p);

struct ScalarField {
  GridPtr grid;
  CVec values;

  ScalarField() = default;
  ScalarField(GridPtr g, CVec v);
  static ScalarField zeros(GridPtr g);
  static ScalarField from_real(GridPtr g, const Vec& v);
  void validate() const;
  int size() const { return static_cast<int>(values.size()); }
};

struct StateField {
  GridPtr grid;
  CVec first;
  CVec second;

  StateField() = default;
  StateField(GridPtr g, CVec q1, CVec q2);
  static StateField zeros(GridPtr g);
  static StateField from_real(GridPtr g, const Vec& q1, const Vec& q2);
  void validate() const;

  // Real and imaginary parts as fields with zero imaginary part.
  StateField real_part() const;
  StateField imag_part() const;

  StateField& operator+=(const StateField& o);
  StateField& operator-=(const StateField& o);
  StateField& operator*=(cplx c);
};

StateField operator+(StateField a, const StateField& b);
StateField operator-(StateField a, const StateField& b);
StateField operator*(cplx c, StateField a);
StateField operator*(double c, StateField a);

// int (q1 conj(r1) + q1' conj(r1') (1-y^2) + q2 conj(r2)) rho dy
cplx inner_phi(const StateField& q, const StateField& r);

struct Norms {
  double H;
  double H0;
  double L2rho;
  double Lp1rho;
};

Norms norms(const StateField& f);
// A scalar field is measured as the state (f, 0).
Norms norms(const ScalarField& f);

double h0_norm(const GridPtr& g, const CVec& f);
double l2rho_norm(const GridPtr& g, const CVec& f);

double hardy_sobolev_ratio(const ScalarField& h);

}  // namespace sslab
