#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "sslab/wspace.hpp"

namespace sslab {

// kappa0 = (2(p+1)/(p-1)^2)^{1/(p-1)}
double kappa0(double p);

// Parameters (d, theta) of the stationary solution e^{i theta} kappa(d, .).
struct SolitonParams {
  double d = 0.0;
  double theta = 0.0;
  double lambda = 0.0;  // arctanh d

  static SolitonParams from_d(double d, double theta);
  static SolitonParams from_lambda(double lambda, double theta);
};

// Angular distance in (-pi, pi].
double angular_distance(double a, double b);

// Real samples of kappa(d, y) at the grid nodes.
Vec kappa_values(const WeightedGrid& g, double d);
// d/dd kappa(d, y)
Vec kappa_d_derivative(const WeightedGrid& g, double d);
ScalarField kappa_profile(const SolitonParams& params, const GridPtr& grid);

// T_d f, resampled on the grid of f by interpolation.
ScalarField lorentz(const ScalarField& f, double d);
CVec lorentz_values(const WeightedGrid& g, const CVec& f, double d);

// Weighted L2 norm of L f - (2(p+1)/(p-1)^2) f + |f|^{p-1} f.
double stationary_residual(const ScalarField& f);

struct ConnectionTrajectory {
  double p = 3.0;
  std::vector<double> xi;
  std::vector<cplx> v;
  std::vector<cplx> v_prime;
  std::vector<double> r;
  // Phase rate Im(v'/v); NaN where |v| is below the phase threshold.
  std::vector<double> h;
  std::vector<double> phase;
  double mu = 0.0;
  double energy0 = 0.0;
  double inf_modulus = 0.0;
  double max_energy_drift = 0.0;
  double max_mu_drift = 0.0;
  bool decaying = false;

  // Conserved scalar 1/2 r'^2 + mu/(2 r^2) - (c0/2) r^2 + r^{p+1}/(p+1) at sample k.
  double energy_at(std::size_t k) const;
  void write_csv(std::ostream& os) const;
};

struct ConnectionOptions {
  double tolerance = 1e-12;
  double phase_threshold = 1e-10;
  int samples_per_unit = 20;
  double classify_tolerance = 1e-8;
};

ConnectionTrajectory integrate_connection_ode(cplx v0, cplx v0p, double xi_max, double p,
                                              const ConnectionOptions& opts = {});

// kappa0 / cosh^{2/(p-1)}(xi)
double kcheck(double xi, double p);

struct Classification {
  enum class Kind { Zero, Soliton, NotStationary } kind = Kind::Zero;
  SolitonParams params;
  double distance = 0.0;  // H0 distance to the fitted member (or norm for Zero)
};

Classification classify_stationary(const ScalarField& f, double tol);

}  // namespace sslab
