#pragma once

#include <span>
#include <string>
#include <vector>

namespace mfbose {

enum class PotentialKind { gaussian_bump, step_well, delta_approx, tabulated };

std::string potential_kind_name(PotentialKind kind);
PotentialKind parse_potential_kind(const std::string& name);

/// Even pair potential w(r).
///
/// gaussian_bump: sign * depth * exp(-r^2 / (2 width^2))
/// step_well:     sign * depth on |r| <= width, 0 outside
/// delta_approx:  sign * depth * exp(-r^2 / (2 width^2)) / (width sqrt(2 pi)), unit mass for depth 1
/// tabulated:     linear interpolation of samples on a symmetric grid [-r_max, r_max]
struct InteractionPotential {
  PotentialKind kind = PotentialKind::gaussian_bump;
  double width = 0.5;
  double depth = 1.0;
  int sign = +1;
  std::vector<double> table_r;  // tabulated only, ascending, symmetric about 0
  std::vector<double> table_w;

  double operator()(double r) const;
  double positive_part(double r) const;
  double negative_part(double r) const;
  /// Largest |r| at which w is defined (infinite for the analytic kinds).
  double max_offset() const;
  /// Radius outside which |w| is below 1e-300 (used for quadrature ranges).
  double effective_range() const;
  std::string describe() const;
};

InteractionPotential gaussian_bump(double width, double depth = 1.0, int sign = +1);
InteractionPotential step_well(double width, double depth = 1.0, int sign = -1);
InteractionPotential delta_approx(double width, int sign = +1);
/// Throws PreconditionError unless r is ascending and symmetric and w(-r) = w(r) within 1e-10.
InteractionPotential tabulated_potential(std::vector<double> r, std::vector<double> w);

/// Zero potential (gaussian bump of depth 0).
InteractionPotential null_potential();

struct LpNorm {
  double p = 0.0;
  double full = 0.0;      // ||w||_p
  double positive = 0.0;  // ||w_+||_p
  double negative = 0.0;  // ||w_-||_p
};

/// L^p norms of w, w_+ and w_- on the line by fine trapezoid quadrature.
/// p = inf gives the sup norm.
std::vector<LpNorm> lp_report(const InteractionPotential& w, std::span<const double> ps);

/// max |w(r) - w(-r)| over a probe grid.
double evenness_residual(const InteractionPotential& w);

/// True when w_- vanishes, or ||w_-||_p is finite for some reported p > s/(s-2)
/// (the focusing admissibility condition on the attractive part).
bool focusing_admissible(const InteractionPotential& w, double s, double p);

}  // namespace mfbose
