#include "mfbose/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "mfbose/error.hpp"

namespace mfbose {

std::string potential_kind_name(PotentialKind kind) {
  switch (kind) {
    case PotentialKind::gaussian_bump: return "gaussian_bump";
    case PotentialKind::step_well: return "step_well";
    case PotentialKind::delta_approx: return "delta_approx";
    case PotentialKind::tabulated: return "tabulated";
  }
  return "unknown";
}

PotentialKind parse_potential_kind(const std::string& name) {
  if (name == "gaussian_bump" || name == "gaussian") return PotentialKind::gaussian_bump;
  if (name == "step_well" || name == "step") return PotentialKind::step_well;
  if (name == "delta_approx" || name == "delta") return PotentialKind::delta_approx;
  if (name == "tabulated") return PotentialKind::tabulated;
  throw PreconditionError("unknown potential kind '" + name + "'");
}

double InteractionPotential::operator()(double r) const {
  const double a = std::abs(r);
  switch (kind) {
    case PotentialKind::gaussian_bump:
      return sign * depth * std::exp(-0.5 * a * a / (width * width));
    case PotentialKind::step_well:
      return a <= width ? sign * depth : 0.0;
    case PotentialKind::delta_approx:
      return sign * depth * std::exp(-0.5 * a * a / (width * width)) / (width * std::sqrt(2.0 * std::numbers::pi));
    case PotentialKind::tabulated: {
      if (r < table_r.front() || r > table_r.back()) throw PreconditionError("tabulated potential undefined at this offset");
      auto it = std::upper_bound(table_r.begin(), table_r.end(), r);
      if (it == table_r.end()) return table_w.back();
      const auto i = static_cast<std::size_t>(it - table_r.begin());
      const double t = (r - table_r[i - 1]) / (table_r[i] - table_r[i - 1]);
      return (1.0 - t) * table_w[i - 1] + t * table_w[i];
    }
  }
  return 0.0;
}

double InteractionPotential::positive_part(double r) const { return std::max((*this)(r), 0.0); }
double InteractionPotential::negative_part(double r) const { return std::max(-(*this)(r), 0.0); }

double InteractionPotential::max_offset() const {
  if (kind == PotentialKind::tabulated) return table_r.back();
  return std::numeric_limits<double>::infinity();
}

double InteractionPotential::effective_range() const {
  switch (kind) {
    case PotentialKind::gaussian_bump:
    case PotentialKind::delta_approx: return 38.6 * width;  // exp(-r^2/2w^2) < 1e-323
    case PotentialKind::step_well: return width;
    case PotentialKind::tabulated: return table_r.back();
  }
  return 0.0;
}

std::string InteractionPotential::describe() const {
  std::ostringstream os;
  os << potential_kind_name(kind);
  if (kind == PotentialKind::tabulated)
    os << "(" << table_r.size() << " samples, r_max=" << table_r.back() << ")";
  else
    os << "(width=" << width << ", depth=" << depth << ", sign=" << (sign > 0 ? "+" : "-") << ")";
  return os.str();
}

namespace {

InteractionPotential analytic(PotentialKind kind, double width, double depth, int sign) {
  detail::require(width > 0.0 && std::isfinite(width), "potential width must be positive");
  detail::require(depth >= 0.0 && std::isfinite(depth), "potential depth must be nonnegative");
  detail::require(sign == 1 || sign == -1, "potential sign must be +1 or -1");
  InteractionPotential w;
  w.kind = kind;
  w.width = width;
  w.depth = depth;
  w.sign = sign;
  return w;
}

}  // namespace

InteractionPotential gaussian_bump(double width, double depth, int sign) {
  return analytic(PotentialKind::gaussian_bump, width, depth, sign);
}

InteractionPotential step_well(double width, double depth, int sign) {
  return analytic(PotentialKind::step_well, width, depth, sign);
}

InteractionPotential delta_approx(double width, int sign) {
  return analytic(PotentialKind::delta_approx, width, 1.0, sign);
}

InteractionPotential null_potential() { return analytic(PotentialKind::gaussian_bump, 1.0, 0.0, 1); }

InteractionPotential tabulated_potential(std::vector<double> r, std::vector<double> w) {
  detail::require(r.size() == w.size() && r.size() >= 3, "tabulated potential needs matching r, w with >= 3 samples");
  for (std::size_t i = 1; i < r.size(); ++i) detail::require(r[i] > r[i - 1], "tabulated r must be strictly ascending");
  const std::size_t n = r.size();
  for (std::size_t i = 0; i < n; ++i) {
    detail::require(std::isfinite(w[i]), "tabulated w must be finite");
    detail::require(std::abs(r[i] + r[n - 1 - i]) <= 1e-12 * std::max(1.0, std::abs(r[i])),
                    "tabulated r must be symmetric about 0");
    detail::require(std::abs(w[i] - w[n - 1 - i]) <= 1e-10, "tabulated w is not even within 1e-10");
  }
  InteractionPotential out;
  out.kind = PotentialKind::tabulated;
  out.table_r = std::move(r);
  out.table_w = std::move(w);
  out.width = out.table_r.back();
  return out;
}

std::vector<LpNorm> lp_report(const InteractionPotential& w, std::span<const double> ps) {
  const double range = std::min(w.effective_range(), w.max_offset());
  // Resolve the narrowest feature (width or table spacing) with >= 200 cells.
  double feature = w.width;
  if (w.kind == PotentialKind::tabulated)
    for (std::size_t i = 1; i < w.table_r.size(); ++i) feature = std::min(feature, w.table_r[i] - w.table_r[i - 1]);
  const int n = std::max(20001, static_cast<int>(2.0 * range / feature * 200.0) + 1);
  const double dr = 2.0 * range / (n - 1);
  std::vector<LpNorm> out;
  for (double p : ps) {
    detail::require(p >= 1.0, "L^p norms need p >= 1");
    LpNorm r{p, 0.0, 0.0, 0.0};
    const bool sup = std::isinf(p);
    for (int i = 0; i < n; ++i) {
      const double x = -range + i * dr;
      const double v = w(x), vp = std::max(v, 0.0), vm = std::max(-v, 0.0);
      if (sup) {
        r.full = std::max(r.full, std::abs(v));
        r.positive = std::max(r.positive, vp);
        r.negative = std::max(r.negative, vm);
      } else {
        const double c = (i == 0 || i == n - 1) ? 0.5 * dr : dr;
        r.full += c * std::pow(std::abs(v), p);
        r.positive += c * std::pow(vp, p);
        r.negative += c * std::pow(vm, p);
      }
    }
    if (!sup) {
      r.full = std::pow(r.full, 1.0 / p);
      r.positive = std::pow(r.positive, 1.0 / p);
      r.negative = std::pow(r.negative, 1.0 / p);
    }
    out.push_back(r);
  }
  return out;
}

double evenness_residual(const InteractionPotential& w) {
  const double range = std::min(w.effective_range(), w.max_offset());
  double worst = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double r = range * i / 1000.0;
    worst = std::max(worst, std::abs(w(r) - w(-r)));
  }
  return worst;
}

bool focusing_admissible(const InteractionPotential& w, double s, double p) {
  const double ps[] = {p};
  const auto norms = lp_report(w, ps);
  if (norms[0].negative == 0.0) return true;
  const double threshold = std::isinf(s) ? 1.0 : s / (s - 2.0);
  return p > threshold && std::isfinite(norms[0].negative);
}

}  // namespace mfbose
