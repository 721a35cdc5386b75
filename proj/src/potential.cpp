#include "glab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace glab {

Potential Potential::quadratic() { return scaled_quadratic(1.0); }

Potential Potential::scaled_quadratic(double k) {
  if (!(k > 0)) throw std::invalid_argument("scaled_quadratic: stiffness must be positive");
  Potential p;
  p.kind_ = Kind::quadratic;
  p.name_ = k == 1.0 ? "quadratic" : "quadratic*" + std::to_string(k);
  p.a_lower_ = p.a_upper_ = k;
  p.lipschitz_ = 0.0;
  return p;
}

Potential Potential::cosine_perturbed() {
  Potential p;
  p.kind_ = Kind::cosine;
  p.name_ = "cosine";
  p.a_lower_ = 1.0;
  p.a_upper_ = 3.0;
  p.lipschitz_ = 1.0;
  return p;
}

Potential Potential::custom(std::string name, Fn v, Fn dv, Fn ddv, double a_lower, double a_upper,
                            double lipschitz) {
  if (!v || !dv || !ddv) throw std::invalid_argument("custom potential: all three callables are required");
  if (!(a_lower > 0) || !(a_upper >= a_lower) || !(lipschitz >= 0))
    throw std::invalid_argument("custom potential: need 0 < a_lower <= a_upper and lipschitz >= 0");
  Potential p;
  p.kind_ = Kind::custom;
  p.name_ = std::move(name);
  p.a_lower_ = a_lower;
  p.a_upper_ = a_upper;
  p.lipschitz_ = lipschitz;
  p.fns_ = std::make_shared<const Fns>(Fns{std::move(v), std::move(dv), std::move(ddv)});
  return p;
}

Potential Potential::by_name(const std::string& name) {
  if (name == "quadratic") return quadratic();
  if (name == "cosine") return cosine_perturbed();
  throw std::invalid_argument("unknown potential '" + name + "' (expected quadratic or cosine)");
}

PotentialValidation validate(const Potential& p, double half_range, int samples) {
  if (samples < 2) throw std::invalid_argument("validate: need at least two samples");
  if (!(half_range > 0)) throw std::invalid_argument("validate: half_range must be positive");

  std::vector<double> xs(static_cast<std::size_t>(samples));
  for (int k = 0; k < samples; ++k) xs[static_cast<std::size_t>(k)] = -half_range + 2.0 * half_range * k / (samples - 1);
  xs.push_back(0.0);
  std::sort(xs.begin(), xs.end());

  PotentialValidation r;
  r.v_at_zero = p.v(0.0);
  r.min_ddv = r.max_ddv = p.ddv(0.0);

  // Relative slack for roundoff in the user's callables.
  auto tol = [](double scale) { return 1e-9 * std::max(1.0, std::abs(scale)); };
  PotentialViolation sym{"symmetry"}, conv{"convexity"}, lip{"lipschitz"};

  for (double x : xs) {
    const double asym = std::abs(p.v(x) - p.v(-x));
    r.max_asymmetry = std::max(r.max_asymmetry, asym);
    if (asym > tol(p.v(x)) && asym > sym.margin) sym = {"symmetry", x, asym};

    const double c = p.ddv(x);
    r.min_ddv = std::min(r.min_ddv, c);
    r.max_ddv = std::max(r.max_ddv, c);
    const double miss = std::max(p.a_lower() - c, c - p.a_upper());
    if (miss > tol(c) && miss > conv.margin) conv = {"convexity", x, miss};
  }
  for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
    const double dx = xs[k + 1] - xs[k];
    if (dx <= 0) continue;
    const double jump = std::abs(p.ddv(xs[k + 1]) - p.ddv(xs[k]));
    r.max_ddv_slope = std::max(r.max_ddv_slope, jump / dx);
    const double miss = jump - p.lipschitz() * dx;
    if (miss > tol(jump) && miss > lip.margin) lip = {"lipschitz", xs[k], miss};
  }

  for (const auto& v : {sym, conv, lip})
    if (v.margin > 0) r.violations.push_back(v);
  if (std::abs(r.v_at_zero) > 1e-12) r.violations.push_back({"normalization", 0.0, std::abs(r.v_at_zero)});
  r.passed = r.violations.empty();
  return r;
}

double max_stable_dt(const Potential& p) { return 1.0 / (8.0 * p.a_upper()); }

double default_dt(const Potential& p) { return std::min(0.01, max_stable_dt(p)); }

}  // namespace glab
