#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "glab/fast_trig.hpp"

namespace glab {

/// Kernels with inline derivatives; simulation loops are instantiated per
/// kernel through Potential::visit.
struct QuadraticKernel {
  double k = 1.0;  // V = k x^2 / 2
  double v(double x) const { return 0.5 * k * x * x; }
  double dv(double x) const { return k * x; }
  double ddv(double) const { return k; }
};

/// V(x) = x^2 + cos x - 1.
struct CosineKernel {
  double v(double x) const { return x * x + fast_cos(x) - 1.0; }
  double dv(double x) const { return 2.0 * x - fast_sin(x); }
  double ddv(double x) const { return 2.0 - fast_cos(x); }
};

struct CustomKernel {
  const std::function<double(double)>* fv;
  const std::function<double(double)>* fdv;
  const std::function<double(double)>* fddv;
  double v(double x) const { return (*fv)(x); }
  double dv(double x) const { return (*fdv)(x); }
  double ddv(double x) const { return (*fddv)(x); }
};

/// Symmetric, uniformly convex interaction with a_V <= V'' <= A_V and
/// V'' Lipschitz with constant L. Immutable and cheap to copy.
class Potential {
 public:
  enum class Kind { quadratic, cosine, custom };
  using Fn = std::function<double(double)>;

  /// V = x^2 / 2.
  static Potential quadratic();
  /// V = k x^2 / 2, a_V = A_V = k.
  static Potential scaled_quadratic(double k);
  /// V = x^2 + cos x - 1; a_V = 1, A_V = 3, L = 1.
  static Potential cosine_perturbed();
  /// User-supplied V with declared constants; audit with validate().
  static Potential custom(std::string name, Fn v, Fn dv, Fn ddv, double a_lower, double a_upper,
                          double lipschitz);
  /// "quadratic" or "cosine".
  static Potential by_name(const std::string& name);

  double v(double x) const;
  double dv(double x) const;
  double ddv(double x) const;

  double a_lower() const { return a_lower_; }
  double a_upper() const { return a_upper_; }
  double lipschitz() const { return lipschitz_; }
  const std::string& name() const { return name_; }
  Kind kind() const { return kind_; }

  template <typename F>
  decltype(auto) visit(F&& f) const {
    switch (kind_) {
      case Kind::quadratic:
        return f(QuadraticKernel{a_lower_});
      case Kind::cosine:
        return f(CosineKernel{});
      default:
        return f(CustomKernel{&fns_->v, &fns_->dv, &fns_->ddv});
    }
  }

 private:
  struct Fns {
    Fn v, dv, ddv;
  };
  Kind kind_ = Kind::quadratic;
  std::string name_ = "quadratic";
  double a_lower_ = 1.0;
  double a_upper_ = 1.0;
  double lipschitz_ = 0.0;
  std::shared_ptr<const Fns> fns_;
};

inline double Potential::v(double x) const {
  return visit([x](const auto& k) { return k.v(x); });
}
inline double Potential::dv(double x) const {
  return visit([x](const auto& k) { return k.dv(x); });
}
inline double Potential::ddv(double x) const {
  return visit([x](const auto& k) { return k.ddv(x); });
}

struct PotentialViolation {
  std::string condition;  // symmetry | convexity | lipschitz | normalization
  double witness = 0.0;   // grid point (first point of the pair for lipschitz)
  double margin = 0.0;    // size of the violation
};

struct PotentialValidation {
  bool passed = true;
  // Worst observed values over the grid.
  double max_asymmetry = 0.0;       // |V(x) - V(-x)|
  double min_ddv = 0.0;
  double max_ddv = 0.0;
  double max_ddv_slope = 0.0;       // |V''(x) - V''(y)| / |x - y|
  double v_at_zero = 0.0;
  std::vector<PotentialViolation> violations;  // worst witness per condition
};

/// Checks the standing assumptions on a uniform grid over [-half_range,
/// half_range] (plus x = 0).
PotentialValidation validate(const Potential& p, double half_range, int samples);

/// Largest stable Euler-Maruyama step, 1 / (8 A_V).
double max_stable_dt(const Potential& p);
/// min(0.01, max_stable_dt(p)).
double default_dt(const Potential& p);

}  // namespace glab
