#include "glab/gibbs.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "glab/langevin.hpp"

namespace glab {

TorusField TorusField::make(int n, Potential p, Eigen::Vector2d u, double dt) {
  TorusField s;
  s.torus = TorusDomain(n);
  s.h = Eigen::ArrayXXd::Zero(n, n);
  s.u = u;
  s.dt = dt > 0 ? dt : default_dt(p);
  if (s.dt > max_stable_dt(p) * (1 + 1e-12))
    throw std::invalid_argument("TorusField: dt exceeds the stability bound 1/(8 A_V)");
  s.potential = std::move(p);
  return s;
}

double TorusField::eta(Site s, Orientation o) const {
  const Site a = torus.wrap(s);
  if (o == Orientation::horizontal) {
    const Site b = torus.wrap(a + kE1);
    return h(b.i, b.j) - h(a.i, a.j) + u[0];
  }
  const Site b = torus.wrap(a + kE2);
  return h(b.i, b.j) - h(a.i, a.j) + u[1];
}

double GradientSample::operator()(Site s, Orientation o) const {
  const int n = side();
  const int i = ((s.i % n) + n) % n, j = ((s.j % n) + n) % n;
  return o == Orientation::horizontal ? horizontal(i, j) : vertical(i, j);
}

GradientSample gradient_field(const TorusField& s) {
  const int n = s.torus.n;
  GradientSample g{Eigen::ArrayXXd(n, n), Eigen::ArrayXXd(n, n)};
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      g.horizontal(i, j) = s.eta({i, j}, Orientation::horizontal);
      g.vertical(i, j) = s.eta({i, j}, Orientation::vertical);
    }
  return g;
}

double torus_drift(const TorusField& s, Site x) {
  const auto& p = s.potential;
  return p.dv(s.eta(x, Orientation::horizontal)) - p.dv(s.eta(x - kE1, Orientation::horizontal)) +
         p.dv(s.eta(x, Orientation::vertical)) - p.dv(s.eta(x - kE2, Orientation::vertical));
}

namespace {

struct TorusScratch {
  Eigen::ArrayXXd fh, fv;
  Eigen::VectorXd xi;
};

// Forces F(b) = V'(eta(b)) on all bonds, then h += dt div F + sd xi.
template <typename K>
void torus_kernel(const K& k, double* h, int n, double u1, double u2, const double* xi, double dt, double sd,
                  TorusScratch& s) {
  double* fh = s.fh.data();
  double* fv = s.fv.data();
  for (int j = 0; j < n; ++j) {
    const double* row = h + j * n;
    double* out = fh + j * n;
    for (int i = 0; i + 1 < n; ++i) out[i] = k.dv(row[i + 1] - row[i] + u1);
    out[n - 1] = k.dv(row[0] - row[n - 1] + u1);
  }
  for (int j = 0; j < n; ++j) {
    const double* row = h + j * n;
    const double* up = h + ((j + 1) % n) * n;
    double* out = fv + j * n;
    for (int i = 0; i < n; ++i) out[i] = k.dv(up[i] - row[i] + u2);
  }
  for (int j = 0; j < n; ++j) {
    double* row = h + j * n;
    const double* fr = fh + j * n;
    const double* fu = fv + j * n;
    const double* fd = fv + ((j + n - 1) % n) * n;
    const double* x = xi + j * n;
    row[0] += dt * (fr[0] - fr[n - 1] + fu[0] - fd[0]) + sd * x[0];
    for (int i = 1; i < n; ++i) row[i] += dt * (fr[i] - fr[i - 1] + fu[i] - fd[i]) + sd * x[i];
  }
  const double anchor = h[0];
  for (int c = 0; c < n * n; ++c) h[c] -= anchor;
}

}  // namespace

void torus_advance(TorusField& s, Rng& rng, long steps) {
  thread_local TorusScratch sc;
  const int n = s.torus.n;
  sc.fh.resize(n, n);
  sc.fv.resize(n, n);
  sc.xi.resize(n * n);
  const double sd = std::sqrt(2.0 * s.dt);
  s.potential.visit([&](const auto& k) {
    for (long t = 0; t < steps; ++t) {
      for (int c = 0; c < n * n; ++c) sc.xi[c] = rng.normal();
      torus_kernel(k, s.h.data(), n, s.u[0], s.u[1], sc.xi.data(), s.dt, sd, sc);
      if ((t + 1) % 64 == 0 && !std::isfinite(s.h.sum()))
        throw std::runtime_error("torus update produced a non-finite value at t = " +
                                 std::to_string(s.time + static_cast<double>(t + 1) * s.dt));
    }
  });
  s.time += static_cast<double>(steps) * s.dt;
  if (!std::isfinite(s.h.sum())) throw std::runtime_error("torus update produced a non-finite value");
}

TorusField torus_step(TorusField s, Rng& rng) {
  torus_advance(s, rng, 1);
  return s;
}

void regauge(TorusField& s, Site anchor) {
  const Site a = s.torus.wrap(anchor);
  s.h -= s.h(a.i, a.j);
}

namespace {

void check_options(int n, const TiltOptions& opt) {
  if (n < 2) throw std::invalid_argument("torus side must be at least 2");
  if (opt.samples < 1) throw std::invalid_argument("sample count must be positive");
  if (!(opt.thin > 0)) throw std::invalid_argument("thinning gap must be positive");
  if (opt.burn < 0) throw std::invalid_argument("burn-in must be nonnegative");
}

double burn_time(int n, const TiltOptions& opt) {
  return opt.burn > 0 ? opt.burn : 0.5 * n * n;
}

}  // namespace

std::vector<GradientSample> sample_gradients(int n, const Potential& p, Eigen::Vector2d u, const TiltOptions& opt,
                                             Rng& rng) {
  check_options(n, opt);
  auto s = TorusField::make(n, p, u, opt.dt);
  torus_advance(s, rng, steps_for(burn_time(n, opt), s.dt));
  const long gap = std::max(1L, steps_for(opt.thin, s.dt));
  std::vector<GradientSample> out;
  out.reserve(static_cast<std::size_t>(opt.samples));
  for (long k = 0; k < opt.samples; ++k) {
    torus_advance(s, rng, gap);
    out.push_back(gradient_field(s));
  }
  return out;
}

TiltEstimate estimate_a_u(int n, const Potential& p, Eigen::Vector2d u, const TiltOptions& opt, Rng& rng) {
  if (n < 8) throw std::invalid_argument("estimate_a_u: torus side must be at least 8");
  check_options(n, opt);
  auto s = TorusField::make(n, p, u, opt.dt);
  torus_advance(s, rng, steps_for(burn_time(n, opt), s.dt));
  const long gap = std::max(1L, steps_for(opt.thin, s.dt));
  std::vector<double> a1, a2;
  double e1 = 0.0, e2 = 0.0;
  for (long k = 0; k < opt.samples; ++k) {
    torus_advance(s, rng, gap);
    const auto g = gradient_field(s);
    a1.push_back(g.horizontal.unaryExpr([&](double x) { return p.ddv(x); }).mean());
    a2.push_back(g.vertical.unaryExpr([&](double x) { return p.ddv(x); }).mean());
    e1 += g.horizontal.mean();
    e2 += g.vertical.mean();
  }
  TiltEstimate t;
  t.a1 = batch_mean(a1);
  t.a2 = batch_mean(a2);
  t.beta = Beta(t.a1.value, t.a2.value);
  t.mean_eta1 = e1 / static_cast<double>(opt.samples);
  t.mean_eta2 = e2 / static_cast<double>(opt.samples);
  t.lag1_autocorrelation = autocorrelation(a1, 1);
  t.samples = opt.samples;
  t.side = n;
  return t;
}

TorusBond reflect(TorusBond b, Axis axis) {
  const Site s = b.tail;
  if (axis == Axis::horizontal) {
    if (b.orientation == Orientation::horizontal) return {{-s.i - 1, s.j}, Orientation::horizontal};
    return {{-s.i, s.j}, Orientation::vertical};
  }
  if (b.orientation == Orientation::vertical) return {{s.i, -s.j - 1}, Orientation::vertical};
  return {{s.i, -s.j}, Orientation::horizontal};
}

std::vector<TorusBond> default_pattern() {
  return {{{0, 0}, Orientation::horizontal},
          {{1, 0}, Orientation::horizontal},
          {{1, 0}, Orientation::vertical},
          {{2, 1}, Orientation::vertical}};
}

ReflectionReport reflection_test(const std::vector<GradientSample>& samples, Axis axis,
                                 const std::function<double(double)>& f, const std::vector<TorusBond>& pattern,
                                 double shift) {
  if (samples.size() < 2) throw std::invalid_argument("reflection_test: need at least two samples");
  if (pattern.empty()) throw std::invalid_argument("reflection_test: empty bond pattern");
  std::vector<TorusBond> mirrored;
  for (const auto& b : pattern) mirrored.push_back(reflect(b, axis));
  const auto average = [&](const GradientSample& g, const std::vector<TorusBond>& bonds) {
    double sum = 0.0;
    for (const auto& b : bonds) sum += f(g(b.tail, b.orientation));
    return sum / static_cast<double>(bonds.size());
  };
  ReflectionReport r;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (k % 2 == 0)
      r.original.push_back(average(samples[k], pattern));
    else
      r.reflected.push_back(average(samples[k], mirrored) + shift);
  }
  r.ks = ks_two_sample(r.original, r.reflected);
  return r;
}

double torus_gradient_variance(int n, Orientation o, double dt) {
  const TorusDomain t(n);
  const int m = t.site_count();
  const auto index = [&](Site s) {
    const Site w = t.wrap(s);
    return w.i + n * w.j;
  };
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(m, m);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int a = index({i, j});
      for (Site e : {kE1, kE2}) {
        const int b = index(Site{i, j} + e);
        lap(a, a) += 1;
        lap(b, b) += 1;
        lap(a, b) -= 1;
        lap(b, a) -= 1;
      }
    }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap);
  const int head = index(o == Orientation::horizontal ? kE1 : kE2);
  double var = 0.0;
  for (int k = 0; k < m; ++k) {
    const double lambda = es.eigenvalues()[k];
    if (lambda < 1e-9) continue;
    const double g = es.eigenvectors()(head, k) - es.eigenvectors()(0, k);
    var += g * g / (lambda * (1.0 - 0.5 * dt * lambda));
  }
  return var;
}

}  // namespace glab
