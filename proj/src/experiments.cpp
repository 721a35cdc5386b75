#include "glab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/SparseCholesky>

#include "glab/parallel.hpp"

namespace glab {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

TestFunction TestFunction::sine_product(int k1, int k2) {
  const double w1 = k1 * kPi, w2 = k2 * kPi;
  TestFunction t;
  t.name = "sin(" + std::to_string(k1) + "pi x)sin(" + std::to_string(k2) + "pi y)";
  t.f = [=](double x, double y) { return std::sin(w1 * x) * std::sin(w2 * y); };
  t.grad = [=](double x, double y) {
    return Eigen::Vector2d(w1 * std::cos(w1 * x) * std::sin(w2 * y), w2 * std::sin(w1 * x) * std::cos(w2 * y));
  };
  t.compact = true;
  return t;
}

TestFunction TestFunction::constant(double c) {
  return {"const", [c](double, double) { return c; }, [](double, double) { return Eigen::Vector2d::Zero().eval(); },
          c == 0.0};
}

TestFunction TestFunction::linear(double a, double b) {
  return {"linear", [=](double x, double y) { return a * x + b * y; },
          [=](double, double) { return Eigen::Vector2d(a, b); }, a == 0.0 && b == 0.0};
}

TestFunction TestFunction::scaled(double c) const {
  auto f0 = f;
  auto g0 = grad;
  return {std::to_string(c) + "*" + name, [=](double x, double y) { return c * f0(x, y); },
          [=](double x, double y) { return (c * g0(x, y)).eval(); }, compact};
}

TestFunction operator+(const TestFunction& a, const TestFunction& b) {
  auto fa = a.f, fb = b.f;
  auto ga = a.grad, gb = b.grad;
  return {a.name + "+" + b.name, [=](double x, double y) { return fa(x, y) + fb(x, y); },
          [=](double x, double y) { return (ga(x, y) + gb(x, y)).eval(); }, a.compact && b.compact};
}

double gradient_mismatch(const TestFunction& g, int points, double eps, Rng& rng) {
  double worst = 0.0;
  for (int k = 0; k < points; ++k) {
    const double x = rng.uniform(), y = rng.uniform();
    const Eigen::Vector2d fd((g(x + eps, y) - g(x - eps, y)) / (2 * eps), (g(x, y + eps) - g(x, y - eps)) / (2 * eps));
    worst = std::max(worst, (fd - g.grad(x, y)).cwiseAbs().maxCoeff());
  }
  return worst;
}

UnitMap UnitMap::of(const LatticeDomain& d) {
  int imin = std::numeric_limits<int>::max(), jmin = imin, imax = std::numeric_limits<int>::min(), jmax = imax;
  for (auto sites : {d.interior(), d.boundary()})
    for (Site s : sites) {
      imin = std::min(imin, s.i);
      imax = std::max(imax, s.i);
      jmin = std::min(jmin, s.j);
      jmax = std::max(jmax, s.j);
    }
  const int extent = std::max(imax - imin, jmax - jmin);
  return {static_cast<double>(imin), static_cast<double>(jmin), 1.0 / std::max(extent, 1)};
}

GridField sample_on(const LatticeDomain& d, const UnitMap& m, const TestFunction& g) {
  GridField out = d.make_field();
  for (auto sites : {d.interior(), d.boundary()})
    for (Site s : sites) {
      const auto p = m(s);
      out.data()[d.cell(s)] = g(p[0], p[1]);
    }
  return out;
}

GridField tilt_field(const LatticeDomain& d, const Eigen::Vector2d& u) {
  GridField out = d.make_field();
  for (auto sites : {d.interior(), d.boundary()})
    for (Site s : sites) out.data()[d.cell(s)] = u[0] * s.i + u[1] * s.j;
  return out;
}

GridField transfer(const LatticeDomain& from, const GridField& field, const LatticeDomain& to) {
  GridField out = to.make_field();
  for (auto sites : {to.interior(), to.boundary()})
    for (Site s : sites) {
      if (!from.in_grid(s)) throw std::invalid_argument("transfer: target site outside the source grid");
      const double v = field.data()[from.cell(s)];
      if (std::isnan(v)) throw std::invalid_argument("transfer: source has no value at a target site");
      out.data()[to.cell(s)] = v;
    }
  return out;
}

double xi_functional(const LatticeDomain& d, const GridField& h, const GridField& phi, const GridField& g, Beta a) {
  double sum = 0.0;
  for (const Bond& b : d.interior_bonds()) {
    const Eigen::Index t = d.cell(b.tail), hd = d.cell(b.head);
    const double dg = g.data()[hd] - g.data()[t];
    const double dh = (h.data()[hd] - phi.data()[hd]) - (h.data()[t] - phi.data()[t]);
    sum += a.along(b.orientation) * dg * dh;
  }
  return sum;
}

Eigen::VectorXd xi_coefficients(const LatticeDomain& d, const GridField& g, Beta a) {
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.interior().size()));
  for (const Bond& b : d.interior_bonds()) {
    const double w = a.along(b.orientation) * (g.data()[d.cell(b.head)] - g.data()[d.cell(b.tail)]);
    nu[d.interior_index(b.head)] += w;
    nu[d.interior_index(b.tail)] -= w;
  }
  return nu;
}

Quadrature dirichlet_ip_beta(const TestFunction& g1, const TestFunction& g2, Beta beta, int mesh) {
  if (mesh < 16) throw std::invalid_argument("dirichlet_ip_beta: mesh must be at least 16");
  const auto midpoint = [&](int m) {
    const double h = 1.0 / m;
    double sum = 0.0, scale = 0.0;
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) {
        const double x = (i + 0.5) * h, y = (j + 0.5) * h;
        const Eigen::Vector2d a = g1.grad(x, y), b = g2.grad(x, y);
        const double t1 = beta.b1 * a[0] * b[0], t2 = beta.b2 * a[1] * b[1];
        sum += t1 + t2;
        scale += std::abs(t1) + std::abs(t2);
      }
    return std::pair{sum * h * h, scale * h * h};
  };
  constexpr int kMaxMesh = 4096;
  auto [prev, prev_scale] = midpoint(mesh);
  while (mesh < kMaxMesh) {
    mesh *= 2;
    const auto [next, scale] = midpoint(mesh);
    const bool agree = std::abs(next - prev) <= 1e-4 * std::max(std::abs(next), 1e-3 * scale) + 1e-14;
    prev = next;
    if (agree) return {next, mesh, true};
  }
  return {prev, mesh, false};
}

double bonferroni_z(std::size_t m, double alpha) {
  return normal_quantile(1.0 - alpha / (2.0 * static_cast<double>(std::max<std::size_t>(m, 1))));
}

namespace {

double resolve_dt(const ChainSchedule& s, const Potential& p) {
  const double dt = s.dt > 0 ? s.dt : default_dt(p);
  if (dt > max_stable_dt(p) * (1 + 1e-12))
    throw std::invalid_argument("dt exceeds the stability bound 1/(8 A_V) of " + p.name());
  return dt;
}

// Q^{-1} nu and (I - dt Q / 2)^{-1} nu for Q = k (-Delta).
struct QuadraticOracle {
  double variance = 0.0;
  double em_variance = 0.0;
};

QuadraticOracle quadratic_oracle(const LatticeDomain& d, double stiffness, const Eigen::VectorXd& nu, double dt) {
  const Eigen::SparseMatrix<double> q = precision_matrix(d, BondWeights::uniform(d, stiffness));
  const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> chol(q);
  const Eigen::VectorXd g_nu = chol.solve(nu);
  Eigen::SparseMatrix<double> m(q.rows(), q.cols());
  m.setIdentity();
  m -= 0.5 * dt * q;
  const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> em(m);
  return {nu.dot(g_nu), g_nu.dot(em.solve(nu))};
}

}  // namespace

CltReport clt_experiment(const CltConfig& cfg, std::uint64_t seed) {
  if (cfg.n < 4) throw std::invalid_argument("clt_experiment: n must be at least 4");
  if (cfg.tests.empty()) throw std::invalid_argument("clt_experiment: no test functions");
  if (cfg.samples < 8 || cfg.chains < 1) throw std::invalid_argument("clt_experiment: too few samples or chains");
  const double dt = resolve_dt(cfg.schedule, cfg.potential);
  const auto d = std::make_shared<const LatticeDomain>(build_rectangle(cfg.n - 1, cfg.n - 1));
  const UnitMap map = UnitMap::of(*d);
  const GridField phi = tilt_field(*d, cfg.u);
  GridField boundary = phi;
  if (cfg.boundary_f)
    for (Eigen::Index c : d->boundary_cells()) {
      const auto p = map(d->site_at(c));
      boundary.data()[c] += (*cfg.boundary_f)(p[0], p[1]);
    }
  std::vector<GridField> gvals;
  for (const auto& t : cfg.tests) gvals.push_back(sample_on(*d, map, t));

  const double burn = cfg.schedule.burn > 0 ? cfg.schedule.burn : static_cast<double>(cfg.n) * cfg.n;
  // slowest mode relaxes on n^2 / (2 pi^2 a_V); 0.15 n^2 / a_V brings lag 1 below 0.1
  const double default_gap = 0.15 * cfg.n * cfg.n / cfg.potential.a_lower();
  const long gap = std::max(1L, steps_for(cfg.schedule.gap > 0 ? cfg.schedule.gap : default_gap, dt));
  const auto nt = cfg.tests.size();
  // per chain: xi[test][sample]
  const auto per_chain = parallel_map(static_cast<std::size_t>(cfg.chains), [&](std::size_t k) {
    const long count = cfg.samples / cfg.chains + (static_cast<long>(k) < cfg.samples % cfg.chains ? 1 : 0);
    Rng rng = Rng::stream(seed, k);
    auto s = FieldState::make(d, cfg.potential, boundary, dt);
    burn_in(s, burn, rng);
    std::vector<std::vector<double>> xi(nt);
    sample_thinned(s, rng, gap, count, [&](const FieldState& f) {
      for (std::size_t t = 0; t < nt; ++t) xi[t].push_back(xi_functional(*d, f.h, phi, gvals[t], cfg.a));
    });
    return xi;
  });

  CltReport r;
  r.samples = cfg.samples;
  for (std::size_t t = 0; t < nt; ++t) {
    CltSeries s;
    s.name = cfg.tests[t].name;
    for (const auto& chain : per_chain) {
      s.xi.insert(s.xi.end(), chain[t].begin(), chain[t].end());
      s.lag1 = std::max(s.lag1, std::abs(autocorrelation(chain[t], 1)));
    }
    s.mean = batch_mean(s.xi);
    s.variance = batch_variance(s.xi);
    s.normality = normality(s.xi);
    s.target = dirichlet_ip_beta(cfg.tests[t], cfg.tests[t], cfg.a).value;
    s.ratio = s.target > 0 ? s.variance.value / s.target : 0.0;
    if (cfg.potential.kind() == Potential::Kind::quadratic) {
      const auto o = quadratic_oracle(*d, cfg.potential.a_lower(), xi_coefficients(*d, gvals[t], cfg.a), dt);
      s.oracle_variance = o.variance;
      s.em_oracle_variance = o.em_variance;
    }
    r.decorrelated = r.decorrelated && s.lag1 <= 0.1;
    r.series.push_back(std::move(s));
  }
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& s : r.series) {
    lo = std::min(lo, s.ratio);
    hi = std::max(hi, s.ratio);
  }
  r.ratio_spread = lo > 0 ? hi / lo - 1.0 : std::numeric_limits<double>::infinity();
  return r;
}

SizedSquare square_with_boundary(int r, const BoundaryRule& psi) {
  auto d = std::make_shared<const LatticeDomain>(build_rectangle(r, r));
  GridField b = d->make_field();
  for (Eigen::Index c : d->boundary_cells()) b.data()[c] = psi(d->site_at(c), r);
  return {std::move(d), std::move(b)};
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

LatticeDomain inner_of(const LatticeDomain& d, double r) {
  LatticeDomain inner = inner_region(d, r);
  if (inner.empty()) throw std::invalid_argument("inner region D(r) is empty");
  return inner;
}

// max over the interior of `inner` of |f - hhat|, hhat the Delta^beta extension of f from d inner.
double harmonic_deviation(const LatticeDomain& d, const GridField& f, const LatticeDomain& inner, Beta beta,
                          std::vector<double>* per_site = nullptr) {
  const GridField local = transfer(d, f, inner);
  const GridField hhat = harmonic_extend(inner, local, beta, 1e-12);
  double worst = 0.0;
  for (Eigen::Index c : inner.interior_cells()) {
    const double dev = std::abs(local.data()[c] - hhat.data()[c]);
    worst = std::max(worst, dev);
    if (per_site) per_site->push_back(dev);
  }
  return worst;
}

}  // namespace

std::vector<MeanHarmonicRow> mean_harmonic_experiment(const MeanHarmonicConfig& cfg, std::uint64_t seed) {
  if (!cfg.psi) throw std::invalid_argument("mean_harmonic_experiment: boundary rule missing");
  if (cfg.batches < 2) throw std::invalid_argument("mean_harmonic_experiment: need at least two batches");
  const bool control = cfg.control_stiffness > 0;
  const Potential qc = control ? Potential::scaled_quadratic(cfg.control_stiffness) : Potential::quadratic();
  double dt = resolve_dt(cfg.schedule, cfg.potential);
  if (control) dt = std::min(dt, max_stable_dt(qc));

  return parallel_map(cfg.sizes.size(), [&](std::size_t k) {
    const int size = cfg.sizes[k];
    const auto sq = square_with_boundary(size, cfg.psi);
    const auto& d = *sq.domain;
    const LatticeDomain inner = inner_of(d, cfg.r_fraction * size);
    Rng rng = Rng::stream(seed, k);
    auto s = FieldState::make(sq.domain, cfg.potential, sq.boundary, dt);
    auto q = FieldState::make(sq.domain, qc, sq.boundary, dt);
    const double burn = cfg.schedule.burn > 0 ? cfg.schedule.burn : static_cast<double>(size) * size;
    const double span = cfg.span > 0 ? cfg.span : 80.0 * size * size;
    const auto n = static_cast<Eigen::Index>(d.interior().size());
    Eigen::VectorXd xi(n);
    const auto step = [&] {
      for (Eigen::Index m = 0; m < n; ++m) xi[m] = rng.normal();
      step_with_noise(s, xi);
      if (control) step_with_noise(q, xi);
    };
    for (long t = steps_for(burn, dt); t > 0; --t) step();

    // Batch means of Y = h - h_q over time, recorded every `every` steps.
    const long every = std::max(1L, steps_for(0.25, dt));
    const long per_batch = std::max(1L, steps_for(span / cfg.batches, dt) / every);
    Eigen::MatrixXd batch_means = Eigen::MatrixXd::Zero(n, cfg.batches);
    for (int b = 0; b < cfg.batches; ++b) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
      for (long r = 0; r < per_batch; ++r) {
        for (long t = 0; t < every; ++t) step();
        acc += interior_vector(d, s.h);
        if (control) acc -= interior_vector(d, q.h);
      }
      batch_means.col(b) = acc / static_cast<double>(per_batch);
    }
    const Eigen::VectorXd y = batch_means.rowwise().mean();
    const Eigen::VectorXd var = (batch_means.colwise() - y).rowwise().squaredNorm() / (cfg.batches - 1.0);
    GridField m = control ? harmonic_extend(d, sq.boundary, Beta{}, 1e-12) : d.make_field();
    for (Eigen::Index c : d.boundary_cells()) m.data()[c] = sq.boundary.data()[c];
    for (Eigen::Index i = 0; i < n; ++i) m.data()[d.interior_cells()[static_cast<std::size_t>(i)]] += y[i];

    MeanHarmonicRow row;
    row.size = size;
    row.max_deviation = harmonic_deviation(d, m, inner, cfg.beta, &row.deviation);
    for (Site x : inner.interior()) {
      row.sites.push_back(x);
      const double se = std::sqrt(var[d.interior_index(x)] / cfg.batches);
      row.std_error.push_back(se);
      row.max_std_error = std::max(row.max_std_error, se);
    }
    row.median_deviation = median(row.deviation);
    row.budget = bonferroni_z(row.sites.size()) * row.max_std_error;
    row.ratio = row.budget > 0 ? row.max_deviation / row.budget : std::numeric_limits<double>::infinity();
    row.underpowered = row.max_std_error > 0.5 * row.max_deviation;
    return row;
  });
}

std::vector<CouplingRow> coupling_experiment(const CouplingConfig& cfg, std::uint64_t seed) {
  if (!cfg.psi || !cfg.psi_tilde) throw std::invalid_argument("coupling_experiment: boundary rules missing");
  if (cfg.replicas < 2) throw std::invalid_argument("coupling_experiment: need at least two replicas");
  const double dt = resolve_dt(cfg.schedule, cfg.potential);
  return parallel_map(cfg.sizes.size(), [&](std::size_t k) {
    const int size = cfg.sizes[k];
    const auto a = square_with_boundary(size, cfg.psi);
    const auto b = square_with_boundary(size, cfg.psi_tilde);
    const auto& d = *a.domain;
    const LatticeDomain inner = inner_of(d, cfg.r_fraction * size);
    GridField diff = d.make_field();
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (Eigen::Index c : d.boundary_cells()) {
      diff.data()[c] = a.boundary.data()[c] - b.boundary.data()[c];
      lo = std::min(lo, diff.data()[c]);
      hi = std::max(hi, diff.data()[c]);
    }
    CouplingRow row;
    row.size = size;
    row.epsilon = cfg.epsilon > 0 ? cfg.epsilon : 0.1 * (hi - lo);
    row.solver_tol = 1e-12 * size * size;

    CouplingState c;
    c.components.push_back(FieldState::make(a.domain, cfg.potential, a.boundary, dt));
    c.components.push_back(FieldState::make(a.domain, cfg.potential, b.boundary, dt));
    Rng rng = Rng::stream(seed, k);
    burn_in(c, cfg.schedule.burn > 0 ? cfg.schedule.burn : static_cast<double>(size) * size, rng);
    const long gap = std::max(1L, steps_for(cfg.schedule.gap > 0 ? cfg.schedule.gap : 0.05 * size * size, dt));
    const GridField limit = harmonic_extend(d, diff, Beta{}, 1e-12);
    long exceed = 0;
    for (long r = 0; r < cfg.replicas; ++r) {
      advance(c, rng, gap);
      const GridField hbar = difference(c);
      const double dev = harmonic_deviation(d, hbar, inner, cfg.beta);
      row.deviations.push_back(dev);
      if (dev > row.epsilon) ++exceed;
      double emin = 0.0, emax = 0.0;
      for (Eigen::Index cell : d.interior_cells()) {
        const double e = hbar.data()[cell] - limit.data()[cell];
        emin = std::min(emin, e);
        emax = std::max(emax, e);
      }
      row.residuals.push_back(emax - emin);
    }
    row.exceedance = static_cast<double>(exceed) / static_cast<double>(cfg.replicas);
    row.contraction_residual = *std::max_element(row.residuals.begin(), row.residuals.end());

    const auto half = static_cast<std::ptrdiff_t>(row.deviations.size() / 2);
    const auto first = iid_mean(std::span(row.deviations.data(), static_cast<std::size_t>(half)));
    const auto second = iid_mean(std::span(row.deviations).subspan(static_cast<std::size_t>(half)));
    row.burn_in_ok = std::abs(first.value - second.value) <= 3 * combined_stderr(first, second) + 1e-12;
    return row;
  });
}

EntropyReport entropy_estimate(const EntropyConfig& cfg, std::uint64_t seed) {
  if (!cfg.domain) throw std::invalid_argument("entropy_estimate: domain missing");
  if (cfg.samples < 2) throw std::invalid_argument("entropy_estimate: need at least two samples");
  const auto& d = *cfg.domain;
  const double dt = resolve_dt(cfg.schedule, cfg.potential);
  GridField diff = d.make_field();
  for (Eigen::Index c : d.boundary_cells()) diff.data()[c] = cfg.zeta.data()[c] - cfg.zeta_tilde.data()[c];
  const GridField g = harmonic_extend(d, diff, cfg.beta, 1e-12);
  const double residual = max_residual(d, BondWeights::from_beta(d, cfg.beta), g);
  const double lip = cfg.potential.lipschitz();

  CouplingState c;
  c.components.push_back(FieldState::make(cfg.domain, cfg.potential, cfg.zeta, dt));
  c.components.push_back(FieldState::make(cfg.domain, cfg.potential, cfg.zeta_tilde, dt));
  Rng rng = Rng::stream(seed, 0);
  const double r2 = static_cast<double>(d.diameter()) * d.diameter();
  burn_in(c, cfg.schedule.burn > 0 ? cfg.schedule.burn : r2, rng);
  const long gap = std::max(1L, steps_for(cfg.schedule.gap > 0 ? cfg.schedule.gap : 0.05 * r2, dt));

  std::vector<double> main, rem;
  double floor = 0.0;
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  for (long k = 0; k < cfg.samples; ++k) {
    advance(c, rng, gap);
    const double* h = c.components[0].h.data();
    const double* h2 = c.components[1].h.data();
    const double* gv = g.data();
    double m = 0.0, r = 0.0, weight = 0.0;
    for (const auto& bc : d.active_bond_cells()) {
      const double dg = gv[bc.head] - gv[bc.tail];
      const double dh = h[bc.head] - h[bc.tail];
      const double dbar = dh - (h2[bc.head] - h2[bc.tail]);
      const double w = cfg.potential.ddv(dh) * dg;
      m += w * (dg - dbar);
      weight += std::abs(w);
      r += (dbar * dbar + dg * dg) * std::abs(dg);
    }
    // hbar = h1 - h2 carries rounding of order eps |h|, and g solves its
    // equation only up to `residual`.
    double mismatch = 0.0, scale = 0.0;
    for (Eigen::Index cell : d.interior_cells()) {
      mismatch += std::abs(gv[cell] - (h[cell] - h2[cell]));
      scale = std::max(scale, std::abs(h[cell]) + std::abs(h2[cell]) + std::abs(gv[cell]));
    }
    floor += mismatch * residual + 16 * kEps * scale * weight;
    main.push_back(m);
    rem.push_back(lip * r);
  }
  EntropyReport e;
  e.main = batch_mean(main);
  e.remainder = batch_mean(rem);
  e.total = e.main.value + e.remainder.value;
  e.pinsker = std::sqrt(std::max(e.total, 0.0) / 2.0);
  e.roundoff_floor = floor / static_cast<double>(cfg.samples);
  e.effective_error = std::max(e.main.std_error, e.roundoff_floor);
  return e;
}

BlReport brascamp_lieb_check(std::shared_ptr<const LatticeDomain> d, const Potential& p, const GridField& psi,
                             const std::vector<Eigen::VectorXd>& nus, long samples, const ChainSchedule& schedule,
                             std::uint64_t seed) {
  if (samples < 2) throw std::invalid_argument("brascamp_lieb_check: need at least two samples");
  const auto n = static_cast<Eigen::Index>(d->interior().size());
  for (const auto& nu : nus)
    if (nu.size() != n) throw std::invalid_argument("brascamp_lieb_check: weight vector has the wrong length");
  const double dt = resolve_dt(schedule, p);
  const Eigen::SparseMatrix<double> q = precision_matrix(*d, BondWeights::uniform(*d, p.a_lower()));
  const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> chol(q);

  Rng rng = Rng::stream(seed, 0);
  auto s = FieldState::make(d, p, psi, dt);
  const double r2 = static_cast<double>(d->diameter()) * d->diameter();
  burn_in(s, schedule.burn > 0 ? schedule.burn : r2, rng);
  const long gap = std::max(1L, steps_for(schedule.gap > 0 ? schedule.gap : 0.05 * r2, dt));
  std::vector<std::vector<double>> series(nus.size());
  sample_thinned(s, rng, gap, samples, [&](const FieldState& f) {
    const Eigen::VectorXd h = interior_vector(*d, f.h);
    for (std::size_t k = 0; k < nus.size(); ++k) series[k].push_back(nus[k].dot(h));
  });
  BlReport r;
  for (std::size_t k = 0; k < nus.size(); ++k) {
    BlRow row;
    row.var_gl = batch_variance(series[k]);
    row.var_dgff = nus[k].dot(chol.solve(nus[k]));
    row.pass = row.var_gl.value <= row.var_dgff + 4 * row.var_gl.std_error + 1e-12;
    r.pass = r.pass && row.pass;
    r.rows.push_back(row);
  }
  return r;
}

}  // namespace glab
