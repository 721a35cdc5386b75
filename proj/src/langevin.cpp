#include "glab/langevin.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>

namespace glab {

FieldState FieldState::make(std::shared_ptr<const LatticeDomain> d, Potential p, const GridField& boundary,
                            double dt, double interior_value) {
  FieldState s;
  s.h = d->make_field(interior_value, 0.0);
  for (Eigen::Index c : d->boundary_cells()) {
    const double v = boundary.data()[c];
    if (!std::isfinite(v)) throw std::invalid_argument("FieldState: boundary value missing");
    s.h.data()[c] = v;
  }
  s.dt = dt > 0 ? dt : default_dt(p);
  s.domain = std::move(d);
  s.potential = std::move(p);
  return s;
}

void validate_coupling(const CouplingState& c) {
  if (c.components.empty()) throw std::invalid_argument("coupling has no components");
  const auto& a = c.components.front();
  for (const auto& b : c.components) {
    if (b.domain != a.domain) throw std::invalid_argument("coupling components must share the domain");
    if (b.potential.name() != a.potential.name()) throw std::invalid_argument("coupling components must share V");
    if (b.dt != a.dt || b.time != a.time) throw std::invalid_argument("coupling components must share dt and clock");
  }
}

double drift(const FieldState& s, Site x) {
  const auto& d = *s.domain;
  if (!d.contains(x)) throw std::invalid_argument("drift: site is not interior");
  const double hx = s.h.data()[d.cell(x)];
  double f = 0.0;
  for (Site e : {kE1, kE2, Site{-1, 0}, Site{0, -1}}) f += s.potential.dv(s.h.data()[d.cell(x + e)] - hx);
  return f;
}

namespace {

struct Scratch {
  std::vector<double> fh, fv;
  Eigen::VectorXd xi;
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

// Bond forces F(b) = V'(grad h(b)) on the whole grid, then the update on D.
template <typename K>
void em_kernel(const K& k, const LatticeDomain& d, double* h, const double* xi, double dt, double noise_sd,
               Scratch& s) {
  const Eigen::Index w = d.grid_width(), ht = d.grid_height(), n = w * ht;
  s.fh.resize(static_cast<std::size_t>(n));
  s.fv.resize(static_cast<std::size_t>(n));
  double* fh = s.fh.data();
  double* fv = s.fv.data();
  for (Eigen::Index j = 0; j < ht; ++j) {
    const double* row = h + j * w;
    double* out = fh + j * w;
    for (Eigen::Index i = 0; i + 1 < w; ++i) out[i] = k.dv(row[i + 1] - row[i]);
  }
  for (Eigen::Index j = 0; j + 1 < ht; ++j) {
    const double* row = h + j * w;
    const double* up = row + w;
    double* out = fv + j * w;
    for (Eigen::Index i = 0; i < w; ++i) out[i] = k.dv(up[i] - row[i]);
  }
  const auto cells = d.interior_cells();
  for (std::size_t m = 0; m < cells.size(); ++m) {
    const Eigen::Index c = cells[m];
    const double f = fh[c] - fh[c - 1] + fv[c] - fv[c - w];
    h[c] += dt * f + noise_sd * xi[m];
  }
}

void check_finite(const FieldState& s) {
  double sum = 0.0;
  for (Eigen::Index c : s.domain->interior_cells()) sum += s.h.data()[c];
  if (!std::isfinite(sum))
    throw std::runtime_error("Euler-Maruyama update produced a non-finite value at t = " + std::to_string(s.time) +
                             " (dt = " + std::to_string(s.dt) + " too large?)");
}

void fill_normals(Eigen::VectorXd& xi, Eigen::Index n, Rng& rng) {
  xi.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) xi[k] = rng.normal();
}

constexpr long kFiniteCheckEvery = 64;

}  // namespace

void step_with_noise(FieldState& s, const Eigen::Ref<const Eigen::VectorXd>& xi, double noise_scale) {
  const auto n = static_cast<Eigen::Index>(s.domain->interior().size());
  if (xi.size() != n) throw std::invalid_argument("step_with_noise: noise vector has the wrong length");
  const double sd = noise_scale * std::sqrt(2.0 * s.dt);
  s.potential.visit([&](const auto& k) { em_kernel(k, *s.domain, s.h.data(), xi.data(), s.dt, sd, scratch()); });
  s.time += s.dt;
  check_finite(s);
}

void advance(FieldState& s, Rng& rng, long steps, const StepOptions& opt) {
  auto& sc = scratch();
  const auto n = static_cast<Eigen::Index>(s.domain->interior().size());
  const double sd = opt.noise_scale * std::sqrt(2.0 * s.dt);
  const double t0 = s.time;
  s.potential.visit([&](const auto& k) {
    for (long t = 0; t < steps; ++t) {
      fill_normals(sc.xi, n, rng);
      em_kernel(k, *s.domain, s.h.data(), sc.xi.data(), s.dt, sd, sc);
      if ((t + 1) % kFiniteCheckEvery == 0) {
        s.time = t0 + static_cast<double>(t + 1) * s.dt;
        check_finite(s);
      }
    }
  });
  s.time = t0 + static_cast<double>(steps) * s.dt;
  check_finite(s);
}

void advance(CouplingState& c, Rng& rng, long steps, const StepOptions& opt) {
  validate_coupling(c);
  auto& sc = scratch();
  const auto& d = c.domain();
  const auto n = static_cast<Eigen::Index>(d.interior().size());
  const double sd = opt.noise_scale * std::sqrt(2.0 * c.dt());
  const double t0 = c.time();
  c.components.front().potential.visit([&](const auto& k) {
    Eigen::VectorXd xi;
    for (long t = 0; t < steps; ++t) {
      fill_normals(xi, n, rng);
      for (auto& s : c.components) em_kernel(k, d, s.h.data(), xi.data(), s.dt, sd, sc);
      if ((t + 1) % kFiniteCheckEvery == 0)
        for (auto& s : c.components) {
          s.time = t0 + static_cast<double>(t + 1) * s.dt;
          check_finite(s);
        }
    }
  });
  for (auto& s : c.components) {
    s.time = t0 + static_cast<double>(steps) * s.dt;
    check_finite(s);
  }
}

FieldState em_step(FieldState s, Rng& rng, const StepOptions& opt) {
  advance(s, rng, 1, opt);
  return s;
}

CouplingState coupled_step(CouplingState c, Rng& rng, const StepOptions& opt) {
  advance(c, rng, 1, opt);
  return c;
}

long steps_for(double span, double dt) {
  if (!(span >= 0)) throw std::invalid_argument("time span must be nonnegative");
  return std::lround(span / dt);
}

void burn_in(FieldState& s, double horizon, Rng& rng) { advance(s, rng, steps_for(horizon, s.dt)); }

void burn_in(CouplingState& c, double horizon, Rng& rng) { advance(c, rng, steps_for(horizon, c.dt())); }

void sample_thinned(FieldState& s, Rng& rng, long gap, long count, const std::function<void(const FieldState&)>& visit) {
  for (long k = 0; k < count; ++k) {
    advance(s, rng, gap);
    visit(s);
  }
}

GridField difference(const CouplingState& c) {
  if (c.components.size() < 2) throw std::invalid_argument("difference: need two components");
  return c.components[0].h - c.components[1].h;
}

namespace {

void record_point(const CouplingState& c, CouplingTrace& tr) {
  const auto& d = c.domain();
  const GridField hb = difference(c);
  double mass = 0.0, sup = 0.0;
  for (Eigen::Index cell : d.interior_cells()) {
    mass += hb.data()[cell] * hb.data()[cell];
    sup = std::max(sup, std::abs(hb.data()[cell]));
  }
  const auto active = d.active_bond_cells();
  const std::size_t n_int = d.interior_bonds().size();
  double bulk = 0.0, edge = 0.0, flux = 0.0;
  for (std::size_t k = 0; k < active.size(); ++k) {
    const double g = hb.data()[active[k].head] - hb.data()[active[k].tail];
    if (k < n_int) {
      bulk += g * g;
    } else {
      const Eigen::Index y = d.cell_kind(active[k].head) == LatticeDomain::Cell::boundary ? active[k].head
                                                                                           : active[k].tail;
      edge += g * g;
      flux += std::abs(hb.data()[y]) * std::abs(g);
    }
  }
  tr.times.push_back(c.time());
  tr.mass.push_back(mass);
  tr.bulk_energy.push_back(bulk);
  tr.crossing_energy.push_back(edge);
  tr.boundary_flux.push_back(flux);
  tr.sup_norm.push_back(sup);
}

}  // namespace

CouplingTrace record_coupling(CouplingState& c, double horizon, Rng& rng, long record_every) {
  validate_coupling(c);
  if (c.components.size() != 2) throw std::invalid_argument("record_coupling: need exactly two components");
  if (record_every < 1) throw std::invalid_argument("record_coupling: record_every must be positive");
  CouplingTrace tr;
  record_point(c, tr);
  const long steps = steps_for(horizon, c.dt());
  for (long done = 0; done < steps;) {
    const long chunk = std::min(record_every, steps - done);
    advance(c, rng, chunk);
    done += chunk;
    record_point(c, tr);
  }
  return tr;
}

EnergyReport energy_inequality_report(const CouplingTrace& tr, const Potential& p, double slack) {
  if (tr.times.empty()) throw std::invalid_argument("energy report: empty trace");
  EnergyReport r;
  r.slack = slack;
  r.boundary_constant = 2.0 * p.a_upper();
  double bulk = 0.0;
  for (std::size_t k = 0; k + 1 < tr.times.size(); ++k) {
    const double h = tr.times[k + 1] - tr.times[k];
    bulk += 0.5 * h * (tr.bulk_energy[k] + tr.bulk_energy[k + 1]);
    r.boundary += 0.5 * h * (tr.boundary_flux[k] + tr.boundary_flux[k + 1]);
  }
  r.lhs = tr.mass.back() + 2.0 * p.a_lower() * bulk;
  r.rhs0 = tr.mass.front();
  r.ratio = r.boundary > 0 ? (r.lhs - r.rhs0) / r.boundary : 0.0;
  r.pass = r.lhs <= r.rhs0 * (1.0 + slack) + r.boundary_constant * r.boundary;
  return r;
}

MaxMoments maximum_moments(FieldState s, Rng& rng, double burn, long gap, long samples) {
  const auto& d = *s.domain;
  const GridField hhat = harmonic_extend(d, s.h);
  burn_in(s, burn, rng);
  MaxMoments m;
  m.samples = samples;
  sample_thinned(s, rng, gap, samples, [&](const FieldState& st) {
    double mx = 0.0;
    for (Eigen::Index c : d.interior_cells()) mx = std::max(mx, std::abs(st.h.data()[c] - hhat.data()[c]));
    m.m1 += mx;
    m.m2 += mx * mx;
    m.m4 += mx * mx * mx * mx;
  });
  const auto n = static_cast<double>(samples);
  m.m1 /= n;
  m.m2 = std::sqrt(m.m2 / n);
  m.m4 = std::pow(m.m4 / n, 0.25);
  return m;
}

Eigen::MatrixXd em_stationary_covariance(const LatticeDomain& d, double dt) {
  const Eigen::MatrixXd q = precision_matrix(d, BondWeights::uniform(d, 1.0));
  const Eigen::MatrixXd m = q * (Eigen::MatrixXd::Identity(q.rows(), q.cols()) - 0.5 * dt * q);
  return m.llt().solve(Eigen::MatrixXd::Identity(q.rows(), q.cols()));
}

}  // namespace glab
