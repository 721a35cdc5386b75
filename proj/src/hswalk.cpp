#include "glab/hswalk.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "glab/parallel.hpp"

namespace glab {

EnvironmentTrajectory EnvironmentTrajectory::reversed() const {
  EnvironmentTrajectory r = *this;
  r.rates = rates.rowwise().reverse();
  return r;
}

EnvironmentTrajectory EnvironmentTrajectory::frozen(std::shared_ptr<const LatticeDomain> d,
                                                    const Eigen::VectorXd& rates, double horizon, double a_lower,
                                                    double a_upper) {
  if (rates.size() != d->active_bond_count()) throw std::invalid_argument("frozen environment: wrong rate count");
  EnvironmentTrajectory e;
  e.domain = std::move(d);
  e.spacing = horizon;
  e.rates = rates;
  e.a_lower = a_lower;
  e.a_upper = a_upper;
  return e;
}

EnvironmentTrajectory harvest_environment(FieldState& s, Rng& rng, double length, double spacing) {
  if (!(spacing > 0) || !(length >= spacing)) throw std::invalid_argument("harvest_environment: bad length/spacing");
  const long count = static_cast<long>(std::ceil(length / spacing - 1e-9));
  const long gap = std::max(1L, steps_for(spacing, s.dt));
  EnvironmentTrajectory e;
  e.domain = s.domain;
  e.spacing = static_cast<double>(gap) * s.dt;
  e.a_lower = s.potential.a_lower();
  e.a_upper = s.potential.a_upper();
  const auto active = s.domain->active_bond_cells();
  e.rates.resize(static_cast<Eigen::Index>(active.size()), count);
  for (long k = 0; k < count; ++k) {
    s.potential.visit([&](const auto& kern) {
      for (std::size_t b = 0; b < active.size(); ++b)
        e.rates(static_cast<Eigen::Index>(b), k) = kern.ddv(s.h.data()[active[b].head] - s.h.data()[active[b].tail]);
    });
    advance(s, rng, gap);
  }
  return e;
}

namespace {

// Interior index of each neighbour (order right, up, left, down), or -1 for dD.
struct Neighbours {
  std::vector<std::array<Eigen::Index, 4>> next;

  explicit Neighbours(const LatticeDomain& d) {
    next.resize(d.interior().size());
    for (std::size_t k = 0; k < next.size(); ++k)
      for (int m = 0; m < 4; ++m)
        next[k][static_cast<std::size_t>(m)] = d.interior_index(d.site_at(d.incidence()[k].neighbor_cell[m]));
  }
};

// Walk core; `on_hold(site, duration)` sees every holding interval.
template <typename Hold>
WalkSummary walk(const EnvironmentTrajectory& env, const Neighbours& nb, Eigen::Index x, double t0, Rng& rng,
                 Hold&& on_hold, std::vector<double>* jumps = nullptr, std::vector<Eigen::Index>* visited = nullptr) {
  const auto& d = *env.domain;
  const double bound = 4.0 * env.a_upper;
  const double horizon = env.horizon();
  WalkSummary out;
  double t = t0;
  for (;;) {
    const double next = t + rng.exponential(bound);
    if (next >= horizon) {
      on_hold(x, horizon - t);
      out.exit_time = horizon - t0;
      return out;  // not exited: flagged
    }
    on_hold(x, next - t);
    t = next;
    const auto snap = std::min<Eigen::Index>(static_cast<Eigen::Index>(t / env.spacing), env.rates.cols() - 1);
    const auto& inc = d.incidence()[static_cast<std::size_t>(x)];
    std::array<double, 4> c;
    double total = 0.0;
    for (int m = 0; m < 4; ++m) total += (c[static_cast<std::size_t>(m)] = env.rates(inc.bond[m], snap));
    double u = rng.uniform() * bound;
    if (u >= total) continue;  // rejected proposal
    int m = 0;
    while (m < 3 && u >= c[static_cast<std::size_t>(m)]) u -= c[static_cast<std::size_t>(m++)];
    const Eigen::Index y = nb.next[static_cast<std::size_t>(x)][static_cast<std::size_t>(m)];
    if (jumps) jumps->push_back(t - t0);
    if (y < 0) {
      out.exited = true;
      out.exit_time = t - t0;
      out.exit_site = d.site_at(inc.neighbor_cell[m]);
      return out;
    }
    if (visited) visited->push_back(y);
    x = y;
  }
}

Eigen::Index start_index(const LatticeDomain& d, Site x0) {
  const Eigen::Index x = d.interior_index(x0);
  if (x < 0) throw std::invalid_argument("walk must start in the interior");
  return x;
}

}  // namespace

WalkPath simulate_walk(const EnvironmentTrajectory& env, Site x0, Rng& rng, double t0) {
  const auto& d = *env.domain;
  const Neighbours nb(d);
  std::vector<Eigen::Index> visited;
  WalkPath p;
  p.start = x0;
  const auto s = walk(env, nb, start_index(d, x0), t0, rng, [](Eigen::Index, double) {}, &p.jump_times, &visited);
  p.sites.push_back(x0);
  for (Eigen::Index k : visited) p.sites.push_back(d.interior()[static_cast<std::size_t>(k)]);
  p.exited = s.exited;
  p.exit_time = s.exit_time;
  if (s.exited) {
    p.exit_site = s.exit_site;
    p.sites.push_back(s.exit_site);
  }
  return p;
}

namespace {

WalkSummary occupation_walk(const EnvironmentTrajectory& env, const Neighbours& nb, Site x0, Site y, Rng& rng,
                            double t0) {
  const auto& d = *env.domain;
  const Eigen::Index target = d.interior_index(y);
  double occ = 0.0;
  auto s = walk(env, nb, start_index(d, x0), t0, rng, [&](Eigen::Index at, double dur) {
    if (at == target) occ += dur;
  });
  s.occupation = occ;
  return s;
}

}  // namespace

WalkSummary run_walk(const EnvironmentTrajectory& env, Site x0, Site y, Rng& rng, double t0) {
  return occupation_walk(env, Neighbours(*env.domain), x0, y, rng, t0);
}

double required_horizon(const LatticeDomain& d, double a_lower) {
  const double r = d.diameter();
  return 20.0 * r * r / a_lower;
}

namespace {

struct Resolved {
  double dt, burn, window, horizon;
};

Resolved resolve(const HsOptions& opt, const LatticeDomain& d, const Potential& p) {
  if (opt.n_traj < 2 || opt.walks_per_traj < 1) throw std::invalid_argument("HS estimator: need n_traj >= 2 and walks");
  const double r2 = static_cast<double>(d.diameter()) * d.diameter();
  return {opt.dt > 0 ? opt.dt : default_dt(p), opt.burn > 0 ? opt.burn : 20.0 * r2,
          opt.window > 0 ? opt.window : r2, required_horizon(d, p.a_lower())};
}

// Runs walks_per_traj walks per segment of one stationary chain and returns the
// per-segment means of `score`.
template <typename Score>
void run_segments(FieldState& s, const Resolved& r, const HsOptions& opt, std::uint64_t seed, Site x, Site y,
                  Score&& score, HsEstimate& est) {
  Rng chain = Rng::stream(seed, 0);
  burn_in(s, r.burn, chain);
  const Neighbours nb(*s.domain);
  for (long j = 0; j < opt.n_traj; ++j) {
    const auto env = harvest_environment(s, chain, r.window + r.horizon, opt.spacing);
    const long starts = std::max(1L, static_cast<long>(r.window / env.spacing));
    const auto results = parallel_map(static_cast<std::size_t>(opt.walks_per_traj), [&](std::size_t k) {
      Rng rng = Rng::stream(seed, 1 + static_cast<std::uint64_t>(j) * static_cast<std::uint64_t>(opt.walks_per_traj) + k);
      const double t0 = static_cast<double>(rng.below(static_cast<std::uint64_t>(starts))) * env.spacing;
      return occupation_walk(env, nb, x, y, rng, t0);
    });
    double sum = 0.0;
    long used = 0;
    for (const auto& w : results) {
      if (!w.exited) {
        ++est.flagged;
        continue;
      }
      sum += score(w);
      ++used;
    }
    est.walks += static_cast<long>(results.size());
    est.batch_values.push_back(used > 0 ? sum / static_cast<double>(used) : 0.0);
  }
}

void finish(HsEstimate& est) {
  est.refused = static_cast<double>(est.flagged) > kMaxFlaggedFraction * static_cast<double>(est.walks);
}

}  // namespace

HsEstimate estimate_covariance(FieldState state, Site x, Site y, const HsOptions& opt, std::uint64_t seed) {
  const auto& d = *state.domain;
  if (!d.contains(x)) throw std::invalid_argument("estimate_covariance: x must be interior");
  HsEstimate est;
  if (!d.contains(y)) return est;  // occupation of a boundary site before exit is 0
  const Resolved r = resolve(opt, d, state.potential);
  state.dt = r.dt;
  run_segments(state, r, opt, seed, x, y, [](const WalkSummary& w) { return w.occupation; }, est);
  const Estimate e = iid_mean(est.batch_values);
  est.value = e.value;
  est.std_error = e.std_error;
  finish(est);
  return est;
}

HsEstimate estimate_mean(std::shared_ptr<const LatticeDomain> d, const Potential& p, const GridField& psi, Site x,
                         int r_nodes, const HsOptions& opt, std::uint64_t seed) {
  if (r_nodes < 2) throw std::invalid_argument("estimate_mean: need at least two quadrature nodes");
  if (!d->contains(x)) throw std::invalid_argument("estimate_mean: x must be interior");
  const Resolved r = resolve(opt, *d, p);
  HsEstimate est;
  double total = 0.0, var = 0.0;
  for (int m = 0; m < r_nodes; ++m) {
    const double level = (m + 0.5) / r_nodes;
    GridField scaled = psi * level;
    FieldState s = FieldState::make(d, p, scaled, r.dt);
    HsEstimate node;
    run_segments(s, r, opt, derive_seed(seed, static_cast<std::uint64_t>(m)), x, x,
                 [&](const WalkSummary& w) { return psi.data()[d->cell(w.exit_site)]; }, node);
    const Estimate e = iid_mean(node.batch_values);
    total += e.value / r_nodes;
    var += e.std_error * e.std_error / (static_cast<double>(r_nodes) * r_nodes);
    est.walks += node.walks;
    est.flagged += node.flagged;
    est.batch_values.insert(est.batch_values.end(), node.batch_values.begin(), node.batch_values.end());
  }
  est.value = total;
  est.std_error = std::sqrt(var);
  finish(est);
  return est;
}

}  // namespace glab
