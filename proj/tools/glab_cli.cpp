// glab: experiment runner. One subcommand per data product; every run writes
// its CSV/JSON outputs plus manifest.json into --out.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "glab/dgff.hpp"
#include "glab/experiments.hpp"
#include "glab/gibbs.hpp"
#include "glab/harmonic.hpp"
#include "glab/hswalk.hpp"
#include "glab/langevin.hpp"
#include "glab/parallel.hpp"
#include "glab/potential.hpp"
#include "glab/rng.hpp"
#include "glab/stats.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace glab;
using cli::ConfigError;
using cli::RunConfig;

namespace {

// Streams of a run seed s: replica k uses derive_seed(s, k). Auxiliary draws
// (random nu, tilt estimates) use streams from kAuxStream upwards.
constexpr std::uint64_t kAuxStream = 1ULL << 32;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Cell {
  std::string text;
  Cell(double v) : text(fmt(v)) {}
  template <std::integral T>
  Cell(T v) : text(std::to_string(v)) {}
  Cell(const char* s) : text(s) {}
  Cell(std::string s) : text(std::move(s)) {}
};

using Row = std::vector<Cell>;

std::string sha1_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha1(), nullptr) != 1)
    throw std::runtime_error("SHA-1 digest failed");
  std::string hex;
  for (unsigned k = 0; k < len; ++k) {
    char b[3];
    std::snprintf(b, sizeof b, "%02x", md[k]);
    hex += b;
  }
  return hex;
}

// Same digest git assigns to a blob with these contents.
std::string git_blob_hash(const std::string& s) {
  std::string blob = "blob " + std::to_string(s.size());
  blob.push_back('\0');
  return sha1_hex(blob + s);
}

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void csv(const std::string& name, const std::vector<std::string>& header, const std::vector<Row>& rows) {
    std::string text;
    for (std::size_t k = 0; k < header.size(); ++k) text += (k ? "," : "") + header[k];
    text += '\n';
    for (const auto& row : rows) {
      for (std::size_t k = 0; k < row.size(); ++k) text += (k ? "," : "") + row[k].text;
      text += '\n';
    }
    write(name, text);
  }

  void json_file(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  const json& inventory() const { return inventory_; }
  const fs::path& dir() const { return dir_; }

 private:
  void write(const std::string& name, const std::string& text) {
    std::ofstream out(dir_ / name, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
    inventory_.push_back({{"file", name}, {"bytes", text.size()}, {"sha1", sha1_hex(text)}});
  }

  fs::path dir_;
  json inventory_ = json::array();
};

class Verdicts {
 public:
  void add(const std::string& name, bool ok, json detail = json::object()) {
    detail["pass"] = ok;
    items_[name] = std::move(detail);
    pass_ = pass_ && ok;
  }
  bool pass() const { return pass_; }
  const json& items() const { return items_; }

 private:
  json items_ = json::object();
  bool pass_ = true;
};

struct Context {
  const RunConfig& c;
  Outputs& out;
  Verdicts& verdicts;
  json seeds = json::object();
};

json stream_seeds(std::uint64_t seed, std::uint64_t count, const std::string& unit) {
  json list = json::array();
  for (std::uint64_t k = 0; k < std::min<std::uint64_t>(count, 256); ++k) list.push_back(derive_seed(seed, k));
  return {{"unit", unit}, {"count", count}, {"rule", "unit k uses derive_seed(seed, k)"}, {"seeds", list}};
}

json estimate_json(const Estimate& e) { return {{"value", e.value}, {"std_error", e.std_error}}; }

Potential potential_of(const RunConfig& c) { return Potential::by_name(c.potential); }

Eigen::Vector2d u_of(const RunConfig& c) { return {c.u[0], c.u[1]}; }

ChainSchedule schedule_of(const RunConfig& c) { return {c.dt, c.burn, c.thin}; }

// Interior site nearest the centroid of D.
Site center_site(const LatticeDomain& d) {
  double ci = 0, cj = 0;
  for (Site s : d.interior()) ci += s.i, cj += s.j;
  ci /= static_cast<double>(d.interior().size());
  cj /= static_cast<double>(d.interior().size());
  Site best = d.interior().front();
  double bd = std::numeric_limits<double>::infinity();
  for (Site s : d.interior()) {
    const double dd = (s.i - ci) * (s.i - ci) + (s.j - cj) * (s.j - cj);
    if (dd < bd) bd = dd, best = s;
  }
  return best;
}

void append_field(std::vector<Row>& rows, long sample, const LatticeDomain& d, const GridField& h) {
  for (Site s : d.interior()) rows.push_back({sample, s.i, s.j, h.data()[d.cell(s)]});
  for (Site s : d.boundary()) rows.push_back({sample, s.i, s.j, h.data()[d.cell(s)]});
}

// Strictly decreasing sequence; nothing to compare for a single entry.
bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t k = 1; k < v.size(); ++k)
    if (!(v[k] < v[k - 1])) return false;
  return true;
}

void run_sample(Context& ctx) {
  const auto& c = ctx.c;
  const auto d = cli::make_domain(c.domain);
  const Potential p = potential_of(c);
  const GridField psi = cli::make_boundary(*d, cli::make_boundary_rule(c.boundary, c.u));
  const double dt = c.dt > 0 ? c.dt : default_dt(p);
  const double r2 = static_cast<double>(d->diameter()) * d->diameter();
  const double burn = c.burn > 0 ? c.burn : 20 * r2;
  const double thin = c.thin > 0 ? c.thin : 2 * r2;
  Rng rng = Rng::stream(c.seed, 0);
  auto s = FieldState::make(d, p, psi, dt);
  burn_in(s, burn, rng);
  const Site x = center_site(*d);
  std::vector<Row> rows;
  std::vector<double> at_center;
  bool finite = true;
  long k = 0;
  sample_thinned(s, rng, std::max(1L, steps_for(thin, dt)), c.samples, [&](const FieldState& f) {
    append_field(rows, k++, *d, f.h);
    at_center.push_back(f.h.data()[d->cell(x)]);
    finite = finite && f.h.isFinite().all();
  });
  ctx.out.csv("fields.csv", {"sample", "i", "j", "h"}, rows);
  json summary = {{"dt", dt},     {"burn", burn}, {"thin", thin}, {"samples", c.samples}, {"center", {x.i, x.j}},
                  {"center_mean", mean(at_center)}};
  if (at_center.size() > 1) summary["center_variance"] = variance(at_center);
  ctx.out.json_file("summary.json", summary);
  ctx.verdicts.add("finite", finite);
  ctx.seeds = stream_seeds(c.seed, 1, "chain");
}

void run_dgff(Context& ctx) {
  const auto& c = ctx.c;
  const auto d = cli::make_domain(c.domain);
  const GridField psi = cli::make_boundary(*d, cli::make_boundary_rule(c.boundary, c.u));
  const BondWeights w = BondWeights::uniform(*d, 1.0);
  const auto sampler = DgffSampler::build(d, w, psi);
  Rng rng = Rng::stream(c.seed, 0);
  const auto n = static_cast<Eigen::Index>(d->interior().size());
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n), sum2 = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd mu = interior_vector(*d, harmonic_extend(*d, psi, Beta{}, 1e-12));
  std::vector<Row> rows;
  for (long k = 0; k < c.samples; ++k) {
    const GridField g = sampler.sample(rng);
    append_field(rows, k, *d, g);
    const Eigen::VectorXd v = interior_vector(*d, g) - mu;  // centred for a stable second moment
    sum += v;
    sum2 += v.cwiseAbs2();
  }
  ctx.out.csv("fields.csv", {"sample", "i", "j", "h"}, rows);

  const double m = static_cast<double>(c.samples);
  const Eigen::VectorXd mean_dev = sum / m;
  const Eigen::VectorXd var = (sum2 - m * mean_dev.cwiseAbs2()) / std::max(1.0, m - 1);
  json sites = json::array();
  const bool dense = n <= 2500;  // dense Green's table beyond this is too large
  Eigen::VectorXd g_diag;
  if (dense) g_diag = greens_function(d, w).g.diagonal();
  double worst = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Site s = d->interior()[static_cast<std::size_t>(k)];
    json site = {{"i", s.i}, {"j", s.j}, {"mean", mu(k) + mean_dev(k)}, {"exact_mean", mu(k)}, {"variance", var(k)}};
    if (dense) {
      site["exact_variance"] = g_diag(k);
      const double zm = mean_dev(k) / std::sqrt(g_diag(k) / m);
      const double zv = (var(k) - g_diag(k)) / (g_diag(k) * std::sqrt(2.0 / std::max(1.0, m - 1)));
      worst = std::max({worst, std::abs(zm), std::abs(zv)});
    }
    sites.push_back(site);
  }
  const double zstar = bonferroni_z(static_cast<std::size_t>(2 * n), 0.001);
  ctx.out.json_file("moments.json", {{"samples", c.samples}, {"sites", sites}, {"max_abs_z", worst}, {"z_budget", zstar}});
  if (dense && c.samples > 1) ctx.verdicts.add("moments", worst <= zstar, {{"max_abs_z", worst}, {"z_budget", zstar}});
  ctx.seeds = stream_seeds(c.seed, 1, "sampler");
}

void run_hs(Context& ctx) {
  const auto& c = ctx.c;
  const auto d = cli::make_domain(c.domain);
  const Potential p = potential_of(c);
  const GridField psi = cli::make_boundary(*d, cli::make_boundary_rule(c.boundary, c.u));
  HsOptions opt;
  opt.dt = c.dt > 0 ? c.dt : default_dt(p);
  opt.burn = c.burn;
  opt.n_traj = c.replicas;
  opt.walks_per_traj = c.walks;
  const Site x{c.x[0], c.x[1]}, y{c.y[0], c.y[1]};
  const bool cov = c.mode == "cov";
  const HsEstimate e = cov ? estimate_covariance(FieldState::make(d, p, psi, opt.dt), x, y, opt, c.seed)
                           : estimate_mean(d, p, psi, x, c.nodes, opt, c.seed);
  std::vector<Row> rows;
  for (std::size_t k = 0; k < e.batch_values.size(); ++k) rows.push_back({k, e.batch_values[k]});
  ctx.out.csv("batches.csv", {"batch", "value"}, rows);
  json summary = {{"mode", c.mode},   {"x", c.x},         {"value", e.value},     {"std_error", e.std_error},
                  {"walks", e.walks}, {"flagged", e.flagged}, {"refused", e.refused}};
  if (cov) summary["y"] = c.y;
  ctx.verdicts.add("horizon", !e.refused, {{"flagged", e.flagged}, {"walks", e.walks}});
  if (p.kind() == Potential::Kind::quadratic) {
    const double exact = cov ? greens_function(d, BondWeights::uniform(*d, 1.0))(x, y)
                             : harmonic_extend(*d, psi, Beta{}, 1e-12).data()[d->cell(x)];
    const double z = e.std_error > 0 ? (e.value - exact) / e.std_error : (e.value == exact ? 0.0 : INFINITY);
    summary["exact"] = exact;
    summary["z"] = z;
    ctx.verdicts.add("oracle", std::abs(z) <= 4, {{"exact", exact}, {"z", z}});
  }
  ctx.out.json_file("summary.json", summary);
  if (cov) {
    ctx.seeds = {{"chain", derive_seed(c.seed, 0)},
                 {"rule", "walk k of segment j uses derive_seed(seed, 1 + j * walks + k)"}};
  } else {
    ctx.seeds = stream_seeds(c.seed, static_cast<std::uint64_t>(c.nodes), "node");
  }
}

json tilt_json(const TiltEstimate& t, const RunConfig& c) {
  return {{"potential", c.potential},
          {"u", c.u},
          {"side", t.side},
          {"samples", t.samples},
          {"a1", estimate_json(t.a1)},
          {"a2", estimate_json(t.a2)},
          {"beta", {t.beta.b1, t.beta.b2}},
          {"mean_eta", {t.mean_eta1, t.mean_eta2}},
          {"lag1_autocorrelation", t.lag1_autocorrelation}};
}

void run_gibbs(Context& ctx) {
  const auto& c = ctx.c;
  const Potential p = potential_of(c);
  TiltOptions opt;
  opt.burn = c.burn;
  opt.samples = c.samples;
  opt.thin = c.thin;
  opt.dt = c.dt;
  Rng rng = Rng::stream(c.seed, 0);
  const TiltEstimate t = estimate_a_u(c.n, p, u_of(c), opt, rng);
  ctx.out.json_file("tilt.json", tilt_json(t, c));
  const auto within = [&](const Estimate& a) {
    return a.value >= p.a_lower() - 3 * a.std_error && a.value <= p.a_upper() + 3 * a.std_error;
  };
  ctx.verdicts.add("bounds", within(t.a1) && within(t.a2), {{"a_lower", p.a_lower()}, {"a_upper", p.a_upper()}});
  ctx.seeds = stream_seeds(c.seed, 1, "chain");
}

Beta clt_beta(const RunConfig& c, const Potential& p, json& source) {
  if (!c.tilt.empty()) {
    std::ifstream in(c.tilt);
    if (!in) throw ConfigError("cannot read tilt file " + c.tilt);
    json t;
    try {
      t = json::parse(in);
      source = {{"tilt_file", c.tilt}};
      return Beta(t.at("beta").at(0).get<double>(), t.at("beta").at(1).get<double>());
    } catch (const json::exception& e) {
      throw ConfigError("malformed tilt file " + c.tilt + ": " + e.what());
    }
  }
  if (c.a[0] > 0 && c.a[1] > 0) {
    source = "config";
    return Beta(c.a[0], c.a[1]);
  }
  if (p.kind() == Potential::Kind::quadratic) {
    source = "quadratic";
    return Beta(p.a_lower(), p.a_lower());
  }
  Rng rng = Rng::stream(c.seed, kAuxStream);
  TiltOptions opt;
  opt.dt = c.dt;
  const TiltEstimate t = estimate_a_u(std::max(c.n, 8), p, u_of(c), opt, rng);
  source = {{"estimated", tilt_json(t, c)}};
  return t.beta;
}

void run_clt(Context& ctx) {
  const auto& c = ctx.c;
  CltConfig cfg;
  cfg.n = c.n;
  cfg.potential = potential_of(c);
  cfg.u = u_of(c);
  if (c.boundary_f != "zero") cfg.boundary_f = cli::make_boundary_function(c.boundary_f);
  for (const auto& t : c.tests) cfg.tests.push_back(TestFunction::sine_product(t[0], t[1]));
  json a_source;
  cfg.a = clt_beta(c, cfg.potential, a_source);
  cfg.samples = c.samples;
  cfg.chains = static_cast<int>(c.replicas);
  cfg.schedule = schedule_of(c);
  const CltReport r = clt_experiment(cfg, c.seed);

  std::vector<std::string> header{"sample", "chain"};
  for (const auto& t : c.tests) header.push_back("xi_" + std::to_string(t[0]) + "_" + std::to_string(t[1]));
  std::vector<Row> rows;
  const long per = c.samples / c.replicas, extra = c.samples % c.replicas;
  long chain = 0, left = per + (extra > 0 ? 1 : 0);
  for (long k = 0; k < r.samples; ++k) {
    while (left == 0) left = per + (++chain < extra ? 1 : 0);
    --left;
    Row row{k, chain};
    for (const auto& s : r.series) row.push_back(s.xi[static_cast<std::size_t>(k)]);
    rows.push_back(std::move(row));
  }
  ctx.out.csv("xi.csv", header, rows);

  const double zstar = bonferroni_z(2 * r.series.size(), 0.01);
  const double lag_cap = std::max(0.1, 3.0 / std::sqrt(static_cast<double>(std::max(1L, per))));
  const bool quadratic = cfg.potential.kind() == Potential::Kind::quadratic;
  bool normal = true, decorrelated = true, oracle = true, consistent = true;
  json series = json::array();
  for (const auto& s : r.series) {
    json j = {{"name", s.name},
              {"mean", estimate_json(s.mean)},
              {"variance", estimate_json(s.variance)},
              {"skewness", s.normality.skewness},
              {"excess_kurtosis", s.normality.excess_kurtosis},
              {"skewness_z", s.normality.skewness_z},
              {"kurtosis_z", s.normality.kurtosis_z},
              {"jarque_bera_p", s.normality.jarque_bera_p},
              {"ks_p", s.normality.ks.p_value},
              {"target", s.target},
              {"ratio", s.ratio},
              {"lag1", s.lag1}};
    normal = normal && std::abs(s.normality.skewness_z) <= zstar && std::abs(s.normality.kurtosis_z) <= zstar;
    decorrelated = decorrelated && s.lag1 <= lag_cap;
    if (quadratic) {
      j["oracle_variance"] = s.oracle_variance;
      j["em_oracle_variance"] = s.em_oracle_variance;
      oracle = oracle && std::abs(s.variance.value - s.em_oracle_variance) <= 4 * s.variance.std_error;
    }
    series.push_back(j);
  }
  // Ratios agree within 10%, widened by their Monte Carlo error.
  for (std::size_t i = 0; i < r.series.size(); ++i)
    for (std::size_t k = i + 1; k < r.series.size(); ++k) {
      const auto& a = r.series[i];
      const auto& b = r.series[k];
      const double se = std::hypot(a.variance.std_error / a.target, b.variance.std_error / b.target);
      consistent = consistent && std::abs(a.ratio - b.ratio) <= 0.1 * std::min(a.ratio, b.ratio) + 3 * se;
    }
  ctx.out.json_file("summary.json", {{"a", {cfg.a.b1, cfg.a.b2}},
                                     {"a_source", a_source},
                                     {"samples", r.samples},
                                     {"series", series},
                                     {"ratio_spread", r.ratio_spread}});
  ctx.verdicts.add("normality", normal, {{"z_budget", zstar}});
  ctx.verdicts.add("decorrelated", decorrelated, {{"lag1_cap", lag_cap}});
  ctx.verdicts.add("consistency", consistent, {{"ratio_spread", r.ratio_spread}});
  if (quadratic) ctx.verdicts.add("oracle", oracle, {{"budget", "4 std_error of the EM stationary variance"}});
  ctx.seeds = stream_seeds(c.seed, static_cast<std::uint64_t>(c.replicas), "chain");
}

void run_coupling(Context& ctx) {
  const auto& c = ctx.c;
  CouplingConfig cfg;
  cfg.sizes = c.sizes;
  cfg.potential = potential_of(c);
  cfg.psi = cli::make_boundary_rule(c.boundary, c.u);
  cfg.psi_tilde = cli::make_boundary_rule(c.boundary2, c.u);
  cfg.r_fraction = c.r_fraction;
  cfg.epsilon = c.epsilon;
  cfg.replicas = c.replicas;
  cfg.schedule = schedule_of(c);
  const auto rows = coupling_experiment(cfg, c.seed);

  std::vector<Row> csv;
  json summary = json::array();
  std::vector<double> exceedance;
  bool burn_ok = true, control = true, degenerate = true;
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.deviations.size(); ++k) {
      csv.push_back({r.size, k, r.deviations[k], r.residuals[k]});
      control = control && r.deviations[k] <= r.solver_tol + r.residuals[k];
    }
    summary.push_back({{"size", r.size},
                       {"epsilon", r.epsilon},
                       {"exceedance", r.exceedance},
                       {"contraction_residual", r.contraction_residual},
                       {"solver_tol", r.solver_tol},
                       {"burn_in_ok", r.burn_in_ok}});
    exceedance.push_back(r.exceedance);
    burn_ok = burn_ok && r.burn_in_ok;
    degenerate = degenerate && r.epsilon == 0 && r.exceedance == 0;
  }
  ctx.out.csv("deviations.csv", {"size", "replica", "deviation", "residual"}, csv);
  ctx.out.json_file("summary.json", {{"rows", summary}});
  if (degenerate) {
    ctx.verdicts.add("trend", true, {{"status", "vacuous: psi = psi_tilde, every deviation is 0"}});
  } else {
    const bool dec = strictly_decreasing(exceedance);
    const bool flat_zero = std::all_of(exceedance.begin(), exceedance.end(), [](double e) { return e == 0; });
    ctx.verdicts.add("trend", dec, {{"exceedance", exceedance}, {"status", dec ? "decreasing" : flat_zero ? "inconclusive" : "not decreasing"}});
  }
  ctx.verdicts.add("burn_in", burn_ok);
  if (cfg.potential.kind() == Potential::Kind::quadratic) ctx.verdicts.add("control", control);
  ctx.seeds = stream_seeds(c.seed, c.sizes.size(), "size");
}

void run_mean_harm(Context& ctx) {
  const auto& c = ctx.c;
  MeanHarmonicConfig cfg;
  cfg.sizes = c.sizes;
  cfg.potential = potential_of(c);
  cfg.psi = cli::make_boundary_rule(c.boundary, c.u);
  cfg.r_fraction = c.r_fraction;
  cfg.control_stiffness = c.control;
  cfg.span = c.span;
  cfg.schedule = schedule_of(c);
  const auto rows = mean_harmonic_experiment(cfg, c.seed);

  std::vector<Row> csv;
  json summary = json::array();
  std::vector<double> medians;
  bool budget = true;
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.sites.size(); ++k)
      csv.push_back({r.size, r.sites[k].i, r.sites[k].j, r.deviation[k], r.std_error[k]});
    summary.push_back({{"size", r.size},
                       {"sites", r.sites.size()},
                       {"max_deviation", r.max_deviation},
                       {"median_deviation", r.median_deviation},
                       {"max_std_error", r.max_std_error},
                       {"budget", r.budget},
                       {"ratio", r.ratio},
                       {"underpowered", r.underpowered}});
    medians.push_back(r.median_deviation);
    budget = budget && r.ratio < 3;
  }
  ctx.out.csv("deviations.csv", {"size", "i", "j", "deviation", "std_error"}, csv);
  ctx.out.json_file("summary.json", {{"rows", summary}});
  ctx.verdicts.add("budget", budget, {{"limit", "max deviation < 3 x budget"}});
  if (medians.size() > 1) ctx.verdicts.add("trend", strictly_decreasing(medians), {{"medians", medians}});
  ctx.seeds = stream_seeds(c.seed, c.sizes.size(), "size");
}

void run_entropy(Context& ctx) {
  const auto& c = ctx.c;
  EntropyConfig cfg;
  cfg.domain = cli::make_domain(c.domain);
  cfg.potential = potential_of(c);
  cfg.zeta = cli::make_boundary(*cfg.domain, cli::make_boundary_rule(c.boundary, c.u));
  cfg.zeta_tilde = cli::make_boundary(*cfg.domain, cli::make_boundary_rule(c.boundary2, c.u));
  cfg.samples = c.samples;
  cfg.schedule = schedule_of(c);
  const EntropyReport r = entropy_estimate(cfg, c.seed);
  ctx.out.csv("entropy.csv",
              {"main", "main_std_error", "remainder", "remainder_std_error", "total", "pinsker", "roundoff_floor"},
              {{r.main.value, r.main.std_error, r.remainder.value, r.remainder.std_error, r.total, r.pinsker,
                r.roundoff_floor}});
  ctx.out.json_file("summary.json", {{"main", estimate_json(r.main)},
                                     {"remainder", estimate_json(r.remainder)},
                                     {"total", r.total},
                                     {"pinsker", r.pinsker},
                                     {"roundoff_floor", r.roundoff_floor},
                                     {"effective_error", r.effective_error}});
  ctx.verdicts.add("pinsker", std::isfinite(r.pinsker), {{"pinsker", r.pinsker}});
  if (cfg.potential.kind() == Potential::Kind::quadratic)
    ctx.verdicts.add("identity", std::abs(r.main.value) <= 3 * r.effective_error,
                     {{"main", r.main.value}, {"budget", 3 * r.effective_error}});
  ctx.seeds = stream_seeds(c.seed, 1, "chain");
}

void run_bl(Context& ctx) {
  const auto& c = ctx.c;
  const auto d = cli::make_domain(c.domain);
  const Potential p = potential_of(c);
  const GridField psi = cli::make_boundary(*d, cli::make_boundary_rule(c.boundary, c.u));
  const auto n = static_cast<Eigen::Index>(d->interior().size());
  Rng nu_rng = Rng::stream(c.seed, kAuxStream);
  std::vector<Eigen::VectorXd> nus;
  std::vector<Row> nu_rows;
  for (long k = 0; k < c.replicas; ++k) {
    Eigen::VectorXd nu(n);
    for (Eigen::Index i = 0; i < n; ++i) nu(i) = nu_rng.normal();
    nu.normalize();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Site s = d->interior()[static_cast<std::size_t>(i)];
      nu_rows.push_back({k, s.i, s.j, nu(i)});
    }
    nus.push_back(std::move(nu));
  }
  const BlReport r = brascamp_lieb_check(d, p, psi, nus, c.samples, schedule_of(c), c.seed);
  std::vector<Row> rows;
  for (std::size_t k = 0; k < r.rows.size(); ++k)
    rows.push_back({k, r.rows[k].var_gl.value, r.rows[k].var_gl.std_error, r.rows[k].var_dgff, r.rows[k].pass ? 1 : 0});
  ctx.out.csv("nus.csv", {"nu", "i", "j", "value"}, nu_rows);
  ctx.out.csv("bl.csv", {"nu", "var_gl", "std_error", "var_dgff", "pass"}, rows);
  ctx.verdicts.add("bound", r.pass, {{"budget", "var_gl <= var_dgff + 4 std_error"}});
  ctx.seeds = {{"nu", derive_seed(c.seed, kAuxStream)}, {"chain", stream_seeds(c.seed, 1, "chain")}};
}

void run_beurling(Context& ctx) {
  const auto& c = ctx.c;
  std::vector<int> ds = c.distances;
  std::sort(ds.begin(), ds.end());
  std::vector<Row> rows;
  std::vector<double> p;
  bool exact_ok = true;
  json seeds = json::array();
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const std::uint64_t seed = derive_seed(c.seed, k);
    seeds.push_back({{"d", ds[k]}, {"seed", seed}});
    const auto r = beurling_experiment(half_line, Site{ds[k], 0}, c.radius, Beta(c.beta[0], c.beta[1]), c.walks, seed);
    rows.push_back({ds[k], c.radius, r.p_hat, r.std_error, r.exact ? fmt(*r.exact) : std::string()});
    p.push_back(r.p_hat);
    if (r.exact) exact_ok = exact_ok && std::abs(r.p_hat - *r.exact) <= 3 * r.std_error + 1e-12;
  }
  ctx.out.csv("beurling.csv", {"d", "r", "p_hat", "stderr", "exact"}, rows);
  std::vector<double> neg(p.size());
  std::transform(p.begin(), p.end(), neg.begin(), [](double v) { return -v; });
  ctx.verdicts.add("monotone", strictly_decreasing(neg), {{"p_hat", p}});
  ctx.verdicts.add("exact", exact_ok);
  ctx.seeds = {{"rule", "distance k (ascending) uses derive_seed(seed, k); walk m of it derive_seed(that, m)"},
               {"per_distance", seeds}};
}

const std::map<std::string, void (*)(Context&)>& runners() {
  static const std::map<std::string, void (*)(Context&)> table{
      {"sample", run_sample},     {"dgff", run_dgff},         {"hs", run_hs},
      {"gibbs", run_gibbs},       {"clt", run_clt},           {"coupling", run_coupling},
      {"mean-harm", run_mean_harm}, {"entropy", run_entropy}, {"bl", run_bl},
      {"beurling", run_beurling}};
  return table;
}

const std::map<std::string, std::string>& descriptions() {
  static const std::map<std::string, std::string> table{
      {"sample", "Langevin samples of the field. fields.csv: sample,i,j,h; summary.json."},
      {"dgff", "Exact DGFF samples. fields.csv: sample,i,j,h; moments.json (per-site moments vs exact)."},
      {"hs", "HS walk estimate of E h(x) (mode mean) or Cov(h(x), h(y)) (mode cov). batches.csv: batch,value; "
             "summary.json."},
      {"gibbs", "a_u on the torus. tilt.json (usable as clt --tilt)."},
      {"clt", "Gradient functional xi(g). xi.csv: sample,chain,xi_k1_k2...; summary.json."},
      {"coupling", "Harmonic coupling of two boundary data. deviations.csv: size,replica,deviation,residual; "
                   "summary.json."},
      {"mean-harm", "Mean harmonicity on D(r). deviations.csv: size,i,j,deviation,std_error; summary.json."},
      {"entropy", "Relative entropy of two boundary data. entropy.csv: main,main_std_error,remainder,"
                  "remainder_std_error,total,pinsker,roundoff_floor; summary.json."},
      {"bl", "Brascamp-Lieb variance bound for random nu. nus.csv: nu,i,j,value; bl.csv: "
             "nu,var_gl,std_error,var_dgff,pass."},
      {"beurling", "Escape before hitting the half-line. beurling.csv: d,r,p_hat,stderr,exact."}};
  return table;
}

// Flag spellings beyond --key (underscores become dashes).
std::vector<std::string> flag_names(const std::string& sub, const std::string& key) {
  std::string dashed = key;
  std::replace(dashed.begin(), dashed.end(), '_', '-');
  std::vector<std::string> names{"--" + dashed};
  if (key == "samples") names.push_back("--n-samples");
  if (key == "radius") names.push_back("--r");
  if (key == "distances") names.push_back("--d-list");
  if (key == "nodes") names.push_back("--r-nodes");
  if (sub == "hs" && key == "replicas") names.push_back("--traj");
  if (key == "boundary2") names.push_back("--boundary-tilde");
  return names;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int fail(const std::string& kind, const std::string& message, const std::string& sub, const fs::path* dir) {
  const json record = {{"error", {{"type", kind}, {"message", message}, {"subcommand", sub}}}};
  std::cerr << record.dump() << "\n";
  if (dir) {
    std::error_code ec;
    fs::create_directories(*dir, ec);
    std::ofstream(*dir / "error.json") << record.dump(2) << "\n";
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lattice lab for the Ginzburg-Landau gradient model"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.set_version_flag("--version", GLAB_VERSION);

  std::string config_path;
  std::map<std::string, std::string> global_values;
  std::vector<std::pair<std::string, CLI::Option*>> global_opts;
  app.add_option("--config", config_path, "JSON document with RunConfig keys")->check(CLI::ExistingFile);
  for (const char* key : {"seed", "out", "threads"})
    global_opts.emplace_back(key, app.add_option(std::string("--") + key, global_values[key]));

  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::vector<std::pair<std::string, CLI::Option*>>> options;
  for (const auto& name : cli::subcommands()) {
    auto* sub = app.add_subcommand(name, descriptions().at(name));
    const json defaults = cli::defaults_for(name);
    for (const auto& key : cli::keys_for(name)) {
      if (key == "seed" || key == "out" || key == "threads") continue;
      std::string spelled;
      for (const auto& f : flag_names(name, key)) spelled += (spelled.empty() ? "" : ",") + f;
      auto* opt = sub->add_option(spelled, values[name][key], "default: " + defaults.at(key).dump());
      options[name].emplace_back(key, opt);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  json document, flags = json::object();
  RunConfig c;
  try {
    for (const auto& [key, opt] : global_opts)
      if (opt->count() > 0) flags[key] = cli::parse_flag(key, global_values[key]);
    for (const auto& [key, opt] : options[sub])
      if (opt->count() > 0) flags[key] = cli::parse_flag(key, values[sub][key]);
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      try {
        document = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError("malformed config document " + config_path + ": " + e.what());
      }
    }
    c = cli::resolve(sub, document, flags);
  } catch (const ConfigError& e) {
    return fail("config", e.what(), sub, nullptr);
  }

  const fs::path dir = c.out;
  if (c.threads > 0) set_thread_count(c.threads);
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  try {
    Outputs out(dir);
    Verdicts verdicts;
    Context ctx{c, out, verdicts};
    runners().at(sub)(ctx);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const json resolved = cli::to_json(c);
    json inputs = resolved;  // where and how many threads do not change the outputs
    inputs.erase("out");
    inputs.erase("threads");
    json manifest = {{"version", GLAB_VERSION},
                     {"subcommand", sub},
                     {"config", resolved},
                     {"config_hash", git_blob_hash(inputs.dump())},
                     {"config_file", config_path.empty() ? json(nullptr) : json{{"path", config_path}, {"contents", document}}},
                     {"flags", flags},
                     {"started", started},
                     {"wall_clock_seconds", wall},
                     {"threads", thread_count()},
                     {"seeds", ctx.seeds},
                     {"outputs", out.inventory()},
                     {"verdicts", verdicts.items()},
                     {"pass", verdicts.pass()}};
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
    for (const auto& [name, v] : verdicts.items().items())
      std::cout << sub << " " << name << ": " << (v.at("pass").get<bool>() ? "pass" : "FAIL") << "\n";
    std::cout << sub << ": " << (verdicts.pass() ? "pass" : "FAIL") << " (" << dir.string() << ")\n";
    return verdicts.pass() ? 0 : 1;
  } catch (const ConfigError& e) {
    return fail("config", e.what(), sub, &dir);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), sub, &dir);
  }
}
