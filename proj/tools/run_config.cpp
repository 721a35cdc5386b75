#include "run_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "glab/potential.hpp"

namespace glab::cli {

using nlohmann::json;

namespace {

const std::vector<std::string> kCommon{"seed", "out", "threads"};

const std::map<std::string, std::vector<std::string>>& key_table() {
  static const std::map<std::string, std::vector<std::string>> table{
      {"sample", {"domain", "potential", "u", "boundary", "dt", "burn", "thin", "samples"}},
      {"dgff", {"domain", "u", "boundary", "samples"}},
      {"hs", {"domain", "potential", "u", "boundary", "dt", "burn", "x", "y", "mode", "replicas", "walks", "nodes"}},
      {"gibbs", {"n", "potential", "u", "dt", "burn", "samples", "thin"}},
      {"clt", {"n", "potential", "u", "boundary_f", "tests", "a", "tilt", "dt", "burn", "thin", "samples", "replicas"}},
      {"coupling",
       {"sizes", "potential", "u", "boundary", "boundary2", "r_fraction", "epsilon", "replicas", "dt", "burn", "thin"}},
      {"mean-harm", {"sizes", "potential", "u", "boundary", "r_fraction", "control", "span", "dt", "burn"}},
      {"entropy", {"domain", "potential", "u", "boundary", "boundary2", "dt", "burn", "thin", "samples"}},
      {"bl", {"domain", "potential", "u", "boundary", "dt", "burn", "thin", "samples", "replicas"}},
      {"beurling", {"distances", "radius", "walks", "beta"}},
  };
  return table;
}

double number(const std::string& text, const std::string& key) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("malformed value for " + key + ": '" + text + "'");
  }
  if (used != text.size()) throw ConfigError("malformed value for " + key + ": '" + text + "'");
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, sep);) out.push_back(part);
  return out;
}

enum class Kind { real, integer, text, reals, integers, pairs };

Kind kind_of(const std::string& key) {
  static const std::map<std::string, Kind> kinds{
      {"domain", Kind::text},     {"potential", Kind::text},   {"u", Kind::reals},        {"boundary", Kind::text},
      {"boundary2", Kind::text},  {"dt", Kind::real},          {"burn", Kind::real},      {"thin", Kind::real},
      {"samples", Kind::integer}, {"replicas", Kind::integer}, {"walks", Kind::integer},  {"seed", Kind::integer},
      {"out", Kind::text},        {"threads", Kind::integer},  {"n", Kind::integer},      {"sizes", Kind::integers},
      {"x", Kind::integers},      {"y", Kind::integers},       {"tests", Kind::pairs},    {"boundary_f", Kind::text},
      {"a", Kind::reals},         {"r_fraction", Kind::real},  {"epsilon", Kind::real},   {"control", Kind::real},
      {"span", Kind::real},       {"nodes", Kind::integer},    {"mode", Kind::text},      {"tilt", Kind::text},
      {"distances", Kind::integers}, {"radius", Kind::real},   {"beta", Kind::reals},
  };
  const auto it = kinds.find(key);
  if (it == kinds.end()) throw ConfigError("unknown key: " + key);
  return it->second;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [k, _] : key_table()) v.push_back(k);
    return v;
  }();
  return names;
}

const std::vector<std::string>& keys_for(const std::string& subcommand) {
  static std::map<std::string, std::vector<std::string>> cache;
  const auto it = key_table().find(subcommand);
  if (it == key_table().end()) throw ConfigError("unknown subcommand: " + subcommand);
  auto& keys = cache[subcommand];
  if (keys.empty()) {
    keys = it->second;
    keys.insert(keys.end(), kCommon.begin(), kCommon.end());
  }
  return keys;
}

json to_json(const RunConfig& c) {
  return {{"subcommand", c.subcommand}, {"domain", c.domain},   {"potential", c.potential},
          {"u", c.u},                   {"boundary", c.boundary}, {"boundary2", c.boundary2},
          {"dt", c.dt},                 {"burn", c.burn},       {"thin", c.thin},
          {"samples", c.samples},       {"replicas", c.replicas}, {"walks", c.walks},
          {"seed", c.seed},             {"out", c.out},         {"threads", c.threads},
          {"n", c.n},                   {"sizes", c.sizes},     {"x", c.x},
          {"y", c.y},                   {"tests", c.tests},     {"boundary_f", c.boundary_f},
          {"a", c.a},                   {"r_fraction", c.r_fraction}, {"epsilon", c.epsilon},
          {"control", c.control},       {"span", c.span},       {"nodes", c.nodes},
          {"mode", c.mode},             {"tilt", c.tilt},       {"distances", c.distances},
          {"radius", c.radius},         {"beta", c.beta}};
}

json defaults_for(const std::string& subcommand) {
  RunConfig c;
  c.subcommand = subcommand;
  if (subcommand == "sample") {
    c.samples = 100;
  } else if (subcommand == "dgff") {
    c.domain = "rect:9x9";
    c.samples = 1000;
  } else if (subcommand == "hs") {
    c.domain = "rect:7x7";
    c.x = {3, 3};
    c.y = {3, 3};
    c.replicas = 20;
  } else if (subcommand == "gibbs") {
    c.samples = 1000;
    c.thin = 2.0;
  } else if (subcommand == "clt") {
    c.samples = 5000;
    c.dt = 0.04;
  } else if (subcommand == "coupling") {
    c.boundary = "sine:0.5";
    c.boundary2 = "sine:-0.5";
    c.replicas = 200;
  } else if (subcommand == "mean-harm") {
    c.boundary = "sine:0.5";
    c.dt = 0.04;
  } else if (subcommand == "entropy") {
    c.boundary2 = "sine:0.2";
  } else if (subcommand == "beurling") {
    c.walks = 10000;
  } else if (subcommand == "bl") {
    c.replicas = 5;
    c.samples = 2000;
  }
  const json all = to_json(c);
  json out = json::object();
  out["subcommand"] = subcommand;
  for (const auto& k : keys_for(subcommand)) out[k] = all.at(k);
  return out;
}

json parse_flag(const std::string& key, const std::string& text) {
  switch (kind_of(key)) {
    case Kind::real:
      return number(text, key);
    case Kind::integer: {
      const double v = number(text, key);
      require(v == std::floor(v), "malformed value for " + key + ": expected an integer");
      return static_cast<long long>(v);
    }
    case Kind::text:
      return text;
    case Kind::reals: {
      json arr = json::array();
      for (const auto& p : split(text, ',')) arr.push_back(number(p, key));
      return arr;
    }
    case Kind::integers: {
      json arr = json::array();
      for (const auto& p : split(text, ',')) arr.push_back(static_cast<long long>(number(p, key)));
      return arr;
    }
    case Kind::pairs: {
      json arr = json::array();
      for (const auto& p : split(text, ';')) arr.push_back(parse_flag("sizes", p));
      return arr;
    }
  }
  return {};
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("malformed value for ") + key + ": " + j.at(key).dump());
  }
}

}  // namespace

RunConfig resolve(const std::string& subcommand, const json& document, const json& flags) {
  json merged = defaults_for(subcommand);
  for (const json* layer : {&document, &flags}) {
    if (layer->is_null()) continue;
    require(layer->is_object(), "config must be a JSON object");
    for (const auto& [k, v] : layer->items()) {
      if (k == "subcommand") {
        require(v == subcommand, "config is for subcommand " + v.dump() + ", not " + subcommand);
        continue;
      }
      require(merged.contains(k), "unknown key for " + subcommand + ": " + k);
      merged[k] = v;
    }
  }
  RunConfig c;
  c.subcommand = subcommand;
  take(merged, "domain", c.domain);
  take(merged, "potential", c.potential);
  take(merged, "u", c.u);
  take(merged, "boundary", c.boundary);
  take(merged, "boundary2", c.boundary2);
  take(merged, "dt", c.dt);
  take(merged, "burn", c.burn);
  take(merged, "thin", c.thin);
  take(merged, "samples", c.samples);
  take(merged, "replicas", c.replicas);
  take(merged, "walks", c.walks);
  take(merged, "seed", c.seed);
  take(merged, "out", c.out);
  take(merged, "threads", c.threads);
  take(merged, "n", c.n);
  take(merged, "sizes", c.sizes);
  take(merged, "x", c.x);
  take(merged, "y", c.y);
  take(merged, "tests", c.tests);
  take(merged, "boundary_f", c.boundary_f);
  take(merged, "a", c.a);
  take(merged, "r_fraction", c.r_fraction);
  take(merged, "epsilon", c.epsilon);
  take(merged, "control", c.control);
  take(merged, "span", c.span);
  take(merged, "nodes", c.nodes);
  take(merged, "mode", c.mode);
  take(merged, "tilt", c.tilt);
  take(merged, "distances", c.distances);
  take(merged, "radius", c.radius);
  take(merged, "beta", c.beta);
  validate(c);
  return c;
}

void validate(const RunConfig& c) {
  const auto& keys = keys_for(c.subcommand);
  const auto uses = [&](const char* k) { return std::find(keys.begin(), keys.end(), k) != keys.end(); };
  if (uses("potential")) {
    require(c.potential == "quadratic" || c.potential == "cosine", "unknown potential: " + c.potential);
    const Potential p = Potential::by_name(c.potential);
    const double cap = max_stable_dt(p);
    require(c.dt >= 0, "dt must be nonnegative");
    if (c.dt > cap)
      throw ConfigError("dt = " + std::to_string(c.dt) + " violates the stability bound dt <= 1/(8 A_V) = " +
                        std::to_string(cap) + " for the " + c.potential + " potential (A_V = " +
                        std::to_string(p.a_upper()) + ")");
  }
  require(c.u.size() == 2, "u must have two components");
  require(std::all_of(c.u.begin(), c.u.end(), [](double v) { return std::isfinite(v); }), "u must be finite");
  require(c.burn >= 0 && c.thin >= 0 && c.span >= 0, "burn, thin and span must be nonnegative");
  require(c.samples >= 1, "samples must be positive");
  require(c.replicas >= 1, "replicas must be positive");
  require(c.walks >= 1, "walks must be positive");
  // Boundary rules are evaluated once here so that bad files fail before any run.
  std::vector<std::shared_ptr<const LatticeDomain>> domains;
  if (uses("domain")) domains.push_back(make_domain(c.domain));
  if (uses("sizes"))
    for (int r : c.sizes)
      if (r >= 1) domains.push_back(std::make_shared<const LatticeDomain>(build_rectangle(r, r)));
  for (const char* key : {"boundary", "boundary2"}) {
    if (!uses(key)) continue;
    const auto rule = make_boundary_rule(key == std::string("boundary") ? c.boundary : c.boundary2, c.u);
    for (const auto& d : domains) make_boundary(*d, rule);
  }
  if (c.subcommand == "gibbs") require(c.n >= 8, "gibbs needs n >= 8");
  if (c.subcommand == "clt") {
    require(c.n >= 4, "clt needs n >= 4");
    require(!c.tests.empty(), "clt needs at least one test function");
    for (const auto& t : c.tests) require(t.size() == 2 && t[0] > 0 && t[1] > 0, "test functions are [k1, k2] with k > 0");
    require(c.a.size() == 2 && c.a[0] >= 0 && c.a[1] >= 0, "a must be two nonnegative numbers");
    require(c.samples >= 8, "clt needs at least 8 samples");
    make_boundary_function(c.boundary_f);
  }
  if (uses("sizes")) {
    require(!c.sizes.empty(), "sizes must not be empty");
    for (int r : c.sizes) require(r >= 4, "sizes must be at least 4");
    require(c.r_fraction > 0 && c.r_fraction < 0.5, "r_fraction must lie in (0, 0.5)");
  }
  if (c.subcommand == "coupling") require(c.replicas >= 2 && c.epsilon >= 0, "coupling needs >= 2 replicas, epsilon >= 0");
  if (c.subcommand == "mean-harm") require(c.control >= 0, "control stiffness must be nonnegative");
  if (c.subcommand == "dgff") require(c.samples >= 2, "dgff needs at least 2 samples");
  if (c.subcommand == "hs") {
    require(c.x.size() == 2 && c.y.size() == 2, "x and y are sites i,j");
    require(c.mode == "cov" || c.mode == "mean", "hs mode is mean or cov");
    require(c.nodes >= 2, "the mean needs at least two quadrature nodes");
    const auto d = make_domain(c.domain);
    require(d->contains({c.x[0], c.x[1]}), "x must be an interior site");
    if (c.mode == "cov") require(d->contains({c.y[0], c.y[1]}), "y must be an interior site");
  }
  if (c.subcommand == "beurling") {
    require(!c.distances.empty(), "distances must not be empty");
    for (int d : c.distances) require(d >= 1, "distances must be positive");
    require(c.radius > 0, "radius must be positive");
    require(c.beta.size() == 2 && c.beta[0] > 0 && c.beta[1] > 0, "beta must be two positive numbers");
    for (int d : c.distances) require(d < c.radius, "distances must be smaller than the radius");
  }
}

std::shared_ptr<const LatticeDomain> make_domain(const std::string& spec) {
  const auto colon = spec.find(':');
  require(colon != std::string::npos, "domain spec must look like rect:WxH, square:R, disk:r or mask:PATH");
  const std::string kind = spec.substr(0, colon), arg = spec.substr(colon + 1);
  if (kind == "rect") {
    const auto parts = split(arg, 'x');
    require(parts.size() == 2, "rect domain is rect:WxH");
    const double w = number(parts[0], "domain"), h = number(parts[1], "domain");
    require(w >= 1 && h >= 1 && w == std::floor(w) && h == std::floor(h), "rect sides must be positive integers");
    return std::make_shared<const LatticeDomain>(build_rectangle(static_cast<int>(w), static_cast<int>(h)));
  }
  if (kind == "square") {
    const double r = number(arg, "domain");
    require(r >= 1 && r == std::floor(r), "square side must be a positive integer");
    return std::make_shared<const LatticeDomain>(build_rectangle(static_cast<int>(r), static_cast<int>(r)));
  }
  if (kind == "disk") {
    const double r = number(arg, "domain");
    require(r >= 1, "disk radius must be at least 1");
    return std::make_shared<const LatticeDomain>(build_disk(r));
  }
  if (kind == "mask") {
    std::ifstream in(arg);
    require(static_cast<bool>(in), "cannot read mask file " + arg);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      return std::make_shared<const LatticeDomain>(build_from_mask(ss.str()));
    } catch (const std::exception& e) {
      throw ConfigError(std::string("bad mask: ") + e.what());
    }
  }
  throw ConfigError("unknown domain kind: " + kind);
}

BoundaryRule make_boundary_rule(const std::string& spec, const std::vector<double>& u) {
  require(u.size() == 2, "u must have two components");
  const double u1 = u[0], u2 = u[1];
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  constexpr double kTwoPi = 2 * std::numbers::pi;
  if (kind == "zero") return [=](Site s, int) { return u1 * s.i + u2 * s.j; };
  if (kind == "sine") {
    const double a = number(arg, "boundary");
    return [=](Site s, int r) { return u1 * s.i + u2 * s.j + a * std::sin(kTwoPi * s.i / r); };
  }
  if (kind == "cosine") {
    const double a = number(arg, "boundary");
    return [=](Site s, int r) { return u1 * s.i + u2 * s.j + a * std::cos(kTwoPi * s.j / r); };
  }
  if (kind == "tilt" || kind == "linear") {
    const auto parts = split(arg, ',');
    require(parts.size() == 2, kind + " boundary is " + kind + ":a,b");
    const double a = number(parts[0], "boundary"), b = number(parts[1], "boundary");
    return [=](Site s, int) { return (u1 + a) * s.i + (u2 + b) * s.j; };
  }
  if (kind == "file") {
    std::ifstream in(arg);
    require(static_cast<bool>(in), "cannot read boundary file " + arg);
    auto values = std::make_shared<std::map<Site, double>>();
    for (std::string line; std::getline(in, line);) {
      if (line.empty() || line[0] == '#') continue;
      const auto parts = split(line, ',');
      require(parts.size() == 3, "boundary file lines are i,j,value: " + line);
      (*values)[{static_cast<int>(number(parts[0], "boundary")), static_cast<int>(number(parts[1], "boundary"))}] =
          number(parts[2], "boundary");
    }
    return [=](Site s, int) {
      const auto it = values->find(s);
      if (it == values->end())
        throw ConfigError("boundary file has no value at (" + std::to_string(s.i) + ", " + std::to_string(s.j) + ")");
      return u1 * s.i + u2 * s.j + it->second;
    };
  }
  throw ConfigError("unknown boundary spec: " + spec);
}

GridField make_boundary(const LatticeDomain& d, const BoundaryRule& rule) {
  GridField b = d.make_field();
  for (Eigen::Index c : d.boundary_cells()) b.data()[c] = rule(d.site_at(c), d.diameter());
  return b;
}

TestFunction make_boundary_function(const std::string& spec) {
  if (spec == "zero") return TestFunction::constant(0.0);
  if (spec == "x") return TestFunction::linear(1.0, 0.0);
  if (spec.rfind("linear:", 0) == 0) {
    const auto parts = split(spec.substr(7), ',');
    require(parts.size() == 2, "linear boundary function is linear:a,b");
    return TestFunction::linear(number(parts[0], "boundary_f"), number(parts[1], "boundary_f"));
  }
  throw ConfigError("unknown boundary function: " + spec);
}

}  // namespace glab::cli
