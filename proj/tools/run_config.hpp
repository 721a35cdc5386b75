#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "glab/experiments.hpp"
#include "glab/lattice.hpp"

namespace glab::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fully resolved run parameters. Keys not used by a subcommand keep their
/// defaults and are not accepted in its config document.
struct RunConfig {
  std::string subcommand;
  std::string domain = "rect:16x16";
  std::string potential = "cosine";
  std::vector<double> u{0.0, 0.0};
  std::string boundary = "zero";
  std::string boundary2 = "zero";
  double dt = 0.0;    // 0: default for the potential
  double burn = 0.0;  // time units; 0: size-dependent default
  double thin = 0.0;  // time units between samples; 0: size-dependent default
  long samples = 1000;
  long replicas = 4;
  long walks = 1000;
  std::uint64_t seed = 1;
  std::string out = "glab-out";
  unsigned threads = 0;
  int n = 32;
  std::vector<int> sizes{16, 32};
  std::vector<int> x{0, 0};
  std::vector<int> y{0, 0};
  std::vector<std::vector<int>> tests{{1, 1}, {2, 1}};
  std::string boundary_f = "zero";
  std::vector<double> a{0.0, 0.0};  // a_u; 0: estimate (or 1 for quadratic)
  double r_fraction = 0.25;
  double epsilon = 0.0;
  double control = 1.2;
  double span = 0.0;
  int nodes = 8;
  std::string mode = "cov";  // hs: mean | cov
  std::string tilt;          // clt: TiltEstimate JSON written by gibbs; overrides a
  std::vector<int> distances{2, 4, 8, 16};
  double radius = 64.0;
  std::vector<double> beta{1.0, 1.0};
};

const std::vector<std::string>& subcommands();

/// Keys a subcommand accepts, in documentation order.
const std::vector<std::string>& keys_for(const std::string& subcommand);

/// Defaults for `subcommand` as a JSON object.
nlohmann::json defaults_for(const std::string& subcommand);

nlohmann::json to_json(const RunConfig& c);

/// defaults <- config document <- flags. Unknown keys and malformed values
/// throw ConfigError; the result is validated.
RunConfig resolve(const std::string& subcommand, const nlohmann::json& document, const nlohmann::json& flags);

/// Parses a flag value given as text into the JSON type of `key`.
nlohmann::json parse_flag(const std::string& key, const std::string& text);

/// Checks every numeric parameter against the preconditions of the modules.
void validate(const RunConfig& c);

/// "rect:WxH", "square:R", "disk:r" or "mask:PATH".
std::shared_ptr<const LatticeDomain> make_domain(const std::string& spec);

/// "zero", "sine:A" (A sin(2 pi i / R)), "cosine:A" (A cos(2 pi j / R)),
/// "tilt:a,b" (a i + b j) or "file:PATH" (lines "i,j,value" covering dD),
/// plus the tilt u . x.
BoundaryRule make_boundary_rule(const std::string& spec, const std::vector<double>& u);

/// The rule evaluated on dD with R = diameter of D.
GridField make_boundary(const LatticeDomain& d, const BoundaryRule& rule);

/// "zero", "x" or "linear:a,b" on the unit square.
TestFunction make_boundary_function(const std::string& spec);

}  // namespace glab::cli
