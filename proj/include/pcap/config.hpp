#pragma once

// Run configuration: a strict JSON schema with path and line diagnostics.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pcap/analytic.hpp"
#include "pcap/error.hpp"
#include "pcap/experiments.hpp"
#include "pcap/geometry.hpp"
#include "pcap/mesh.hpp"
#include "pcap/solver.hpp"

namespace pcap::config {

inline constexpr int kSchemaVersion = 1;

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k{"anchors", "mesh", "capacity", "solve", "ansatz", "sweep", "separation"};
  return k;
}

struct ParamsSection {
  int d = 2;
  double p = 1.5;
  double R = 2.0;
  double eps = 0.1;
  double tau = 0.1;
};

struct CapacitySection {
  double r = 0.5;                ///< inner radius (balls) or scale of the reference shape
  int levels = 3;
  double h_far_factor = 0.1;     ///< h_far = factor * R
  double h_inner_factor = 0.1;   ///< boundary spacing = factor * r
  int radial_points = 1024;      ///< d != 2 balls go through the radial solver
};

struct AnsatzSection {
  std::vector<double> A_grid;    ///< empty: 21 equal steps on [0, 1]
  std::string mode = "ball";
  int levels = 0;                ///< uniform refinements for the assembled energy
};

struct SweepSection {
  std::vector<double> eps{0.1, 0.05, 0.025};
  std::vector<double> tau{1.0};
  std::string tau_mode = "window";  ///< "window": multiples of the window center; "absolute"
  double delta = 0.2;
  double zero_tau_factor = 1e-6;
  int probe_samples = 720;
  int cones = 8;
};

struct SeparationSection {
  double tau_1 = 0.01;
  double eps = 0.025;
  std::vector<double> delta{0.05, 0.1, 0.2};
  int samples = 64;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::string experiment = "sweep";
  ParamsSection params;
  std::string anchors = "circle";
  geometry::CavitySpec cavity;
  mesh::MeshOptions mesh;
  solver::SolveOptions solver;
  CapacitySection capacity;
  AnsatzSection ansatz;
  SweepSection sweep;
  SeparationSection separation;
  std::uint64_t seed = 1;
  std::string output_dir = "runs";
};

// --------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  json poly = json::array();
  for (const auto& v : c.cavity.polygon) poly.push_back({v[0], v[1]});
  const auto& s = c.solver;
  return {
      {"schema_version", c.schema_version},
      {"experiment", c.experiment},
      {"params", {{"d", c.params.d}, {"p", c.params.p}, {"R", c.params.R}, {"eps", c.params.eps}, {"tau", c.params.tau}}},
      {"anchors", c.anchors},
      {"cavity",
       {{"shape", geometry::to_string(c.cavity.shape)},
        {"rotation", geometry::to_string(c.cavity.rotation)},
        {"seed", c.cavity.seed},
        {"polygon", poly}}},
      {"mesh",
       {{"h_far", c.mesh.h_far},
        {"h_near_factor", c.mesh.h_near_factor},
        {"growth", c.mesh.growth},
        {"min_angle_deg", c.mesh.min_angle_deg},
        {"quality_floor_deg", c.mesh.quality_floor_deg},
        {"ansatz_shells", c.mesh.ansatz_shells},
        {"extra_rings", c.mesh.extra_rings}}},
      {"solver",
       {{"tolerance", s.tolerance},
        {"flux_tolerance", s.flux_tolerance},
        {"max_iterations", s.max_iterations},
        {"max_stage_iterations", s.max_stage_iterations},
        {"max_kacanov_steps", s.max_kacanov_steps},
        {"kacanov_switch", s.kacanov_switch},
        {"mu_initial", s.mu_initial},
        {"mu_final", s.mu_final}}},
      {"capacity",
       {{"r", c.capacity.r},
        {"levels", c.capacity.levels},
        {"h_far_factor", c.capacity.h_far_factor},
        {"h_inner_factor", c.capacity.h_inner_factor},
        {"radial_points", c.capacity.radial_points}}},
      {"ansatz", {{"A_grid", c.ansatz.A_grid}, {"mode", c.ansatz.mode}, {"levels", c.ansatz.levels}}},
      {"sweep",
       {{"eps", c.sweep.eps},
        {"tau", c.sweep.tau},
        {"tau_mode", c.sweep.tau_mode},
        {"delta", c.sweep.delta},
        {"zero_tau_factor", c.sweep.zero_tau_factor},
        {"probe_samples", c.sweep.probe_samples},
        {"cones", c.sweep.cones}}},
      {"separation",
       {{"tau_1", c.separation.tau_1},
        {"eps", c.separation.eps},
        {"delta", c.separation.delta},
        {"samples", c.separation.samples}}},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
  };
}

inline bool operator==(const RunConfig& a, const RunConfig& b) { return to_json(a) == to_json(b); }

namespace detail {

/// 1-based line and column of a byte offset.
inline std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(offset, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

/// Byte offset of every member and element of an already validated JSON text, keyed by JSON pointer.
inline std::map<std::string, std::size_t> value_offsets(const std::string& text) {
  struct Frame {
    bool object;
    std::string base;
    std::string key;
    std::size_t index = 0;
    bool expect_key = true;
  };
  std::map<std::string, std::size_t> out;
  std::vector<Frame> st;
  auto escape = [](const std::string& k) {
    std::string e;
    for (char ch : k) e += ch == '~' ? "~0" : ch == '/' ? "~1" : std::string(1, ch);
    return e;
  };
  auto here = [&]() -> std::string {
    if (st.empty()) return "";
    const Frame& f = st.back();
    return f.base + "/" + (f.object ? escape(f.key) : std::to_string(f.index));
  };
  auto mark_value = [&](std::size_t pos) {
    if (!st.empty() && !st.back().object) out.emplace(here(), pos);
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (ch == '"') {
      std::string s;
      const std::size_t start = i;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        s += text[i];
      }
      if (!st.empty() && st.back().object && st.back().expect_key) {
        st.back().key = s;
        st.back().expect_key = false;
        out.emplace(here(), start);
      } else {
        mark_value(start);
      }
    } else if (ch == '{' || ch == '[') {
      mark_value(i);
      const std::string base = here();
      st.push_back({ch == '{', base, "", 0, true});
    } else if (ch == '}' || ch == ']') {
      if (!st.empty()) st.pop_back();
    } else if (ch == ',') {
      if (!st.empty()) {
        if (st.back().object) st.back().expect_key = true;
        else ++st.back().index;
      }
    } else if (ch == '-' || (ch >= '0' && ch <= '9') || ch == 't' || ch == 'f' || ch == 'n') {
      mark_value(i);
      while (i + 1 < text.size() && std::string_view(",]} \t\r\n").find(text[i + 1]) == std::string_view::npos) ++i;
    }
  }
  return out;
}

struct Context {
  const std::string* text = nullptr;
  std::map<std::string, std::size_t> offsets;

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    std::string where = path.empty() ? "/" : path;
    if (text) {
      // Nearest recorded ancestor gives the position.
      std::string p = path;
      while (true) {
        auto it = offsets.find(p);
        if (it != offsets.end()) {
          const auto [l, c] = line_col(*text, it->second);
          where += " (line " + std::to_string(l) + ", column " + std::to_string(c) + ")";
          break;
        }
        const auto cut = p.rfind('/');
        if (cut == std::string::npos || p.empty()) break;
        p = p.substr(0, cut);
      }
    }
    throw ConfigError("config " + where + ": " + what);
  }
};

class Reader {
 public:
  Reader(const Context& ctx, const nlohmann::json& j, std::string path) : ctx_(ctx), j_(j), path_(std::move(path)) {
    if (!j_.is_object()) ctx_.fail(path_, "expected an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it != j_.end()) read(*it, path_ + "/" + key, out);
  }

  template <class F>
  void section(const std::string& key, F&& f) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    Reader sub(ctx_, *it, path_ + "/" + key);
    f(sub);
    sub.finish();
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) ctx_.fail(path_ + "/" + it.key(), "unknown key");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const { ctx_.fail(path_ + "/" + key, what); }

 private:
  void read(const nlohmann::json& v, const std::string& p, double& out) const {
    if (!v.is_number()) ctx_.fail(p, "expected a number");
    out = v.get<double>();
  }
  void read(const nlohmann::json& v, const std::string& p, int& out) const {
    if (!v.is_number_integer()) ctx_.fail(p, "expected an integer");
    const auto x = v.get<std::int64_t>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) ctx_.fail(p, "integer out of range");
    out = static_cast<int>(x);
  }
  void read(const nlohmann::json& v, const std::string& p, std::uint64_t& out) const {
    if (!v.is_number_unsigned()) ctx_.fail(p, "expected a nonnegative integer");
    out = v.get<std::uint64_t>();
  }
  void read(const nlohmann::json& v, const std::string& p, bool& out) const {
    if (!v.is_boolean()) ctx_.fail(p, "expected true or false");
    out = v.get<bool>();
  }
  void read(const nlohmann::json& v, const std::string& p, std::string& out) const {
    if (!v.is_string()) ctx_.fail(p, "expected a string");
    out = v.get<std::string>();
  }
  void read(const nlohmann::json& v, const std::string& p, std::vector<double>& out) const {
    if (!v.is_array()) ctx_.fail(p, "expected an array of numbers");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) ctx_.fail(p + "/" + std::to_string(i), "expected a number");
      out.push_back(v[i].get<double>());
    }
  }
  void read(const nlohmann::json& v, const std::string& p, std::vector<mesh::Vec2>& out) const {
    if (!v.is_array()) ctx_.fail(p, "expected an array of [x, y] pairs");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto& e = v[i];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        ctx_.fail(p + "/" + std::to_string(i), "expected an [x, y] pair");
      out.push_back({e[0].get<double>(), e[1].get<double>()});
    }
  }

  const Context& ctx_;
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void check(const Context& ctx, bool ok, const std::string& path, const std::string& what) {
  if (!ok) ctx.fail(path, what);
}

inline void validate(const RunConfig& c, const Context& ctx) {
  check(ctx, c.schema_version == kSchemaVersion, "/schema_version",
        "unsupported schema version " + std::to_string(c.schema_version) + " (expected " +
            std::to_string(kSchemaVersion) + ")");
  const auto& kinds = experiment_kinds();
  check(ctx, std::find(kinds.begin(), kinds.end(), c.experiment) != kinds.end(), "/experiment",
        "unknown experiment '" + c.experiment + "'");
  const auto& P = c.params;
  check(ctx, P.d >= 2, "/params/d", "d must be >= 2");
  check(ctx, P.p > 1.0 && P.p < P.d, "/params/p", "p must lie in (1, d)");
  check(ctx, P.R > 1.0, "/params/R", "R must exceed 1");
  check(ctx, P.eps > 0.0 && P.eps < 1.0, "/params/eps", "eps must lie in (0, 1)");
  check(ctx, P.tau > 0.0 && std::isfinite(P.tau), "/params/tau", "tau must be positive and finite");
  try {
    Params::from_tau(P.d, P.p, P.R, P.eps, P.tau, 2.0 * std::numbers::pi).validate();
  } catch (const DomainError& e) {
    ctx.fail("/params", e.what());
  }
  check(ctx, c.anchors == "circle" || c.anchors == "greedy", "/anchors", "anchors must be 'circle' or 'greedy'");
  check(ctx, c.anchors != "circle" || P.d == 2 || c.experiment == "capacity", "/anchors", "circle anchors need d = 2");
  try {
    c.cavity.validate(P.d);
  } catch (const DomainError& e) {
    ctx.fail("/cavity", e.what());
  }
  const auto& M = c.mesh;
  check(ctx, M.h_far > 0.0 && M.h_far < P.R / 4.0, "/mesh/h_far", "h_far must lie in (0, R/4)");
  check(ctx, M.h_near_factor > 0.0 && M.h_near_factor <= 1.0, "/mesh/h_near_factor", "must lie in (0, 1]");
  check(ctx, M.growth > 0.0 && M.growth <= 2.0, "/mesh/growth", "must lie in (0, 2]");
  check(ctx, M.min_angle_deg > 0.0 && M.min_angle_deg < 34.0, "/mesh/min_angle_deg", "must lie in (0, 34)");
  check(ctx, M.quality_floor_deg > 0.0 && M.quality_floor_deg <= M.min_angle_deg, "/mesh/quality_floor_deg",
        "must lie in (0, min_angle_deg]");
  for (std::size_t i = 0; i < M.extra_rings.size(); ++i)
    check(ctx, M.extra_rings[i] > 0.0 && M.extra_rings[i] < P.R, "/mesh/extra_rings/" + std::to_string(i),
          "ring radius must lie in (0, R)");
  const auto& S = c.solver;
  check(ctx, S.tolerance > 0.0 && S.tolerance < 1.0, "/solver/tolerance", "must lie in (0, 1)");
  check(ctx, S.flux_tolerance > 0.0, "/solver/flux_tolerance", "must be positive");
  check(ctx, S.max_iterations >= 1, "/solver/max_iterations", "must be >= 1");
  check(ctx, S.max_stage_iterations >= 1, "/solver/max_stage_iterations", "must be >= 1");
  check(ctx, S.max_kacanov_steps >= 0, "/solver/max_kacanov_steps", "must be >= 0");
  check(ctx, S.kacanov_switch > 0.0, "/solver/kacanov_switch", "must be positive");
  check(ctx, S.mu_initial > 0.0 && S.mu_final > 0.0 && S.mu_final <= S.mu_initial, "/solver/mu_final",
        "need 0 < mu_final <= mu_initial");
  const auto& C = c.capacity;
  check(ctx, C.r > 0.0 && C.r < P.R, "/capacity/r", "r must lie in (0, R)");
  check(ctx, C.levels >= 3 && C.levels <= 6, "/capacity/levels", "levels must lie in [3, 6]");
  check(ctx, C.h_far_factor > 0.0 && C.h_far_factor < 0.25, "/capacity/h_far_factor", "must lie in (0, 1/4)");
  check(ctx, C.h_inner_factor > 0.0 && C.h_inner_factor <= 1.0, "/capacity/h_inner_factor", "must lie in (0, 1]");
  check(ctx, C.radial_points >= 3, "/capacity/radial_points", "must be >= 3");
  for (std::size_t i = 0; i < c.ansatz.A_grid.size(); ++i)
    check(ctx, c.ansatz.A_grid[i] >= 0.0 && c.ansatz.A_grid[i] <= 1.0, "/ansatz/A_grid/" + std::to_string(i),
          "amplitudes must lie in [0, 1]");
  try {
    ansatz::parse_mode(c.ansatz.mode);
  } catch (const DomainError& e) {
    ctx.fail("/ansatz/mode", e.what());
  }
  check(ctx, c.ansatz.levels >= 0 && c.ansatz.levels <= 3, "/ansatz/levels", "must lie in [0, 3]");
  const auto& W = c.sweep;
  check(ctx, !W.eps.empty(), "/sweep/eps", "need at least one eps");
  for (std::size_t i = 0; i < W.eps.size(); ++i)
    check(ctx, W.eps[i] > 0.0 && W.eps[i] < 1.0 && 1.0 + W.eps[i] < P.R, "/sweep/eps/" + std::to_string(i),
          "eps must lie in (0, 1) with 1 + eps < R");
  check(ctx, !W.tau.empty(), "/sweep/tau", "need at least one tau");
  for (std::size_t i = 0; i < W.tau.size(); ++i)
    check(ctx, W.tau[i] >= 0.0 && std::isfinite(W.tau[i]), "/sweep/tau/" + std::to_string(i),
          "tau must be finite and >= 0");
  check(ctx, W.tau_mode == "window" || W.tau_mode == "absolute", "/sweep/tau_mode",
        "tau_mode must be 'window' or 'absolute'");
  check(ctx, W.delta > 0.0 && W.delta < 1.0, "/sweep/delta", "delta must lie in (0, 1)");
  check(ctx, W.zero_tau_factor > 0.0, "/sweep/zero_tau_factor", "must be positive");
  check(ctx, W.probe_samples >= 1, "/sweep/probe_samples", "must be >= 1");
  check(ctx, W.cones >= 0, "/sweep/cones", "must be >= 0");
  const auto& X = c.separation;
  check(ctx, X.tau_1 > 0.0, "/separation/tau_1", "must be positive");
  check(ctx, X.eps > 0.0 && X.eps < 1.0, "/separation/eps", "must lie in (0, 1)");
  check(ctx, !X.delta.empty(), "/separation/delta", "need at least one delta");
  for (std::size_t i = 0; i < X.delta.size(); ++i)
    check(ctx, X.delta[i] > X.eps / 5.0 && X.delta[i] < 1.0, "/separation/delta/" + std::to_string(i),
          "delta must lie in (eps/5, 1)");
  check(ctx, X.samples >= 4, "/separation/samples", "must be >= 4");
  check(ctx, !c.output_dir.empty(), "/output_dir", "must not be empty");
}

inline RunConfig from_json(const nlohmann::json& j, const Context& ctx) {
  RunConfig c;
  Reader top(ctx, j, "");
  top.get("schema_version", c.schema_version);
  if (!top.has("schema_version")) ctx.fail("/schema_version", "missing (expected " + std::to_string(kSchemaVersion) + ")");
  top.get("experiment", c.experiment);
  top.section("params", [&](Reader& r) {
    r.get("d", c.params.d);
    r.get("p", c.params.p);
    r.get("R", c.params.R);
    r.get("eps", c.params.eps);
    r.get("tau", c.params.tau);
  });
  top.get("anchors", c.anchors);
  top.section("cavity", [&](Reader& r) {
    std::string shape = geometry::to_string(c.cavity.shape), rot = geometry::to_string(c.cavity.rotation);
    r.get("shape", shape);
    r.get("rotation", rot);
    r.get("seed", c.cavity.seed);
    r.get("polygon", c.cavity.polygon);
    try {
      c.cavity.shape = geometry::parse_shape(shape);
    } catch (const DomainError& e) {
      r.fail("shape", e.what());
    }
    try {
      c.cavity.rotation = geometry::parse_rotation(rot);
    } catch (const DomainError& e) {
      r.fail("rotation", e.what());
    }
  });
  top.section("mesh", [&](Reader& r) {
    r.get("h_far", c.mesh.h_far);
    r.get("h_near_factor", c.mesh.h_near_factor);
    r.get("growth", c.mesh.growth);
    r.get("min_angle_deg", c.mesh.min_angle_deg);
    r.get("quality_floor_deg", c.mesh.quality_floor_deg);
    r.get("ansatz_shells", c.mesh.ansatz_shells);
    r.get("extra_rings", c.mesh.extra_rings);
  });
  top.section("solver", [&](Reader& r) {
    r.get("tolerance", c.solver.tolerance);
    r.get("flux_tolerance", c.solver.flux_tolerance);
    r.get("max_iterations", c.solver.max_iterations);
    r.get("max_stage_iterations", c.solver.max_stage_iterations);
    r.get("max_kacanov_steps", c.solver.max_kacanov_steps);
    r.get("kacanov_switch", c.solver.kacanov_switch);
    r.get("mu_initial", c.solver.mu_initial);
    r.get("mu_final", c.solver.mu_final);
  });
  top.section("capacity", [&](Reader& r) {
    r.get("r", c.capacity.r);
    r.get("levels", c.capacity.levels);
    r.get("h_far_factor", c.capacity.h_far_factor);
    r.get("h_inner_factor", c.capacity.h_inner_factor);
    r.get("radial_points", c.capacity.radial_points);
  });
  top.section("ansatz", [&](Reader& r) {
    r.get("A_grid", c.ansatz.A_grid);
    r.get("mode", c.ansatz.mode);
    r.get("levels", c.ansatz.levels);
  });
  top.section("sweep", [&](Reader& r) {
    r.get("eps", c.sweep.eps);
    r.get("tau", c.sweep.tau);
    r.get("tau_mode", c.sweep.tau_mode);
    r.get("delta", c.sweep.delta);
    r.get("zero_tau_factor", c.sweep.zero_tau_factor);
    r.get("probe_samples", c.sweep.probe_samples);
    r.get("cones", c.sweep.cones);
  });
  top.section("separation", [&](Reader& r) {
    r.get("tau_1", c.separation.tau_1);
    r.get("eps", c.separation.eps);
    r.get("delta", c.separation.delta);
    r.get("samples", c.separation.samples);
  });
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);
  top.finish();
  validate(c, ctx);
  return c;
}

}  // namespace detail

/// Parse and validate a config document. Throws ConfigError with a JSON pointer and line/column.
inline RunConfig parse(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [l, c] = detail::line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigError("config: JSON syntax error at line " + std::to_string(l) + ", column " + std::to_string(c) + ": " +
                      e.what());
  }
  detail::Context ctx{&text, detail::value_offsets(text)};
  return detail::from_json(j, ctx);
}

/// Validate an in-memory config (after flag overrides).
inline void validate(const RunConfig& c) { detail::validate(c, detail::Context{}); }

inline std::string serialize(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

inline RunConfig load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("config: cannot read '" + path.string() + "'");
  std::ostringstream os;
  os << is.rdbuf();
  return parse(os.str());
}

// --------------------------------------------------------------------------
// Conversion to experiment configs

/// Absolute tau values; "window" mode scales the window center of the limiting circle.
inline std::vector<double> sweep_taus(const RunConfig& c) {
  if (c.sweep.tau_mode == "absolute") return c.sweep.tau;
  const double capK = experiments::whole_space_capacity(c.cavity, c.params.d, c.params.p);
  const double capB = analytic::ball_capacity(c.params.d, c.params.p, 1.0, OuterRadius(c.params.R)).value;
  const double tc = experiments::window_center(analytic::sphere_area(c.params.d), capK, capB, c.params.p, c.params.d);
  std::vector<double> out;
  for (double t : c.sweep.tau) out.push_back(t * tc);
  return out;
}

inline experiments::SweepConfig sweep_config(const RunConfig& c) {
  experiments::SweepConfig s;
  s.d = c.params.d;
  s.p = c.params.p;
  s.R = c.params.R;
  s.cavity = c.cavity;
  s.anchors = c.anchors;
  s.seed = c.seed;
  s.eps = c.sweep.eps;
  s.tau = sweep_taus(c);
  s.delta = c.sweep.delta;
  s.zero_tau_factor = c.sweep.zero_tau_factor;
  s.mesh = c.mesh;
  s.solve = c.solver;
  s.probe_samples = c.sweep.probe_samples;
  s.cones = c.sweep.cones;
  return s;
}

inline experiments::SeparationConfig separation_config(const RunConfig& c) {
  experiments::SeparationConfig s;
  s.d = c.params.d;
  s.p = c.params.p;
  s.tau_1 = c.separation.tau_1;
  s.eps = c.separation.eps;
  s.delta = c.separation.delta;
  s.anchors = c.anchors;
  s.seed = c.seed;
  s.mesh = c.mesh;
  s.solve = c.solver;
  s.samples = c.separation.samples;
  return s;
}

}  // namespace pcap::config
