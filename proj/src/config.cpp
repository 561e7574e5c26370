#include "tvtp/config.hpp"

#include "tvtp/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace tvtp {

namespace {

using nlohmann::json;

// A JSON object at a known path. Every key read is recorded; finish()
// rejects the rest.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "top level must be an object" : "'" + path_ + "' must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& at(const std::string& key) {
    if (!has(key)) fail("missing required key '" + sub(key) + "'");
    return j_.at(key);
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  double real(const std::string& key) { return as_real(at(key), sub(key)); }
  double real(const std::string& key, double def) { return has(key) ? real(key) : def; }
  long long integer(const std::string& key) { return as_integer(at(key), sub(key)); }
  long long integer(const std::string& key, long long def) { return has(key) ? integer(key) : def; }
  std::uint64_t seed(const std::string& key, std::uint64_t def) {
    if (!has(key)) return def;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      fail("'" + sub(key) + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
  }
  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    if (!j_.at(key).is_boolean()) fail("'" + sub(key) + "' must be true or false");
    return j_.at(key).get<bool>();
  }
  std::string string(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) fail("'" + sub(key) + "' must be a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& def) { return has(key) ? string(key) : def; }
  std::vector<double> reals(const std::string& key) {
    const json& v = at(key);
    if (!v.is_array()) fail("'" + sub(key) + "' must be an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_real(v[i], sub(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail("unknown key '" + sub(it.key()) + "'");
  }

  [[noreturn]] static void fail(const std::string& msg) { throw InputError("config: " + msg); }

  static double as_real(const json& v, const std::string& path) {
    if (!v.is_number()) fail("'" + path + "' must be a number");
    return v.get<double>();
  }
  static long long as_integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) fail("'" + path + "' must be an integer");
    return v.get<long long>();
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Variant parse_variant(const std::string& s, const std::string& path) {
  if (s == "partial") return Variant::Partial;
  if (s == "joint") return Variant::Joint;
  Section::fail("'" + path + "' must be \"partial\" or \"joint\", got \"" + s + "\"");
}

ModelConfig parse_model(const json& j) {
  Section s(j, "model");
  ModelConfig cfg = paper_model_config(parse_variant(s.string("variant"), "model.variant"));
  cfg.n_regimes = static_cast<int>(s.integer("n_regimes", cfg.n_regimes));
  cfg.ar_order_y = static_cast<int>(s.integer("ar_order_y", cfg.ar_order_y));
  cfg.ar_order_z = static_cast<int>(s.integer("ar_order_z", cfg.ar_order_z));
  if (s.has("switching")) {
    Section w(s.at("switching"), "model.switching");
    cfg.switching.intercept = w.boolean("intercept", cfg.switching.intercept);
    cfg.switching.ar = w.boolean("ar", cfg.switching.ar);
    cfg.switching.scale = w.boolean("scale", cfg.switching.scale);
    w.finish();
  }
  s.finish();
  try {
    cfg.validate();
  } catch (const DomainError& e) {
    Section::fail(std::string("model: ") + e.what());
  }
  return cfg;
}

ParamVector parse_params(const json& j, const std::string& path) {
  Section s(j, path);
  ParamVector p;
  p.mu = s.reals("mu");
  p.phi = s.has("phi") ? s.reals("phi") : std::vector<double>{};
  p.sigma = s.reals("sigma");
  const json& trans = s.at("trans");
  if (!trans.is_array()) Section::fail("'" + path + ".trans' must be an array of rows");
  for (std::size_t r = 0; r < trans.size(); ++r) {
    const std::string rp = path + ".trans[" + std::to_string(r) + "]";
    if (!trans[r].is_array()) Section::fail("'" + rp + "' must be an array");
    std::vector<LogitCoef> row;
    for (std::size_t k = 0; k < trans[r].size(); ++k) {
      Section c(trans[r][k], rp + "[" + std::to_string(k) + "]");
      row.push_back({c.real("alpha"), c.real("beta")});
      c.finish();
    }
    p.trans.push_back(row);
  }
  p.mu2 = s.real("mu_z", 0.0);
  p.psi = s.has("psi") ? s.reals("psi") : std::vector<double>{};
  p.sigma2 = s.real("sigma_z", 1.0);
  p.rho = s.real("rho", 0.0);
  s.finish();
  return p;
}

bool default_shape(const ModelConfig& m) {
  const ModelConfig d = paper_model_config(m.variant);
  return m.n_regimes == d.n_regimes && m.ar_order_y == d.ar_order_y && m.ar_order_z == d.ar_order_z &&
         m.switching.intercept == d.switching.intercept && m.switching.ar == d.switching.ar &&
         m.switching.scale == d.switching.scale;
}

// Simulation design fields shared by `dgp` and the `mc` template.
DgpSpec parse_dgp(const json& j, const ModelConfig& model, bool require_run_keys) {
  Section s(j, "dgp");
  DgpSpec spec = paper_dgp(0.0, 200, 0);
  spec.model = model;
  spec.rho = s.real("rho", 0.0);
  if (require_run_keys) {
    spec.T = static_cast<int>(s.integer("T"));
    spec.seed = s.seed("seed", 0);
    if (!s.has("seed")) Section::fail("missing required key 'dgp.seed'");
  } else {
    spec.T = static_cast<int>(s.integer("T", spec.T));
    spec.seed = s.seed("seed", 0);
  }
  spec.burnin = static_cast<int>(s.integer("burnin", spec.burnin));
  spec.y0 = s.real("y0", spec.y0);
  spec.z0 = s.real("z0", spec.z0);
  spec.rep_index = s.seed("rep_index", 0);
  if (s.has("params")) {
    spec.params = parse_params(s.at("params"), "dgp.params");
  } else if (!default_shape(model)) {
    Section::fail("missing required key 'dgp.params' (model shape differs from the default design)");
  } else {
    spec.params = paper_dgp_params(spec.rho);
  }
  spec.params.rho = spec.rho;
  s.finish();
  try {
    spec.validate();
  } catch (const DomainError& e) {
    Section::fail(std::string("dgp: ") + e.what());
  }
  return spec;
}

FitOptions parse_fit(const json& j, const ModelConfig& model) {
  Section s(j, "fit");
  FitOptions o;
  o.grad_tol = s.real("grad_tol", o.grad_tol);
  o.max_iter = static_cast<int>(s.integer("max_iter", o.max_iter));
  if (s.has("fd_step")) {
    Section f(s.at("fd_step"), "fit.fd_step");
    o.fd_step.relative = f.real("relative", o.fd_step.relative);
    o.fd_step.floor = f.real("floor", o.fd_step.floor);
    f.finish();
  }
  if (s.has("hac")) {
    Section h(s.at("hac"), "fit.hac");
    const std::string kind = h.string("kind");
    if (kind == "none") {
      o.hac = HacOptions::none();
    } else if (kind == "bartlett") {
      o.hac = HacOptions::bartlett();
      if (h.has("lag")) o.hac.lag = static_cast<int>(h.integer("lag"));
    } else {
      Section::fail("'fit.hac.kind' must be \"none\" or \"bartlett\", got \"" + kind + "\"");
    }
    h.finish();
  }
  const std::string init = s.string("init", "stationary");
  if (init == "stationary") {
    o.init = InitRule::stationary();
  } else if (init == "uniform") {
    o.init = InitRule::uniform();
  } else {
    Section::fail("'fit.init' must be \"stationary\" or \"uniform\", got \"" + init + "\"");
  }
  if (s.has("starts")) {
    const json& st = s.at("starts");
    if (!st.is_array() || st.empty()) Section::fail("'fit.starts' must be a non-empty array");
    for (std::size_t i = 0; i < st.size(); ++i) {
      const std::string path = "fit.starts[" + std::to_string(i) + "]";
      ParamVector p = parse_params(st[i], path);
      try {
        p.validate(model);
      } catch (const DomainError& e) {
        Section::fail("'" + path + "': " + e.what());
      }
      o.starts.push_back(std::move(p));
    }
  }
  s.finish();
  try {
    o.validate();
  } catch (const DomainError& e) {
    Section::fail(std::string("fit: ") + e.what());
  }
  return o;
}

MCDesign parse_mc(const json& j, const DgpSpec& dgp, const FitOptions& fit) {
  Section s(j, "mc");
  MCDesign d;
  d.dgp = dgp;
  d.fit = fit;
  d.fit.starts.clear();
  d.rho_grid = s.reals("rho_grid");
  d.T_grid.clear();
  for (double T : s.reals("T_grid")) {
    if (T != std::floor(T)) Section::fail("'mc.T_grid' entries must be integers");
    d.T_grid.push_back(static_cast<int>(T));
  }
  d.n_reps = static_cast<int>(s.integer("n_reps"));
  if (s.has("estimators")) {
    const json& e = s.at("estimators");
    if (!e.is_array()) Section::fail("'mc.estimators' must be an array");
    d.estimators.clear();
    for (std::size_t i = 0; i < e.size(); ++i) {
      const std::string path = "mc.estimators[" + std::to_string(i) + "]";
      if (!e[i].is_string()) Section::fail("'" + path + "' must be a string");
      d.estimators.push_back(parse_variant(e[i].get<std::string>(), path));
    }
  }
  d.level = s.real("level", d.level);
  d.master_seed = s.seed("master_seed", d.master_seed);
  const std::string starts = s.string("starts", "desk");
  if (starts == "desk") {
    d.starts = MCDesign::Starts::Desk;
  } else if (starts == "full") {
    d.starts = MCDesign::Starts::Full;
  } else {
    Section::fail("'mc.starts' must be \"desk\" or \"full\", got \"" + starts + "\"");
  }
  d.low_precision_reps = static_cast<int>(s.integer("low_precision_reps", d.low_precision_reps));
  s.finish();
  try {
    d.validate();
  } catch (const DomainError& e) {
    Section::fail(e.what());
  }
  return d;
}

MixingCheckOptions parse_mixing(const json& j) {
  Section s(j, "mixing");
  MixingCheckOptions o;
  o.n_instances = static_cast<int>(s.integer("n_instances"));
  o.max_length = static_cast<int>(s.integer("max_length", o.max_length));
  o.seed = s.seed("seed", o.seed);
  o.tolerance = s.real("tolerance", o.tolerance);
  s.finish();
  if (o.n_instances < 1) Section::fail("'mixing.n_instances' must be >= 1");
  if (o.max_length < 0 || o.max_length > 20) Section::fail("'mixing.max_length' must be in [0, 20]");
  if (!(o.tolerance >= 0.0)) Section::fail("'mixing.tolerance' must be >= 0");
  return o;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config: malformed JSON: ") + e.what());
  }
  Section top(j, "");
  RunConfig rc;
  if (top.has("model")) {
    rc.model = parse_model(top.at("model"));
    rc.has_model = true;
  }
  if (top.has("dgp")) {
    rc.dgp = parse_dgp(top.at("dgp"), rc.model, !top.has("mc"));
    rc.has_dgp = true;
  } else {
    rc.dgp.model = rc.model;
  }
  if (top.has("fit")) rc.fit = parse_fit(top.at("fit"), rc.model);
  if (top.has("mc")) {
    if (!rc.has_dgp && !default_shape(rc.model))
      Section::fail("missing required key 'dgp.params' (model shape differs from the default design)");
    const DgpSpec& templ = rc.dgp;
    rc.mc = parse_mc(top.at("mc"), templ, rc.fit);
    rc.has_mc = true;
  }
  if (top.has("mixing")) {
    rc.mixing = parse_mixing(top.at("mixing"));
    rc.has_mixing = true;
  }
  top.finish();
  return rc;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace tvtp
