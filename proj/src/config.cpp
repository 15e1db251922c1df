#include "dcm/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "dcm/errors.hpp"

namespace dcm {

using json = nlohmann::ordered_json;

namespace {

struct ModeName {
  ExperimentMode mode;
  const char* name;
};

constexpr ModeName kModes[] = {
    {ExperimentMode::simulate, "simulate"},
    {ExperimentMode::density_study, "density-study"},
    {ExperimentMode::limit_compare, "limit-compare"},
    {ExperimentMode::msd_validate, "msd-validate"},
    {ExperimentMode::sweep, "sweep"},
};

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void reject_unknown(const json& obj, const std::string& prefix, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ValidationError((prefix.empty() ? std::string("config") : prefix) + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!ok) throw ValidationError(join(prefix, key) + ": unknown key");
  }
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double as_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ValidationError(key + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ValidationError(key + ": must be finite");
  return x;
}

std::size_t as_count(const json& v, const std::string& key) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw ValidationError(key + ": expected a nonnegative integer");
  return v.get<std::size_t>();
}

std::vector<double> as_numbers(const json& v, const std::string& key, bool allow_scalar) {
  if (allow_scalar && v.is_number()) return {as_number(v, key)};
  if (!v.is_array()) throw ValidationError(key + (allow_scalar ? ": expected a number or an array" : ": expected an array"));
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(as_number(v[k], key + "[" + std::to_string(k) + "]"));
  return out;
}

std::vector<Point> as_points(const json& v, const std::string& key) {
  if (!v.is_array()) throw ValidationError(key + ": expected an array of [x, y] pairs");
  std::vector<Point> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const std::string item = key + "[" + std::to_string(k) + "]";
    if (!v[k].is_array() || v[k].size() != 2) throw ValidationError(item + ": expected an [x, y] pair");
    out.push_back({as_number(v[k][0], item), as_number(v[k][1], item)});
  }
  return out;
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ValidationError(key + ": expected a string");
  return v.get<std::string>();
}

template <class E>
E as_enum(const json& v, const std::string& key, std::initializer_list<std::pair<const char*, E>> names) {
  const std::string s = as_string(v, key);
  for (const auto& [name, e] : names)
    if (s == name) return e;
  std::string opts;
  for (const auto& [name, e] : names) {
    (void)e;
    opts += opts.empty() ? name : std::string(", ") + name;
  }
  throw ValidationError(key + ": unknown value \"" + s + "\" (expected one of " + opts + ")");
}

json points_json(const std::vector<Point>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p[0], p[1]});
  return a;
}

json numbers_json(const std::vector<double>& xs, bool scalar_if_single) {
  if (scalar_if_single && xs.size() == 1) return xs.front();
  json a = json::array();
  for (double x : xs) a.push_back(x);
  return a;
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

void check_count(std::size_t got, std::size_t n, const std::string& key) {
  if (got != 1 && got != n)
    throw ValidationError(key + ": expected one shared entry or " + std::to_string(n) + " entries, got " +
                          std::to_string(got));
}

}  // namespace

const char* to_string(ExperimentMode mode) {
  for (const auto& m : kModes)
    if (m.mode == mode) return m.name;
  return "simulate";
}

ExperimentMode parse_mode(const std::string& text) {
  for (const auto& m : kModes)
    if (text == m.name) return m.mode;
  throw ValidationError("mode: unknown value \"" + text + "\"");
}

ExperimentSpec parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("parse error at line " + std::to_string(line_of(text, e.byte > 0 ? e.byte - 1 : 0)) + ": " +
                          e.what());
  }
  reject_unknown(doc, "",
                 {"mode", "particles", "domain", "epsilon", "delta_a", "T", "load", "rates", "past", "noise", "seed",
                  "solver", "contacts", "prune_cutoff", "output", "study"});

  ExperimentSpec s;
  if (auto* v = find(doc, "mode")) s.mode = parse_mode(as_string(*v, "mode"));

  const json* particles = find(doc, "particles");
  if (!particles) throw ValidationError("particles: required");
  reject_unknown(*particles, "particles", {"positions", "radii"});
  if (auto* v = find(*particles, "positions")) s.positions = as_points(*v, "particles.positions");
  else throw ValidationError("particles.positions: required");
  if (auto* v = find(*particles, "radii")) s.radii = as_numbers(*v, "particles.radii", true);
  else throw ValidationError("particles.radii: required");

  if (auto* d = find(doc, "domain")) {
    reject_unknown(*d, "domain", {"kind", "L", "H"});
    if (auto* v = find(*d, "kind"))
      s.domain_kind = as_enum<DomainKind>(*v, "domain.kind", {{"plane", DomainKind::plane}, {"torus", DomainKind::torus}});
    if (auto* v = find(*d, "L")) s.domain_L = as_number(*v, "domain.L");
    if (auto* v = find(*d, "H")) s.domain_H = as_number(*v, "domain.H");
  }

  for (auto [key, field] : {std::pair{"epsilon", &s.epsilon}, std::pair{"delta_a", &s.delta_a}, std::pair{"T", &s.T}}) {
    auto* v = find(doc, key);
    if (!v) throw ValidationError(std::string(key) + ": required");
    *field = as_number(*v, key);
  }

  if (auto* l = find(doc, "load")) {
    reject_unknown(*l, "load", {"nu", "centers"});
    if (auto* v = find(*l, "nu")) s.nu = as_number(*v, "load.nu");
    if (auto* v = find(*l, "centers")) s.load_centers = as_points(*v, "load.centers");
  }

  if (auto* r = find(doc, "rates")) {
    reject_unknown(*r, "rates", {"beta", "zeta"});
    if (auto* v = find(*r, "beta")) s.beta = as_numbers(*v, "rates.beta", true);
    if (auto* v = find(*r, "zeta")) {
      if (v->is_object()) {
        reject_unknown(*v, "rates.zeta", {"ages", "values"});
        auto* ages = find(*v, "ages");
        auto* values = find(*v, "values");
        if (!ages || !values) throw ValidationError("rates.zeta: a table needs both ages and values");
        s.zeta_ages = as_numbers(*ages, "rates.zeta.ages", false);
        s.zeta = as_numbers(*values, "rates.zeta.values", false);
        if (s.zeta_ages.empty()) throw ValidationError("rates.zeta.ages: must be nonempty");
      } else {
        s.zeta = as_numbers(*v, "rates.zeta", true);
      }
    }
  }

  if (auto* p = find(doc, "past")) {
    reject_unknown(*p, "past", {"kind", "velocity"});
    if (auto* v = find(*p, "kind"))
      s.past_kind = as_enum<PastKind>(*v, "past.kind", {{"constant", PastKind::constant}, {"drift", PastKind::drift}});
    if (auto* v = find(*p, "velocity")) s.past_velocity = as_points(*v, "past.velocity");
  }

  if (auto* n = find(doc, "noise")) {
    reject_unknown(*n, "noise", {"sigma"});
    if (auto* v = find(*n, "sigma")) s.sigma = as_number(*v, "noise.sigma");
  }
  if (auto* v = find(doc, "seed")) {
    if (!v->is_number_unsigned()) throw ValidationError("seed: expected an unsigned 64-bit integer");
    s.seed = v->get<std::uint64_t>();
  }

  if (auto* so = find(doc, "solver")) {
    reject_unknown(*so, "solver", {"kind", "eta_policy", "eta", "load", "max_iter", "on_failure"});
    if (auto* v = find(*so, "kind"))
      s.solver_kind =
          as_enum<SolverKind>(*v, "solver.kind", {{"uzawa", SolverKind::uzawa}, {"penalty", SolverKind::penalty}});
    if (auto* v = find(*so, "eta_policy"))
      s.eta_policy = as_enum<StepPolicy>(*v, "solver.eta_policy",
                                         {{"automatic", StepPolicy::automatic}, {"fixed", StepPolicy::fixed}});
    if (auto* v = find(*so, "eta")) s.eta = as_number(*v, "solver.eta");
    if (auto* v = find(*so, "load"))
      s.load_treatment = as_enum<LoadTreatment>(
          *v, "solver.load", {{"linearized", LoadTreatment::linearized}, {"exact", LoadTreatment::exact}});
    if (auto* v = find(*so, "max_iter")) s.max_iter = as_count(*v, "solver.max_iter");
    if (auto* v = find(*so, "on_failure"))
      s.on_failure = as_enum<FailurePolicy>(
          *v, "solver.on_failure",
          {{"abort", FailurePolicy::abort}, {"record_and_continue", FailurePolicy::record_and_continue}});
  }

  if (auto* v = find(doc, "contacts")) {
    if (!v->is_boolean()) throw ValidationError("contacts: expected true or false");
    s.contacts = v->get<bool>();
  }
  if (auto* v = find(doc, "prune_cutoff")) {
    if (!v->is_null()) s.prune_cutoff = as_number(*v, "prune_cutoff");
  }

  if (auto* o = find(doc, "output")) {
    reject_unknown(*o, "output", {"dir", "stride"});
    if (auto* v = find(*o, "dir")) s.output_dir = as_string(*v, "output.dir");
    if (auto* v = find(*o, "stride")) s.stride = as_count(*v, "output.stride");
  }

  if (auto* st = find(doc, "study")) {
    reject_unknown(*st, "study", {"delta_a_list", "epsilon_list", "replicas", "sample_times", "threads"});
    if (auto* v = find(*st, "delta_a_list")) s.delta_a_list = as_numbers(*v, "study.delta_a_list", false);
    if (auto* v = find(*st, "epsilon_list")) s.epsilon_list = as_numbers(*v, "study.epsilon_list", false);
    if (auto* v = find(*st, "replicas")) s.replicas = as_count(*v, "study.replicas");
    if (auto* v = find(*st, "sample_times")) s.sample_times = as_numbers(*v, "study.sample_times", false);
    if (auto* v = find(*st, "threads")) s.threads = as_count(*v, "study.threads");
  }

  validate(s);
  return s;
}

ExperimentSpec parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error reading config file " + path.string());
  return parse_config_text(buf.str());
}

std::string serialize(const ExperimentSpec& s) {
  json doc;
  doc["mode"] = to_string(s.mode);
  doc["particles"] = {{"positions", points_json(s.positions)}, {"radii", numbers_json(s.radii, true)}};
  doc["domain"] = {{"kind", s.domain_kind == DomainKind::torus ? "torus" : "plane"}, {"L", s.domain_L}, {"H", s.domain_H}};
  doc["epsilon"] = s.epsilon;
  doc["delta_a"] = s.delta_a;
  doc["T"] = s.T;
  doc["load"] = {{"nu", s.nu}, {"centers", points_json(s.load_centers)}};
  if (s.zeta_ages.empty())
    doc["rates"] = {{"beta", numbers_json(s.beta, true)}, {"zeta", numbers_json(s.zeta, true)}};
  else
    doc["rates"] = {{"beta", numbers_json(s.beta, true)},
                    {"zeta", {{"ages", numbers_json(s.zeta_ages, false)}, {"values", numbers_json(s.zeta, false)}}}};
  doc["past"] = {{"kind", s.past_kind == PastKind::drift ? "drift" : "constant"},
                 {"velocity", points_json(s.past_velocity)}};
  doc["noise"] = {{"sigma", s.sigma}};
  doc["seed"] = s.seed;
  doc["solver"] = {{"kind", s.solver_kind == SolverKind::penalty ? "penalty" : "uzawa"},
                   {"eta_policy", s.eta_policy == StepPolicy::fixed ? "fixed" : "automatic"},
                   {"eta", s.eta},
                   {"load", s.load_treatment == LoadTreatment::exact ? "exact" : "linearized"},
                   {"max_iter", s.max_iter},
                   {"on_failure", s.on_failure == FailurePolicy::abort ? "abort" : "record_and_continue"}};
  doc["contacts"] = s.contacts;
  doc["prune_cutoff"] = s.prune_cutoff ? json(*s.prune_cutoff) : json(nullptr);
  doc["output"] = {{"dir", s.output_dir}, {"stride", s.stride}};
  doc["study"] = {{"delta_a_list", numbers_json(s.delta_a_list, false)},
                  {"epsilon_list", numbers_json(s.epsilon_list, false)},
                  {"replicas", s.replicas},
                  {"sample_times", numbers_json(s.sample_times, false)},
                  {"threads", s.threads}};
  return doc.dump(2) + "\n";
}

SimConfig to_sim_config(const ExperimentSpec& s) {
  const std::size_t n = s.positions.size();
  if (n == 0) throw ValidationError("particles.positions: at least one particle is required");
  check_count(s.radii.size(), n, "particles.radii");
  check_count(s.beta.size(), n, "rates.beta");

  SimConfig cfg;
  std::vector<Vec2> pts;
  for (const auto& p : s.positions) pts.emplace_back(p[0], p[1]);
  std::vector<double> radii = s.radii.size() == 1 ? std::vector<double>(n, s.radii.front()) : s.radii;
  cfg.initial = Configuration::from_points(pts, std::move(radii));

  if (s.domain_kind == DomainKind::torus) {
    DomainSpec d{DomainKind::torus, s.domain_L, s.domain_H};
    d.validate();
    cfg.domain = d;
  }
  cfg.epsilon = s.epsilon;
  cfg.delta_a = s.delta_a;
  cfg.horizon = s.T;

  cfg.load.nu = s.nu;
  if (!s.load_centers.empty()) {
    check_count(s.load_centers.size(), n, "load.centers");
    Eigen::VectorXd c(2 * static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = s.load_centers.size() == 1 ? s.load_centers.front() : s.load_centers[i];
      c[2 * static_cast<Eigen::Index>(i)] = p[0];
      c[2 * static_cast<Eigen::Index>(i) + 1] = p[1];
    }
    cfg.load.centers = c;
  }

  cfg.rates.particles.resize(n);
  if (!s.zeta_ages.empty()) {
    const OffRate table = OffRate::tabulated(s.zeta_ages, s.zeta);
    for (auto& pr : cfg.rates.particles) pr.off_rate = table;
  } else {
    check_count(s.zeta.size(), n, "rates.zeta");
    for (std::size_t i = 0; i < n; ++i) cfg.rates.particles[i].off_rate = OffRate::constant(s.zeta.size() == 1 ? s.zeta.front() : s.zeta[i]);
  }
  for (std::size_t i = 0; i < n; ++i) cfg.rates.particles[i].on_rate = s.beta.size() == 1 ? s.beta.front() : s.beta[i];

  cfg.past.kind = s.past_kind;
  for (const auto& v : s.past_velocity) cfg.past.velocities.emplace_back(v[0], v[1]);

  if (s.sigma < 0.0) throw ValidationError("noise.sigma: must be >= 0");
  cfg.noise.sigma = s.sigma;
  cfg.noise.seed = s.seed;

  cfg.solver.kind = s.solver_kind;
  cfg.solver.treatment = s.load_treatment;
  cfg.solver.uzawa.policy = s.eta_policy;
  if (s.eta_policy == StepPolicy::fixed && !(s.eta > 0.0)) throw ValidationError("solver.eta: fixed step must be positive");
  cfg.solver.uzawa.step = s.eta;
  if (s.max_iter == 0) throw ValidationError("solver.max_iter: must be positive");
  cfg.solver.uzawa.max_iter = s.max_iter;
  cfg.solver.on_failure = s.on_failure;

  cfg.contacts = s.contacts;
  cfg.prune_cutoff = s.prune_cutoff;
  if (s.stride == 0) throw ValidationError("output.stride: must be positive");
  cfg.stride = s.stride;

  cfg.validate();
  return cfg;
}

void validate(const ExperimentSpec& s) {
  (void)to_sim_config(s);
  if (s.output_dir.empty()) throw ValidationError("output.dir: must be nonempty");
  auto positive_list = [](const std::vector<double>& xs, const char* key) {
    for (double x : xs)
      if (!(x > 0.0)) throw ValidationError(std::string(key) + ": entries must be positive");
  };
  positive_list(s.delta_a_list, "study.delta_a_list");
  positive_list(s.epsilon_list, "study.epsilon_list");
  for (double t : s.sample_times)
    if (t < 0.0 || t > s.T) throw ValidationError("study.sample_times: entries must lie in [0, T]");

  switch (s.mode) {
    case ExperimentMode::simulate:
      break;
    case ExperimentMode::density_study:
      if (s.delta_a_list.empty()) throw ValidationError("study.delta_a_list: required for density-study");
      break;
    case ExperimentMode::limit_compare:
      if (s.epsilon_list.empty()) throw ValidationError("study.epsilon_list: required for limit-compare");
      break;
    case ExperimentMode::msd_validate:
      if (s.replicas < 2) throw ValidationError("study.replicas: msd-validate needs at least 2 replicas");
      if (s.sample_times.empty()) throw ValidationError("study.sample_times: required for msd-validate");
      if (!(s.sigma > 0.0)) throw ValidationError("noise.sigma: msd-validate needs a positive noise level");
      if (s.contacts && s.positions.size() > 1)
        throw ValidationError("contacts: msd-validate compares against a contact-free reference");
      if (!s.load_centers.empty()) throw ValidationError("load.centers: msd-validate measures from the origin");
      break;
    case ExperimentMode::sweep:
      if (s.delta_a_list.empty() && s.epsilon_list.empty())
        throw ValidationError("study.epsilon_list: sweep needs an epsilon or delta_a list");
      break;
  }
}

}  // namespace dcm
