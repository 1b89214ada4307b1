#include <freestop/error.hpp>
#include <freestop/io.hpp>
#include <freestop/scenario.hpp>

#include <json.hpp>

#include <cmath>
#include <set>

namespace freestop {

namespace {

using Json = nlohmann::json;

void only_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  require(j.is_object(), ErrorCode::InvalidArgument, where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    require(allowed.count(key) > 0, ErrorCode::InvalidArgument,
            "unknown key '" + key + "' in " + where);
  }
}

double number(const Json& j, const std::string& key, const std::string& where) {
  require(j.contains(key), ErrorCode::InvalidArgument, where + "." + key + " is required");
  require(j[key].is_number(), ErrorCode::InvalidArgument, where + "." + key + " must be a number");
  return j[key].get<double>();
}

Vector vector_of(const Json& j, const std::string& where) {
  require(j.is_array() && !j.empty(), ErrorCode::InvalidArgument,
          where + " must be a non-empty array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_number(), ErrorCode::InvalidArgument, where + " must hold numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

TimePenalty penalty_of(const Json& j) {
  only_keys(j, {"kind", "exponent", "rate"}, "problem.g");
  require(j.contains("kind") && j["kind"].is_string(), ErrorCode::InvalidArgument,
          "problem.g.kind is required");
  const auto kind = j["kind"].get<std::string>();
  if (kind == "power") return TimePenalty::power(number(j, "exponent", "problem.g"));
  if (kind == "one_minus_exp") {
    return TimePenalty::one_minus_exp(j.contains("rate") ? number(j, "rate", "problem.g") : 1.0);
  }
  if (kind == "linear") return TimePenalty::linear();
  fail(ErrorCode::InvalidArgument, "unknown penalty kind '" + kind + "'");
}

DiscreteMeasure measure_of(const Json& j, const std::string& where) {
  require(j.is_object(), ErrorCode::InvalidArgument, where + " must be an object");
  if (j.contains("atoms")) {
    only_keys(j, {"atoms"}, where);
    require(j["atoms"].is_array() && !j["atoms"].empty(), ErrorCode::InvalidArgument,
            where + ".atoms must be a non-empty array");
    std::vector<Atom> atoms;
    for (const auto& row : j["atoms"]) {
      const Vector v = vector_of(row, where + ".atoms[]");
      require(v.size() >= 2, ErrorCode::InvalidArgument,
              where + ".atoms entries are [x..., w] with at least one coordinate");
      atoms.push_back({v.head(v.size() - 1), v[v.size() - 1]});
    }
    return DiscreteMeasure(std::move(atoms));
  }
  if (j.contains("density")) {
    only_keys(j, {"density", "a", "b", "n_atoms"}, where);
    require(j["density"] == "uniform", ErrorCode::InvalidArgument,
            where + ": only the uniform density is supported");
    const double a = number(j, "a", where);
    const double b = number(j, "b", where);
    int n = static_cast<int>(std::lround(200.0 * (b - a)));
    if (j.contains("n_atoms")) {
      require(j["n_atoms"].is_number_integer(), ErrorCode::InvalidArgument,
              where + ".n_atoms must be an integer");
      n = j["n_atoms"].get<int>();
    }
    return DiscreteMeasure::uniform_interval(a, b, std::max(n, 1));
  }
  if (j.contains("mixture")) {
    only_keys(j, {"mixture"}, where);
    require(j["mixture"].is_array() && !j["mixture"].empty(), ErrorCode::InvalidArgument,
            where + ".mixture must be a non-empty array");
    std::vector<std::pair<double, DiscreteMeasure>> parts;
    for (const auto& part : j["mixture"]) {
      only_keys(part, {"weight", "measure"}, where + ".mixture[]");
      require(part.contains("measure"), ErrorCode::InvalidArgument,
              where + ".mixture[].measure is required");
      parts.emplace_back(number(part, "weight", where + ".mixture[]"),
                         measure_of(part["measure"], where + ".mixture[].measure"));
    }
    return DiscreteMeasure::mixture(parts);
  }
  fail(ErrorCode::InvalidArgument, where + " needs one of atoms, density, mixture");
}

LatticeConfig lattice_of(const Json& j, const std::string& where) {
  only_keys(j, {"dx", "dt", "t_max", "box"}, where);
  LatticeConfig c;
  c.dx = number(j, "dx", where);
  c.dt = j.contains("dt") ? number(j, "dt", where) : c.dx;
  if (j.contains("t_max") && !j["t_max"].is_null()) c.t_max = number(j, "t_max", where);
  if (j.contains("box")) {
    const auto& box = j["box"];
    if (box.is_string()) {
      require(box == "auto", ErrorCode::InvalidArgument, where + ".box must be \"auto\" or bounds");
    } else {
      only_keys(box, {"lower", "upper"}, where + ".box");
      require(box.contains("lower") && box.contains("upper"), ErrorCode::InvalidArgument,
              where + ".box needs lower and upper");
      c.lower = vector_of(box["lower"], where + ".box.lower");
      c.upper = vector_of(box["upper"], where + ".box.upper");
    }
  }
  return c;
}

bool flag(const Json& j, const std::string& key, bool fallback) {
  if (!j.contains(key)) return fallback;
  require(j[key].is_boolean(), ErrorCode::InvalidArgument, "pipeline." + key + " must be boolean");
  return j[key].get<bool>();
}

}  // namespace

DiscreteMeasure parse_measure(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::Parse, std::string("measure JSON: ") + e.what());
  }
  return measure_of(j, "measure");
}

Scenario parse_scenario(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::Parse, std::string("scenario JSON: ") + e.what());
  }
  only_keys(j, {"name", "problem", "mu", "nu", "lattice", "eulerian_lattice", "pipeline",
                "tolerances", "oracle", "output_dir"},
            "scenario");
  for (const char* key : {"problem", "mu", "nu", "lattice"}) {
    require(j.contains(key), ErrorCode::InvalidArgument, std::string("scenario.") + key +
                                                             " is required");
  }

  const auto& p = j["problem"];
  only_keys(p, {"family", "g", "dimension"}, "problem");
  require(p.value("family", std::string("speed_limited_time_penalty")) ==
              "speed_limited_time_penalty",
          ErrorCode::Unsupported, "only the speed_limited_time_penalty family is registered");
  require(p.contains("g"), ErrorCode::InvalidArgument, "problem.g is required");
  const TimePenalty g = penalty_of(p["g"]);
  int dimension = 1;
  if (p.contains("dimension")) {
    require(p["dimension"].is_number_integer(), ErrorCode::InvalidArgument,
            "problem.dimension must be an integer");
    dimension = p["dimension"].get<int>();
  }
  auto problem = ControlProblem::speed_limited_time_penalty(g, dimension);

  DiscreteMeasure mu = measure_of(j["mu"], "mu");
  DiscreteMeasure nu = measure_of(j["nu"], "nu");
  require(mu.dimension() == dimension && nu.dimension() == dimension,
          ErrorCode::DimensionMismatch, "measure dimension differs from problem.dimension");

  LatticeConfig lattice = lattice_of(j["lattice"], "lattice");
  std::optional<LatticeConfig> eulerian;
  if (j.contains("eulerian_lattice")) eulerian = lattice_of(j["eulerian_lattice"], "eulerian_lattice");

  PipelineFlags flags;
  if (j.contains("pipeline")) {
    const auto& f = j["pipeline"];
    only_keys(f, {"kantorovich", "hjb", "eulerian", "pontryagin", "audits", "cost", "scheme",
                  "monge_samples"},
              "pipeline");
    flags.kantorovich = flag(f, "kantorovich", true);
    flags.hjb = flag(f, "hjb", true);
    flags.eulerian = flag(f, "eulerian", true);
    flags.pontryagin = flag(f, "pontryagin", true);
    flags.audits = flag(f, "audits", true);
    if (f.contains("cost")) {
      const auto m = f["cost"].get<std::string>();
      if (m == "auto") flags.cost_model = CostModel::Auto;
      else if (m == "analytic") flags.cost_model = CostModel::Analytic;
      else if (m == "lattice") flags.cost_model = CostModel::Lattice;
      else fail(ErrorCode::InvalidArgument, "pipeline.cost must be auto, analytic or lattice");
    }
    if (f.contains("scheme")) {
      const auto s = f["scheme"].get<std::string>();
      if (s == "dp") flags.scheme = Scheme::LatticeDP;
      else if (s == "lf") flags.scheme = Scheme::LaxFriedrichs;
      else if (s != "auto") fail(ErrorCode::InvalidArgument, "pipeline.scheme must be auto, dp or lf");
    }
    if (f.contains("monge_samples")) flags.monge_samples = f["monge_samples"].get<int>();
    require(flags.monge_samples >= 0, ErrorCode::InvalidArgument,
            "pipeline.monge_samples must be non-negative");
  }
  // A downstream stage needs the stages it reads from.
  require(!(flags.hjb || flags.eulerian) || flags.kantorovich, ErrorCode::InvalidArgument,
          "hjb and eulerian need pipeline.kantorovich");
  require(!flags.pontryagin || flags.hjb, ErrorCode::InvalidArgument,
          "pontryagin needs pipeline.hjb");

  Tolerances tol;
  if (j.contains("tolerances")) {
    const auto& t = j["tolerances"];
    only_keys(t, {"lp_identity", "value_agreement", "slackness_mass", "mp_residual",
                  "obstacle_radius", "eps_contact", "eps_mono"},
              "tolerances");
    if (t.contains("lp_identity")) tol.lp_identity = number(t, "lp_identity", "tolerances");
    if (t.contains("value_agreement")) {
      tol.value_agreement = number(t, "value_agreement", "tolerances");
    }
    if (t.contains("slackness_mass")) tol.slackness_mass = number(t, "slackness_mass", "tolerances");
    if (t.contains("mp_residual")) tol.mp_residual = number(t, "mp_residual", "tolerances");
    if (t.contains("obstacle_radius")) {
      tol.obstacle_radius = number(t, "obstacle_radius", "tolerances");
    }
    if (t.contains("eps_contact")) tol.eps_contact = number(t, "eps_contact", "tolerances");
    if (t.contains("eps_mono")) tol.eps_mono = number(t, "eps_mono", "tolerances");
  }

  std::optional<OracleCase> oracle;
  if (j.contains("oracle") && !j["oracle"].is_null()) {
    oracle = parse_oracle_case(j["oracle"].get<std::string>());
    require(dimension == 1, ErrorCode::InvalidArgument, "oracle comparisons are one-dimensional");
    require_consistent(*oracle, g);
  }

  return Scenario{
      .name = j.value("name", std::string("scenario")),
      .g = g,
      .problem = std::move(problem),
      .mu = std::move(mu),
      .nu = std::move(nu),
      .lattice = lattice,
      .eulerian_lattice = eulerian,
      .pipeline = flags,
      .tolerances = tol,
      .oracle = oracle,
      .output_dir = j.value("output_dir", std::string()),
  };
}

Scenario load_scenario(const std::string& path) { return parse_scenario(read_text(path)); }

std::pair<Vector, Vector> support_box(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  Vector lo = mu.point(0);
  Vector hi = mu.point(0);
  for (const auto* m : {&mu, &nu}) {
    for (const auto& a : m->atoms()) {
      lo = lo.cwiseMin(a.point);
      hi = hi.cwiseMax(a.point);
    }
  }
  return {lo, hi};
}

double default_horizon(const ControlProblem& problem, const DiscreteMeasure& mu,
                       const DiscreteMeasure& nu) {
  require(problem.time_class() != TimeClass::TD, ErrorCode::InvalidArgument,
          "discounted problems need an explicit lattice.t_max");
  const auto [lo, hi] = support_box(mu, nu);
  return (hi - lo).norm() / problem.speed_bound() + 1.0;
}

Lattice resolve_lattice(const Scenario& scenario, const LatticeConfig& config) {
  require(config.dx > 0 && config.dt > 0, ErrorCode::InvalidArgument,
          "lattice dx and dt must be positive");
  const ControlProblem& problem = *scenario.problem;
  double t_max = config.t_max ? *config.t_max : default_horizon(problem, scenario.mu, scenario.nu);
  if (!config.t_max) t_max = std::ceil(t_max / config.dt - 1e-9) * config.dt;
  const auto [lo, hi] = support_box(scenario.mu, scenario.nu);
  const double reach = t_max * problem.speed_bound();
  if (!config.lower && !config.upper) {
    const double margin = reach + 2.0 * config.dx;
    Vector lower(lo.size());
    Vector upper(hi.size());
    for (Eigen::Index a = 0; a < lo.size(); ++a) {
      lower[a] = std::floor((lo[a] - margin) / config.dx + 1e-9) * config.dx;
      upper[a] = std::ceil((hi[a] + margin) / config.dx - 1e-9) * config.dx;
    }
    return Lattice(config.dx, config.dt, t_max, lower, upper);
  }
  require(config.lower && config.upper, ErrorCode::InvalidArgument,
          "box needs both lower and upper");
  require(config.lower->size() == lo.size() && config.upper->size() == lo.size(),
          ErrorCode::DimensionMismatch, "box dimension differs from the measures");
  const double slack = 1e-9 * (1.0 + reach);
  for (Eigen::Index a = 0; a < lo.size(); ++a) {
    if ((*config.lower)[a] > lo[a] - reach + slack || (*config.upper)[a] < hi[a] + reach - slack) {
      fail(ErrorCode::InvalidArgument,
           "box leaves less than t_max * speed = " + format_double(reach) +
               " around the supports on axis " + std::to_string(a));
    }
  }
  return Lattice(config.dx, config.dt, t_max, *config.lower, *config.upper);
}

}  // namespace freestop
