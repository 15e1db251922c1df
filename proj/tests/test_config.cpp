#include <doctest.h>

#include <filesystem>
#include <string>

#include "dcm/config.hpp"
#include "dcm/errors.hpp"

using namespace dcm;

namespace {

const std::string minimal = R"({
  "particles": {"positions": [[-3, 0], [3, 0]], "radii": 1},
  "epsilon": 0.1, "delta_a": 0.1, "T": 1
})";

std::string with(const std::string& extra) {
  return R"({"particles": {"positions": [[-3, 0], [3, 0]], "radii": 1}, "epsilon": 0.1, "delta_a": 0.1, "T": 1, )" +
         extra + "}";
}

std::string error_of(const std::string& text) {
  try {
    validate(parse_config_text(text));
  } catch (const ValidationError& e) {
    return e.what();
  }
  return {};
}

bool mentions(const std::string& text, const std::string& needle) {
  return error_of(text).find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("minimal configuration gets the documented defaults") {
  const ExperimentSpec s = parse_config_text(minimal);
  CHECK(s.mode == ExperimentMode::simulate);
  CHECK(s.positions.size() == 2);
  CHECK(s.radii == std::vector<double>{1.0});
  CHECK(s.domain_kind == DomainKind::plane);
  CHECK(s.nu == 1.0);
  CHECK(s.beta == std::vector<double>{1.0});
  CHECK(s.zeta == std::vector<double>{1.0});
  CHECK(s.past_kind == PastKind::constant);
  CHECK(s.sigma == 0.0);
  CHECK(s.solver_kind == SolverKind::uzawa);
  CHECK(s.eta_policy == StepPolicy::automatic);
  CHECK(s.load_treatment == LoadTreatment::linearized);
  CHECK(s.contacts);
  CHECK_FALSE(s.prune_cutoff.has_value());
  CHECK(s.output_dir == "out");
  CHECK(s.stride == 1);
  CHECK_NOTHROW(validate(s));
  const SimConfig c = to_sim_config(s);
  CHECK(c.dt() == doctest::Approx(0.01));
  CHECK(c.initial.size() == 2);
  CHECK(c.rates.size() == 2);
}

TEST_CASE("bad values name the offending key") {
  CHECK(mentions(R"({"particles": {"positions": [[0, 0]], "radii": -1}, "epsilon": 0.1, "delta_a": 0.1, "T": 1})",
                 "radii"));
  CHECK(mentions(with(R"("domain": {"kind": "torus"})"), "domain.L"));
  CHECK(mentions(with(R"("foo": 1)"), "foo: unknown key"));
  CHECK(mentions(with(R"("solver": {"kind": "newton"})"), "solver.kind"));
  CHECK(mentions(with(R"("solver": {"eta_policy": "fixed"})"), "solver.eta"));
  CHECK(mentions(with(R"("noise": {"sigma": -1})"), "noise.sigma"));
  CHECK(mentions(with(R"("rates": {"beta": [1, 2, 3]})"), "rates.beta"));
  CHECK(mentions(with(R"("output": {"stride": 0})"), "output.stride"));
  CHECK(mentions(with(R"("rates": {"zeta": {"ages": [0, 1]}})"), "rates.zeta"));
  CHECK(mentions(R"({"particles": {"positions": [[0, 0]], "radii": 1}, "delta_a": 0.1, "T": 1})", "epsilon"));
  CHECK(mentions(R"({"particles": {"positions": [[0, 0]], "radii": 1}, "epsilon": 0, "delta_a": 0.1, "T": 1})",
                 "epsilon"));
  CHECK(mentions(with(R"("past": {"kind": "drift", "velocity": [[1, 0], [1, 0], [1, 0]]})"), "past.velocity"));
  CHECK(mentions(with(R"("seed": -4)"), "seed"));
}

TEST_CASE("nested unknown keys are reported with their path") {
  CHECK(mentions(with(R"("solver": {"kind": "uzawa", "tolerance": 1})"), "solver.tolerance: unknown key"));
  CHECK(mentions(R"({"particles": {"positions": [[0, 0]], "radii": 1, "mass": 2}, "epsilon": 0.1, "delta_a": 0.1,
                    "T": 1})",
                 "particles.mass"));
}

TEST_CASE("parse errors report the line") {
  const std::string broken = "{\n  \"epsilon\": ,\n}";
  CHECK(mentions(broken, "parse error at line 2"));
  CHECK(mentions("[1, 2]", "expected an object"));
}

TEST_CASE("round trip through serialization") {
  ExperimentSpec s = parse_config_text(with(R"(
    "domain": {"kind": "torus", "L": 10, "H": 8},
    "load": {"nu": 0.5, "centers": [[1, 2], [3, 4]]},
    "rates": {"beta": [1, 2], "zeta": {"ages": [0, 1, 2], "values": [1, 1.5, 2]}},
    "past": {"kind": "drift", "velocity": [[1, 0], [-1, 0]]},
    "noise": {"sigma": 0.3}, "seed": 18446744073709551615,
    "solver": {"kind": "penalty", "eta_policy": "fixed", "eta": 0.25, "load": "exact", "max_iter": 77,
               "on_failure": "record_and_continue"},
    "contacts": true, "prune_cutoff": 1.5,
    "output": {"dir": "somewhere", "stride": 3},
    "study": {"delta_a_list": [0.1, 0.05], "epsilon_list": [0.2], "replicas": 12, "sample_times": [0.5],
              "threads": 2},
    "mode": "sweep")"));
  CHECK(s.seed == 18446744073709551615ULL);
  CHECK(s.zeta_ages.size() == 3);
  CHECK(s.prune_cutoff == 1.5);
  const ExperimentSpec back = parse_config_text(serialize(s));
  CHECK(back == s);
  CHECK(serialize(back) == serialize(s));

  const ExperimentSpec m = parse_config_text(minimal);
  CHECK(parse_config_text(serialize(m)) == m);

  // 17 significant digits survive
  s.epsilon = 0.1 + 1e-16;
  s.positions[0] = {1.0 / 3.0, -2.0 / 7.0};
  CHECK(parse_config_text(serialize(s)) == s);
}

TEST_CASE("mode-specific requirements") {
  CHECK(mentions(with(R"("mode": "density-study")"), "study.delta_a_list"));
  CHECK(mentions(with(R"("mode": "limit-compare")"), "study.epsilon_list"));
  CHECK(mentions(with(R"("mode": "sweep")"), "sweep"));
  CHECK(mentions(with(R"("mode": "msd-validate", "study": {"replicas": 1, "sample_times": [0.5]})"), "replicas"));
  CHECK(mentions(with(R"("mode": "msd-validate", "contacts": false, "noise": {"sigma": 0.1},
                         "study": {"replicas": 10})"),
                 "sample_times"));
  CHECK(mentions(with(R"("mode": "msd-validate", "noise": {"sigma": 0.1},
                         "study": {"replicas": 10, "sample_times": [0.5]})"),
                 "contacts"));
  CHECK(mentions(with(R"("study": {"sample_times": [2]})"), "study.sample_times"));
  CHECK(mentions(with(R"("study": {"epsilon_list": [0.1, -1]})"), "study.epsilon_list"));
  CHECK(mentions(with(R"("mode": "teleport")"), "mode"));
  CHECK(error_of(with(R"("mode": "limit-compare", "study": {"epsilon_list": [0.1]})")).empty());
}

TEST_CASE("mode names") {
  for (auto m : {ExperimentMode::simulate, ExperimentMode::density_study, ExperimentMode::limit_compare,
                 ExperimentMode::msd_validate, ExperimentMode::sweep})
    CHECK(parse_mode(to_string(m)) == m);
  CHECK(std::string(to_string(ExperimentMode::msd_validate)) == "msd-validate");
}

TEST_CASE("shipped scenarios parse and validate") {
  std::size_t count = 0;
  for (const auto& e : std::filesystem::directory_iterator(DCM_SCENARIO_DIR)) {
    if (e.path().extension() != ".json") continue;
    CAPTURE(e.path().string());
    CHECK_NOTHROW(validate(parse_config(e.path())));
    ++count;
  }
  CHECK(count >= 6);
  CHECK_THROWS_AS(parse_config("/nonexistent/config.json"), IoError);
}
