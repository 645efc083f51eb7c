#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fracctl/errors.hpp"
#include "fracctl/io.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>

using namespace fracctl;
using nlohmann::json;

namespace {

const std::string kDocs = std::string(FRACCTL_SOURCE_DIR) + "/docs/problems";

json base_doc() {
  return json::parse(R"({
    "system": {"alpha": 0.5, "n": 2, "m": 1, "A": [[0, 1], [0, 0]], "B": [[0], [1]]},
    "steering": {"a": [1, 0], "b": [0, 0], "T": 2},
    "numerics": {"N": 64}
  })");
}

std::optional<ErrorCode> parse_error(const json& doc) {
  try {
    parse_problem(doc.dump());
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "fracctl_test_io";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("shipped problem files parse") {
  const ProblemFile ex1 = load_problem(kDocs + "/example1.json");
  CHECK(ex1.problem.sys.alpha == 0.5);
  CHECK(ex1.problem.T == 10.0);
  CHECK(ex1.problem.grid.steps == 2048);
  CHECK(ex1.method == Method::MinEnergy);
  CHECK(ex1.control.kind == ControlSpec::Kind::Constant);
  CHECK(ex1.problem.sys.A(0, 1) == 1.0);
  CHECK(ex1.problem.sys.B(1, 0) == 1.0);
  for (const char* name : {"example2.json", "scalar.json", "uncontrollable.json"}) {
    CAPTURE(name);
    CHECK_NOTHROW(load_problem(kDocs + "/" + name));
  }
}

TEST_CASE("defaults and optional fields") {
  json doc = base_doc();
  doc["steering"].erase("b");
  doc.erase("numerics");
  const ProblemFile pf = parse_problem(doc.dump());
  CHECK(pf.problem.b.isZero(0.0));
  CHECK(pf.problem.grid.steps >= 2);
  CHECK_FALSE(pf.method.has_value());
  CHECK(pf.control.kind == ControlSpec::Kind::None);
  CHECK_FALSE(pf.problem.sys.has_output());

  doc = base_doc();
  doc["system"]["C"] = json::parse("[[1, 0], [0, 2]]");
  const ProblemFile withC = parse_problem(doc.dump());
  CHECK(withC.problem.sys.p() == 2);
  CHECK(withC.problem.sys.C(1, 1) == 2.0);

  doc = base_doc();
  doc["numerics"]["rel_tol"] = 1e-12;
  doc["numerics"]["quad"] = json::parse(R"({"order": 20, "levels": 8})");
  const ProblemFile q = parse_problem(doc.dump());
  CHECK(q.problem.series.rel_tol == 1e-12);
  CHECK(q.problem.quad.order == 20);
  CHECK(q.problem.quad.levels == 8);
  CHECK(q.problem.quad.ratio == 0.5);
}

TEST_CASE("invalid problem files are rejected as input errors") {
  auto with = [](auto edit) {
    json doc = base_doc();
    edit(doc);
    return parse_error(doc);
  };
  CHECK(with([](json& d) { d["extra"] = 1; }) == ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d["system"]["D"] = 1; }) == ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d["numerics"]["quad"] = json::parse(R"({"points": 3})"); }) == ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d["system"]["alpha"] = 1.5; }) == ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d["system"]["alpha"] = 0; }) == ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d["system"]["A"] = json::parse("[[0, 1]]"); }) == ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d["system"]["B"] = json::parse("[[0, 1], [1, 0]]"); }) == ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d["system"]["n"] = 2.5; }) == ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d["system"]["A"][0][0] = "x"; }) == ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d["steering"]["a"] = json::parse("[1]"); }) == ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d["steering"]["T"] = -1; }) == ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d["steering"].erase("T"); }) == ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d.erase("system"); }) == ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d["numerics"]["N"] = 1; }) == ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d["method"] = "lqr"; }) == ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d["control"] = json::parse(R"({"type": "ramp"})"); }) == ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d["control"] = json::parse(R"({"type": "constant", "value": [1, 2]})"); }) ==
        ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d["control"] = json::parse(R"({"type": "csv"})"); }) == ErrorCode::InvalidInput);
  CHECK(with([](json& d) { d["system"]["C"] = json::parse("[[1, 0, 0]]"); }) == ErrorCode::InvalidInput);

  std::optional<ErrorCode> code;
  try {
    parse_problem("{ not json");
  } catch (const Error& e) {
    code = e.code();
  }
  CHECK(code == ErrorCode::InvalidInput);
  code.reset();
  try {
    load_problem("/nonexistent/problem.json");
  } catch (const Error& e) {
    code = e.code();
  }
  CHECK(code == ErrorCode::Io);
}

TEST_CASE("control CSV") {
  std::istringstream ok("t,u1,u2\n0,1,2\n0.5,3,4\r\n1,5,6\n\n");
  const GridFunction g = read_control_csv(ok);
  CHECK(g.grid.steps == 2);
  CHECK(g.grid.t1 == 1.0);
  CHECK(g.dim() == 2);
  CHECK(g.values(2, 1) == 6.0);

  auto rejects = [](const char* text) {
    std::istringstream in(text);
    try {
      read_control_csv(in);
    } catch (const Error& e) {
      return e.code() == ErrorCode::InvalidInput;
    }
    return false;
  };
  CHECK(rejects(""));
  CHECK(rejects("time,u1\n0,1\n1,1\n2,1\n"));
  CHECK(rejects("t,u2\n0,1\n1,1\n2,1\n"));
  CHECK(rejects("t,u1\n0,1\n1,1\n"));
  CHECK(rejects("t,u1\n0.1,1\n1,1\n2,1\n"));
  CHECK(rejects("t,u1\n0,1\n0.3,1\n2,1\n"));
  CHECK(rejects("t,u1\n0,1\n1,abc\n2,1\n"));
  CHECK(rejects("t,u1\n0,1\n1,1x\n2,1\n"));
  CHECK(rejects("t,u1\n0,1\n1,1,3\n2,1\n"));
  CHECK(rejects("t,u1\n0,1\n1,nan\n2,1\n"));
}

TEST_CASE("CSV control resolved relative to the problem file") {
  const auto dir = scratch_dir();
  {
    std::ofstream csv(dir / "ramp.csv");
    csv << "t,u1\n0,0\n1,1\n2,2\n";
  }
  json doc = base_doc();
  doc["control"] = json::parse(R"({"type": "csv", "path": "ramp.csv"})");
  const ProblemFile pf = parse_problem(doc.dump(), dir.string());
  CHECK(pf.control.path == (dir / "ramp.csv").string());
  const ControlSignal u = resolve_control(pf);
  CHECK(u.kind() == ControlSignal::Kind::Sampled);
  CHECK(u.evaluate(1.5)(0) == doctest::Approx(1.5));

  doc["steering"]["T"] = 3;
  const ProblemFile wrong_T = parse_problem(doc.dump(), dir.string());
  CHECK_THROWS_AS(resolve_control(wrong_T), Error);

  doc = base_doc();
  doc["control"] = json::parse(R"({"type": "csv", "path": "missing.csv"})");
  std::optional<ErrorCode> code;
  try {
    resolve_control(parse_problem(doc.dump(), dir.string()));
  } catch (const Error& e) {
    code = e.code();
  }
  CHECK(code == ErrorCode::Io);

  doc = base_doc();
  CHECK_THROWS_AS(resolve_control(parse_problem(doc.dump())), Error);
}

TEST_CASE("synthesis JSON round trip") {
  const auto dir = scratch_dir();
  for (Method method : {Method::MinEnergy, Method::RankBased}) {
    json doc = base_doc();
    const ProblemFile pf = parse_problem(doc.dump());
    const SynthesisResult r = synthesize(pf.problem, method);
    const auto file = dir / (std::string("syn_") + to_string(method) + ".json");
    {
      std::ofstream out(file);
      write_synthesis_json(out, r, pf.problem.grid);
    }
    doc["control"] = {{"type", "synthesis"}, {"path", file.filename().string()}};
    const ProblemFile again = parse_problem(doc.dump(), dir.string());
    const ControlSignal u = resolve_control(again);
    CHECK(u.kind() == r.control.kind());
    for (double t : {0.0, 0.37, 1.0, 1.99, 2.0}) {
      CHECK((u.evaluate(t) - r.control.evaluate(t)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  // Pinv on a scalar problem.
  json sdoc = json::parse(R"({
    "system": {"alpha": 0.7, "n": 1, "m": 1, "A": [[-0.4]], "B": [[1]]},
    "steering": {"a": [0.5], "b": [1], "T": 1.5}, "numerics": {"N": 32}})");
  const ProblemFile sp = parse_problem(sdoc.dump());
  const SynthesisResult pr = synthesize_pinv(sp.problem);
  std::ostringstream js;
  write_synthesis_json(js, pr, sp.problem.grid);
  const ControlSignal pu = read_synthesis_control(js.str(), sp.problem);
  CHECK(pu.kind() == ControlSignal::Kind::Pinv);
  CHECK(pu.evaluate(0.3)(0) == pr.control.evaluate(0.3)(0));

  // Zero short-circuit comes back as zero; a mismatched horizon is refused.
  sdoc["steering"]["b"] = sdoc["steering"]["a"];
  sdoc["system"]["A"] = json::parse("[[0]]");
  const ProblemFile zp = parse_problem(sdoc.dump());
  std::ostringstream zs;
  write_synthesis_json(zs, synthesize_min_energy(zp.problem), zp.problem.grid);
  CHECK(read_synthesis_control(zs.str(), zp.problem).evaluate(0.5)(0) == 0.0);
  SteeringProblem other = zp.problem;
  other.T = 3.0;
  other.grid = SteeringProblem::grid_for(3.0, 32);
  CHECK_THROWS_AS(read_synthesis_control(zs.str(), other), Error);
  CHECK_THROWS_AS(read_synthesis_control("[1, 2", zp.problem), Error);
  json tampered = json::parse(zs.str());
  tampered["control"]["u"][3][0] = 1.0;
  CHECK_THROWS_AS(read_synthesis_control(tampered.dump(), zp.problem), Error);
  tampered["control"]["kind"] = "spline";
  CHECK_THROWS_AS(read_synthesis_control(tampered.dump(), zp.problem), Error);
}
