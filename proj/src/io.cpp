#include "fracctl/io.hpp"

#include "fracctl/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace fracctl {

namespace {

using nlohmann::json;

[[noreturn]] void bad_input(const std::string& what) { fail(ErrorCode::InvalidInput, what); }

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad_input(where + " must be an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) known = known || item.key() == key;
    if (!known) bad_input("unknown key '" + item.key() + "' in " + where);
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) bad_input(where + " is missing '" + key + "'");
  return *it;
}

double number(const json& j, const std::string& what) {
  if (!j.is_number()) bad_input(what + " must be a number");
  const double x = j.get<double>();
  if (!std::isfinite(x)) bad_input(what + " must be finite");
  return x;
}

int integer(const json& j, const std::string& what) {
  if (!j.is_number_integer()) bad_input(what + " must be an integer");
  return j.get<int>();
}

Vector vector_of(const json& j, const std::string& what) {
  if (!j.is_array()) bad_input(what + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], what);
  return v;
}

Matrix matrix_of(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    std::ostringstream os;
    os << what << " must be a nested array with " << rows << " rows";
    bad_input(os.str());
  }
  Matrix M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vector row = vector_of(j[static_cast<std::size_t>(r)], what);
    if (row.size() != cols) {
      std::ostringstream os;
      os << what << " row " << r << " must have " << cols << " entries";
      bad_input(os.str());
    }
    M.row(r) = row.transpose();
  }
  return M;
}

std::string resolve_path(const std::string& path, const std::string& base_dir) {
  const std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

QuadratureSettings parse_quad(const json& q) {
  reject_unknown(q, "numerics.quad", {"order", "ratio", "levels", "bulk_panels", "tol", "max_doublings"});
  QuadratureSettings s;
  if (q.contains("order")) s.order = integer(q["order"], "quad.order");
  if (q.contains("ratio")) s.ratio = number(q["ratio"], "quad.ratio");
  if (q.contains("levels")) s.levels = integer(q["levels"], "quad.levels");
  if (q.contains("bulk_panels")) s.bulk_panels = integer(q["bulk_panels"], "quad.bulk_panels");
  if (q.contains("tol")) s.tol = number(q["tol"], "quad.tol");
  if (q.contains("max_doublings")) s.max_doublings = integer(q["max_doublings"], "quad.max_doublings");
  return s;
}

ProblemFile parse_document(const json& doc, const std::string& base_dir) {
  reject_unknown(doc, "problem", {"description", "system", "steering", "numerics", "method", "control"});
  ProblemFile pf;
  SteeringProblem& prob = pf.problem;

  const json& sys = require(doc, "system", "problem");
  reject_unknown(sys, "system", {"alpha", "n", "m", "p", "A", "B", "C"});
  prob.sys.alpha = number(require(sys, "alpha", "system"), "system.alpha");
  const int n = integer(require(sys, "n", "system"), "system.n");
  const int m = integer(require(sys, "m", "system"), "system.m");
  if (n < 1 || m < 1) bad_input("system.n and system.m must be >= 1");
  prob.sys.A = matrix_of(require(sys, "A", "system"), n, n, "system.A");
  prob.sys.B = matrix_of(require(sys, "B", "system"), n, m, "system.B");
  if (sys.contains("C")) {
    const int p = sys.contains("p") ? integer(sys["p"], "system.p") : static_cast<int>(sys["C"].size());
    if (p < 1) bad_input("system.p must be >= 1");
    prob.sys.C = matrix_of(sys["C"], p, n, "system.C");
  } else if (sys.contains("p")) {
    bad_input("system.p given without system.C");
  }
  if (!(prob.sys.alpha > 0.0 && prob.sys.alpha <= 1.0)) bad_input("system.alpha must lie in (0, 1]");

  const json& st = require(doc, "steering", "problem");
  reject_unknown(st, "steering", {"a", "b", "T"});
  prob.a = vector_of(require(st, "a", "steering"), "steering.a");
  prob.b = st.contains("b") ? vector_of(st["b"], "steering.b") : Vector::Zero(n);
  prob.T = number(require(st, "T", "steering"), "steering.T");
  if (prob.a.size() != n || prob.b.size() != n) bad_input("steering.a and steering.b must have n entries");
  if (!(prob.T > 0.0)) bad_input("steering.T must be positive");

  int steps = 1024;
  if (doc.contains("numerics")) {
    const json& num = doc["numerics"];
    reject_unknown(num, "numerics", {"N", "rel_tol", "max_terms", "quad"});
    if (num.contains("N")) steps = integer(num["N"], "numerics.N");
    if (num.contains("rel_tol")) prob.series.rel_tol = number(num["rel_tol"], "numerics.rel_tol");
    if (num.contains("max_terms")) prob.series.max_terms = integer(num["max_terms"], "numerics.max_terms");
    if (num.contains("quad")) prob.quad = parse_quad(num["quad"]);
  }
  if (steps < 2) bad_input("numerics.N must be >= 2");
  prob.grid = SteeringProblem::grid_for(prob.T, steps);

  if (doc.contains("method")) {
    if (!doc["method"].is_string()) bad_input("method must be a string");
    pf.method = method_from_string(doc["method"].get<std::string>());
    if (!pf.method) bad_input("method must be one of min-energy, pinv, rank");
  }

  if (doc.contains("control")) {
    const json& c = doc["control"];
    reject_unknown(c, "control", {"type", "value", "path"});
    const json& type = require(c, "type", "control");
    if (!type.is_string()) bad_input("control.type must be a string");
    const std::string t = type.get<std::string>();
    if (t == "zero") {
      pf.control.kind = ControlSpec::Kind::Zero;
    } else if (t == "constant") {
      pf.control.kind = ControlSpec::Kind::Constant;
      pf.control.value = vector_of(require(c, "value", "control"), "control.value");
      if (pf.control.value.size() != m) bad_input("control.value must have m entries");
    } else if (t == "csv" || t == "synthesis") {
      pf.control.kind = t == "csv" ? ControlSpec::Kind::Csv : ControlSpec::Kind::Synthesis;
      const json& path = require(c, "path", "control");
      if (!path.is_string()) bad_input("control.path must be a string");
      pf.control.path = resolve_path(path.get<std::string>(), base_dir);
    } else {
      bad_input("control.type must be one of zero, constant, csv, synthesis");
    }
  }

  try {
    prob.validate();
  } catch (const Error& e) {
    bad_input(e.what());
  }
  return pf;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ProblemFile parse_problem(const std::string& text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    bad_input(std::string("malformed JSON: ") + e.what());
  }
  try {
    return parse_document(doc, base_dir);
  } catch (const json::exception& e) {
    bad_input(e.what());
  }
}

ProblemFile load_problem(const std::string& path) {
  const std::string base = std::filesystem::path(path).parent_path().string();
  return parse_problem(read_text_file(path), base);
}

GridFunction read_control_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) bad_input("control CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header[0] != "t") bad_input("control CSV header must be t,u1..um");
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] != "u" + std::to_string(j)) bad_input("control CSV header must be t,u1..um");
  }
  const auto m = static_cast<Eigen::Index>(header.size() - 1);

  std::vector<double> t;
  std::vector<Vector> rows;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(cell, &used);
      } catch (const std::exception&) {
        bad_input("control CSV has a non-numeric cell '" + cell + "'");
      }
      if (used != cell.size() || !std::isfinite(x)) bad_input("control CSV has a malformed cell '" + cell + "'");
      vals.push_back(x);
    }
    if (static_cast<Eigen::Index>(vals.size()) != m + 1) bad_input("control CSV row has the wrong number of cells");
    t.push_back(vals[0]);
    rows.push_back(Eigen::Map<const Vector>(vals.data() + 1, m));
  }
  if (t.size() < 3) bad_input("control CSV needs at least 3 rows");
  if (t.front() != 0.0) bad_input("control CSV must start at t = 0");

  GridFunction g;
  g.grid = TimeGrid{0.0, t.back(), static_cast<int>(t.size()) - 1};
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::fabs(t[i] - g.grid.node(static_cast<int>(i))) > 1e-9 * std::max(1.0, g.grid.t1)) {
      bad_input("control CSV time column must be uniform");
    }
  }
  g.values.resize(static_cast<Eigen::Index>(rows.size()), m);
  for (std::size_t i = 0; i < rows.size(); ++i) g.values.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return g;
}

ControlSignal read_synthesis_control(const std::string& text, const SteeringProblem& prob) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    bad_input(std::string("malformed synthesis JSON: ") + e.what());
  }
  try {
    const double alpha = number(require(doc, "alpha", "synthesis"), "synthesis.alpha");
    const double T = number(require(doc, "T", "synthesis"), "synthesis.T");
    if (alpha != prob.sys.alpha || T != prob.T) bad_input("synthesis file was made for a different alpha or T");
    const json& ctrl = require(doc, "control", "synthesis");
    const std::string kind = require(ctrl, "kind", "synthesis.control").get<std::string>();
    const auto m = static_cast<Eigen::Index>(integer(require(ctrl, "m", "synthesis.control"), "synthesis.control.m"));
    if (m != prob.sys.m()) bad_input("synthesis control has the wrong dimension");
    if (kind == "min-energy") {
      const Vector c = vector_of(require(ctrl, "coefficient", "synthesis.control"), "synthesis coefficient");
      if (c.size() != prob.sys.n()) bad_input("synthesis coefficient must have n entries");
      return ControlSignal::min_energy(prob.sys, T, c, prob.series);
    }
    if (kind == "pinv") {
      const Vector v = vector_of(require(ctrl, "coefficient", "synthesis.control"), "synthesis coefficient");
      if (v.size() != prob.sys.n()) bad_input("synthesis coefficient must have n entries");
      return ControlSignal::pinv(prob.sys, T, pseudo_inverse(prob.sys.B), v, prob.series);
    }
    if (kind == "function") {
      // Only the zero short-circuit is written with this kind.
      const json& u = require(ctrl, "u", "synthesis.control");
      if (!u.is_array() || u.empty()) bad_input("synthesis control table is malformed");
      const Matrix vals = matrix_of(u, static_cast<Eigen::Index>(u.size()), m, "synthesis control u");
      if (!vals.isZero(0.0)) bad_input("synthesis control of kind 'function' must be the zero control");
      return ControlSignal::zero(m, T);
    }
    if (kind != "sampled" && kind != "rank") bad_input("unknown synthesis control kind '" + kind + "'");
    const json& t = require(ctrl, "t", "synthesis.control");
    const json& u = require(ctrl, "u", "synthesis.control");
    if (!t.is_array() || t.size() < 3 || u.size() != t.size()) bad_input("synthesis control table is malformed");
    GridFunction g;
    g.grid = TimeGrid{0.0, number(t.back(), "synthesis t"), static_cast<int>(t.size()) - 1};
    g.values = matrix_of(u, static_cast<Eigen::Index>(t.size()), m, "synthesis control u");
    return kind == "rank" ? ControlSignal::rank_based(std::move(g)) : ControlSignal::sampled(std::move(g));
  } catch (const json::exception& e) {
    bad_input(e.what());
  }
}

ControlSignal resolve_control(const ProblemFile& pf) {
  const SteeringProblem& prob = pf.problem;
  switch (pf.control.kind) {
    case ControlSpec::Kind::None:
      bad_input("problem has no control block");
    case ControlSpec::Kind::Zero:
      return ControlSignal::zero(prob.sys.m(), prob.T);
    case ControlSpec::Kind::Constant:
      return ControlSignal::constant(pf.control.value, prob.T);
    case ControlSpec::Kind::Csv: {
      std::ifstream in(pf.control.path);
      if (!in) fail(ErrorCode::Io, "cannot open '" + pf.control.path + "'");
      GridFunction g = read_control_csv(in);
      if (g.dim() != prob.sys.m()) bad_input("control CSV has the wrong number of columns");
      if (std::fabs(g.grid.t1 - prob.T) > 1e-9 * prob.T) bad_input("control CSV must end at t = T");
      g.grid.t1 = prob.T;
      return ControlSignal::sampled(std::move(g));
    }
    case ControlSpec::Kind::Synthesis:
      return read_synthesis_control(read_text_file(pf.control.path), prob);
  }
  bad_input("unknown control specification");
}

}  // namespace fracctl
