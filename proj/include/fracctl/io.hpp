#pragma once

// Problem files (JSON) and control files (CSV or synthesis JSON).

#include "fracctl/controlsyn.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace fracctl {

struct ControlSpec {
  enum class Kind { None, Zero, Constant, Csv, Synthesis };
  Kind kind = Kind::None;
  Vector value;       // Constant
  std::string path;   // Csv / Synthesis, resolved against the problem file
};

struct ProblemFile {
  SteeringProblem problem;
  std::optional<Method> method;
  ControlSpec control;
};

/// Parses a problem document. Unknown keys and inconsistent dimensions are
/// rejected with ErrorCode::InvalidInput. Relative control paths are resolved
/// against base_dir.
ProblemFile parse_problem(const std::string& text, const std::string& base_dir = {});
ProblemFile load_problem(const std::string& path);

/// Control CSV: header t,u1..um, uniform time column starting at 0.
GridFunction read_control_csv(std::istream& is);

/// Rebuilds the control from a synthesis document written by
/// write_synthesis_json. Closed forms are reconstructed from their
/// coefficients and the system; sampled kinds come back as samples.
ControlSignal read_synthesis_control(const std::string& text, const SteeringProblem& prob);

/// The control named by the problem's control block.
ControlSignal resolve_control(const ProblemFile& pf);

std::string read_text_file(const std::string& path);

}  // namespace fracctl
