#pragma once

#include <vector>

namespace fracctl {

/// Settings for the graded composite Gauss-Legendre rules used by the Gramian,
/// energy and closed-form convolution integrals.
struct QuadratureSettings {
  int order = 16;         // Gauss-Legendre points per panel
  double ratio = 0.5;     // geometric grading ratio toward a singular end
  int levels = 12;        // number of graded panels
  int bulk_panels = 4;    // uniform panels away from the singular end
  double tol = 1e-12;     // relative target for panel-doubling error control
  int max_doublings = 6;

  void validate() const;
  /// Twice the bulk panels and twice the grading levels.
  QuadratureSettings refined() const;
};

namespace quad {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule on [-1, 1]. Tables are built once per order.
const Rule& gauss_legendre(int order);

struct Panel {
  double a;
  double b;
};

/// Panels on [0, len] refined geometrically toward 0.
std::vector<Panel> graded_toward_zero(double len, double ratio, int levels, int bulk_panels);

/// Panels on [0, len] refined geometrically toward both ends.
std::vector<Panel> graded_both_ends(double len, double ratio, int levels, int bulk_panels);

/// Composite Gauss-Legendre nodes and weights over the given panels.
Rule composite(const std::vector<Panel>& panels, int order);

}  // namespace quad
}  // namespace fracctl
