#include "fracctl/quadrature.hpp"

#include "fracctl/errors.hpp"

#include <array>
#include <cmath>
#include <mutex>

namespace fracctl {

void QuadratureSettings::validate() const {
  if (order < 1 || order > 64) fail(ErrorCode::InvalidParams, "quadrature order must lie in [1, 64]");
  if (!(ratio > 0.0 && ratio < 1.0)) fail(ErrorCode::InvalidParams, "grading ratio must lie in (0, 1)");
  if (levels < 1) fail(ErrorCode::InvalidParams, "grading levels must be >= 1");
  if (bulk_panels < 1) fail(ErrorCode::InvalidParams, "bulk panels must be >= 1");
  if (!(tol > 0.0)) fail(ErrorCode::InvalidParams, "quadrature tol must be positive");
  if (max_doublings < 0) fail(ErrorCode::InvalidParams, "max_doublings must be >= 0");
}

QuadratureSettings QuadratureSettings::refined() const {
  QuadratureSettings next = *this;
  next.levels = 2 * levels;
  next.bulk_panels = 2 * bulk_panels;
  return next;
}

namespace quad {

namespace {

Rule build_gauss_legendre(int n) {
  Rule rule;
  rule.nodes.assign(static_cast<std::size_t>(n), 0.0);
  rule.weights.assign(static_cast<std::size_t>(n), 0.0);
  const long double pi = 3.141592653589793238462643383279502884L;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    long double x = std::cos(pi * (i + 0.75L) / (n + 0.5L));
    long double dp = 0.0L;
    for (int iter = 0; iter < 100; ++iter) {
      long double p0 = 1.0L;
      long double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const long double p2 = ((2.0L * k - 1.0L) * x * p1 - (k - 1.0L) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0L);
      const long double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-19L) break;
    }
    const long double w = 2.0L / ((1.0L - x * x) * dp * dp);
    rule.nodes[static_cast<std::size_t>(i)] = static_cast<double>(-x);
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = static_cast<double>(x);
    rule.weights[static_cast<std::size_t>(i)] = static_cast<double>(w);
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = static_cast<double>(w);
  }
  return rule;
}

}  // namespace

const Rule& gauss_legendre(int order) {
  if (order < 1 || order > 64) fail(ErrorCode::InvalidParams, "Gauss-Legendre order must lie in [1, 64]");
  static std::array<Rule, 65> table;
  static std::array<std::once_flag, 65> built;
  const auto idx = static_cast<std::size_t>(order);
  std::call_once(built[idx], [&] { table[idx] = build_gauss_legendre(order); });
  return table[idx];
}

std::vector<Panel> graded_toward_zero(double len, double ratio, int levels, int bulk_panels) {
  std::vector<Panel> panels;
  if (!(len > 0.0)) return panels;
  double edge = len;
  for (int j = 0; j < levels; ++j) edge *= ratio;
  panels.push_back({0.0, edge});
  for (int j = levels - 1; j >= 1; --j) {
    const double lo = edge;
    edge = edge / ratio;
    panels.push_back({lo, edge});
  }
  const double bulk_start = len * ratio;
  panels.back().b = bulk_start;
  const double width = (len - bulk_start) / bulk_panels;
  for (int j = 0; j < bulk_panels; ++j) {
    panels.push_back({bulk_start + j * width, j + 1 == bulk_panels ? len : bulk_start + (j + 1) * width});
  }
  return panels;
}

std::vector<Panel> graded_both_ends(double len, double ratio, int levels, int bulk_panels) {
  const double half = 0.5 * len;
  std::vector<Panel> left = graded_toward_zero(half, ratio, levels, bulk_panels);
  std::vector<Panel> panels = left;
  for (auto it = left.rbegin(); it != left.rend(); ++it) {
    panels.push_back({len - it->b, len - it->a});
  }
  return panels;
}

Rule composite(const std::vector<Panel>& panels, int order) {
  const Rule& gl = gauss_legendre(order);
  Rule rule;
  rule.nodes.reserve(panels.size() * gl.nodes.size());
  rule.weights.reserve(panels.size() * gl.nodes.size());
  for (const Panel& p : panels) {
    const double mid = 0.5 * (p.a + p.b);
    const double half = 0.5 * (p.b - p.a);
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      rule.nodes.push_back(mid + half * gl.nodes[q]);
      rule.weights.push_back(half * gl.weights[q]);
    }
  }
  return rule;
}

}  // namespace quad
}  // namespace fracctl
