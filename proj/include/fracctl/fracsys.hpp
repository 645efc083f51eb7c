#pragma once

// The fractional LTI system  ^C D^alpha x = A x + B u,  y = C x,  its controls
// and forward trajectories.

#include "fracctl/fraccalc.hpp"
#include "fracctl/mlkernel.hpp"

#include <functional>
#include <iosfwd>
#include <variant>

namespace fracctl {

struct FracSystem {
  Matrix A;
  Matrix B;
  Matrix C;  // empty when no output map is given
  double alpha = 1.0;

  void validate() const;
  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return C.rows(); }
  bool has_output() const { return C.size() > 0; }
};

/// A control on [0, T]. Closed forms are evaluated exactly wherever the
/// quadrature needs them; sampled controls are piecewise linear.
class ControlSignal {
 public:
  enum class Kind { Sampled, MinEnergy, Pinv, RankBased, Function };

  ControlSignal() = default;

  static ControlSignal sampled(GridFunction u);
  static ControlSignal rank_based(GridFunction u);
  /// u(t) = -(T-t)^{1-alpha} B^T E_{alpha,alpha}(A^T (T-t)^alpha) c.
  static ControlSignal min_energy(const FracSystem& sys, double T, const Vector& c, const SeriesPolicy& pol = {});
  /// u(t) = (1/T) B^+ g(T-t) v, with g the inverse kernel.
  static ControlSignal pinv(const FracSystem& sys, double T, const Matrix& B_pinv, const Vector& v,
                            const SeriesPolicy& pol = {});
  /// Arbitrary u. If `weighted` is given it must return (T-t)^{alpha-1} u(t);
  /// supplying it lets the energy quadrature avoid the singular factor.
  static ControlSignal function(Eigen::Index dim, double T, std::function<Vector(double)> u,
                                std::function<Vector(double)> weighted = {});
  static ControlSignal constant(const Vector& value, double T);
  static ControlSignal zero(Eigen::Index dim, double T);

  Kind kind() const { return kind_; }
  Eigen::Index dim() const { return dim_; }
  double horizon() const { return T_; }
  bool is_sampled() const { return kind_ == Kind::Sampled || kind_ == Kind::RankBased; }
  bool has_weighted_form() const;

  Vector evaluate(double t) const;
  /// (T-t)^{alpha-1} u(t). Bounded up to t = T for MinEnergy and Pinv.
  Vector weighted(double t, double alpha) const;

  /// Grid samples of a sampled control (throws for closed forms).
  const GridFunction& samples() const;
  /// Samples of any control on the given grid.
  GridFunction sample(const TimeGrid& grid) const;
  /// Coefficient c of MinEnergy or steering vector v of Pinv.
  const Vector& coefficient() const;

 private:
  struct SampledData {
    GridFunction u;
  };
  struct MinEnergyData {
    AlphaPowerSeries profile;  // B^T E_{alpha,alpha}(A^T x) c in x = (T-t)^alpha
    double alpha;
    Vector c;
  };
  struct PinvData {
    AlphaPowerSeries kernel;  // E_{alpha,alpha}(A x)
    Matrix B_pinv;
    Vector v;
    double alpha;
  };
  struct FunctionData {
    std::function<Vector(double)> u;
    std::function<Vector(double)> weighted;
  };

  Kind kind_ = Kind::Function;
  Eigen::Index dim_ = 0;
  double T_ = 0.0;
  std::variant<SampledData, MinEnergyData, PinvData, FunctionData> data_;
};

const char* to_string(ControlSignal::Kind kind) noexcept;

struct Trajectory {
  TimeGrid grid;
  Matrix states;   // one row per node
  Matrix outputs;  // empty unless the system has C

  Vector state(int i) const { return states.row(i).transpose(); }
  Vector terminal() const { return states.row(states.rows() - 1).transpose(); }
};

struct SimulationOptions {
  SeriesPolicy series;
  ConvolutionSettings convolution;
};

/// x(t) = S_0(t) a + int_0^t S(t - tau) B u(tau) dtau at every grid node. The
/// grid must start at 0.
Trajectory simulate(const FracSystem& sys, const Vector& a, const ControlSignal& u, const TimeGrid& grid,
                    const SimulationOptions& opts = {});

/// max over interior nodes of |^C D^alpha x - (A x + B u)|_inf, with the
/// derivative from the corrected L1 scheme (classical differences at alpha = 1).
double caputo_residual(const FracSystem& sys, const Trajectory& traj, const ControlSignal& u,
                       const CaputoOptions& opts = {});

/// CSV with header t,x1..xn[,y1..yp] and 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace fracctl
