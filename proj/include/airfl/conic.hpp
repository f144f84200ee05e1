#pragma once

#include <string>
#include <vector>

#include "airfl/common.hpp"

namespace airfl {

/// Options for the cone program solver. Defaults are tighter than the
/// downstream contract (KKT residual 1e-6) by a wide margin. When progress
/// stalls before the full targets are met, the best iterate seen is still
/// accepted as optimal if it clears the reduced thresholds, which stay
/// inside that contract.
struct SolverOptions {
  double feastol = 1e-9;   // scaled primal/dual residual target
  double abstol = 1e-10;   // absolute complementarity gap target
  double reltol = 1e-8;    // relative duality gap target
  double feastol_reduced = 1e-6;
  double abstol_reduced = 1e-7;
  double reltol_reduced = 1e-6;
  int max_iters = 100;
  bool use_hint = false;   // seed the primal point from x_hint
  RVec x_hint;
  bool trace = false;      // per-iteration diagnostics on stderr
};

enum class SolveStatus { Optimal, MaxIterations, Infeasible, Unbounded };

struct ConeSolution {
  SolveStatus status = SolveStatus::MaxIterations;
  RVec x, s, z;
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  double gap = 0.0;       // s'z
  double rel_gap = 0.0;
  double primal_residual = 0.0;  // scaled ||Gx + s - h||_inf
  double dual_residual = 0.0;    // scaled ||c + G'z||_inf
  int iterations = 0;
  std::string message;

  bool ok() const { return status == SolveStatus::Optimal; }
};

/// Cone program in inequality form:
///   minimize    c'x
///   subject to  row_i' x <= rhs_i                   (linear rows)
///               [a0'x + b0; A1 x + b1] in SOC       (per add_soc call)
/// solved by a primal-dual interior-point method with Nesterov-Todd
/// scaling and a Mehrotra predictor-corrector step.
class ConeProblem {
 public:
  explicit ConeProblem(Eigen::Index nvars);

  Eigen::Index vars() const { return nvars_; }

  void set_objective(const RVec& c);

  /// row' x <= rhs
  void add_linear(const RVec& row, double rhs);

  /// || A1 x + b1 || <= a0'x + b0
  void add_soc(const RVec& a0, double b0, const RMat& A1, const RVec& b1);

  /// Convenience: ||u||^2 <= y * s for affine u, y, s (rotated cone via the
  /// standard embedding ||[2u; y - s]|| <= y + s).
  void add_quad_over_lin(const RMat& U, const RVec& u0, const RVec& y,
                         double y0, const RVec& s, double s0);

  ConeSolution solve(const SolverOptions& opts = {}) const;

 private:
  Eigen::Index nvars_;
  RVec c_;
  std::vector<RVec> lin_rows_;
  std::vector<double> lin_rhs_;
  struct SocBlock {
    RMat g;  // rows of G for this block
    RVec h;
  };
  std::vector<SocBlock> soc_;
};

}  // namespace airfl
