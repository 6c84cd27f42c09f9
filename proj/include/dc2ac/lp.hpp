#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <string>

namespace dc2ac {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

/// min cᵀx  s.t.  A x = b,  lb <= x <= ub  (infinite bounds allowed).
struct LinearProgram {
  Vec c;
  SpMat A;
  Vec b;
  Vec lb;
  Vec ub;

  Eigen::Index num_vars() const { return c.size(); }
  Eigen::Index num_rows() const { return b.size(); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterLimit };

std::string to_string(LpStatus status);

/// Primal-dual pair. Stationarity reads c - Aᵀλ - mu_lo + mu_hi = 0.
struct LpSolution {
  Vec x;
  Vec lambda_eq;
  Vec mu_lo;
  Vec mu_hi;
  double objective = 0.0;
  LpStatus status = LpStatus::IterLimit;
  int iterations = 0;
};

struct LpOptions {
  double tol = 1e-8;
  int max_iterations = 200;
  double regularization = 1e-10;
};

/// Homogeneous self-dual interior point with Mehrotra predictor-corrector.
/// Throws std::invalid_argument when the program is malformed.
LpSolution solve_lp(const LinearProgram& lp, const LpOptions& options = {});
LpSolution solve_lp(const LinearProgram& lp, double tol);

/// Max residual per KKT block; pass iff all are <= tol.
struct ResidualReport {
  double primal = 0.0;
  double stationarity = 0.0;
  double dual_feasibility = 0.0;
  double complementarity = 0.0;
  double tol = 0.0;
  bool pass = false;

  double worst() const;
};

ResidualReport check_kkt(const LinearProgram& lp, const LpSolution& sol, double tol);

/// bᵀλ + lbᵀmu_lo - ubᵀmu_hi over finite bounds.
double lp_dual_objective(const LinearProgram& lp, const LpSolution& sol);

void validate_lp(const LinearProgram& lp);

}  // namespace dc2ac
