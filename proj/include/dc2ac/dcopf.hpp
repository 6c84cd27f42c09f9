#pragma once

#include "dc2ac/grid.hpp"
#include "dc2ac/lp.hpp"

namespace dc2ac {

/// Adjustable DC data: shunt conductance per bus and susceptance per branch.
struct DcParams {
  Vec gs;
  Vec b;

  /// Case values: bus gs and dc_susceptance of each branch.
  static DcParams nominal(const GridCase& grid);
};

/// Column and row offsets of the DC-OPF LP.
///
/// Columns: pg (G), pf (E), va (N), phi (N), dva (E).
/// Rows:    balance (N), flow (E), angle (E), reference (1).
struct IndexMap {
  Eigen::Index pg = 0, pf = 0, va = 0, phi = 0, dva = 0, num_vars = 0;
  Eigen::Index balance = 0, flow = 0, angle = 0, ref = 0, num_rows = 0;
};

struct DcProblem {
  LinearProgram lp;
  IndexMap map;
};

/// Primal quantities the loss can depend on.
struct DcPrimal {
  Vec pg;
  Vec pf;
  Vec va;
};

struct DcSolution {
  Vec pg, pf, va, phi;
  Vec lambda_p;   // per bus; equals c at a marginal generator bus
  Vec lambda_pf;  // per branch
  Vec mu_theta_lo, mu_theta_hi;
  Vec mu_pg_lo, mu_pg_hi;
  Vec mu_pf_lo, mu_pf_hi;
  double lambda_ref = 0.0;
  Vec pd;  // demand the solve used, per load
  double objective = 0.0;
  LpStatus status = LpStatus::IterLimit;
  LpSolution lp;  // raw solution of the built LP

  bool optimal() const { return status == LpStatus::Optimal; }
  DcPrimal primal() const { return {pg, pf, va}; }
};

/// Throws std::invalid_argument on dimension mismatch or b_e == 0.
/// pd is per load; the overload without it uses the reference demand.
DcProblem build_dcopf(const GridCase& grid, const DcParams& params, const Vec& pd);
DcProblem build_dcopf(const GridCase& grid, const DcParams& params);

DcSolution solve_dcopf(const GridCase& grid, const DcParams& params, const Vec& pd, double tol = 1e-8);
DcSolution solve_dcopf(const GridCase& grid, const DcParams& params, double tol = 1e-8);

/// Dual objective evaluated from the mapped multipliers in grid terms.
double dual_objective(const GridCase& grid, const DcParams& params, const Vec& pd, const DcSolution& sol);

/// Per-load reference demand as a vector.
Vec reference_demand(const GridCase& grid);

}  // namespace dc2ac
