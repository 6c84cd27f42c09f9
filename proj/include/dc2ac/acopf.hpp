#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <string>

#include "dc2ac/grid.hpp"
#include "dc2ac/lp.hpp"

namespace dc2ac {

/// Branch flows and net nodal injections for a voltage profile.
/// p_inj/q_inj are the power leaving each bus into branches and shunts,
/// so balance reads Σpg − Σpd = p_inj and Σqg − Σqd = q_inj.
struct AcFlows {
  Vec pf, qf, pt, qt;
  Vec p_inj, q_inj;
};

AcFlows ac_flow_equations(const GridCase& grid, const Vec& vm, const Vec& va);

/// One branch-end flow with derivatives in the local variables
/// (va_from, va_to, vm_from, vm_to).
struct FlowTerm {
  double value = 0.0;
  Eigen::Vector4d grad = Eigen::Vector4d::Zero();
  Eigen::Matrix4d hess = Eigen::Matrix4d::Zero();
};

struct BranchFlow {
  FlowTerm pf, qf, pt, qt;
  std::array<Eigen::Index, 4> index{};  // positions in the stacked [va; vm] vector
};

BranchFlow branch_flow(const GridCase& grid, std::size_t e, const Vec& vm, const Vec& va);

/// d[p_inj; q_inj] / d[va; vm], dense 2N × 2N.
Eigen::MatrixXd injection_jacobian(const GridCase& grid, const Vec& vm, const Vec& va);

/// Per-bus aggregation of per-load values.
Vec bus_demand(const GridCase& grid, const Vec& per_load);

struct AcSolution {
  Vec pg, qg;
  Vec vm, va;
  Vec pf, qf, pt, qt;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
};

class AcError : public std::runtime_error {
 public:
  AcError(const std::string& message, double residual, int iterations)
      : std::runtime_error(message), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// Power-flow setpoints: active output per generator (the reference bus
/// generator is the slack) and voltage magnitude per bus (used at PV and
/// reference buses only).
struct Dispatch {
  Vec pg;
  Vec vm;
};

/// pg at the lower limit, vm at each generator's setpoint and 1 elsewhere.
Dispatch default_dispatch(const GridCase& grid);

struct PowerFlowOptions {
  double tol = 1e-8;
  int max_iterations = 30;
};

/// Newton–Raphson power flow in polar form. Throws AcError on non-convergence.
AcSolution solve_ac_powerflow(const GridCase& grid, const Dispatch& dispatch, const Vec& pd, const Vec& qd,
                              const PowerFlowOptions& options = {});

struct AcOptions {
  double tol = 1e-6;
  int max_iterations = 300;
  double mu_init = 0.1;
};

/// Primal-dual log-barrier interior point on the polar AC-OPF.
/// Throws AcError when the iteration limit is reached or the iterates break down.
AcSolution solve_acopf(const GridCase& grid, const Vec& pd, const Vec& qd, const AcOptions& options = {});
AcSolution solve_acopf(const GridCase& grid, const AcOptions& options = {});

/// Largest violation per constraint family.
struct AcFeasibilityReport {
  double balance = 0.0;     // nodal P and Q balance
  double flows = 0.0;       // stored flows vs flows recomputed from (vm, va)
  double voltage = 0.0;
  double generation = 0.0;  // pg and qg limits
  double thermal = 0.0;     // |S| − S̄ at either end
  double angle = 0.0;       // angle-difference limits
  double reference = 0.0;   // |va_ref|
  double tol = 0.0;
  bool pass = false;

  double worst() const;
};

AcFeasibilityReport check_ac_feasibility(const GridCase& grid, const Vec& pd, const Vec& qd, const AcSolution& sol,
                                         double tol);

}  // namespace dc2ac
