#pragma once

#include <random>
#include <string>

#include "dc2ac/grid.hpp"

namespace dc2ac::testing {

std::string data_path(const std::string& name);

/// Gen at bus 0 (reference), load at bus 1, one line.
GridCase two_bus(double r, double x, double pd, double pg_max = 2.0, double s_max = 2.0,
                 double cost = 1.0);

struct RandomCaseOptions {
  bool radial = false;
  bool lossless = false;     // r = 0, no shunt conductance
  double load_scale = 1.0;   // total load relative to ~0.5 p.u. per load bus
  double rating_margin = 0;  // > 0: thermal limits far from binding
};

/// Random connected network with distinct linear costs.
GridCase random_case(std::mt19937_64& rng, std::size_t buses, const RandomCaseOptions& opt = {});

struct GridBest {
  double objective = 1e300;
  double vm2 = 0, va2 = 0;
};

/// Exhaustive search over (vm2, va2) for a two-bus case with a slack
/// generator at bus 0 and a condenser at bus 1: bus-2 active balance fixes
/// vm1, everything else follows from the flows.
GridBest brute_force_two_bus(const GridCase& g, double pd, double qd);

}  // namespace dc2ac::testing
