#include <cmath>
#include <complex>
#include <random>

#include "dc2ac/acopf.hpp"
#include "dc2ac/dcopf.hpp"
#include "doctest.h"
#include "test_cases.hpp"

using namespace dc2ac;
using dc2ac::testing::brute_force_two_bus;
using dc2ac::testing::two_bus;

namespace {

Vec ref_pd(const GridCase& g) { return reference_demand(g); }

Vec ref_qd(const GridCase& g) {
  Vec q(static_cast<Eigen::Index>(g.num_loads()));
  for (std::size_t l = 0; l < g.num_loads(); ++l) q[static_cast<Eigen::Index>(l)] = g.loads[l].qd_ref;
  return q;
}

// Complex-power oracle for one branch end: S = V conj(Y_own V + Y_x V_far).
std::complex<double> end_power(double v_own, double a_own, double v_far, double a_far, std::complex<double> y_own,
                               std::complex<double> y_x) {
  const auto V = std::polar(v_own, a_own), W = std::polar(v_far, a_far);
  return V * std::conj(y_own * V + y_x * W);
}

}  // namespace

TEST_CASE("flat start gives zero active flow") {
  auto g = two_bus(0.0, 0.1, 1.0);
  auto fl = ac_flow_equations(g, Vec::Ones(2), Vec::Zero(2));
  CHECK(fl.pf[0] == 0.0);
  CHECK(fl.pt[0] == 0.0);
  CHECK(std::abs(fl.qf[0]) < 1e-15);
  CHECK(std::abs(fl.qt[0]) < 1e-15);

  g.branches[0].b_charge = 0.2;
  finalize_case(g);
  fl = ac_flow_equations(g, Vec::Ones(2), Vec::Zero(2));
  CHECK(fl.qf[0] == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(fl.qt[0] == doctest::Approx(-0.1).epsilon(1e-12));
}

TEST_CASE("sine law on a lossless line") {
  auto g = two_bus(0.0, 0.1, 1.0);
  Vec va(2);
  va << 0.0, -std::asin(0.1);
  auto fl = ac_flow_equations(g, Vec::Ones(2), va);
  CHECK(fl.pf[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(fl.pt[0] == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("reversing a branch swaps its end flows") {
  std::mt19937_64 rng(5);
  auto g = dc2ac::testing::random_case(rng, 6);
  auto rev = g;
  for (auto& br : rev.branches) std::swap(br.from, br.to);
  finalize_case(rev);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  Vec vm(6), va(6);
  for (int i = 0; i < 6; ++i) vm[i] = 1.0 + 0.1 * u(rng), va[i] = u(rng);
  auto a = ac_flow_equations(g, vm, va);
  auto b = ac_flow_equations(rev, vm, va);
  CHECK((a.pf - b.pt).lpNorm<Eigen::Infinity>() < 1e-13);
  CHECK((a.qf - b.qt).lpNorm<Eigen::Infinity>() < 1e-13);
  CHECK((a.pt - b.pf).lpNorm<Eigen::Infinity>() < 1e-13);
  CHECK((a.p_inj - b.p_inj).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("flow equations match a complex-power oracle") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = dc2ac::testing::random_case(rng, 5);
    for (auto& br : g.branches) {
      br.tap = 0.9 + 0.2 * u(rng);
      br.shift = 0.2 * (u(rng) - 0.5);
    }
    finalize_case(g);
    Vec vm(5), va(5);
    for (int i = 0; i < 5; ++i) vm[i] = 0.9 + 0.2 * u(rng), va[i] = 0.4 * (u(rng) - 0.5);
    auto fl = ac_flow_equations(g, vm, va);
    for (std::size_t e = 0; e < g.num_branches(); ++e) {
      const Branch& br = g.branches[e];
      const std::complex<double> ys = 1.0 / std::complex<double>(br.r, br.x);
      const auto t = std::polar(br.tap, br.shift);
      const std::complex<double> yff = (ys + std::complex<double>(0, br.b_charge / 2)) / (br.tap * br.tap);
      const std::complex<double> ytt = ys + std::complex<double>(0, br.b_charge / 2);
      const std::complex<double> yft = -ys / std::conj(t), ytf = -ys / t;
      const auto i = static_cast<Eigen::Index>(br.from), j = static_cast<Eigen::Index>(br.to);
      const auto sf = end_power(vm[i], va[i], vm[j], va[j], yff, yft);
      const auto st = end_power(vm[j], va[j], vm[i], va[i], ytt, ytf);
      const auto ei = static_cast<Eigen::Index>(e);
      CHECK(std::abs(fl.pf[ei] - sf.real()) < 1e-12);
      CHECK(std::abs(fl.qf[ei] - sf.imag()) < 1e-12);
      CHECK(std::abs(fl.pt[ei] - st.real()) < 1e-12);
      CHECK(std::abs(fl.qt[ei] - st.imag()) < 1e-12);
    }
  }
}

TEST_CASE("injection Jacobian matches central differences") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    auto g = dc2ac::testing::random_case(rng, 4 + static_cast<std::size_t>(trial));
    g.buses[1].bs = 0.05;
    g.branches[0].tap = 0.95;
    finalize_case(g);
    const auto N = static_cast<Eigen::Index>(g.num_buses());
    Vec vm(N), va(N);
    for (Eigen::Index i = 0; i < N; ++i) vm[i] = 0.95 + 0.1 * u(rng), va[i] = 0.3 * (u(rng) - 0.5);
    const Eigen::MatrixXd J = injection_jacobian(g, vm, va);
    const double h = 1e-6;
    Eigen::MatrixXd fd(2 * N, 2 * N);
    for (Eigen::Index c = 0; c < 2 * N; ++c) {
      Vec vp = vm, vq = vm, ap = va, aq = va;
      if (c < N) ap[c] += h, aq[c] -= h;
      else vp[c - N] += h, vq[c - N] -= h;
      auto plus = ac_flow_equations(g, vp, ap), minus = ac_flow_equations(g, vq, aq);
      Vec dp(2 * N);
      dp << plus.p_inj - minus.p_inj, plus.q_inj - minus.q_inj;
      fd.col(c) = dp / (2 * h);
    }
    CHECK((fd - J).lpNorm<Eigen::Infinity>() / J.lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("branch Hessians match differences of gradients") {
  std::mt19937_64 rng(29);
  auto g = dc2ac::testing::random_case(rng, 5);
  g.branches[1].tap = 1.05;
  g.branches[1].shift = 0.05;
  finalize_case(g);
  Vec vm = Vec::Constant(5, 1.02), va(5);
  va << 0.0, -0.05, 0.1, -0.12, 0.03;
  const double h = 1e-6;
  for (std::size_t e = 0; e < g.num_branches(); ++e) {
    const BranchFlow base = branch_flow(g, e, vm, va);
    for (int k = 0; k < 4; ++k) {
      const Eigen::Index idx = base.index[static_cast<std::size_t>(k)];
      Vec vp = vm, vq = vm, ap = va, aq = va;
      if (idx < 5) ap[idx] += h, aq[idx] -= h;
      else vp[idx - 5] += h, vq[idx - 5] -= h;
      const BranchFlow p = branch_flow(g, e, vp, ap), q = branch_flow(g, e, vq, aq);
      CHECK(((p.pf.grad - q.pf.grad) / (2 * h) - base.pf.hess.col(k)).lpNorm<Eigen::Infinity>() < 1e-6);
      CHECK(((p.qf.grad - q.qf.grad) / (2 * h) - base.qf.hess.col(k)).lpNorm<Eigen::Infinity>() < 1e-6);
      CHECK(((p.pt.grad - q.pt.grad) / (2 * h) - base.pt.hess.col(k)).lpNorm<Eigen::Infinity>() < 1e-6);
      CHECK(((p.qt.grad - q.qt.grad) / (2 * h) - base.qt.hess.col(k)).lpNorm<Eigen::Infinity>() < 1e-6);
      CHECK((p.pf.value - q.pf.value) / (2 * h) == doctest::Approx(base.pf.grad[k]).epsilon(1e-6));
    }
  }
}

TEST_CASE("two-bus power flow matches the closed form") {
  // a zero-output condenser holds vm = 1 at the load bus
  auto g = two_bus(0.0, 0.1, 1.0);
  g.generators.push_back(Generator{1, 0.0, 0.0, -2.0, 2.0, 0.0, 1.0});
  finalize_case(g);
  auto sol = solve_ac_powerflow(g, default_dispatch(g), ref_pd(g), ref_qd(g));
  CHECK(std::abs(sol.va[1] - (-std::asin(0.1))) <= 1e-8);
  CHECK(sol.pg[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.kkt_residual <= 1e-8);
}

TEST_CASE("zero load power flow is flat") {
  auto g = two_bus(0.0, 0.1, 0.0);
  auto sol = solve_ac_powerflow(g, default_dispatch(g), ref_pd(g), ref_qd(g));
  CHECK(sol.iterations == 0);
  CHECK(sol.va[1] == 0.0);
  CHECK(sol.vm[1] == 1.0);
}

TEST_CASE("undeliverable load fails to converge") {
  auto g = two_bus(0.0, 0.1, 11.0, 20.0, 20.0);
  CHECK_THROWS_AS(solve_ac_powerflow(g, default_dispatch(g), ref_pd(g), ref_qd(g)), AcError);
}

TEST_CASE("lossless power flow conserves active power") {
  std::mt19937_64 rng(41);
  dc2ac::testing::RandomCaseOptions opt;
  opt.lossless = true;
  for (int trial = 0; trial < 10; ++trial) {
    auto g = dc2ac::testing::random_case(rng, 5 + static_cast<std::size_t>(trial), opt);
    auto d = default_dispatch(g);
    const Vec pd = ref_pd(g);
    // spread load over the non-slack generators
    for (Eigen::Index k = 1; k < d.pg.size(); ++k) d.pg[k] = 0.5 * pd.sum() / static_cast<double>(d.pg.size());
    auto sol = solve_ac_powerflow(g, d, pd, ref_qd(g));
    CHECK(std::abs(sol.pg.sum() - pd.sum()) <= 1e-8);
  }
}

TEST_CASE("lossless two-bus AC-OPF equals DC") {
  auto g = two_bus(0.0, 0.1, 1.0);
  auto sol = solve_acopf(g);
  CHECK(sol.pg[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(check_ac_feasibility(g, ref_pd(g), ref_qd(g), sol, 1e-6).pass);
}

TEST_CASE("lossy two-bus AC-OPF matches exhaustive search") {
  auto parsed = load_case_file(dc2ac::testing::data_path("case2_lossy.m"));
  const GridCase& g = parsed.grid;
  auto sol = solve_acopf(g);
  auto best = brute_force_two_bus(g, g.loads[0].pd_ref, g.loads[0].qd_ref);
  CHECK(sol.pg[0] > 1.0);
  CHECK(std::abs(sol.objective - best.objective) <= 1e-4);
  CHECK(sol.objective <= best.objective + 1e-6);
  CHECK(check_ac_feasibility(g, ref_pd(g), ref_qd(g), sol, 1e-6).pass);
}

TEST_CASE("binding thermal limit") {
  auto g = two_bus(0.01, 0.1, 1.0, 2.0, 0.8);
  g.generators.push_back(Generator{1, 0.0, 1.0, -1.0, 1.0, 5.0, 1.0});
  finalize_case(g);
  auto sol = solve_acopf(g);
  const double s = std::max(std::hypot(sol.pf[0], sol.qf[0]), std::hypot(sol.pt[0], sol.qt[0]));
  CHECK(s == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(check_ac_feasibility(g, ref_pd(g), ref_qd(g), sol, 1e-6).pass);
}

TEST_CASE("feasibility report flags an over-voltage") {
  auto g = two_bus(0.0, 0.1, 1.0);
  auto opt = solve_acopf(g);
  CHECK(check_ac_feasibility(g, ref_pd(g), ref_qd(g), opt, 1e-6).pass);

  AcSolution bad = opt;
  bad.vm *= 1.5;
  auto rep = check_ac_feasibility(g, ref_pd(g), ref_qd(g), bad, 1e-6);
  CHECK_FALSE(rep.pass);
  CHECK(rep.voltage > 0.3);
}

TEST_CASE("hand solution passes the feasibility check") {
  // a PV load bus lets bus 2 hold vm = 1 so the closed form is exact
  auto g = two_bus(0.0, 0.1, 1.0);
  g.generators.push_back(Generator{1, 0.0, 0.0, -2.0, 2.0, 0.0, 1.0});
  finalize_case(g);
  AcSolution hand;
  hand.vm = Vec::Ones(2);
  hand.va = Vec::Zero(2);
  hand.va[1] = -std::asin(0.1);
  auto fl = ac_flow_equations(g, hand.vm, hand.va);
  hand.pf = fl.pf;
  hand.qf = fl.qf;
  hand.pt = fl.pt;
  hand.qt = fl.qt;
  hand.pg = Vec::Zero(2);
  hand.pg[0] = 1.0;
  hand.qg = Vec::Zero(2);
  hand.qg[0] = fl.q_inj[0];
  hand.qg[1] = fl.q_inj[1];
  auto rep = check_ac_feasibility(g, ref_pd(g), ref_qd(g), hand, 1e-10);
  CHECK(rep.pass);
  CHECK(rep.balance <= 1e-12);
}

TEST_CASE("AC-OPF solutions are feasible on random cases") {
  std::mt19937_64 rng(53);
  int solved = 0;
  for (int trial = 0; trial < 15; ++trial) {
    auto g = dc2ac::testing::random_case(rng, 4 + static_cast<std::size_t>(trial));
    try {
      auto sol = solve_acopf(g);
      CHECK(check_ac_feasibility(g, ref_pd(g), ref_qd(g), sol, 1e-6).pass);
      CHECK(sol.kkt_residual <= 1e-6);
      ++solved;
    } catch (const AcError& e) {
      MESSAGE("trial " << trial << ": " << e.what());
    }
  }
  CHECK(solved >= 13);
}

TEST_CASE("AC objective bounds the DC objective on lossless uncongested cases") {
  std::mt19937_64 rng(61);
  dc2ac::testing::RandomCaseOptions opt;
  opt.lossless = true;
  opt.rating_margin = 1.0;
  for (int trial = 0; trial < 10; ++trial) {
    auto g = dc2ac::testing::random_case(rng, 4 + static_cast<std::size_t>(trial), opt);
    auto ac = solve_acopf(g);
    auto dc = solve_dcopf(g, DcParams::nominal(g), 1e-9);
    REQUIRE(dc.optimal());
    CHECK(ac.objective >= dc.objective - 1e-6 * (1.0 + std::abs(dc.objective)));
  }
}

TEST_CASE("bundled 14-bus case solves") {
  auto parsed = load_case_file(dc2ac::testing::data_path("case14.m"));
  const GridCase& g = parsed.grid;
  auto sol = solve_acopf(g);
  auto rep = check_ac_feasibility(g, ref_pd(g), ref_qd(g), sol, 1e-6);
  CHECK(rep.pass);
  auto dc = solve_dcopf(g, DcParams::nominal(g), 1e-9);
  REQUIRE(dc.optimal());
  // losses make AC generation exceed DC generation
  CHECK(sol.pg.sum() > dc.pg.sum());
  MESSAGE("case14 AC objective " << sol.objective << " in " << sol.iterations << " iterations");
}
