#include <cmath>
#include <cstdio>
#include <limits>

#include "dc2ac/train.hpp"
#include "parallel.hpp"

namespace dc2ac {

namespace {

using Index = Eigen::Index;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Errors {
  double pg = kInf, pf = kInf, va = kInf;
};

Errors l1_errors(const DcPrimal& pred, const SampleRecord& r) {
  return {(pred.pg - r.pg).lpNorm<1>(), (pred.pf - r.pf).lpNorm<1>(), (pred.va - r.va).lpNorm<1>()};
}

double finite_mean(const Vec& v) {
  double sum = 0.0;
  std::size_t n = 0;
  for (Index k = 0; k < v.size(); ++k) {
    if (std::isfinite(v[k])) {
      sum += v[k];
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::DcOpf: return "dcopf";
    case Method::Proxy: return "proxy";
    case Method::Dc2ac: return "dc2ac";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "dcopf") return Method::DcOpf;
  if (name == "proxy") return Method::Proxy;
  if (name == "dc2ac") return Method::Dc2ac;
  throw std::invalid_argument("unknown method '" + name + "' (expected dcopf, proxy or dc2ac)");
}

const MethodErrors& MetricsReport::at(Method m) const {
  for (const auto& e : methods)
    if (e.method == m) return e;
  throw std::invalid_argument("report has no results for " + method_name(m));
}

double MetricsReport::win_rate(Method a, Method b, Group g) const {
  const Vec& x = at(a).group(g);
  const Vec& y = at(b).group(g);
  if (x.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  double wins = 0.0;
  for (Index k = 0; k < x.size(); ++k) {
    if (x[k] < y[k]) {
      wins += 1.0;
    } else if (x[k] == y[k]) {
      wins += 0.5;
    }
  }
  return wins / static_cast<double>(x.size());
}

MetricsReport evaluate(const Dataset& ds, const std::vector<std::size_t>& records, const GridCase& grid,
                       const std::vector<Method>& methods, const EvaluationModels& models, std::size_t workers,
                       double lp_tol) {
  for (Method m : methods) {
    if (m == Method::Dc2ac && !models.dc2ac) throw std::invalid_argument("dc2ac requested without a dc2ac model");
    if (m == Method::Proxy && !models.proxy) throw std::invalid_argument("proxy requested without a proxy model");
  }
  const DcParams nominal = DcParams::nominal(grid);
  const std::size_t n = records.size();
  MetricsReport report;
  report.records = records;
  report.total_demand.resize(static_cast<Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const SampleRecord& r = ds.records.at(records[k]);
    report.sample_index.push_back(r.sample_index);
    report.total_demand[static_cast<Index>(k)] = r.pd.sum();
  }

  for (Method m : methods) {
    std::vector<Errors> slots(n);
    parallel_for(n, workers, [&](std::size_t k) {
      const SampleRecord& r = ds.records[records[k]];
      switch (m) {
        case Method::DcOpf: {
          const DcSolution sol = solve_dcopf(grid, nominal, r.pd, lp_tol);
          if (sol.optimal()) slots[k] = l1_errors(sol.primal(), r);
          break;
        }
        case Method::Dc2ac: {
          const auto sol = predict_dc2ac(*models.dc2ac, grid, r.pd, lp_tol);
          if (sol) slots[k] = l1_errors(sol->primal(), r);
          break;
        }
        case Method::Proxy: slots[k] = l1_errors(predict_proxy(*models.proxy, grid, r.pd), r); break;
      }
    });
    MethodErrors e;
    e.method = m;
    e.l1_pg.resize(static_cast<Index>(n));
    e.l1_pf.resize(static_cast<Index>(n));
    e.l1_va.resize(static_cast<Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      const auto i = static_cast<Index>(k);
      e.l1_pg[i] = slots[k].pg;
      e.l1_pf[i] = slots[k].pf;
      e.l1_va[i] = slots[k].va;
      if (!std::isfinite(slots[k].pg)) ++e.failures;
    }
    e.mean_pg = finite_mean(e.l1_pg);
    e.mean_pf = finite_mean(e.l1_pf);
    e.mean_va = finite_mean(e.l1_va);
    report.methods.push_back(std::move(e));
  }
  return report;
}

std::string metrics_csv(const MetricsReport& report) {
  std::string out = "method,record,sample,total_demand,l1_pg,l1_pf,l1_va\n";
  char buf[200];
  for (const MethodErrors& e : report.methods) {
    for (std::size_t k = 0; k < report.records.size(); ++k) {
      const auto i = static_cast<Index>(k);
      std::snprintf(buf, sizeof buf, "%s,%zu,%llu,%.17g,%.17g,%.17g,%.17g\n", method_name(e.method).c_str(),
                    report.records[k], static_cast<unsigned long long>(report.sample_index[k]),
                    report.total_demand[i], e.l1_pg[i], e.l1_pf[i], e.l1_va[i]);
      out += buf;
    }
  }
  return out;
}

std::string summary_csv(const MetricsReport& report) {
  std::string out = "method,samples,failures,mean_l1_pg,mean_l1_pf,mean_l1_va";
  for (const MethodErrors& o : report.methods)
    for (const char* g : {"pg", "pf", "va"}) out += ",win_vs_" + method_name(o.method) + "_" + g;
  out += "\n";
  char buf[64];
  for (const MethodErrors& e : report.methods) {
    out += method_name(e.method) + "," + std::to_string(report.records.size()) + "," + std::to_string(e.failures);
    for (double v : {e.mean_pg, e.mean_pf, e.mean_va}) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out += buf;
    }
    for (const MethodErrors& o : report.methods) {
      for (Group g : {Group::Pg, Group::Pf, Group::Va}) {
        std::snprintf(buf, sizeof buf, ",%.17g", report.win_rate(e.method, o.method, g));
        out += buf;
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace dc2ac
