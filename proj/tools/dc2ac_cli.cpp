// dc2ac command-line front end.
//
// Configuration is resolved in layers: built-in defaults, then a JSON file
// given with --config, then DC2AC_* environment variables, then flags. The
// resolved configuration and the SHA-256 of every input and output file are
// written next to each output as <output>.manifest.json.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "dc2ac/acopf.hpp"
#include "dc2ac/datagen.hpp"
#include "dc2ac/dcopf.hpp"
#include "dc2ac/hash.hpp"
#include "dc2ac/plot.hpp"
#include "dc2ac/train.hpp"
#include "json.hpp"

namespace {

using json = nlohmann::json;
using namespace dc2ac;

constexpr int kOk = 0, kRuntime = 1, kUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json defaults() {
  const unsigned cores = std::max(1u, std::thread::hardware_concurrency());
  return {{"seed", 1},
          {"tol", 1e-6},
          {"lp_tol", 1e-8},
          {"workers", cores},
          {"sampler", {{"global_lo", 0.7}, {"global_hi", 1.1}, {"local_range", 0.15}}},
          {"generate", {{"samples", 1000}, {"train_fraction", 0.8}}},
          {"train",
           {{"epochs", 100},
            {"batch_size", 16},
            {"lr", 1e-4},
            {"patience", 10},
            {"eval_every", 1},
            {"hidden", {64, 64, 64}},
            {"b_scale_lo", 0.5},
            {"b_scale_hi", 2.0},
            {"gs_window", 0.05}}}};
}

// DC2AC_<NAME> → JSON pointer
const std::vector<std::pair<const char*, const char*>> kEnvironment = {
    {"DC2AC_SEED", "/seed"},
    {"DC2AC_TOL", "/tol"},
    {"DC2AC_LP_TOL", "/lp_tol"},
    {"DC2AC_WORKERS", "/workers"},
    {"DC2AC_SAMPLES", "/generate/samples"},
    {"DC2AC_EPOCHS", "/train/epochs"},
    {"DC2AC_BATCH_SIZE", "/train/batch_size"},
    {"DC2AC_LR", "/train/lr"},
};

json parse_scalar(const std::string& name, const std::string& text) {
  try {
    json v = json::parse(text);
    if (!v.is_number()) throw UsageError(name + " must be numeric, got '" + text + "'");
    return v;
  } catch (const json::exception&) {
    throw UsageError(name + " must be numeric, got '" + text + "'");
  }
}

struct Layers {
  std::string config_path;
  json flags = json::object();  // JSON pointer → value
};

json resolve(const Layers& layers) {
  json cfg = defaults();
  if (!layers.config_path.empty()) {
    json file;
    try {
      file = json::parse(read_file(layers.config_path));
    } catch (const json::exception& e) {
      throw UsageError("config file " + layers.config_path + ": " + e.what());
    }
    if (!file.is_object()) throw UsageError("config file must hold a JSON object");
    cfg.merge_patch(file);
  }
  for (const auto& [var, ptr] : kEnvironment) {
    if (const char* v = std::getenv(var)) cfg[json::json_pointer(ptr)] = parse_scalar(var, v);
  }
  for (const auto& [ptr, value] : layers.flags.items()) cfg[json::json_pointer(ptr)] = value;
  return cfg;
}

template <class T>
T get(const json& cfg, const char* ptr) {
  try {
    return cfg.at(json::json_pointer(ptr)).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("configuration value ") + ptr + ": " + e.what());
  }
}

SamplerConfig sampler_config(const json& cfg) {
  SamplerConfig s;
  s.global_lo = get<double>(cfg, "/sampler/global_lo");
  s.global_hi = get<double>(cfg, "/sampler/global_hi");
  s.local_range = get<double>(cfg, "/sampler/local_range");
  s.seed = get<std::uint64_t>(cfg, "/seed");
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("sampler: ") + e.what());
  }
  return s;
}

std::size_t workers(const json& cfg) {
  const auto w = get<long long>(cfg, "/workers");
  if (w < 1) throw UsageError("workers must be at least 1");
  return static_cast<std::size_t>(w);
}

double tolerance(const json& cfg, const char* ptr) {
  const double t = get<double>(cfg, ptr);
  if (!(t > 0.0)) throw UsageError(std::string(ptr + 1) + " must be positive");
  return t;
}

TrainConfig train_config(const json& cfg) {
  TrainConfig t;
  t.epochs = get<std::size_t>(cfg, "/train/epochs");
  t.batch_size = get<std::size_t>(cfg, "/train/batch_size");
  t.lr = get<double>(cfg, "/train/lr");
  t.patience = get<std::size_t>(cfg, "/train/patience");
  t.eval_every = get<std::size_t>(cfg, "/train/eval_every");
  t.hidden = get<std::vector<Eigen::Index>>(cfg, "/train/hidden");
  t.bounds.b_scale_lo = get<double>(cfg, "/train/b_scale_lo");
  t.bounds.b_scale_hi = get<double>(cfg, "/train/b_scale_hi");
  t.bounds.gs_window = get<double>(cfg, "/train/gs_window");
  t.seed = get<std::uint64_t>(cfg, "/seed");
  t.workers = workers(cfg);
  t.lp_tol = tolerance(cfg, "/lp_tol");
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("train: ") + e.what());
  }
  return t;
}

AcOptions ac_options(const json& cfg) {
  AcOptions o;
  o.tol = tolerance(cfg, "/tol");
  return o;
}

json file_digests(const std::vector<std::string>& paths) {
  json j = json::object();
  for (const auto& p : paths) j[p] = sha256_hex(read_file(p));
  return j;
}

void write_output(const std::string& path, const std::string& contents) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  write_file(path, contents);
}

void write_manifest(const std::string& command, const json& cfg, const json& args,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  json m{{"command", command},
         {"arguments", args},
         {"config", cfg},
         {"inputs", file_digests(inputs)},
         {"outputs", file_digests(outputs)}};
  write_output(outputs.front() + ".manifest.json", m.dump(2) + "\n");
}

GridCase load_grid(const std::string& path) {
  ParsedCase pc = load_case_file(path);
  for (const auto& w : pc.warnings) std::fprintf(stderr, "warning: %s: %s\n", path.c_str(), w.c_str());
  return std::move(pc.grid);
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec scaled_reference(const GridCase& g, double scale, bool reactive) {
  Vec out(static_cast<Eigen::Index>(g.num_loads()));
  for (std::size_t l = 0; l < g.num_loads(); ++l)
    out[static_cast<Eigen::Index>(l)] = scale * (reactive ? g.loads[l].qd_ref : g.loads[l].pd_ref);
  return out;
}

// -- commands --

struct GenerateArgs {
  std::string case_path, out, csv;
};

int cmd_generate(const json& cfg, const GenerateArgs& a) {
  const GridCase g = load_grid(a.case_path);
  const SamplerConfig s = sampler_config(cfg);
  const auto n = get<long long>(cfg, "/generate/samples");
  if (n < 1) throw UsageError("samples must be at least 1");
  GenerateOptions opt;
  opt.workers = workers(cfg);
  opt.ac = ac_options(cfg);
  opt.train_fraction = get<double>(cfg, "/generate/train_fraction");
  if (!(opt.train_fraction > 0.0 && opt.train_fraction < 1.0)) throw UsageError("train_fraction must lie in (0, 1)");
  const Dataset ds = generate_dataset(g, static_cast<std::size_t>(n), s, opt);
  save_dataset(ds, a.out);
  std::vector<std::string> outputs{a.out};
  if (!a.csv.empty()) {
    export_dataset_csv(ds, a.csv);
    outputs.push_back(a.csv);
  }
  write_manifest("generate", cfg, {{"case", a.case_path}, {"out", a.out}, {"csv", a.csv}}, {a.case_path}, outputs);
  const auto& m = ds.manifest;
  std::printf("case %s (%s)\nattempted %zu, converged %zu, failed %zu\ntrain %zu, validation %zu\nwrote %s\n",
              m.case_name.c_str(), m.case_hash.substr(0, 12).c_str(), m.attempted, m.converged, m.failed,
              ds.train.size(), ds.validation.size(), a.out.c_str());
  return kOk;
}

struct SolveArgs {
  std::string case_path, out;
  double load_scale = 1.0;
};

int cmd_solve_ac(const json& cfg, const SolveArgs& a) {
  const GridCase g = load_grid(a.case_path);
  const Vec pd = scaled_reference(g, a.load_scale, false), qd = scaled_reference(g, a.load_scale, true);
  const AcOptions opt = ac_options(cfg);
  const AcSolution sol = solve_acopf(g, pd, qd, opt);
  const AcFeasibilityReport rep = check_ac_feasibility(g, pd, qd, sol, std::max(opt.tol, 1e-6));
  json out{{"objective", sol.objective},
           {"iterations", sol.iterations},
           {"kkt_residual", sol.kkt_residual},
           {"feasible", rep.pass},
           {"max_violation", rep.worst()},
           {"pg", vec_json(sol.pg)},
           {"qg", vec_json(sol.qg)},
           {"vm", vec_json(sol.vm)},
           {"va", vec_json(sol.va)},
           {"pf", vec_json(sol.pf)},
           {"qf", vec_json(sol.qf)},
           {"pt", vec_json(sol.pt)},
           {"qt", vec_json(sol.qt)}};
  write_output(a.out, out.dump(1) + "\n");
  write_manifest("solve-ac", cfg, {{"case", a.case_path}, {"out", a.out}, {"load_scale", a.load_scale}},
                 {a.case_path}, {a.out});
  std::printf("AC-OPF objective %.10g after %d iterations (KKT residual %.3g), wrote %s\n", sol.objective,
              sol.iterations, sol.kkt_residual, a.out.c_str());
  return kOk;
}

int cmd_solve_dc(const json& cfg, const SolveArgs& a) {
  const GridCase g = load_grid(a.case_path);
  const Vec pd = scaled_reference(g, a.load_scale, false);
  const DcSolution sol = solve_dcopf(g, DcParams::nominal(g), pd, tolerance(cfg, "/lp_tol"));
  if (!sol.optimal()) throw std::runtime_error("DC-OPF did not reach optimality");
  json out{{"objective", sol.objective}, {"pg", vec_json(sol.pg)},   {"pf", vec_json(sol.pf)},
           {"va", vec_json(sol.va)},    {"phi", vec_json(sol.phi)}, {"lambda_p", vec_json(sol.lambda_p)}};
  write_output(a.out, out.dump(1) + "\n");
  write_manifest("solve-dc", cfg, {{"case", a.case_path}, {"out", a.out}, {"load_scale", a.load_scale}},
                 {a.case_path}, {a.out});
  std::printf("DC-OPF objective %.10g, wrote %s\n", sol.objective, a.out.c_str());
  return kOk;
}

struct TrainArgs {
  std::string dataset, case_path, method = "dc2ac", out, history;
};

int cmd_train(const json& cfg, const TrainArgs& a) {
  if (a.method != "dc2ac" && a.method != "proxy") throw UsageError("method must be dc2ac or proxy");
  const TrainConfig tc = train_config(cfg);
  const GridCase g = load_grid(a.case_path);
  const Dataset ds = load_dataset(a.dataset, g);
  TrainResult r = a.method == "dc2ac" ? train_dc2ac(ds, g, tc) : train_proxy(ds, g, tc);
  r.model.metadata["dataset_sha256"] = sha256_hex(read_file(a.dataset));
  save_mlp(r.model, a.out);
  const std::string history = a.history.empty() ? a.out + ".history.csv" : a.history;
  write_output(history, history_csv(r.history));
  write_manifest("train", cfg, {{"dataset", a.dataset}, {"case", a.case_path}, {"method", a.method}, {"out", a.out}},
                 {a.dataset, a.case_path}, {a.out, history});
  std::printf("%s: %zu epochs%s, best validation loss %.6g at epoch %zu\nwrote %s and %s\n", a.method.c_str(),
              r.history.completed(), r.history.stopped_early ? " (stopped early)" : "",
              r.history.best_validation_loss(), r.history.best_epoch, a.out.c_str(), history.c_str());
  return kOk;
}

struct EvaluateArgs {
  std::string dataset, case_path, dc2ac, proxy, out, summary, split = "validation";
};

int cmd_evaluate(const json& cfg, const EvaluateArgs& a) {
  const GridCase g = load_grid(a.case_path);
  const Dataset ds = load_dataset(a.dataset, g);
  std::vector<std::size_t> records;
  if (a.split == "validation") {
    records = ds.validation;
  } else if (a.split == "train") {
    records = ds.train;
  } else if (a.split == "all") {
    for (std::size_t k = 0; k < ds.records.size(); ++k) records.push_back(k);
  } else {
    throw UsageError("split must be validation, train or all");
  }
  std::vector<Method> methods{Method::DcOpf};
  std::vector<std::string> inputs{a.dataset, a.case_path};
  std::optional<Mlp> dc2ac, proxy;
  auto load_model = [&](const std::string& path, const char* kind) {
    if (!std::filesystem::exists(path)) throw std::runtime_error(std::string(kind) + " checkpoint not found: " + path);
    Mlp m = load_mlp(path);
    const auto it = m.metadata.find("kind");
    if (it == m.metadata.end() || it->second != kind) throw std::runtime_error(path + " is not a " + kind + " model");
    inputs.push_back(path);
    return m;
  };
  if (!a.proxy.empty()) {
    proxy = load_model(a.proxy, "proxy");
    methods.push_back(Method::Proxy);
  }
  if (!a.dc2ac.empty()) {
    dc2ac = load_model(a.dc2ac, "dc2ac");
    methods.push_back(Method::Dc2ac);
  }
  const EvaluationModels models{dc2ac ? &*dc2ac : nullptr, proxy ? &*proxy : nullptr};
  const MetricsReport rep = evaluate(ds, records, g, methods, models, workers(cfg), tolerance(cfg, "/lp_tol"));
  write_output(a.out, metrics_csv(rep));
  const std::string summary = a.summary.empty() ? a.out + ".summary.csv" : a.summary;
  write_output(summary, summary_csv(rep));
  write_manifest("evaluate", cfg,
                 {{"dataset", a.dataset}, {"case", a.case_path}, {"dc2ac", a.dc2ac}, {"proxy", a.proxy},
                  {"split", a.split}, {"out", a.out}},
                 inputs, {a.out, summary});
  std::printf("%-6s %12s %12s %12s\n", "method", "L1(pg)", "L1(pf)", "L1(va)");
  for (const auto& e : rep.methods) {
    std::printf("%-6s %12.6g %12.6g %12.6g\n", method_name(e.method).c_str(), e.mean_pg, e.mean_pf, e.mean_va);
  }
  std::printf("wrote %s and %s\n", a.out.c_str(), summary.c_str());
  return kOk;
}

struct PlotArgs {
  std::vector<std::string> inputs;
  std::vector<std::string> labels;
  std::string out, group = "pg";
};

int cmd_plot(const json& cfg, const PlotArgs& a) {
  Group group;
  if (a.group == "pg") {
    group = Group::Pg;
  } else if (a.group == "pf") {
    group = Group::Pf;
  } else if (a.group == "va") {
    group = Group::Va;
  } else {
    throw UsageError("group must be pg, pf or va");
  }
  if (!a.labels.empty() && a.labels.size() != a.inputs.size()) throw UsageError("give one --label per --input");
  std::vector<std::pair<std::string, CsvTable>> tables;
  for (std::size_t k = 0; k < a.inputs.size(); ++k) {
    const std::string label = a.labels.empty() ? std::filesystem::path(a.inputs[k]).stem().string() : a.labels[k];
    tables.emplace_back(label, parse_csv(read_file(a.inputs[k])));
  }
  const auto& first = tables.front().second.header;
  const bool metrics = !first.empty() && first.front() == "method";
  std::string svg;
  if (metrics) {
    if (tables.size() != 1) throw UsageError("plot takes a single metrics CSV");
    svg = plot_metrics(tables.front().second, group);
  } else {
    svg = plot_histories(tables);
  }
  write_output(a.out, svg);
  write_manifest("plot", cfg, {{"inputs", a.inputs}, {"out", a.out}, {"group", a.group}}, a.inputs, {a.out});
  std::printf("wrote %s\n", a.out.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DC2AC: learned DC-OPF corrections that approximate AC-OPF solutions"};
  app.require_subcommand(1);
  Layers layers;
  app.add_option("--config", layers.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  std::optional<std::uint64_t> seed;
  std::optional<double> tol, lp_tol;
  std::optional<long long> n_workers;
  app.add_option("--seed", seed, "random seed");
  app.add_option("--tol", tol, "AC-OPF tolerance");
  app.add_option("--lp-tol", lp_tol, "DC-OPF LP tolerance");
  app.add_option("--workers", n_workers, "worker threads (default: logical cores)");

  GenerateArgs gen;
  std::optional<long long> samples;
  std::optional<double> global_lo, global_hi, local_range, train_fraction;
  auto* generate = app.add_subcommand("generate", "sample demands and solve AC-OPF for each");
  generate->add_option("--case", gen.case_path, "case file (MATPOWER .m or native JSON)")->required();
  generate->add_option("-n,--samples", samples, "number of samples to attempt");
  generate->add_option("--out", gen.out, "dataset file")->required();
  generate->add_option("--csv", gen.csv, "also export the dataset as CSV");
  generate->add_option("--global-lo", global_lo, "lower global load factor");
  generate->add_option("--global-hi", global_hi, "upper global load factor");
  generate->add_option("--local-range", local_range, "per-load perturbation half-width");
  generate->add_option("--train-fraction", train_fraction, "share of records in the training split");

  SolveArgs ac_args, dc_args;
  auto* solve_ac = app.add_subcommand("solve-ac", "solve AC-OPF at scaled reference demand");
  solve_ac->add_option("--case", ac_args.case_path, "case file")->required();
  solve_ac->add_option("--out", ac_args.out, "solution JSON")->required();
  solve_ac->add_option("--load-scale", ac_args.load_scale, "factor applied to reference demand");
  auto* solve_dc = app.add_subcommand("solve-dc", "solve DC-OPF at scaled reference demand");
  solve_dc->add_option("--case", dc_args.case_path, "case file")->required();
  solve_dc->add_option("--out", dc_args.out, "solution JSON")->required();
  solve_dc->add_option("--load-scale", dc_args.load_scale, "factor applied to reference demand");

  TrainArgs tr;
  std::optional<long long> epochs, batch_size, patience;
  std::optional<double> lr;
  auto* train = app.add_subcommand("train", "train a DC2AC or proxy model");
  train->add_option("--dataset", tr.dataset, "dataset file")->required();
  train->add_option("--case", tr.case_path, "case file the dataset was generated from")->required();
  train->add_option("--method", tr.method, "dc2ac or proxy");
  train->add_option("--out", tr.out, "checkpoint file")->required();
  train->add_option("--history", tr.history, "history CSV (default: <out>.history.csv)");
  train->add_option("--epochs", epochs, "maximum epochs");
  train->add_option("--batch-size", batch_size, "samples per update");
  train->add_option("--lr", lr, "Adam learning rate");
  train->add_option("--patience", patience, "early-stop patience in epochs");

  EvaluateArgs ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "L1 errors against the AC-OPF targets");
  evaluate_cmd->add_option("--dataset", ev.dataset, "dataset file")->required();
  evaluate_cmd->add_option("--case", ev.case_path, "case file")->required();
  evaluate_cmd->add_option("--dc2ac", ev.dc2ac, "DC2AC checkpoint");
  evaluate_cmd->add_option("--proxy", ev.proxy, "proxy checkpoint");
  evaluate_cmd->add_option("--split", ev.split, "validation, train or all");
  evaluate_cmd->add_option("--out", ev.out, "per-sample metrics CSV")->required();
  evaluate_cmd->add_option("--summary", ev.summary, "summary CSV (default: <out>.summary.csv)");

  PlotArgs pl;
  auto* plot = app.add_subcommand("plot", "SVG from a metrics CSV or one or more history CSVs");
  plot->add_option("--input", pl.inputs, "CSV file (repeatable for histories)")->required();
  plot->add_option("--label", pl.labels, "series label per input");
  plot->add_option("--group", pl.group, "pg, pf or va for metrics plots");
  plot->add_option("--out", pl.out, "SVG file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  auto set = [&](const char* ptr, const auto& opt) {
    if (opt) layers.flags[ptr] = *opt;
  };
  set("/seed", seed);
  set("/tol", tol);
  set("/lp_tol", lp_tol);
  set("/workers", n_workers);
  set("/generate/samples", samples);
  set("/generate/train_fraction", train_fraction);
  set("/sampler/global_lo", global_lo);
  set("/sampler/global_hi", global_hi);
  set("/sampler/local_range", local_range);
  set("/train/epochs", epochs);
  set("/train/batch_size", batch_size);
  set("/train/lr", lr);
  set("/train/patience", patience);

  try {
    const json cfg = resolve(layers);
    if (generate->parsed()) return cmd_generate(cfg, gen);
    if (solve_ac->parsed()) return cmd_solve_ac(cfg, ac_args);
    if (solve_dc->parsed()) return cmd_solve_dc(cfg, dc_args);
    if (train->parsed()) return cmd_train(cfg, tr);
    if (evaluate_cmd->parsed()) return cmd_evaluate(cfg, ev);
    if (plot->parsed()) return cmd_plot(cfg, pl);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kUsage;
}
