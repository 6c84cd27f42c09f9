#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "dc2ac/datagen.hpp"
#include "dc2ac/hash.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_cases.hpp"

namespace fs = std::filesystem;
using dc2ac::read_file;
using dc2ac::sha256_hex;
using dc2ac::testing::data_path;

namespace {

class Workdir {
 public:
  explicit Workdir(const std::string& name) : path_(fs::temp_directory_path() / ("dc2ac_cli_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~Workdir() { fs::remove_all(path_); }
  std::string operator/(const std::string& file) const { return (path_ / file).string(); }

 private:
  fs::path path_;
};

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + DC2AC_CLI + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json manifest(const std::string& output) { return nlohmann::json::parse(read_file(output + ".manifest.json")); }

}  // namespace

TEST_CASE("generate writes a dataset and its manifest") {
  Workdir w("generate");
  const std::string c = data_path("case2.m");
  REQUIRE(run("--seed 5 --workers 1 generate --case " + c + " -n 10 --out " + (w / "a.bin")) == 0);
  const auto ds = dc2ac::load_dataset(w / "a.bin");
  CHECK(ds.manifest.attempted == 10);
  const auto m = manifest(w / "a.bin");
  CHECK(m.at("command") == "generate");
  CHECK(m.at("config").at("seed") == 5);
  CHECK(m.at("inputs").at(c) == sha256_hex(read_file(c)));
  CHECK(m.at("outputs").at(w / "a.bin") == sha256_hex(read_file(w / "a.bin")));

  REQUIRE(run("--seed 5 --workers 2 generate --case " + c + " -n 10 --out " + (w / "b.bin")) == 0);
  CHECK(sha256_hex(read_file(w / "a.bin")) == sha256_hex(read_file(w / "b.bin")));
}

TEST_CASE("usage errors exit with 2") {
  Workdir w("usage");
  const std::string c = data_path("case2.m");
  CHECK(run("generate --case " + c + " --global-lo 1.2 --global-hi 1.0 --out " + (w / "x.bin")) == 2);
  CHECK_FALSE(fs::exists(w / "x.bin"));
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("generate --case " + c) == 2);
  CHECK(run("--seed abc generate --case " + c + " --out " + (w / "x.bin")) == 2);
  CHECK(run("generate --case " + c + " --out " + (w / "x.bin"), "DC2AC_WORKERS=many") == 2);
  CHECK(run("--help") == 0);
}

TEST_CASE("configuration layers: file < environment < flags") {
  Workdir w("layers");
  const std::string c = data_path("case2.m");
  dc2ac::write_file(w / "cfg.json", R"({"seed": 11, "sampler": {"local_range": 0.05}, "generate": {"samples": 4}})");
  const std::string base = "--config " + (w / "cfg.json") + " generate --case " + c + " --out ";

  REQUIRE(run(base + (w / "f.bin")) == 0);
  auto m = manifest(w / "f.bin");
  CHECK(m.at("config").at("seed") == 11);
  CHECK(m.at("config").at("sampler").at("local_range") == 0.05);
  CHECK(m.at("config").at("sampler").at("global_lo") == 0.7);
  CHECK(dc2ac::load_dataset(w / "f.bin").manifest.attempted == 4);

  REQUIRE(run(base + (w / "e.bin"), "DC2AC_SEED=12") == 0);
  CHECK(manifest(w / "e.bin").at("config").at("seed") == 12);

  REQUIRE(run("--seed 13 " + base + (w / "g.bin"), "DC2AC_SEED=12") == 0);
  CHECK(manifest(w / "g.bin").at("config").at("seed") == 13);
  CHECK(dc2ac::load_dataset(w / "g.bin").manifest.sampler.seed == 13);
}

TEST_CASE("train, evaluate and plot") {
  Workdir w("pipeline");
  const std::string c = data_path("case2_lossy.m");
  REQUIRE(run("--seed 2 generate --case " + c + " -n 40 --out " + (w / "ds.bin")) == 0);
  const std::string train = "train --dataset " + (w / "ds.bin") + " --case " + c + " --epochs 2 ";
  REQUIRE(run(train + "--method dc2ac --out " + (w / "d.bin")) == 0);
  REQUIRE(run(train + "--method proxy --out " + (w / "p.bin")) == 0);
  CHECK(fs::exists(w / "d.bin.history.csv"));
  CHECK(manifest(w / "d.bin").at("inputs").contains(w / "ds.bin"));
  CHECK(run(train + "--method linear --out " + (w / "z.bin")) == 2);

  const std::string eval = "evaluate --dataset " + (w / "ds.bin") + " --case " + c + " --dc2ac " + (w / "d.bin") +
                           " --proxy " + (w / "p.bin") + " --out ";
  REQUIRE(run(eval + (w / "m1.csv")) == 0);
  REQUIRE(run(eval + (w / "m2.csv")) == 0);
  CHECK(read_file(w / "m1.csv") == read_file(w / "m2.csv"));
  CHECK(read_file(w / "m1.csv.summary.csv") == read_file(w / "m2.csv.summary.csv"));
  const std::string metrics = read_file(w / "m1.csv");
  CHECK(metrics.find("\ndcopf,") != std::string::npos);
  CHECK(metrics.find("\nproxy,") != std::string::npos);
  CHECK(metrics.find("\ndc2ac,") != std::string::npos);

  // wrong model kind and missing checkpoint
  CHECK(run("evaluate --dataset " + (w / "ds.bin") + " --case " + c + " --dc2ac " + (w / "p.bin") + " --out " +
            (w / "x.csv")) == 1);
  CHECK(run("evaluate --dataset " + (w / "ds.bin") + " --case " + c + " --dc2ac " + (w / "none.bin") + " --out " +
            (w / "x.csv")) == 1);
  // dataset from a different case
  CHECK(run("evaluate --dataset " + (w / "ds.bin") + " --case " + data_path("case2.m") + " --out " + (w / "x.csv")) == 1);

  REQUIRE(run("plot --input " + (w / "m1.csv") + " --out " + (w / "a.svg")) == 0);
  REQUIRE(run("plot --input " + (w / "m1.csv") + " --out " + (w / "b.svg")) == 0);
  CHECK(read_file(w / "a.svg") == read_file(w / "b.svg"));
  CHECK(read_file(w / "a.svg").rfind("<svg", 0) == 0);
  REQUIRE(run("plot --input " + (w / "d.bin.history.csv") + " --input " + (w / "p.bin.history.csv") + " --out " +
              (w / "h.svg")) == 0);
  CHECK(read_file(w / "h.svg").find("stroke-dasharray") != std::string::npos);
  CHECK(run("plot --input " + (w / "m1.csv") + " --group qg --out " + (w / "c.svg")) == 2);
}

TEST_CASE("plot input errors") {
  Workdir w("plot");
  dc2ac::write_file(w / "empty.csv", "");
  CHECK(run("plot --input " + (w / "empty.csv") + " --out " + (w / "e.svg")) == 1);
  CHECK_FALSE(fs::exists(w / "e.svg"));
  dc2ac::write_file(w / "ragged.csv", "method,record,sample,total_demand,l1_pg,l1_pf,l1_va\ndcopf,1,2\n");
  CHECK(run("plot --input " + (w / "ragged.csv") + " --out " + (w / "r.svg")) == 1);
  dc2ac::write_file(w / "one.csv", "method,record,sample,total_demand,l1_pg,l1_pf,l1_va\ndcopf,0,0,1.5,0.01,0.02,0.03\n");
  REQUIRE(run("plot --input " + (w / "one.csv") + " --out " + (w / "one.svg")) == 0);
  const std::string svg = read_file(w / "one.svg");
  CHECK(svg.find("r=\"2.5\"") != std::string::npos);
  CHECK(svg.find("r=\"2.5\"") == svg.rfind("r=\"2.5\""));
}

TEST_CASE("single solves") {
  Workdir w("solve");
  const std::string c = data_path("case2_lossy.m");
  REQUIRE(run("solve-ac --case " + c + " --out " + (w / "ac.json")) == 0);
  REQUIRE(run("solve-dc --case " + c + " --out " + (w / "dc.json")) == 0);
  const auto ac = nlohmann::json::parse(read_file(w / "ac.json"));
  const auto dc = nlohmann::json::parse(read_file(w / "dc.json"));
  CHECK(ac.at("feasible") == true);
  CHECK(ac.at("objective").get<double>() > dc.at("objective").get<double>());
  CHECK(run("solve-ac --case " + (w / "missing.m") + " --out " + (w / "x.json")) == 1);
}
