#include <cstdio>
#include <cstring>

#include "dc2ac/datagen.hpp"
#include "dc2ac/hash.hpp"
#include "binio.hpp"
#include "json.hpp"

namespace dc2ac {

namespace {

using json = nlohmann::json;
using Index = Eigen::Index;

constexpr char kMagic[8] = {'D', 'C', '2', 'A', 'C', 'D', 'S', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kPrefix = 8 + 4 + 4 + 8;
constexpr std::size_t kDigest = 32;

using binio::put_f64;
using binio::put_u32;
using binio::put_u64;
using binio::put_vec;
using Reader = binio::Reader<DatasetError>;

json manifest_json(const Dataset& ds) {
  const DatasetManifest& m = ds.manifest;
  json j;
  j["case_name"] = m.case_name;
  j["case_hash"] = m.case_hash;
  j["dims"] = {{"buses", m.num_buses}, {"branches", m.num_branches}, {"generators", m.num_generators}, {"loads", m.num_loads}};
  j["attempted"] = m.attempted;
  j["converged"] = m.converged;
  j["failed"] = m.failed;
  j["sampler"] = {{"global_lo", m.sampler.global_lo},
                  {"global_hi", m.sampler.global_hi},
                  {"local_range", m.sampler.local_range},
                  {"seed", m.sampler.seed}};
  j["train_fraction"] = m.train_fraction;
  j["ac_tol"] = m.ac_tol;
  j["records"] = ds.records.size();
  j["train"] = ds.train;
  j["validation"] = ds.validation;
  return j;
}

}  // namespace

std::string serialize_dataset(const Dataset& ds) {
  const DatasetManifest& m = ds.manifest;
  const std::string header = json{{"format", "dc2ac-dataset"}, {"version", kVersion}, {"manifest", manifest_json(ds)}}.dump(1);
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_u32(out, 0);
  put_u64(out, header.size());
  out += header;
  for (const SampleRecord& r : ds.records) {
    if (static_cast<std::size_t>(r.pd.size()) != m.num_loads || static_cast<std::size_t>(r.qd.size()) != m.num_loads ||
        static_cast<std::size_t>(r.pg.size()) != m.num_generators || static_cast<std::size_t>(r.pf.size()) != m.num_branches ||
        static_cast<std::size_t>(r.va.size()) != m.num_buses) {
      throw DatasetError("record dimensions disagree with the manifest");
    }
    put_u64(out, r.sample_index);
    put_u64(out, static_cast<std::uint64_t>(r.iterations));
    put_f64(out, r.objective);
    put_f64(out, r.kkt_residual);
    put_vec(out, r.pd);
    put_vec(out, r.qd);
    put_vec(out, r.pg);
    put_vec(out, r.pf);
    put_vec(out, r.va);
  }
  const auto digest = sha256(out);
  out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
  return out;
}

Dataset parse_dataset(const std::string& bytes) {
  if (bytes.size() < kPrefix + kDigest || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw DatasetError("not a dataset file (bad magic)");
  }
  const std::size_t body = bytes.size() - kDigest;
  const auto digest = sha256(std::string_view(bytes.data(), body));
  if (std::memcmp(digest.data(), bytes.data() + body, kDigest) != 0) {
    throw DatasetError("dataset checksum mismatch (file truncated or corrupted)");
  }
  Reader rd(bytes, sizeof kMagic, body);
  const std::uint32_t version = rd.u32();
  if (version != kVersion) throw DatasetError("unsupported dataset version " + std::to_string(version));
  rd.u32();
  const std::uint64_t header_len = rd.u64();
  if (header_len > rd.remaining()) throw DatasetError("dataset header is truncated");
  json head;
  try {
    head = json::parse(rd.take(static_cast<std::size_t>(header_len)));
  } catch (const json::exception& e) {
    throw DatasetError(std::string("malformed dataset header: ") + e.what());
  }

  Dataset ds;
  try {
    const json& j = head.at("manifest");
    DatasetManifest& m = ds.manifest;
    m.case_name = j.at("case_name").get<std::string>();
    m.case_hash = j.at("case_hash").get<std::string>();
    m.num_buses = j.at("dims").at("buses").get<std::size_t>();
    m.num_branches = j.at("dims").at("branches").get<std::size_t>();
    m.num_generators = j.at("dims").at("generators").get<std::size_t>();
    m.num_loads = j.at("dims").at("loads").get<std::size_t>();
    m.attempted = j.at("attempted").get<std::size_t>();
    m.converged = j.at("converged").get<std::size_t>();
    m.failed = j.at("failed").get<std::size_t>();
    m.sampler.global_lo = j.at("sampler").at("global_lo").get<double>();
    m.sampler.global_hi = j.at("sampler").at("global_hi").get<double>();
    m.sampler.local_range = j.at("sampler").at("local_range").get<double>();
    m.sampler.seed = j.at("sampler").at("seed").get<std::uint64_t>();
    m.train_fraction = j.at("train_fraction").get<double>();
    m.ac_tol = j.at("ac_tol").get<double>();
    ds.train = j.at("train").get<std::vector<std::size_t>>();
    ds.validation = j.at("validation").get<std::vector<std::size_t>>();
    const auto count = j.at("records").get<std::size_t>();
    ds.records.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
      SampleRecord r;
      r.sample_index = rd.u64();
      r.iterations = static_cast<int>(rd.u64());
      r.objective = rd.f64();
      r.kkt_residual = rd.f64();
      r.pd = rd.vec(m.num_loads);
      r.qd = rd.vec(m.num_loads);
      r.pg = rd.vec(m.num_generators);
      r.pf = rd.vec(m.num_branches);
      r.va = rd.vec(m.num_buses);
      ds.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw DatasetError(std::string("malformed dataset manifest: ") + e.what());
  }
  if (rd.remaining() != 0) throw DatasetError("trailing bytes after dataset records");
  for (auto idx : ds.train)
    if (idx >= ds.records.size()) throw DatasetError("split index out of range");
  for (auto idx : ds.validation)
    if (idx >= ds.records.size()) throw DatasetError("split index out of range");
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) { write_file(path, serialize_dataset(ds)); }

Dataset load_dataset(const std::string& path) { return parse_dataset(read_file(path)); }

Dataset load_dataset(const std::string& path, const GridCase& grid) {
  Dataset ds = load_dataset(path);
  const std::string h = case_hash(grid);
  if (ds.manifest.case_hash != h) {
    throw DatasetError("dataset was generated for case " + ds.manifest.case_hash.substr(0, 12) + " but case " +
                       h.substr(0, 12) + " was given");
  }
  return ds;
}

void export_dataset_csv(const Dataset& ds, const std::string& path) {
  const DatasetManifest& m = ds.manifest;
  std::vector<const char*> split(ds.records.size(), "");
  for (auto k : ds.train) split[k] = "train";
  for (auto k : ds.validation) split[k] = "validation";
  std::string out = "record,sample,split,objective";
  auto columns = [&](const char* name, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) out += "," + std::string(name) + "_" + std::to_string(k);
  };
  columns("pd", m.num_loads);
  columns("qd", m.num_loads);
  columns("pg", m.num_generators);
  columns("pf", m.num_branches);
  columns("va", m.num_buses);
  out += "\n";
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    out += buf;
  };
  for (std::size_t r = 0; r < ds.records.size(); ++r) {
    const SampleRecord& rec = ds.records[r];
    out += std::to_string(r) + "," + std::to_string(rec.sample_index) + "," + split[r];
    num(rec.objective);
    for (const Vec* v : {&rec.pd, &rec.qd, &rec.pg, &rec.pf, &rec.va})
      for (Index k = 0; k < v->size(); ++k) num((*v)[k]);
    out += "\n";
  }
  write_file(path, out);
}

}  // namespace dc2ac
