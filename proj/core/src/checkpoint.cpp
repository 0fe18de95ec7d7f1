#include "vicntm/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "vicntm/errors.hpp"

namespace vicntm {

namespace {

constexpr uint32_t kMagic = 0x564e5441;  // "VNTA"
constexpr uint32_t kFormatVersion = 1;

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_str(std::ostream& out, const std::string& s) {
  write_u32(out, uint32_t(s.size()));
  out.write(s.data(), std::streamsize(s.size()));
}

uint32_t read_u32(std::istream& in, const std::string& path) {
  uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4))
    throw DataError("truncated archive: " + path);
  return v;
}
uint64_t read_u64(std::istream& in, const std::string& path) {
  uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 8))
    throw DataError("truncated archive: " + path);
  return v;
}
std::string read_str(std::istream& in, const std::string& path) {
  uint32_t n = read_u32(in, path);
  if (n > (1u << 20)) throw DataError("archive string too long: " + path);
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw DataError("truncated archive: " + path);
  return s;
}

}  // namespace

const Matrix& TensorArchive::tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors)
    if (n == name) return m;
  throw DataError("archive is missing tensor '" + name + "'");
}

bool TensorArchive::has_tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors)
    if (n == name) return true;
  return false;
}

void TensorArchive::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write archive: " + path);
  write_u32(out, kMagic);
  write_u32(out, kFormatVersion);
  write_u64(out, tensors.size());
  for (const auto& [name, m] : tensors) {
    write_str(out, name);
    write_u64(out, uint64_t(m.rows));
    write_u64(out, uint64_t(m.cols));
    out.write(reinterpret_cast<const char*>(m.data.data()),
              std::streamsize(m.data.size() * sizeof(double)));
  }
  write_u64(out, strings.size());
  for (const auto& [k, v] : strings) {
    write_str(out, k);
    write_str(out, v);
  }
  write_u64(out, ints.size());
  for (const auto& [k, v] : ints) {
    write_str(out, k);
    write_u64(out, v);
  }
  if (!out) throw DataError("write failed: " + path);
}

TensorArchive TensorArchive::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open archive: " + path);
  if (read_u32(in, path) != kMagic)
    throw DataError("not a tensor archive (bad magic): " + path);
  uint32_t ver = read_u32(in, path);
  if (ver != kFormatVersion)
    throw DataError("unsupported archive version " + std::to_string(ver) + ": " + path);
  TensorArchive a;
  uint64_t nt = read_u64(in, path);
  if (nt > (1u << 20)) throw DataError("archive tensor count implausible: " + path);
  for (uint64_t i = 0; i < nt; ++i) {
    std::string name = read_str(in, path);
    uint64_t rows = read_u64(in, path);
    uint64_t cols = read_u64(in, path);
    if (rows > (1u << 24) || cols > (1u << 24) ||
        (rows != 0 && cols > (1ull << 34) / rows))
      throw DataError("archive tensor '" + name + "' has an implausible shape: " + path);
    Matrix m(static_cast<int>(rows), static_cast<int>(cols));
    if (m.size() &&
        !in.read(reinterpret_cast<char*>(m.data.data()),
                 std::streamsize(m.size() * sizeof(double))))
      throw DataError("archive tensor '" + name + "' is truncated: " + path);
    a.tensors.emplace_back(std::move(name), std::move(m));
  }
  uint64_t ns = read_u64(in, path);
  if (ns > (1u << 20)) throw DataError("archive string count implausible: " + path);
  for (uint64_t i = 0; i < ns; ++i) {
    std::string k = read_str(in, path);
    a.strings[k] = read_str(in, path);
  }
  uint64_t ni = read_u64(in, path);
  if (ni > (1u << 20)) throw DataError("archive int count implausible: " + path);
  for (uint64_t i = 0; i < ni; ++i) {
    std::string k = read_str(in, path);
    a.ints[k] = read_u64(in, path);
  }
  char extra;
  if (in.read(&extra, 1))
    throw DataError("archive has trailing bytes: " + path);
  return a;
}

namespace {

void pack_store(TensorArchive& a, const std::string& prefix, const ParamStore& s) {
  for (const auto& name : s.names) a.add(prefix + name, s.value.at(name));
}

void unpack_store(const TensorArchive& a, const std::string& prefix, ParamStore& s) {
  for (const auto& name : s.names) {
    const Matrix& src = a.tensor(prefix + name);
    Matrix& dst = s.at(name);
    if (!src.same_shape(dst))
      throw DataError("checkpoint tensor '" + prefix + name + "' has shape " +
                      src.shape_str() + ", expected " + dst.shape_str());
    dst = src;
  }
}

uint64_t pack_double(double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  return u;
}
double unpack_double(uint64_t u) {
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
  TensorArchive a;
  pack_store(a, "ntm.", model.params);
  a.add("ntm.background", model.background);
  a.add("bn.mu.mean", model.mu_bn.mean);
  a.add("bn.mu.var", model.mu_bn.var);
  a.add("bn.lv.mean", model.lv_bn.mean);
  a.add("bn.lv.var", model.lv_bn.var);
  a.add("bn.dec.mean", model.dec_bn.mean);
  a.add("bn.dec.var", model.dec_bn.var);
  a.add("prior.mean", model.prior.mean);
  a.add("prior.variance", model.prior.variance);
  if (expander) {
    pack_store(a, "exp.", expander->params);
    a.ints["expander.dim"] = uint64_t(expander->dim);
  }
  for (const auto& [name, m] : opt.m) a.add("adam.m." + name, m);
  for (const auto& [name, m] : opt.v) a.add("adam.v." + name, m);

  a.ints["model.vocab"] = uint64_t(model.cfg.vocab);
  a.ints["model.k"] = uint64_t(model.cfg.k);
  a.ints["model.hidden"] = uint64_t(model.cfg.hidden);
  a.ints["model.bn_mix"] = pack_double(model.bn_mix);
  a.ints["prior.alpha"] = pack_double(model.prior.alpha);
  a.ints["adam.step"] = uint64_t(opt.step);
  a.ints["adam.lr"] = pack_double(opt.cfg.lr);
  a.ints["adam.beta1"] = pack_double(opt.cfg.beta1);
  a.ints["adam.beta2"] = pack_double(opt.cfg.beta2);
  a.ints["adam.eps"] = pack_double(opt.cfg.eps);
  a.ints["rng.seed"] = rng_seed;
  a.ints["rng.counter"] = rng_counter;
  a.ints["best_epoch"] = uint64_t(best_epoch);
  a.ints["vocab.hash"] = vocab_hash;
  a.strings["variant"] = variant;
  a.strings["dataset"] = dataset;
  a.strings["manifest"] = manifest_hash;
  a.save(path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  TensorArchive a = TensorArchive::load(path);
  auto get_int = [&](const char* k) -> uint64_t {
    auto it = a.ints.find(k);
    if (it == a.ints.end())
      throw DataError(std::string("checkpoint is missing field '") + k + "': " + path);
    return it->second;
  };
  Checkpoint c;
  NtmConfig cfg;
  cfg.vocab = int(get_int("model.vocab"));
  cfg.k = int(get_int("model.k"));
  cfg.hidden = int(get_int("model.hidden"));
  PriorParams prior = logistic_normal_prior(cfg.k, unpack_double(get_int("prior.alpha")));
  Rng init_rng(0);  // placeholder weights, overwritten below
  c.model = NtmModel::init(cfg, prior, a.tensor("ntm.background"), init_rng);
  unpack_store(a, "ntm.", c.model.params);
  c.model.prior.mean = a.tensor("prior.mean");
  c.model.prior.variance = a.tensor("prior.variance");
  c.model.mu_bn = {a.tensor("bn.mu.mean"), a.tensor("bn.mu.var")};
  c.model.lv_bn = {a.tensor("bn.lv.mean"), a.tensor("bn.lv.var")};
  c.model.dec_bn = {a.tensor("bn.dec.mean"), a.tensor("bn.dec.var")};
  c.model.bn_mix = unpack_double(get_int("model.bn_mix"));
  if (a.ints.count("expander.dim")) {
    Expander e = Expander::init(cfg.k, int(a.ints.at("expander.dim")), init_rng);
    unpack_store(a, "exp.", e.params);
    c.expander = std::move(e);
  }
  c.opt.cfg.lr = unpack_double(get_int("adam.lr"));
  c.opt.cfg.beta1 = unpack_double(get_int("adam.beta1"));
  c.opt.cfg.beta2 = unpack_double(get_int("adam.beta2"));
  c.opt.cfg.eps = unpack_double(get_int("adam.eps"));
  c.opt.step = int64_t(get_int("adam.step"));
  for (const auto& [name, m] : a.tensors) {
    if (name.rfind("adam.m.", 0) == 0) c.opt.m[name.substr(7)] = m;
    if (name.rfind("adam.v.", 0) == 0) c.opt.v[name.substr(7)] = m;
  }
  c.rng_seed = get_int("rng.seed");
  c.rng_counter = get_int("rng.counter");
  c.best_epoch = int(get_int("best_epoch"));
  c.vocab_hash = get_int("vocab.hash");
  c.variant = a.strings.count("variant") ? a.strings.at("variant") : "";
  c.dataset = a.strings.count("dataset") ? a.strings.at("dataset") : "";
  c.manifest_hash = a.strings.count("manifest") ? a.strings.at("manifest") : "";
  if (!c.model.params.at("dec.beta").all_finite())
    throw DataError("checkpoint decoder weights are not finite: " + path);
  return c;
}

}  // namespace vicntm
