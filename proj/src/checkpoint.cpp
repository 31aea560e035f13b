#include "relparcel/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "relparcel/errors.hpp"

namespace relparcel {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(const std::string& s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  const std::string& buffer() const { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class Reader {
 public:
  Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == data_.size(); }
  [[noreturn]] void fail(const std::string& what) const { throw DataError("checkpoint '" + path_ + "': " + what); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) fail("truncated");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& config, const Model& model,
                     const OptimizerState& optimizer, std::uint64_t epoch) {
  Writer w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  const std::string snapshot = to_config(config).dump();
  w.u64(snapshot.size());
  w.bytes(snapshot);
  w.u64(epoch);
  const auto params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name);
    w.u32(static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto d : p.tensor.shape()) w.u64(d);
    for (double v : p.tensor.data()) w.f64(v);
  }
  w.f64(optimizer.lr);
  w.f64(optimizer.beta1);
  w.f64(optimizer.beta2);
  w.f64(optimizer.epsilon);
  w.u64(optimizer.step);
  w.u32(static_cast<std::uint32_t>(optimizer.first_moment.size()));
  for (std::size_t k = 0; k < optimizer.first_moment.size(); ++k) {
    w.u64(optimizer.first_moment[k].size());
    for (double v : optimizer.first_moment[k]) w.f64(v);
    for (double v : optimizer.second_moment[k]) w.f64(v);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}), path);
  if (r.bytes(std::strlen(kCheckpointMagic)) != kCheckpointMagic) r.fail("bad magic (not a RELPARCEL1 file)");
  if (const auto v = r.u32(); v != kCheckpointVersion) r.fail("unsupported version " + std::to_string(v));

  Checkpoint ck;
  const std::string snapshot = r.bytes(r.u64());
  try {
    ck.config = run_config_from(ConfigDocument::parse(snapshot, path + " (config snapshot)"));
  } catch (const ConfigError& e) {
    r.fail(std::string("invalid config snapshot: ") + e.what());
  }
  ck.epoch = r.u64();
  ck.model = build_model(ck.config.model, 0);
  auto params = ck.model.parameters();
  const auto count = r.u32();
  if (count != params.size()) {
    r.fail("holds " + std::to_string(count) + " tensors, config implies " + std::to_string(params.size()));
  }
  for (auto& p : params) {
    const std::string name = r.bytes(r.u32());
    if (name != p.name) r.fail("expected tensor '" + p.name + "', found '" + name + "'");
    Shape shape(r.u32());
    for (auto& d : shape) d = r.u64();
    if (shape != p.tensor.shape()) {
      r.fail("tensor '" + name + "' has shape " + shape_str(shape) + ", expected " + shape_str(p.tensor.shape()));
    }
    for (auto& v : p.tensor.mutable_data()) v = r.f64();
  }
  ck.optimizer.lr = r.f64();
  ck.optimizer.beta1 = r.f64();
  ck.optimizer.beta2 = r.f64();
  ck.optimizer.epsilon = r.f64();
  ck.optimizer.step = r.u64();
  const auto moments = r.u32();
  if (moments != 0 && moments != params.size()) r.fail("optimizer moment count does not match parameters");
  for (std::uint32_t k = 0; k < moments; ++k) {
    const auto n = r.u64();
    if (n != params[k].tensor.numel()) r.fail("optimizer moment size mismatch");
    std::vector<double> m(n), v(n);
    for (auto& x : m) x = r.f64();
    for (auto& x : v) x = r.f64();
    ck.optimizer.first_moment.push_back(std::move(m));
    ck.optimizer.second_moment.push_back(std::move(v));
  }
  if (!r.at_end()) r.fail("trailing bytes");
  return ck;
}

}  // namespace relparcel
