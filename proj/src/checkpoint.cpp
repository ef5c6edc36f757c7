#include "qpme/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "qpme/errors.hpp"

namespace qpme {

AdamState AdamState::fresh(std::size_t n, double lr) {
  AdamState s;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  s.lr = lr;
  return s;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

constexpr char kMagic[] = "QPMECKP1";
constexpr std::uint32_t kVersion = 1;

template <class U>
U to_le(U v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  U out = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) out = (out << 8) | ((v >> (8 * i)) & 0xff);
  return out;
}

class Writer {
 public:
  template <class U>
  void uint(U v) {
    v = to_le(v);
    out_.append(reinterpret_cast<const char*>(&v), sizeof(U));
  }
  void f64(double d) { uint(std::bit_cast<std::uint64_t>(d)); }
  void f64s(const std::vector<double>& v) {
    for (double d : v) f64(d);
  }
  void text(std::string_view s) {
    uint<std::uint64_t>(s.size());
    out_.append(s);
  }
  void raw(std::string_view s) { out_.append(s); }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  template <class U>
  U uint() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, in_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return to_le(v);
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::vector<double> f64s(std::uint64_t n) {
    need(n * 8);
    std::vector<double> v(n);
    for (auto& d : v) d = f64();
    return v;
  }
  std::string text() {
    const auto n = uint<std::uint64_t>();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    const auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_) throw IoError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  std::size_t expected = 0;
  for (const auto& s : c.nets) expected += s.num_params();
  if (expected != c.params.size()) throw ContractError("checkpoint parameters do not match the network specs");
  Writer w;
  w.raw(std::string_view(kMagic, 8));
  w.uint(kVersion);
  w.uint<std::uint64_t>(c.seed);
  w.uint<std::uint64_t>(c.step);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.nets.size()));
  for (const auto& s : c.nets) {
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(s.input_dim));
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(s.hidden_widths.size()));
    for (auto h : s.hidden_widths) w.uint<std::uint32_t>(static_cast<std::uint32_t>(h));
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(s.activation));
  }
  w.text(c.meta);
  w.uint<std::uint64_t>(c.params.size());
  w.f64s(c.params.data);
  w.uint<std::uint8_t>(c.optimizer ? 1 : 0);
  if (c.optimizer) {
    const AdamState& a = c.optimizer->adam;
    if (a.m.size() != c.params.size() || a.v.size() != c.params.size())
      throw ContractError("optimizer moments do not match the parameter count");
    w.uint<std::uint64_t>(a.step);
    w.f64(a.beta1);
    w.f64(a.beta2);
    w.f64(a.eps);
    w.f64(a.lr);
    w.f64s(a.m);
    w.f64s(a.v);
    w.text(c.optimizer->rng_state);
  }
  w.uint<std::uint64_t>(fnv1a(w.bytes()));
  return std::move(w.bytes());
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 8) != std::string_view(kMagic, 8))
    throw IoError("not a checkpoint file (bad magic)");
  Reader r(bytes);
  r.raw(8);
  const auto version = r.uint<std::uint32_t>();
  if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.seed = r.uint<std::uint64_t>();
  c.step = r.uint<std::uint64_t>();
  const auto n_nets = r.uint<std::uint32_t>();
  if (n_nets == 0 || n_nets > 16) throw IoError("checkpoint declares " + std::to_string(n_nets) + " networks");
  for (std::uint32_t k = 0; k < n_nets; ++k) {
    MlpSpec s;
    s.input_dim = r.uint<std::uint32_t>();
    const auto depth = r.uint<std::uint32_t>();
    if (depth == 0 || depth > 64) throw IoError("checkpoint declares depth " + std::to_string(depth));
    s.hidden_widths.resize(depth);
    for (auto& h : s.hidden_widths) h = r.uint<std::uint32_t>();
    const auto act = r.uint<std::uint32_t>();
    if (act > 1) throw IoError("unknown activation id " + std::to_string(act));
    s.activation = static_cast<Activation>(act);
    try {
      s.validate();
    } catch (const ContractError& e) {
      throw IoError(std::string("bad network spec in checkpoint: ") + e.what());
    }
    c.nets.push_back(s);
  }
  c.meta = r.text();
  const auto n = r.uint<std::uint64_t>();
  std::size_t expected = 0;
  for (const auto& s : c.nets) expected += s.num_params();
  if (n != expected) throw IoError("checkpoint holds " + std::to_string(n) + " parameters, specs need " + std::to_string(expected));
  c.params.data = r.f64s(n);
  const auto flag = r.uint<std::uint8_t>();
  if (flag > 1) throw IoError("bad optimizer flag");
  if (flag == 1) {
    OptimizerSnapshot o;
    o.adam.step = r.uint<std::uint64_t>();
    o.adam.beta1 = r.f64();
    o.adam.beta2 = r.f64();
    o.adam.eps = r.f64();
    o.adam.lr = r.f64();
    o.adam.m = r.f64s(n);
    o.adam.v = r.f64s(n);
    o.rng_state = r.text();
    c.optimizer = std::move(o);
  }
  const std::size_t body = r.pos();
  const auto stored = r.uint<std::uint64_t>();
  if (r.pos() != bytes.size()) throw IoError("trailing bytes after checkpoint");
  if (stored != fnv1a(bytes.substr(0, body))) throw IoError("checkpoint checksum mismatch");
  return c;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os.flush()) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace qpme
