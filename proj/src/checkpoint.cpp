#include "sarl/checkpoint.hpp"

#include <bit>
#include <cstring>

namespace sarl {

namespace {

constexpr char kMagic[8] = {'S', 'A', 'R', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void count(Index v) {
    if (v < 0 || v > static_cast<Index>(UINT32_MAX)) throw FormatError("checkpoint: value does not fit in u32");
    u32(static_cast<std::uint32_t>(v));
  }
  void text(const std::string& s) {
    count(static_cast<Index>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  void tensors(const ParameterSet<float>& ps) {
    count(static_cast<Index>(ps.size()));
    for (const auto& e : ps) {
      text(e.name);
      count(e.value.rank());
      for (Index d : e.value.shape()) count(d);
      for (Index i = 0; i < e.value.size(); ++i) u32(std::bit_cast<std::uint32_t>(e.value[i]));
    }
  }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  void need(std::size_t n, const char* what) const {
    if (offset_ + n > bytes_.size()) {
      throw FormatError(std::string("checkpoint truncated reading ") + what + " at byte offset " + std::to_string(offset_) +
                        ": need " + std::to_string(n) + " bytes, " + std::to_string(bytes_.size() - offset_) + " left");
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[offset_ + static_cast<std::size_t>(i)]) << (8 * i);
    offset_ += 4;
    return v;
  }
  std::string text(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(offset_), bytes_.begin() + static_cast<std::ptrdiff_t>(offset_ + n));
    offset_ += n;
    return s;
  }
  ParameterSet<float> tensors() {
    ParameterSet<float> ps;
    const std::uint32_t n = u32("tensor count");
    for (std::uint32_t t = 0; t < n; ++t) {
      std::string name = text("tensor name");
      const std::uint32_t rank = u32("tensor rank");
      if (rank > 8) throw FormatError("checkpoint: tensor '" + name + "' has rank " + std::to_string(rank));
      Shape shape;
      for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(u32("tensor dims"));
      Tensor<float> value(shape);
      need(static_cast<std::size_t>(value.size()) * 4, "tensor values");
      for (Index i = 0; i < value.size(); ++i) value[i] = std::bit_cast<float>(u32("tensor values"));
      ps.add(std::move(name), std::move(value));
    }
    return ps;
  }
  void magic() {
    need(sizeof(kMagic), "magic");
    if (std::memcmp(bytes_.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError("checkpoint: bad magic at byte offset 0");
    offset_ += sizeof(kMagic);
  }
  bool done() const { return offset_ == bytes_.size(); }
  std::size_t offset() const { return offset_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t offset_ = 0;
};

}  // namespace

ModelConfig Checkpoint::model_config() const {
  Dataset shape_only{kind, sample_shape, classes, {}};
  return config.model_config(shape_only);
}

bool operator==(const Checkpoint& a, const Checkpoint& b) {
  return to_text(a.config) == to_text(b.config) && a.kind == b.kind && a.sample_shape == b.sample_shape &&
         a.classes == b.classes && a.params == b.params && a.ema == b.ema;
}

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt) {
  Writer w;
  w.bytes.assign(kMagic, kMagic + sizeof(kMagic));
  w.u32(kVersion);
  w.text(to_text(ckpt.config));
  w.u32(static_cast<std::uint32_t>(ckpt.kind));
  w.count(ckpt.classes);
  w.count(static_cast<Index>(ckpt.sample_shape.size()));
  for (Index d : ckpt.sample_shape) w.count(d);
  w.u32(ckpt.ema ? 1u : 0u);
  w.tensors(ckpt.params);
  if (ckpt.ema) w.tensors(*ckpt.ema);
  return std::move(w.bytes);
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.magic();
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version) + " at byte offset 8");
  Checkpoint c;
  apply_key_values(c.config, parse_key_values(r.text("config")));
  const std::uint32_t kind = r.u32("payload kind");
  if (kind > 1) throw FormatError("checkpoint: unknown payload kind " + std::to_string(kind));
  c.kind = static_cast<PayloadKind>(kind);
  c.classes = r.u32("classes");
  const std::uint32_t rank = r.u32("sample rank");
  if (rank < 1 || rank > 3) throw FormatError("checkpoint: sample rank " + std::to_string(rank));
  for (std::uint32_t i = 0; i < rank; ++i) c.sample_shape.push_back(r.u32("sample dims"));
  const std::uint32_t flags = r.u32("flags");
  c.params = r.tensors();
  if (flags & 1u) c.ema = r.tensors();
  if (!r.done()) throw FormatError("checkpoint: trailing data at byte offset " + std::to_string(r.offset()));
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) { write_file(path, serialize(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace sarl
