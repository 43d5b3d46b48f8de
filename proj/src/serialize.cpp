#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "imdn/model.hpp"

// Layout (all integers little-endian):
//   "IMDNW1" | u32 version | config block | records until end of file
//   config block: u32 scale, u32 num_blocks, u32 flags, u32 variant,
//                 u32 channels, u32 distilled, u32 cca_squeeze, f64 leaky_slope
//   record: u16 name_len, name, u8 rank, u32 dims[rank], f64 payload[prod(dims)]
namespace imdn {

namespace {

constexpr char kMagic[6] = {'I', 'M', 'D', 'N', 'W', '1'};

constexpr std::uint32_t kFlagCca = 1u << 0;
constexpr std::uint32_t kFlagIic = 1u << 1;
constexpr std::uint32_t kFlagAnyScale = 1u << 2;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename UInt>
  void uint(UInt v) {
    for (std::size_t i = 0; i < sizeof(UInt); ++i)
      out_.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
  }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  bool done() const { return pos_ == in_.size(); }

  void need(std::size_t n) const {
    if (in_.size() - pos_ < n)
      fail(ErrorCode::bad_format, "weight file truncated at byte " + std::to_string(pos_));
  }
  template <typename UInt>
  UInt uint() {
    need(sizeof(UInt));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i)
      v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += sizeof(UInt);
    return static_cast<UInt>(v);
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_tensor(Writer& w, const std::string& name, const Tensor& t, bool as_vector) {
  w.uint<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
  w.bytes(name.data(), name.size());
  if (as_vector) {
    w.uint<std::uint8_t>(1);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(t.numel()));
  } else {
    w.uint<std::uint8_t>(4);
    for (int d : {t.n(), t.c(), t.h(), t.w()}) w.uint<std::uint32_t>(static_cast<std::uint32_t>(d));
  }
  for (double v : t.data()) w.f64(v);
}

}  // namespace

std::vector<std::uint8_t> serialize_weights(const Model& model) {
  const ImdnConfig& c = model.config();
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.uint<std::uint32_t>(kWeightFormatVersion);
  std::uint32_t flags = 0;
  if (c.use_cca) flags |= kFlagCca;
  if (c.use_iic) flags |= kFlagIic;
  if (c.topology == Topology::any_scale) flags |= kFlagAnyScale;
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.scale));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.num_blocks));
  w.uint<std::uint32_t>(flags);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.block));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.channels));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.distilled));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.cca_squeeze));
  w.f64(c.leaky_slope);
  for (const LayerSlot& l : model.layers()) {
    write_tensor(w, l.name + ".weight", l.weight.value(), false);
    write_tensor(w, l.name + ".bias", l.bias.value(), true);
  }
  return w.take();
}

Model deserialize_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    fail(ErrorCode::bad_format, "not a weight file (bad magic)");
  Reader r(bytes.subspan(sizeof(kMagic)));
  const auto version = r.uint<std::uint32_t>();
  if (version != kWeightFormatVersion)
    fail(ErrorCode::bad_format, "unsupported weight file version " + std::to_string(version));

  ImdnConfig c;
  c.scale = static_cast<int>(r.uint<std::uint32_t>());
  c.num_blocks = static_cast<int>(r.uint<std::uint32_t>());
  const auto flags = r.uint<std::uint32_t>();
  const auto block = r.uint<std::uint32_t>();
  if (block > static_cast<std::uint32_t>(BlockKind::plain3))
    fail(ErrorCode::bad_format, "unknown block variant id " + std::to_string(block));
  c.block = static_cast<BlockKind>(block);
  c.channels = static_cast<int>(r.uint<std::uint32_t>());
  c.distilled = static_cast<int>(r.uint<std::uint32_t>());
  c.coarse = c.channels - c.distilled;
  c.cca_squeeze = static_cast<int>(r.uint<std::uint32_t>());
  c.leaky_slope = r.f64();
  c.use_cca = (flags & kFlagCca) != 0;
  c.use_iic = (flags & kFlagIic) != 0;
  c.topology = (flags & kFlagAnyScale) ? Topology::any_scale : Topology::standard;

  Model model = [&] {
    try {
      return Model(c);
    } catch (const Error& e) {
      fail(ErrorCode::bad_format, std::string("weight file config rejected: ") + e.what());
    }
  }();

  const std::size_t expected = model.layers().size() * 2;
  std::vector<bool> seen(expected, false);
  while (!r.done()) {
    const auto name_len = r.uint<std::uint16_t>();
    const std::string name = r.string(name_len);
    const auto rank = r.uint<std::uint8_t>();
    if (rank != 1 && rank != 4)
      fail(ErrorCode::bad_format, "record '" + name + "' has unsupported rank");
    std::vector<std::uint32_t> dims(rank);
    std::size_t count = 1;
    for (auto& d : dims) {
      d = r.uint<std::uint32_t>();
      count *= d;
    }

    const auto dot = name.rfind('.');
    const std::string layer_name = dot == std::string::npos ? name : name.substr(0, dot);
    const std::string field = dot == std::string::npos ? "" : name.substr(dot + 1);
    if (!model.has_layer(layer_name) || (field != "weight" && field != "bias"))
      fail(ErrorCode::bad_format, "record '" + name + "' does not belong to this architecture");
    LayerSlot& slot = model.layer(layer_name);
    Tensor& target = field == "weight" ? slot.weight.mutable_value() : slot.bias.mutable_value();
    const bool shape_ok =
        rank == 4 ? (static_cast<int>(dims[0]) == target.n() && static_cast<int>(dims[1]) == target.c() &&
                     static_cast<int>(dims[2]) == target.h() && static_cast<int>(dims[3]) == target.w())
                  : count == target.numel();
    if (!shape_ok || count != target.numel())
      fail(ErrorCode::shape_mismatch, "record '" + name + "' has shape mismatch");
    r.need(count * sizeof(double));
    for (double& v : target.data()) v = r.f64();

    const auto idx = static_cast<std::size_t>(&slot - model.layers().data()) * 2 +
                     (field == "weight" ? 0 : 1);
    if (seen[idx]) fail(ErrorCode::bad_format, "record '" + name + "' appears twice");
    seen[idx] = true;
  }
  for (std::size_t i = 0; i < expected; ++i)
    if (!seen[i])
      fail(ErrorCode::bad_format, "weight file is missing '" + model.layers()[i / 2].name +
                                      (i % 2 ? ".bias'" : ".weight'"));
  return model;
}

void save_weights(const Model& model, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = serialize_weights(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_failure, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::io_failure, "failed writing '" + path.string() + "'");
}

Model load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_failure, "cannot open weight file '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_weights(bytes);
}

}  // namespace imdn
