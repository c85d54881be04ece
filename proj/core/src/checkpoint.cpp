#include "ferns/checkpoint.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include "ferns/error.hpp"

namespace ferns {
namespace {

constexpr std::string_view kMagic = "FERNCKPT";

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::size_t end)
      : bytes_(bytes), end_(end) {}

  std::size_t offset() const { return pos_; }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= std::uint32_t{bytes_[pos_ + b]} << (8 * b);
    pos_ += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + pos_, bytes_.begin() + pos_ + n);
    pos_ += n;
    return s;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("checkpoint: " + what + " at offset " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) fail("truncated file");
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in bounded pieces.
  while (n > 0) {
    const auto piece = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, piece);
    data += piece;
    n -= piece;
  }
  return static_cast<std::uint32_t>(crc);
}

void write_descriptor(Writer& w, Layer<float>& layer) {
  w.u32(static_cast<std::uint32_t>(layer.kind()));
  std::vector<std::int32_t> ints;
  auto as_i32 = [](auto v) { return static_cast<std::int32_t>(v); };
  std::string name;
  switch (layer.kind()) {
    case LayerKind::kConv: {
      auto& c = static_cast<ConvLayer<float>&>(layer);
      ints = {as_i32(c.in_depth()), as_i32(c.out_depth()), as_i32(c.kernel_h()),
              as_i32(c.kernel_w())};
      break;
    }
    case LayerKind::kFern: {
      auto& f = static_cast<FernLayer<float>&>(layer);
      ints = {as_i32(f.in_depth()), as_i32(f.out_depth()),
              as_i32(f.padding() == Padding::kNone ? 1 : 0),
              as_i32(f.patterns().width())};
      for (const auto& p : f.patterns().patterns()) {
        ints.push_back(as_i32(p.length()));
        for (const auto& o : p.offsets()) {
          ints.push_back(o.dy);
          ints.push_back(o.dx);
        }
      }
      name = f.patterns().name();
      break;
    }
    case LayerKind::kDense: {
      auto& d = static_cast<DenseLayer<float>&>(layer);
      ints = {as_i32(d.inputs()), as_i32(d.outputs())};
      break;
    }
    case LayerKind::kRelu:
    case LayerKind::kMaxPool:
    case LayerKind::kFlatten:
      break;
  }
  w.u32(static_cast<std::uint32_t>(ints.size()));
  for (auto v : ints) w.i32(v);
  if (layer.kind() == LayerKind::kFern) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.raw(name);
  }
}

std::size_t positive(Reader& r, std::int32_t v) {
  if (v <= 0) r.fail("non-positive layer dimension " + std::to_string(v));
  return static_cast<std::size_t>(v);
}

std::unique_ptr<Layer<float>> read_descriptor(Reader& r) {
  const std::size_t at = r.offset();
  const std::uint32_t tag = r.u32();
  const std::uint32_t count = r.u32();
  if (count > (1u << 20)) r.fail("implausible descriptor length");
  std::vector<std::int32_t> ints(count);
  for (auto& v : ints) v = r.i32();
  auto expect = [&](std::size_t n) {
    if (ints.size() != n) r.fail("descriptor for layer kind " + std::to_string(tag) + " has " + std::to_string(ints.size()) + " ints");
  };
  try {
    switch (static_cast<LayerKind>(tag)) {
      case LayerKind::kConv:
        expect(4);
        return std::make_unique<ConvLayer<float>>(
            positive(r, ints[0]), positive(r, ints[1]), positive(r, ints[2]),
            positive(r, ints[3]));
      case LayerKind::kFern: {
        if (ints.size() < 4) r.fail("short fern descriptor");
        const std::size_t branches = positive(r, ints[3]);
        std::vector<IndexPattern> patterns;
        std::size_t q = 4;
        for (std::size_t k = 0; k < branches; ++k) {
          if (q >= ints.size()) r.fail("short fern descriptor");
          const std::size_t len = positive(r, ints[q++]);
          if (q + 2 * len > ints.size()) r.fail("short fern descriptor");
          std::vector<Offset> offsets;
          for (std::size_t m = 0; m < len; ++m, q += 2) {
            offsets.push_back({ints[q], ints[q + 1]});
          }
          patterns.emplace_back(std::move(offsets));
        }
        if (q != ints.size()) r.fail("trailing fern descriptor ints");
        const std::uint32_t name_len = r.u32();
        if (name_len > 4096) r.fail("implausible pattern name length");
        std::string name = r.str(name_len);
        return std::make_unique<FernLayer<float>>(
            positive(r, ints[0]), positive(r, ints[1]),
            PatternSet(std::move(name), std::move(patterns)),
            ints[2] == 1 ? Padding::kNone : Padding::kZero);
      }
      case LayerKind::kDense:
        expect(2);
        return std::make_unique<DenseLayer<float>>(positive(r, ints[0]),
                                                   positive(r, ints[1]));
      case LayerKind::kRelu:
        expect(0);
        return std::make_unique<ReluLayer<float>>();
      case LayerKind::kMaxPool:
        expect(0);
        return std::make_unique<MaxPoolLayer<float>>();
      case LayerKind::kFlatten:
        expect(0);
        return std::make_unique<FlattenLayer<float>>();
    }
  } catch (const ConfigError& e) {
    throw DataError("checkpoint: invalid layer at offset " +
                    std::to_string(at) + ": " + e.what());
  }
  throw DataError("checkpoint: unknown layer kind " + std::to_string(tag) +
                  " at offset " + std::to_string(at));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(Model<float>& model) {
  Writer w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  const Shape& in = model.input_shape();
  w.u32(static_cast<std::uint32_t>(in.c));
  w.u32(static_cast<std::uint32_t>(in.h));
  w.u32(static_cast<std::uint32_t>(in.w));
  w.u32(static_cast<std::uint32_t>(model.size()));
  for (std::size_t q = 0; q < model.size(); ++q) write_descriptor(w, model.layer(q));
  for (const auto& p : model.parameters()) {
    w.u32(static_cast<std::uint32_t>(p.value.size()));
    for (float v : p.value) w.f32(v);
  }
  auto& bytes = w.bytes();
  const std::uint32_t crc = crc_of(bytes.data(), bytes.size());
  w.u32(crc);
  return std::move(bytes);
}

Model<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kMagic.size() ||
      !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw DataError("checkpoint: not a checkpoint (bad magic at offset 0)");
  }
  // The trailing checksum is not part of the payload.
  const std::size_t payload = bytes.size() >= 4 ? bytes.size() - 4 : 0;
  Reader r(bytes, payload);
  (void)r.str(kMagic.size());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported format version " +
                    std::to_string(version) + " at offset 8 (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  Model<float> model;
  const std::uint32_t c = r.u32(), h = r.u32(), w = r.u32();
  model.set_input_shape({1, c, h, w});
  const std::uint32_t layers = r.u32();
  if (layers > 4096) r.fail("implausible layer count");
  for (std::uint32_t q = 0; q < layers; ++q) {
    const std::size_t at = r.offset();
    auto layer = read_descriptor(r);
    try {
      model.add(std::move(layer));
    } catch (const ConfigError& e) {
      throw DataError("checkpoint: incompatible layer at offset " +
                      std::to_string(at) + ": " + e.what());
    }
  }
  for (auto& p : model.parameters()) {
    const std::size_t at = r.offset();
    const std::uint32_t count = r.u32();
    if (count != p.value.size()) {
      throw DataError("checkpoint: parameter block " + p.name + " at offset " +
                      std::to_string(at) + " holds " + std::to_string(count) +
                      " values, expected " + std::to_string(p.value.size()));
    }
    for (auto& v : p.value) v = r.f32();
  }
  if (r.offset() != payload || bytes.size() < 4) {
    r.fail(bytes.size() < 4 ? "truncated file" : "unexpected trailing bytes");
  }
  Reader trailer(bytes, bytes.size());
  (void)trailer.str(payload);
  const std::uint32_t stored = trailer.u32();
  if (stored != crc_of(bytes.data(), payload)) {
    throw DataError("checkpoint: checksum mismatch at offset " +
                    std::to_string(payload));
  }
  return model;
}

void save_checkpoint(Model<float>& model, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Model<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace ferns
