#include "ferns/mnist.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "ferns/error.hpp"

namespace ferns {
namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(std::span<const std::uint8_t> bytes, std::size_t at,
                   const char* what) {
  if (at + 4 > bytes.size()) {
    throw DataError(std::string("IDX ") + what + ": truncated header at offset " +
                    std::to_string(at));
  }
  return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
         (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

}  // namespace

void Dataset::index_classes(std::size_t classes) {
  by_class.assign(classes, {});
  for (std::size_t q = 0; q < labels.size(); ++q) {
    by_class[static_cast<std::size_t>(labels[q])].push_back(q);
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  const Shape& s = images.shape();
  Dataset out;
  out.images = Tensor({rows.size(), s.c, s.h, s.w});
  out.labels.reserve(rows.size());
  for (std::size_t q = 0; q < rows.size(); ++q) {
    auto src = images.sample(rows[q]);
    std::copy(src.begin(), src.end(), out.images.sample(q).begin());
    out.labels.push_back(labels[rows[q]]);
  }
  out.index_classes(by_class.empty() ? kMnistClasses : by_class.size());
  return out;
}

Dataset parse_idx(std::span<const std::uint8_t> image_bytes,
                  std::span<const std::uint8_t> label_bytes) {
  const std::uint32_t im_magic = be32(image_bytes, 0, "images");
  if (im_magic != kIdxImageMagic) {
    throw DataError("IDX images: bad magic at offset 0");
  }
  const std::uint32_t count = be32(image_bytes, 4, "images");
  const std::uint32_t rows = be32(image_bytes, 8, "images");
  const std::uint32_t cols = be32(image_bytes, 12, "images");
  const std::size_t pixels = std::size_t{rows} * cols;
  const std::size_t expected = 16 + std::size_t{count} * pixels;
  if (image_bytes.size() < expected) {
    throw DataError("IDX images: truncated pixel data at offset " +
                    std::to_string(image_bytes.size()) + " (expected " +
                    std::to_string(expected) + " bytes)");
  }
  if (image_bytes.size() > expected) {
    throw DataError("IDX images: trailing bytes at offset " +
                    std::to_string(expected));
  }

  const std::uint32_t lb_magic = be32(label_bytes, 0, "labels");
  if (lb_magic != kIdxLabelMagic) {
    throw DataError("IDX labels: bad magic at offset 0");
  }
  const std::uint32_t label_count = be32(label_bytes, 4, "labels");
  if (label_count != count) {
    throw DataError("IDX labels: count " + std::to_string(label_count) +
                    " at offset 4 does not match " + std::to_string(count) +
                    " images");
  }
  if (label_bytes.size() != 8 + std::size_t{count}) {
    throw DataError("IDX labels: expected " + std::to_string(8 + count) +
                    " bytes, file has " + std::to_string(label_bytes.size()));
  }

  Dataset data;
  data.images = Tensor({count, 1, rows, cols});
  auto dst = data.images.data();
  for (std::size_t q = 0; q < dst.size(); ++q) {
    dst[q] = static_cast<float>(image_bytes[16 + q]) / 255.0f;
  }
  data.labels.resize(count);
  for (std::size_t q = 0; q < count; ++q) {
    const std::uint8_t label = label_bytes[8 + q];
    if (label >= kMnistClasses) {
      throw DataError("IDX labels: label " + std::to_string(label) +
                      " at offset " + std::to_string(8 + q) +
                      " outside [0, 10)");
    }
    data.labels[q] = label;
  }
  data.index_classes();
  return data;
}

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  try {
    return parse_idx(images, labels);
  } catch (const DataError& e) {
    throw DataError(images_path.filename().string() + "/" +
                    labels_path.filename().string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_idx_images(const Tensor& images) {
  const Shape& s = images.shape();
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.size());
  put_be32(out, kIdxImageMagic);
  put_be32(out, static_cast<std::uint32_t>(s.n));
  put_be32(out, static_cast<std::uint32_t>(s.h));
  put_be32(out, static_cast<std::uint32_t>(s.w));
  for (float v : images.data()) {
    const float clamped = std::clamp(v, 0.0f, 1.0f);
    out.push_back(static_cast<std::uint8_t>(std::lround(clamped * 255.0f)));
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const int> labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  put_be32(out, kIdxLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) out.push_back(static_cast<std::uint8_t>(l));
  return out;
}

Dataset load_mnist_train(const std::filesystem::path& dir) {
  return load_idx(dir / "train-images-idx3-ubyte",
                  dir / "train-labels-idx1-ubyte");
}

Dataset load_mnist_test(const std::filesystem::path& dir) {
  return load_idx(dir / "t10k-images-idx3-ubyte",
                  dir / "t10k-labels-idx1-ubyte");
}

BalancedSampler::BalancedSampler(const Dataset& data, std::size_t batch_size,
                                 std::uint32_t seed)
    : data_(data), batch_size_(batch_size), rng_(seed) {
  const std::size_t classes = data.by_class.size();
  if (classes == 0 || batch_size == 0 || batch_size % classes != 0) {
    throw ConfigError("batch size " + std::to_string(batch_size) +
                      " is not a positive multiple of the " +
                      std::to_string(classes) + " classes");
  }
  per_class_ = batch_size / classes;
  order_ = data.by_class;
  for (std::size_t c = 0; c < classes; ++c) {
    if (order_[c].empty()) {
      throw ConfigError("class " + std::to_string(c) + " has no samples");
    }
    std::shuffle(order_[c].begin(), order_[c].end(), rng_);
  }
  cursor_.assign(classes, 0);
}

std::size_t BalancedSampler::draw(std::size_t cls) {
  auto& order = order_[cls];
  if (cursor_[cls] == order.size()) {
    std::shuffle(order.begin(), order.end(), rng_);
    cursor_[cls] = 0;
  }
  return order[cursor_[cls]++];
}

Batch BalancedSampler::next() {
  std::vector<std::size_t> rows;
  rows.reserve(batch_size_);
  for (std::size_t c = 0; c < order_.size(); ++c) {
    for (std::size_t q = 0; q < per_class_; ++q) rows.push_back(draw(c));
  }
  std::shuffle(rows.begin(), rows.end(), rng_);
  Dataset picked = data_.subset(rows);
  return {std::move(picked.images), std::move(picked.labels)};
}

void augment_noise(Tensor& images, double max_fraction, std::mt19937& rng) {
  if (max_fraction < 0.0 || max_fraction > 1.0) {
    throw ConfigError("noise fraction must lie in [0, 1]");
  }
  if (max_fraction == 0.0) return;
  std::uniform_real_distribution<double> amp(0.0, max_fraction);
  const std::size_t n = images.shape().n;
  for (std::size_t s = 0; s < n; ++s) {
    const double a = amp(rng);
    std::uniform_real_distribution<double> noise(-a, a);
    for (float& v : images.sample(s)) {
      v = std::clamp(static_cast<float>(v + noise(rng)), 0.0f, 1.0f);
    }
  }
}

}  // namespace ferns
