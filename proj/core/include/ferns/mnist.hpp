#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "ferns/tensor.hpp"

namespace ferns {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::size_t kMnistClasses = 10;

/// Grey-scale images in [0, 1] with integer labels.
struct Dataset {
  Tensor images;  // (N, 1, rows, cols)
  std::vector<int> labels;
  std::vector<std::vector<std::size_t>> by_class;

  std::size_t size() const { return labels.size(); }
  /// Rebuilds `by_class` from `labels`.
  void index_classes(std::size_t classes = kMnistClasses);
  /// Copies the listed samples into a new dataset.
  Dataset subset(std::span<const std::size_t> rows) const;
};

/// Parses big-endian IDX image/label files; bytes are scaled by 1/255.
/// Throws DataError naming the byte offset on any malformation.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);
Dataset parse_idx(std::span<const std::uint8_t> image_bytes,
                  std::span<const std::uint8_t> label_bytes);

/// Inverse of parse_idx for [0, 1] images (values rounded to bytes).
std::vector<std::uint8_t> encode_idx_images(const Tensor& images);
std::vector<std::uint8_t> encode_idx_labels(std::span<const int> labels);

/// Standard MNIST file names inside `dir`.
Dataset load_mnist_train(const std::filesystem::path& dir);
Dataset load_mnist_test(const std::filesystem::path& dir);

struct Batch {
  Tensor images;
  std::vector<int> labels;
};

/// Class-balanced mini-batches: batch_size / classes samples per class.
///
/// Each class keeps its own shuffled order and cursor; a class is reshuffled
/// only once all of its samples have been drawn, so no sample repeats within
/// a cycle of its class.
class BalancedSampler {
 public:
  BalancedSampler(const Dataset& data, std::size_t batch_size,
                  std::uint32_t seed);

  std::size_t batch_size() const { return batch_size_; }
  Batch next();

 private:
  std::size_t draw(std::size_t cls);

  const Dataset& data_;
  std::size_t batch_size_;
  std::size_t per_class_;
  std::mt19937 rng_;
  std::vector<std::vector<std::size_t>> order_;
  std::vector<std::size_t> cursor_;
};

/// Per image: amplitude a ~ U(0, max_fraction); each pixel += U(-a, a); then
/// clamp to [0, 1].
void augment_noise(Tensor& images, double max_fraction, std::mt19937& rng);

}  // namespace ferns
