#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsstdp/signal.hpp"

namespace dsstdp {

inline constexpr std::size_t kImagePixels = 784;
inline constexpr std::size_t kClasses = 10;

struct ImageSample {
  std::array<std::uint8_t, kImagePixels> pixels{};
  std::uint8_t label = 0;
};

class IdxError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, bad_dimensions, truncated, count_mismatch, bad_label };
  IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Reads an IDX image file (magic 0x00000803, 28x28) and its label file
/// (magic 0x00000801). Throws IdxError.
std::vector<ImageSample> load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Conventional file names inside an MNIST directory.
struct MnistFiles {
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  static MnistFiles in(const std::filesystem::path& dir);
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Draws `per_class` samples of every label into `train` and leaves the rest
/// in `validation`. Both lists are in a seeded random order. Throws
/// std::runtime_error when a class has fewer than `per_class` samples.
Split split_train_val(std::span<const ImageSample> samples, std::uint64_t seed, std::size_t per_class = 5000);

/// Class-balanced subset of `pool` (indices into `samples`), `per_class` of
/// each label, taken in pool order.
std::vector<std::size_t> balanced_subset(std::span<const ImageSample> samples, std::span<const std::size_t> pool,
                                         std::size_t per_class);

/// Homogeneous Poisson rate coding of pixel intensities.
struct PoissonEncoder {
  double max_rate_hz = 127.5;
  double duration_ms = 250.0;
  double dt_ms = 1.0;

  std::size_t steps() const;
  double rate_hz(std::uint8_t pixel) const { return static_cast<double>(pixel) / 255.0 * max_rate_hz; }

  /// Spike times (ms, ascending, all < duration) for a constant rate, drawn
  /// from the stream identified by `stream_seed`.
  std::vector<double> spike_times(double rate_hz, std::uint64_t stream_seed) const;
  /// Encodes every pixel; pixel p uses stream derive_seed({key, p}).
  SpikeRaster encode(std::span<const std::uint8_t> pixels, std::uint64_t key) const;
};

/// In-place Fisher-Yates shuffle driven by SplitMix64(seed).
void seeded_shuffle(std::span<std::size_t> v, std::uint64_t seed);

/// Stream key for presentation `presentation` of sample `index`.
std::uint64_t encoding_key(std::uint64_t seed, std::uint64_t presentation, std::uint64_t index);

}  // namespace dsstdp
