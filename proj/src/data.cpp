#include "dsstdp/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "dsstdp/rng.hpp"

namespace dsstdp {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset, const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) throw IdxError(IdxError::Kind::truncated, path.string() + ": truncated header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

// Fisher-Yates with our own generator so the order is the same on every
// standard library.
void seeded_shuffle(std::span<std::size_t> v, std::uint64_t seed) {
  SplitMix64 gen(seed);
  for (std::size_t k = v.size(); k > 1; --k) {
    const auto r = static_cast<std::size_t>(gen() % k);
    std::swap(v[k - 1], v[r]);
  }
}

std::vector<ImageSample> load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);

  if (read_be32(img, 0, images) != 0x00000803) throw IdxError(IdxError::Kind::bad_magic, images.string() + ": bad image magic");
  if (read_be32(lab, 0, labels) != 0x00000801) throw IdxError(IdxError::Kind::bad_magic, labels.string() + ": bad label magic");

  const std::size_t n_images = read_be32(img, 4, images);
  const std::size_t rows = read_be32(img, 8, images);
  const std::size_t cols = read_be32(img, 12, images);
  const std::size_t n_labels = read_be32(lab, 4, labels);
  if (rows * cols != kImagePixels) {
    throw IdxError(IdxError::Kind::bad_dimensions,
                   images.string() + ": images are " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (img.size() < 16 + n_images * kImagePixels) throw IdxError(IdxError::Kind::truncated, images.string() + ": truncated");
  if (lab.size() < 8 + n_labels) throw IdxError(IdxError::Kind::truncated, labels.string() + ": truncated");
  if (n_images != n_labels) {
    throw IdxError(IdxError::Kind::count_mismatch, std::to_string(n_images) + " images but " +
                                                       std::to_string(n_labels) + " labels");
  }

  std::vector<ImageSample> out(n_images);
  for (std::size_t s = 0; s < n_images; ++s) {
    const auto* src = img.data() + 16 + s * kImagePixels;
    std::copy(src, src + kImagePixels, out[s].pixels.begin());
    const auto label = lab[8 + s];
    if (label >= kClasses) throw IdxError(IdxError::Kind::bad_label, labels.string() + ": label out of range");
    out[s].label = label;
  }
  return out;
}

MnistFiles MnistFiles::in(const std::filesystem::path& dir) {
  auto pick = [&](const char* dotted, const char* dashed) {
    const auto a = dir / dotted;
    return std::filesystem::exists(a) ? a : dir / dashed;
  };
  return {pick("train-images.idx3-ubyte", "train-images-idx3-ubyte"),
          pick("train-labels.idx1-ubyte", "train-labels-idx1-ubyte"),
          pick("t10k-images.idx3-ubyte", "t10k-images-idx3-ubyte"),
          pick("t10k-labels.idx1-ubyte", "t10k-labels-idx1-ubyte")};
}

Split split_train_val(std::span<const ImageSample> samples, std::uint64_t seed, std::size_t per_class) {
  std::array<std::vector<std::size_t>, kClasses> by_class;
  for (std::size_t s = 0; s < samples.size(); ++s) by_class[samples[s].label].push_back(s);
  Split split;
  for (std::size_t k = 0; k < kClasses; ++k) {
    auto& idx = by_class[k];
    if (idx.size() < per_class) {
      throw std::runtime_error("split: class " + std::to_string(k) + " has " + std::to_string(idx.size()) +
                               " samples, need " + std::to_string(per_class));
    }
    seeded_shuffle(idx, derive_seed({seed, 0x53504C4954ULL, k}));
    split.train.insert(split.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(per_class));
    split.validation.insert(split.validation.end(), idx.begin() + static_cast<std::ptrdiff_t>(per_class), idx.end());
  }
  seeded_shuffle(split.train, derive_seed({seed, 0x545241494EULL}));
  seeded_shuffle(split.validation, derive_seed({seed, 0x56414CULL}));
  return split;
}

std::vector<std::size_t> balanced_subset(std::span<const ImageSample> samples, std::span<const std::size_t> pool,
                                         std::size_t per_class) {
  std::array<std::size_t, kClasses> taken{};
  std::vector<std::size_t> out;
  for (auto s : pool) {
    auto& t = taken[samples[s].label];
    if (t < per_class) {
      ++t;
      out.push_back(s);
    }
  }
  for (std::size_t k = 0; k < kClasses; ++k) {
    if (taken[k] < per_class) {
      throw std::runtime_error("balanced subset: class " + std::to_string(k) + " has only " +
                               std::to_string(taken[k]) + " samples");
    }
  }
  return out;
}

std::size_t PoissonEncoder::steps() const {
  return static_cast<std::size_t>(std::llround(duration_ms / dt_ms));
}

std::vector<double> PoissonEncoder::spike_times(double rate_hz, std::uint64_t stream_seed) const {
  std::vector<double> times;
  if (!(rate_hz > 0.0)) return times;
  const double mean_isi_ms = 1000.0 / rate_hz;
  SplitMix64 gen(stream_seed);
  double t = 0.0;
  while (true) {
    // 1 - u lies in (0, 1], so the log is finite.
    t += -std::log(1.0 - gen.uniform()) * mean_isi_ms;
    if (t >= duration_ms) break;
    times.push_back(t);
  }
  return times;
}

SpikeRaster PoissonEncoder::encode(std::span<const std::uint8_t> pixels, std::uint64_t key) const {
  if (!(max_rate_hz > 0.0)) throw std::invalid_argument("encoder: max rate must be positive");
  const std::size_t n_steps = steps();
  SpikeRaster raster(n_steps, pixels.size(), dt_ms);
  for (std::size_t p = 0; p < pixels.size(); ++p) {
    if (pixels[p] == 0) continue;
    for (double t : spike_times(rate_hz(pixels[p]), derive_seed({key, p}))) {
      const auto bin = static_cast<std::size_t>(t / dt_ms);
      if (bin < n_steps) raster.set(bin, p);
    }
  }
  return raster;
}

std::uint64_t encoding_key(std::uint64_t seed, std::uint64_t presentation, std::uint64_t index) {
  return derive_seed({seed, presentation, index});
}

}  // namespace dsstdp
