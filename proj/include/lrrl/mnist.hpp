#pragma once

// IDX (MNIST) ingestion and the pairwise-digit bandit world.
//
// IDX layout: 4-byte big-endian magic (0x00000803 images, 0x00000801
// labels), one big-endian u32 per dimension, then raw unsigned bytes.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lrrl/environment.hpp"
#include "lrrl/errors.hpp"
#include "lrrl/linalg.hpp"
#include "lrrl/rng.hpp"

namespace lrrl {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::size_t kMnistSide = 28;
inline constexpr std::size_t kMnistPixels = kMnistSide * kMnistSide;

struct IdxImages {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count × rows × cols, row-major per image
};

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                               const char* field) {
  if (bytes.size() < offset + 4)
    throw ParseError(bytes.size(), std::string("truncated IDX header while reading ") + field);
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

inline void write_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace detail

inline IdxImages parse_idx_images(const std::vector<std::uint8_t>& bytes) {
  if (detail::read_be32(bytes, 0, "magic") != kIdxImageMagic)
    throw ParseError(0, "bad IDX image magic number");
  IdxImages out;
  out.count = detail::read_be32(bytes, 4, "image count");
  out.rows = detail::read_be32(bytes, 8, "row count");
  out.cols = detail::read_be32(bytes, 12, "column count");
  if (out.rows != kMnistSide) throw ParseError(8, "IDX images must have 28 rows");
  if (out.cols != kMnistSide) throw ParseError(12, "IDX images must have 28 columns");
  const std::size_t need = 16 + out.count * kMnistPixels;
  if (bytes.size() < need) throw ParseError(bytes.size(), "truncated IDX image payload");
  if (bytes.size() > need) throw ParseError(need, "trailing bytes after IDX image payload");
  out.pixels.assign(bytes.begin() + 16, bytes.end());
  return out;
}

inline std::vector<std::uint8_t> parse_idx_labels(const std::vector<std::uint8_t>& bytes) {
  if (detail::read_be32(bytes, 0, "magic") != kIdxLabelMagic)
    throw ParseError(0, "bad IDX label magic number");
  const std::size_t count = detail::read_be32(bytes, 4, "label count");
  const std::size_t need = 8 + count;
  if (bytes.size() < need) throw ParseError(bytes.size(), "truncated IDX label payload");
  if (bytes.size() > need) throw ParseError(need, "trailing bytes after IDX label payload");
  std::vector<std::uint8_t> labels(bytes.begin() + 8, bytes.end());
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] > 9) throw ParseError(8 + i, "IDX label outside 0..9");
  return labels;
}

inline IdxImages read_idx_images(const std::filesystem::path& path) {
  return parse_idx_images(detail::read_file_bytes(path));
}

inline std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
  return parse_idx_labels(detail::read_file_bytes(path));
}

inline void write_idx_images(const std::filesystem::path& path, const IdxImages& images) {
  if (images.pixels.size() != images.count * images.rows * images.cols)
    throw ParameterError("write_idx_images: pixel buffer size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  detail::write_be32(out, kIdxImageMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(images.count));
  detail::write_be32(out, static_cast<std::uint32_t>(images.rows));
  detail::write_be32(out, static_cast<std::uint32_t>(images.cols));
  out.write(reinterpret_cast<const char*>(images.pixels.data()),
            static_cast<std::streamsize>(images.pixels.size()));
}

inline void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  detail::write_be32(out, kIdxLabelMagic);
  detail::write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

/// Images bucketed by digit plus the 45 digit pairs (i < j) in lexicographic
/// order. Pixels stay as bytes and are scaled to [0, 1] on access.
class MnistTaskWorld {
 public:
  MnistTaskWorld(IdxImages images, const std::vector<std::uint8_t>& labels)
      : images_(std::move(images)) {
    if (labels.size() != images_.count)
      throw ParseError(4, "IDX image/label count mismatch (" + std::to_string(images_.count) +
                              " images, " + std::to_string(labels.size()) + " labels)");
    for (std::size_t i = 0; i < labels.size(); ++i) pools_[labels[i]].push_back(i);
    for (int a = 0; a < 10; ++a)
      for (int b = a + 1; b < 10; ++b) pairs_.emplace_back(a, b);
  }

  std::size_t pool_size(int digit) const { return pools_.at(static_cast<std::size_t>(digit)).size(); }
  std::size_t total_images() const { return images_.count; }
  const std::vector<std::pair<int, int>>& task_pairs() const { return pairs_; }

  /// Pixel vector (length 784, values in [0,1]) of the k-th image of `digit`.
  Vector image(int digit, std::size_t k) const {
    const std::size_t idx = pools_.at(static_cast<std::size_t>(digit)).at(k);
    Vector v(static_cast<Index>(kMnistPixels));
    const std::uint8_t* p = images_.pixels.data() + idx * kMnistPixels;
    for (std::size_t i = 0; i < kMnistPixels; ++i) v(static_cast<Index>(i)) = p[i] / 255.0;
    return v;
  }

 private:
  IdxImages images_;
  std::array<std::vector<std::size_t>, 10> pools_;
  std::vector<std::pair<int, int>> pairs_;
};

inline MnistTaskWorld load_mnist_idx(const std::filesystem::path& images_path,
                                     const std::filesystem::path& labels_path) {
  return MnistTaskWorld(read_idx_images(images_path), read_idx_labels(labels_path));
}

struct MnistRound {
  ArmSet arms;           // K = 2
  Index oracle_best = 0; // arm holding the larger digit
  Vector expected;       // 1 for the larger digit, 0 for the smaller
};

/// One image from each digit pool of the pair, in random arm order.
inline MnistRound mnist_round(const MnistTaskWorld& world, std::pair<int, int> pair, Rng& rng) {
  const auto [lo, hi] = pair.first < pair.second ? pair : std::pair{pair.second, pair.first};
  if (lo == hi || lo < 0 || hi > 9) throw ParameterError("mnist_round: invalid digit pair");
  if (world.pool_size(lo) == 0 || world.pool_size(hi) == 0)
    throw EnvironmentError("mnist_round: empty pool for digit " +
                           std::to_string(world.pool_size(lo) == 0 ? lo : hi));
  const Vector small = world.image(lo, rng.uniform_index(world.pool_size(lo)));
  const Vector large = world.image(hi, rng.uniform_index(world.pool_size(hi)));
  const Index best = static_cast<Index>(rng.uniform_index(2));
  MnistRound round;
  round.arms.features.resize(static_cast<Index>(kMnistPixels), 2);
  round.arms.features.col(best) = large;
  round.arms.features.col(1 - best) = small;
  round.oracle_best = best;
  round.expected = Vector::Zero(2);
  round.expected(best) = 1.0;
  return round;
}

/// The first `tasks` digit pairs as a bandit environment (d = 784, K = 2).
class MnistEnvironment final : public BanditEnvironment {
 public:
  MnistEnvironment(std::shared_ptr<const MnistTaskWorld> world, std::size_t tasks, double noise_variance)
      : world_(std::move(world)), tasks_(tasks), noise_std_(std::sqrt(noise_variance)) {
    if (!world_) throw ParameterError("mnist environment: no world");
    if (tasks_ == 0 || tasks_ > world_->task_pairs().size())
      throw ParameterError("mnist environment: task count must be in [1, 45]");
    if (!(noise_variance >= 0.0)) throw ParameterError("mnist environment: noise_variance < 0");
  }

  std::size_t dimension() const override { return kMnistPixels; }
  std::size_t task_count() const override { return tasks_; }
  double noise_std() const override { return noise_std_; }

  RoundDraw draw(std::size_t task, Rng& arm_rng) const override {
    MnistRound r = mnist_round(*world_, world_->task_pairs().at(task), arm_rng);
    return RoundDraw{std::move(r.arms), std::move(r.expected)};
  }

 private:
  std::shared_ptr<const MnistTaskWorld> world_;
  std::size_t tasks_;
  double noise_std_;
};

}  // namespace lrrl
