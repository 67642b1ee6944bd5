#include <cmath>
#include <cstdint>
#include <memory>
#include <filesystem>
#include <vector>

#include <gtest/gtest.h>

#include "lrrl/mnist.hpp"

using namespace lrrl;

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

// Image i has every pixel equal to 20 * label + i % 20.
std::vector<std::uint8_t> image_bytes(const std::vector<std::uint8_t>& labels, std::uint32_t rows = 28,
                                      std::uint32_t cols = 28) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x00000803);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  put_be32(out, rows);
  put_be32(out, cols);
  for (std::size_t i = 0; i < labels.size(); ++i)
    out.insert(out.end(), rows * cols, static_cast<std::uint8_t>(20 * labels[i] + i % 20));
  return out;
}

std::vector<std::uint8_t> label_bytes(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x00000801);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

std::vector<std::uint8_t> all_digits() {
  std::vector<std::uint8_t> labels;
  for (int rep = 0; rep < 2; ++rep)
    for (std::uint8_t d = 0; d < 10; ++d) labels.push_back(d);
  return labels;
}

template <typename F>
std::uint64_t parse_offset(F&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "expected ParseError";
  return ~0ULL;
}

}  // namespace

TEST(Idx, ParsesImagesAndLabels) {
  const auto labels = all_digits();
  const IdxImages img = parse_idx_images(image_bytes(labels));
  EXPECT_EQ(img.count, 20u);
  EXPECT_EQ(img.rows, 28u);
  EXPECT_EQ(img.cols, 28u);
  EXPECT_EQ(img.pixels.size(), 20u * 784u);
  EXPECT_EQ(img.pixels[784 * 3], 63);
  EXPECT_EQ(parse_idx_labels(label_bytes(labels)), labels);
}

TEST(Idx, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "lrrl_idx_roundtrip";
  std::filesystem::create_directories(dir);
  const auto labels = all_digits();
  const IdxImages img = parse_idx_images(image_bytes(labels));
  write_idx_images(dir / "img.idx", img);
  write_idx_labels(dir / "lab.idx", labels);
  const IdxImages back = read_idx_images(dir / "img.idx");
  EXPECT_EQ(back.pixels, img.pixels);
  EXPECT_EQ(back.count, img.count);
  EXPECT_EQ(read_idx_labels(dir / "lab.idx"), labels);
  std::filesystem::remove_all(dir);
}

TEST(Idx, BadMagicReportsOffsetZero) {
  auto bytes = image_bytes({1});
  bytes[3] = 0x01;
  EXPECT_EQ(parse_offset([&] { (void)parse_idx_images(bytes); }), 0u);
  EXPECT_EQ(parse_offset([&] { (void)parse_idx_labels(image_bytes({1})); }), 0u);
}

TEST(Idx, WrongImageShapeReportsHeaderField) {
  EXPECT_EQ(parse_offset([&] { (void)parse_idx_images(image_bytes({1}, 27, 28)); }), 8u);
  EXPECT_EQ(parse_offset([&] { (void)parse_idx_images(image_bytes({1}, 28, 29)); }), 12u);
}

TEST(Idx, TruncatedPayloadReportsFileSize) {
  auto bytes = image_bytes({1, 2});
  bytes.resize(bytes.size() - 5);
  EXPECT_EQ(parse_offset([&] { (void)parse_idx_images(bytes); }), bytes.size());
  auto header = image_bytes({1});
  header.resize(10);
  EXPECT_EQ(parse_offset([&] { (void)parse_idx_images(header); }), 10u);
  auto labels = label_bytes({1, 2, 3});
  labels.pop_back();
  EXPECT_EQ(parse_offset([&] { (void)parse_idx_labels(labels); }), labels.size());
}

TEST(Idx, TrailingBytesReportEndOfPayload) {
  auto bytes = image_bytes({1});
  bytes.push_back(0);
  EXPECT_EQ(parse_offset([&] { (void)parse_idx_images(bytes); }), 16u + 784u);
}

TEST(Idx, OutOfRangeLabelReportsItsOffset) {
  EXPECT_EQ(parse_offset([&] { (void)parse_idx_labels(label_bytes({1, 2, 12, 3})); }), 8u + 2u);
}

TEST(MnistTaskWorld, CountMismatchIsRejected) {
  const auto labels = all_digits();
  std::vector<std::uint8_t> fewer(labels.begin(), labels.end() - 1);
  EXPECT_THROW(MnistTaskWorld(parse_idx_images(image_bytes(labels)), fewer), ParseError);
}

TEST(MnistTaskWorld, BucketsByLabelAndEnumeratesPairs) {
  const auto labels = all_digits();
  const MnistTaskWorld world(parse_idx_images(image_bytes(labels)), labels);
  for (int d = 0; d < 10; ++d) EXPECT_EQ(world.pool_size(d), 2u);
  const auto& pairs = world.task_pairs();
  ASSERT_EQ(pairs.size(), 45u);
  EXPECT_EQ(pairs.front(), (std::pair{0, 1}));
  EXPECT_EQ(pairs[9], (std::pair{1, 2}));
  EXPECT_EQ(pairs.back(), (std::pair{8, 9}));
  for (std::size_t i = 1; i < pairs.size(); ++i) EXPECT_LT(pairs[i - 1], pairs[i]);
  // Second image of digit 7 is image index 17, pixel value 157.
  const Vector v = world.image(7, 1);
  ASSERT_EQ(v.size(), 784);
  EXPECT_DOUBLE_EQ(v(0), 157.0 / 255.0);
  EXPECT_GE(v.minCoeff(), 0.0);
  EXPECT_LE(v.maxCoeff(), 1.0);
}

TEST(MnistRound, LargerDigitIsOracleBestInBothArmOrders) {
  const auto labels = all_digits();
  const MnistTaskWorld world(parse_idx_images(image_bytes(labels)), labels);
  Rng rng(3);
  int best_first = 0;
  for (int i = 0; i < 200; ++i) {
    const MnistRound r = mnist_round(world, {6, 2}, rng);
    ASSERT_EQ(r.arms.count(), 2);
    const Index best = r.oracle_best;
    EXPECT_EQ(r.expected(best), 1.0);
    EXPECT_EQ(r.expected(1 - best), 0.0);
    // Pixel value / 20 identifies the digit.
    const double px_best = r.arms.features(0, best) * 255.0;
    const double px_other = r.arms.features(0, 1 - best) * 255.0;
    EXPECT_EQ(static_cast<int>(std::lround(px_best)) / 20, 6);
    EXPECT_EQ(static_cast<int>(std::lround(px_other)) / 20, 2);
    best_first += best == 0;
  }
  EXPECT_GT(best_first, 60);
  EXPECT_LT(best_first, 140);
}

TEST(MnistRound, EmptyPoolIsAnEnvironmentError) {
  const std::vector<std::uint8_t> labels{0, 1, 1, 3};
  const MnistTaskWorld world(parse_idx_images(image_bytes(labels)), labels);
  Rng rng(0);
  EXPECT_NO_THROW((void)mnist_round(world, {0, 1}, rng));
  EXPECT_THROW((void)mnist_round(world, {1, 2}, rng), EnvironmentError);
  EXPECT_THROW((void)mnist_round(world, {4, 4}, rng), ParameterError);
}

TEST(MnistEnvironment, ServesFirstPairsAsTasks) {
  const auto labels = all_digits();
  auto world = std::make_shared<const MnistTaskWorld>(parse_idx_images(image_bytes(labels)), labels);
  const MnistEnvironment env(world, 45, 0.0);
  EXPECT_EQ(env.dimension(), 784u);
  EXPECT_EQ(env.task_count(), 45u);
  EXPECT_EQ(env.truth(), nullptr);
  Rng rng(1);
  const RoundDraw d = env.draw(44, rng);  // pair (8, 9)
  EXPECT_EQ(d.expected.sum(), 1.0);
  EXPECT_THROW(MnistEnvironment(world, 46, 0.0), ParameterError);
  EXPECT_THROW(MnistEnvironment(world, 0, 0.0), ParameterError);
}
