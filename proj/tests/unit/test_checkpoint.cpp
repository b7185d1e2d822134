#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tokenmixup/numerics/checkpoint.hpp"

using namespace tkmx;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("tkmx_" + name);
}

}  // namespace

TEST(Checkpoint, EncodeDecodeRoundTrip) {
  NamedTensors in{{"a", Tensor::from({2, 2}, {1, -2, 3.5, 0})}, {"layer.1.b", Tensor::from({3}, {7, 8, 9})}};
  const std::string bytes = encode_checkpoint(in);
  EXPECT_EQ(bytes.substr(0, 4), "TKMX");
  const NamedTensors out = decode_checkpoint(bytes);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].first, "a");
  EXPECT_TRUE(bitwise_equal(out[0].second, in[0].second));
  EXPECT_EQ(out[1].second.dims(), (Dims{3}));
}

TEST(Checkpoint, LayoutIsLittleEndian) {
  const std::string bytes = encode_checkpoint({{"x", Tensor::from({1}, {1.0f})}});
  // magic, version, name_len, name, rank, dim, f32
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 1 + 4 + 4 + 4);
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1);
  EXPECT_EQ(bytes[12], 'x');
  EXPECT_EQ(static_cast<unsigned char>(bytes[21]), 0x00);  // 1.0f = 0x3f800000
  EXPECT_EQ(static_cast<unsigned char>(bytes[23]), 0x80);
  EXPECT_EQ(static_cast<unsigned char>(bytes[24]), 0x3f);
}

TEST(Checkpoint, RejectsCorruptInput) {
  std::string bytes = encode_checkpoint({{"x", Tensor::from({2}, {1, 2})}});
  EXPECT_THROW(decode_checkpoint("NOPE"), IoError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 2)), IoError);
  bytes[4] = 9;
  EXPECT_THROW(decode_checkpoint(bytes), IoError);
}

TEST(Checkpoint, SaveLoadParameters) {
  ParameterStore a, b;
  a.add("w", Tensor::from({2}, {0.25, -1}));
  b.add("w", Tensor({2}));
  const auto path = temp_file("ckpt_roundtrip.bin");
  save_checkpoint(path, a);
  load_checkpoint(path, b);
  EXPECT_TRUE(bitwise_equal(a.get("w").value, b.get("w").value));
  std::filesystem::remove(path);
}

TEST(Checkpoint, ShapeMismatchAndUnknownNames) {
  ParameterStore a, wrong_shape, other_name;
  a.add("w", Tensor({2}));
  wrong_shape.add("w", Tensor({3}));
  other_name.add("v", Tensor({2}));
  const auto path = temp_file("ckpt_mismatch.bin");
  save_checkpoint(path, a);
  EXPECT_THROW(load_checkpoint(path, wrong_shape), IoError);
  EXPECT_THROW(load_checkpoint(path, other_name), IoError);
  std::filesystem::remove(path);
}

TEST(Checkpoint, MissingFileIsIoError) {
  ParameterStore a;
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/x.ckpt", a), IoError);
  EXPECT_THROW(save_checkpoint("/nonexistent/dir/x.ckpt", a), IoError);
}
