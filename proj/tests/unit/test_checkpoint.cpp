#include <cmath>
#include <gtest/gtest.h>

#include <filesystem>

#include "vln/checkpoint.hpp"
#include "vln/errors.hpp"

using namespace vln;

namespace {

Checkpoint sample() {
  Checkpoint c;
  c.tag = 3;
  c.add("embedding", Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  c.add("decoder.b", Tensor::vector({-0.0, 1e-300, 0.1}));
  c.add("scalar", Tensor::scalar(42));
  return c;
}

}  // namespace

TEST(Checkpoint, RoundTripIsByteExact) {
  const std::string bytes = encode_checkpoint(sample());
  const Checkpoint back = decode_checkpoint(bytes);
  EXPECT_EQ(back.tag, 3);
  ASSERT_EQ(back.records.size(), 3u);
  EXPECT_EQ(back.records[0].name, "embedding");
  EXPECT_EQ(back.at("embedding").shape, (Shape{2, 3}));
  EXPECT_EQ(back.at("decoder.b").data, sample().at("decoder.b").data);
  EXPECT_TRUE(std::signbit(back.at("decoder.b").data[0]));
  EXPECT_EQ(encode_checkpoint(back), bytes);
}

TEST(Checkpoint, HeaderLayout) {
  const std::string bytes = encode_checkpoint(sample());
  EXPECT_EQ(bytes.substr(0, 6), "VLNCKP");
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), kCheckpointVersion);
  EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 3);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 3);  // record count, little endian
}

TEST(Checkpoint, CorruptInputsAreRejected) {
  std::string bytes = encode_checkpoint(sample());
  EXPECT_THROW(decode_checkpoint("XXXXXX" + bytes.substr(6)), IoError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), IoError);
  EXPECT_THROW(decode_checkpoint(bytes + "x"), IoError);
  std::string bad_version = bytes;
  bad_version[6] = 9;
  EXPECT_THROW(decode_checkpoint(bad_version), IoError);
}

TEST(Checkpoint, MissingRecordIsLookupError) {
  EXPECT_THROW(sample().at("nope"), LookupError);
  EXPECT_EQ(sample().find("nope"), nullptr);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "vln_ckpt_test";
  const std::string path = (dir / "sub" / "a.ckpt").string();
  save_checkpoint(path, sample());
  EXPECT_EQ(encode_checkpoint(load_checkpoint(path)), encode_checkpoint(sample()));
  EXPECT_THROW(load_checkpoint((dir / "missing.ckpt").string()), IoError);
  std::filesystem::remove_all(dir);
}
