#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include <unistd.h>

#include "dfir/random.hpp"
#include "dfir/tensor_io.hpp"

using namespace dfir;
using io::ErrorKind;
using io::TensorIoError;

namespace {

ErrorKind decode_error(std::span<const std::uint8_t> bytes) {
  try {
    io::decode(bytes);
  } catch (const TensorIoError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode accepted a corrupt buffer";
  return ErrorKind::write_failed;
}

}  // namespace

TEST(TensorIo, RoundTripIsBitwise) {
  const std::vector<Shape> shapes{{7}, {3, 5}, {2, 3, 4}, {2, 3, 4, 5}};
  for (DType dtype : {DType::f32, DType::f64}) {
    for (const Shape& shape : shapes) {
      const Tensor t = random_tensor(shape, 1, -1e3, 1e3, dtype);
      const std::vector<std::uint8_t> bytes = io::encode(t);
      const Tensor back = io::decode(bytes);
      EXPECT_EQ(back, t);
      EXPECT_EQ(io::encode(back), bytes);
    }
  }
}

TEST(TensorIo, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / ("dfir_io_" + std::to_string(::getpid()) + ".dfir");
  const Tensor t = random_tensor({1, 3, 4, 4}, 2);
  io::write_tensor(t, path);
  EXPECT_EQ(io::read_tensor(path), t);
  std::filesystem::remove(path);
}

TEST(TensorIo, TruncatedBodyReportsLengths) {
  std::vector<std::uint8_t> bytes = io::encode(random_tensor({4, 4}, 3));
  const std::size_t full = bytes.size();
  bytes.resize(full - 5);
  try {
    io::decode(bytes);
    FAIL() << "expected TensorIoError";
  } catch (const TensorIoError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::truncated);
    const std::string what = e.what();
    EXPECT_NE(what.find(std::to_string(full)), std::string::npos) << what;
    EXPECT_NE(what.find(std::to_string(full - 5)), std::string::npos) << what;
  }
}

TEST(TensorIo, CorruptHeadersAreRejected) {
  const std::vector<std::uint8_t> good = io::encode(random_tensor({2, 2}, 4));

  std::vector<std::uint8_t> magic = good;
  magic[0] = 'X';
  EXPECT_EQ(decode_error(magic), ErrorKind::bad_magic);
  // Magic is checked before anything else, even on a short buffer.
  EXPECT_EQ(decode_error(std::span(magic).first(3)), ErrorKind::bad_magic);

  std::vector<std::uint8_t> dtype = good;
  dtype[6] = 9;
  EXPECT_EQ(decode_error(dtype), ErrorKind::unknown_dtype);

  std::vector<std::uint8_t> version = good;
  version[4] = 7;
  EXPECT_EQ(decode_error(version), ErrorKind::unsupported_version);

  std::vector<std::uint8_t> trailing = good;
  trailing.push_back(0);
  EXPECT_EQ(decode_error(trailing), ErrorKind::trailing_bytes);

  EXPECT_EQ(decode_error(std::span(good).first(10)), ErrorKind::truncated);
}

TEST(TensorIo, MissingFile) {
  try {
    io::read_tensor("/nonexistent/dir/x.dfir");
    FAIL() << "expected TensorIoError";
  } catch (const TensorIoError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::open_failed);
  }
}
