#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dfir/tensor.hpp"

// Binary tensor fixtures:
//   "DFIR" | u16 version | u8 dtype (1 = f32, 2 = f64) | u8 ndim | ndim x u64 extents | body
// All integers and values little-endian, body row-major.
namespace dfir::io {

inline constexpr std::uint16_t kFormatVersion = 1;

enum class ErrorKind { open_failed, bad_magic, unsupported_version, unknown_dtype, bad_rank, truncated, trailing_bytes, write_failed };

class TensorIoError : public Error {
 public:
  TensorIoError(ErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

std::vector<std::uint8_t> encode(const Tensor& t);
Tensor decode(std::span<const std::uint8_t> bytes);

void write_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace dfir::io
