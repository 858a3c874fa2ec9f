#include "dfir/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dfir::io {
namespace {

constexpr std::uint8_t kMagic[4] = {'D', 'F', 'I', 'R'};
constexpr std::size_t kMaxRank = 8;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
  return std::bit_cast<T>(bits);
}

std::size_t element_size(DType d) { return d == DType::f32 ? 4 : 8; }

}  // namespace

std::vector<std::uint8_t> encode(const Tensor& t) {
  if (!t.defined()) throw TensorIoError(ErrorKind::bad_rank, "cannot encode an undefined tensor");
  if (t.rank() > kMaxRank) throw TensorIoError(ErrorKind::bad_rank, "rank exceeds " + std::to_string(kMaxRank));
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(8 + 8 * t.rank() + element_size(t.dtype()) * t.numel());
  put_le<std::uint16_t>(out, kFormatVersion);
  out.push_back(static_cast<std::uint8_t>(t.dtype()));
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t e : t.shape()) put_le<std::uint64_t>(out, e);
  for (double v : t.data()) {
    if (t.dtype() == DType::f32) {
      put_le<float>(out, static_cast<float>(v));
    } else {
      put_le<double>(out, v);
    }
  }
  return out;
}

Tensor decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw TensorIoError(ErrorKind::bad_magic, "not a DFIR tensor file (bad magic)");
  }
  if (bytes.size() < 8) {
    throw TensorIoError(ErrorKind::truncated,
                        "truncated header: expected at least 8 bytes, got " + std::to_string(bytes.size()));
  }
  const auto version = get_le<std::uint16_t>(bytes.data() + 4);
  if (version != kFormatVersion) {
    throw TensorIoError(ErrorKind::unsupported_version, "unsupported format version " + std::to_string(version));
  }
  const std::uint8_t code = bytes[6];
  if (code != static_cast<std::uint8_t>(DType::f32) && code != static_cast<std::uint8_t>(DType::f64)) {
    throw TensorIoError(ErrorKind::unknown_dtype, "unknown dtype code " + std::to_string(code));
  }
  const DType dtype = static_cast<DType>(code);
  const std::size_t ndim = bytes[7];
  if (ndim == 0 || ndim > kMaxRank) {
    throw TensorIoError(ErrorKind::bad_rank, "rank " + std::to_string(ndim) + " outside [1, " +
                                                 std::to_string(kMaxRank) + "]");
  }
  const std::size_t header = 8 + 8 * ndim;
  if (bytes.size() < header) {
    throw TensorIoError(ErrorKind::truncated, "truncated header: expected " + std::to_string(header) +
                                                  " bytes, got " + std::to_string(bytes.size()));
  }
  Shape shape(ndim);
  std::size_t numel = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    const auto e = get_le<std::uint64_t>(bytes.data() + 8 + 8 * i);
    if (e == 0) throw TensorIoError(ErrorKind::bad_rank, "extent " + std::to_string(i) + " is zero");
    if (numel > (std::size_t{1} << 40) / e) throw TensorIoError(ErrorKind::bad_rank, "extents overflow");
    shape[i] = e;
    numel *= e;
  }
  const std::size_t expected = header + numel * element_size(dtype);
  if (bytes.size() < expected) {
    throw TensorIoError(ErrorKind::truncated, "truncated body: expected " + std::to_string(expected) +
                                                  " bytes, got " + std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) {
    throw TensorIoError(ErrorKind::trailing_bytes, "expected " + std::to_string(expected) + " bytes, got " +
                                                       std::to_string(bytes.size()));
  }
  std::vector<double> values(numel);
  const std::uint8_t* body = bytes.data() + header;
  for (std::size_t i = 0; i < numel; ++i) {
    values[i] = dtype == DType::f32 ? static_cast<double>(get_le<float>(body + 4 * i)) : get_le<double>(body + 8 * i);
  }
  return Tensor(std::move(shape), std::move(values), dtype);
}

void write_tensor(const Tensor& t, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TensorIoError(ErrorKind::write_failed, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw TensorIoError(ErrorKind::write_failed, "failed writing " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TensorIoError(ErrorKind::open_failed, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

}  // namespace dfir::io
