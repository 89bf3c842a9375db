/* Copyright 2026 The JD3Net Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef JD3_TENSOR_HPP_
#define JD3_TENSOR_HPP_

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace jd3 {

/// Raised when an argument's shape or layout violates an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation produces NaN/Inf or consumes a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on malformed serialized data.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Precision : std::uint32_t { standard = 1, high = 2 };

template <typename T>
concept Real = std::is_same_v<T, float> || std::is_same_v<T, double>;

template <Real T>
constexpr Precision precision_of() {
  return std::is_same_v<T, double> ? Precision::high : Precision::standard;
}

inline std::string to_string(Precision p) {
  return p == Precision::high ? "high" : "standard";
}

inline Precision precision_from_string(const std::string& s) {
  if (s == "high") return Precision::high;
  if (s == "standard") return Precision::standard;
  throw std::invalid_argument("unknown precision '" + s + "'");
}

/// NCHW extents. All four are positive for a valid tensor.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  constexpr std::size_t size() const { return n * c * h * w; }
  constexpr std::size_t plane() const { return h * w; }
  constexpr bool operator==(const Shape&) const = default;

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
           std::to_string(w) + ")";
  }
};

/// Dense row-major 4-D array. Value type: copies are deep.
template <Real T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill) {
    check_extents();
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    check_extents();
    if (data_.size() != shape_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[index(n, c, h, w)];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[index(n, c, h, w)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Pointer to the (n, c) plane.
  const T* plane(std::size_t n, std::size_t c) const { return data_.data() + index(n, c, 0, 0); }
  T* plane(std::size_t n, std::size_t c) { return data_.data() + index(n, c, 0, 0); }

  template <Real U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  void check_extents() const {
    if (shape_.n == 0 || shape_.c == 0 || shape_.h == 0 || shape_.w == 0) {
      throw ShapeError("tensor extents must be positive, got " + shape_.str());
    }
  }

  Shape shape_{};
  std::vector<T> data_;
};

/// Throws NumericError naming `op` if any element is NaN/Inf.
template <Real T>
const Tensor<T>& ensure_finite(const Tensor<T>& t, const char* op) {
  if (!t.all_finite()) throw NumericError(std::string(op) + ": non-finite value in result");
  return t;
}

template <Real T, typename Rng>
Tensor<T> random_uniform(Shape shape, Rng& rng, T lo = T(-1), T hi = T(1)) {
  Tensor<T> out(shape);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (auto& v : out.data()) v = static_cast<T>(dist(rng));
  return out;
}

template <Real T>
Tensor<T> vector_tensor(std::size_t len, T fill = T(0)) {
  return Tensor<T>(Shape{len, 1, 1, 1}, fill);
}

// ---------------------------------------------------------------------------
// Binary tensor format
//
//   bytes  0..7   magic "JD3TNSR\0"
//   bytes  8..11  format version (u32 LE) = 1
//   bytes 12..15  reserved, zero
//   bytes 16..47  n, c, h, w (u64 LE each)
//   bytes 48..51  precision tag (u32 LE): 1 = 32-bit, 2 = 64-bit
//   bytes 52..    elements, row-major, IEEE-754 LE
// ---------------------------------------------------------------------------

inline constexpr std::array<char, 8> kTensorMagic = {'J', 'D', '3', 'T', 'N', 'S', 'R', '\0'};
inline constexpr std::uint32_t kTensorFormatVersion = 1;

namespace detail {

template <typename U>
void put_le(std::ostream& os, U value) {
  static_assert(std::is_unsigned_v<U>);
  std::array<char, sizeof(U)> buf{};
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    buf[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
  }
  os.write(buf.data(), buf.size());
}

template <typename U>
U get_le(std::istream& is) {
  static_assert(std::is_unsigned_v<U>);
  std::array<unsigned char, sizeof(U)> buf{};
  is.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!is) throw FormatError("tensor stream truncated");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(buf[i]) << (8 * i);
  return value;
}

}  // namespace detail

template <Real T>
void write_tensor(std::ostream& os, const Tensor<T>& t) {
  os.write(kTensorMagic.data(), kTensorMagic.size());
  detail::put_le<std::uint32_t>(os, kTensorFormatVersion);
  detail::put_le<std::uint32_t>(os, 0);
  const Shape& s = t.shape();
  for (std::size_t e : {s.n, s.c, s.h, s.w}) detail::put_le<std::uint64_t>(os, e);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(precision_of<T>()));
  for (T v : t.data()) {
    if constexpr (std::is_same_v<T, double>) {
      detail::put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
    } else {
      detail::put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
    }
  }
  if (!os) throw FormatError("failed writing tensor stream");
}

/// Reads a tensor of either stored precision and converts to T.
template <Real T>
Tensor<T> read_tensor(std::istream& is) {
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kTensorMagic) throw FormatError("bad tensor magic");
  const auto version = detail::get_le<std::uint32_t>(is);
  if (version != kTensorFormatVersion) {
    throw FormatError("unsupported tensor format version " + std::to_string(version));
  }
  (void)detail::get_le<std::uint32_t>(is);
  Shape s;
  s.n = detail::get_le<std::uint64_t>(is);
  s.c = detail::get_le<std::uint64_t>(is);
  s.h = detail::get_le<std::uint64_t>(is);
  s.w = detail::get_le<std::uint64_t>(is);
  const auto tag = detail::get_le<std::uint32_t>(is);
  std::vector<T> data(s.size());
  if (tag == static_cast<std::uint32_t>(Precision::high)) {
    for (auto& v : data) v = static_cast<T>(std::bit_cast<double>(detail::get_le<std::uint64_t>(is)));
  } else if (tag == static_cast<std::uint32_t>(Precision::standard)) {
    for (auto& v : data) v = static_cast<T>(std::bit_cast<float>(detail::get_le<std::uint32_t>(is)));
  } else {
    throw FormatError("unknown precision tag " + std::to_string(tag));
  }
  return Tensor<T>(s, std::move(data));
}

/// Precision tag stored in a serialized tensor, without reading the payload.
inline Precision peek_tensor_precision(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  is.seekg(48);
  const auto tag = detail::get_le<std::uint32_t>(is);
  if (tag != 1 && tag != 2) throw FormatError("unknown precision tag in " + path);
  return static_cast<Precision>(tag);
}

template <Real T>
void save_tensor(const std::string& path, const Tensor<T>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_tensor(os, t);
}

template <Real T>
Tensor<T> load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return read_tensor<T>(is);
}

}  // namespace jd3

#endif  // JD3_TENSOR_HPP_
