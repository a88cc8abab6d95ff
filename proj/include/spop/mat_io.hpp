// SPDX-FileCopyrightText: © 2026 The spop Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "spop/error.hpp"
#include "spop/matrix.hpp"

// MAT1 binary matrix format:
//   8 bytes   magic "SPOPMAT1"
//   8 bytes   rows, little-endian u64
//   8 bytes   cols, little-endian u64
//   rows*cols little-endian IEEE-754 binary64, row-major

namespace spop {

inline constexpr std::string_view kMat1Magic = "SPOPMAT1";

/// Malformed or unreadable MAT1 data.
class FormatError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_u64(std::string_view in, std::size_t off) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  return v;
}

}  // namespace detail

inline std::string encode_mat1(const Matrix& m) {
  std::string out;
  out.reserve(24 + 8 * m.size());
  out.append(kMat1Magic);
  detail::put_u64(out, m.rows());
  detail::put_u64(out, m.cols());
  for (double x : m.data()) detail::put_u64(out, std::bit_cast<std::uint64_t>(x));
  return out;
}

inline Matrix decode_mat1(std::string_view bytes) {
  if (bytes.size() < 24 || bytes.substr(0, 8) != kMat1Magic)
    throw FormatError("missing SPOPMAT1 header");
  const std::uint64_t rows = detail::get_u64(bytes, 8);
  const std::uint64_t cols = detail::get_u64(bytes, 16);
  if (rows == 0 || cols == 0) throw FormatError("MAT1 dimensions must be positive");
  if (rows > (bytes.size() - 24) / 8 || cols > (bytes.size() - 24) / 8 / rows ||
      bytes.size() != 24 + 8 * rows * cols)
    throw FormatError("MAT1 payload length does not match " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  std::vector<double> data(rows * cols);
  for (std::size_t k = 0; k < data.size(); ++k)
    data[k] = std::bit_cast<double>(detail::get_u64(bytes, 24 + 8 * k));
  try {
    return Matrix(rows, cols, std::move(data));
  } catch (const Error& e) {
    throw FormatError(std::string("MAT1 payload invalid: ") + e.what());
  }
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes `bytes` to a sibling temp file and renames it over `path`, so
/// readers never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Matrix read_mat1(const std::filesystem::path& path) {
  try {
    return decode_mat1(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_mat1(const std::filesystem::path& path, const Matrix& m) {
  write_file_atomic(path, encode_mat1(m));
}

inline std::string base64_encode(std::string_view in) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const auto b = (static_cast<unsigned char>(in[i]) << 16) |
                   (static_cast<unsigned char>(in[i + 1]) << 8) |
                   static_cast<unsigned char>(in[i + 2]);
    out += kAlphabet[(b >> 18) & 63];
    out += kAlphabet[(b >> 12) & 63];
    out += kAlphabet[(b >> 6) & 63];
    out += kAlphabet[b & 63];
  }
  if (i < in.size()) {
    unsigned b = static_cast<unsigned char>(in[i]) << 16;
    if (i + 1 < in.size()) b |= static_cast<unsigned char>(in[i + 1]) << 8;
    out += kAlphabet[(b >> 18) & 63];
    out += kAlphabet[(b >> 12) & 63];
    out += i + 1 < in.size() ? kAlphabet[(b >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

inline std::string base64_decode(std::string_view in) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (in.size() % 4 != 0) throw FormatError("base64 length is not a multiple of 4");
  std::string out;
  out.reserve(in.size() / 4 * 3);
  for (std::size_t i = 0; i < in.size(); i += 4) {
    std::array<int, 4> v{};
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = in[i + k];
      if (c == '=' && i + 4 == in.size() && k >= 2) {
        v[k] = 0;
        ++pad;
        continue;
      }
      if (pad > 0 || (v[k] = value(c)) < 0) throw FormatError("invalid base64 character");
    }
    const unsigned b = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out += static_cast<char>((b >> 16) & 0xff);
    if (pad < 2) out += static_cast<char>((b >> 8) & 0xff);
    if (pad < 1) out += static_cast<char>(b & 0xff);
  }
  return out;
}

}  // namespace spop
