// Copyright 2026 The bitdet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bitdet/serialize.hpp"

#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace bitdet {
namespace {

constexpr char kMagic[4] = {'I', 'D', 'A', 'T'};

// Exchange integers and floats as explicit little-endian byte sequences so
// files are portable regardless of host endianness.
void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {
      static_cast<unsigned char>(v & 0xff),
      static_cast<unsigned char>((v >> 8) & 0xff),
      static_cast<unsigned char>((v >> 16) & 0xff),
      static_cast<unsigned char>((v >> 24) & 0xff),
  };
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("tensor stream: unexpected end of data");
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint32_t f32_bits(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  return u;
}

float bits_f32(std::uint32_t u) {
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  t.check_finite("write_tensor");
  os.write(kMagic, 4);
  put_u32(os, kTensorFormatVersion);
  put_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) {
      throw std::runtime_error("write_tensor: dimension exceeds u32 range");
    }
    put_u32(os, static_cast<std::uint32_t>(d));
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    put_u32(os, f32_bits(static_cast<float>(t[i])));
  }
  if (!os) throw std::runtime_error("write_tensor: stream write failed");
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("tensor stream: bad magic (expected \"IDAT\")");
  }
  const std::uint32_t version = get_u32(is);
  if (version != kTensorFormatVersion) {
    throw std::runtime_error("tensor stream: unsupported format version " +
                             std::to_string(version));
  }
  const std::uint32_t rank = get_u32(is);
  if (rank == 0 || rank > 8) {
    throw std::runtime_error("tensor stream: implausible rank " +
                             std::to_string(rank));
  }
  std::vector<std::size_t> shape(rank);
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    shape[i] = get_u32(is);
    if (shape[i] == 0) {
      throw std::runtime_error("tensor stream: zero dimension");
    }
    count *= shape[i];
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = static_cast<double>(bits_f32(get_u32(is)));
  }
  Tensor t(std::move(shape), std::move(data));
  t.check_finite("read_tensor payload");
  return t;
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_tensor: cannot open " + path);
  write_tensor(os, t);
  os.close();
  if (!os) throw std::runtime_error("save_tensor: write failed for " + path);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_tensor: cannot open " + path);
  return read_tensor(is);
}

}  // namespace bitdet
