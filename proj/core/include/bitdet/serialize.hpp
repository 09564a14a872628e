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

#ifndef BITDET_SERIALIZE_HPP_
#define BITDET_SERIALIZE_HPP_

#include <iosfwd>
#include <string>

#include "bitdet/tensor.hpp"

namespace bitdet {

// Binary tensor container, all fields little-endian:
//
//   bytes 0..3   magic "IDAT"
//   u32          format version (currently 1)
//   u32          rank
//   u32 * rank   dimensions
//   f32 * n      payload, row-major
//
// Values are stored as IEEE f32; doubles are narrowed on write. Tensors
// that must round-trip exactly are quantized to f32 before saving.
inline constexpr std::uint32_t kTensorFormatVersion = 1;

// Serializes t to the stream. Throws std::runtime_error on stream failure.
void write_tensor(std::ostream& os, const Tensor& t);

// Parses one tensor from the stream. Throws std::runtime_error on a bad
// magic, unsupported version, truncated payload, or non-finite values.
Tensor read_tensor(std::istream& is);

// Convenience file wrappers; errors name the path.
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

}  // namespace bitdet

#endif  // BITDET_SERIALIZE_HPP_
