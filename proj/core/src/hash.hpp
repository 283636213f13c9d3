// Copyright 2026 The miniserve Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MINISERVE_SRC_HASH_HPP_
#define MINISERVE_SRC_HASH_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace miniserve::internal {

using Sha256Digest = std::array<unsigned char, 32>;

Sha256Digest Sha256(std::string_view data);
std::string Sha256Hex(std::string_view data);
std::string ToHex(const unsigned char* data, std::size_t n);
// First eight digest bytes, big-endian.
std::uint64_t Sha256Prefix64(std::string_view data);

}  // namespace miniserve::internal

#endif  // MINISERVE_SRC_HASH_HPP_
