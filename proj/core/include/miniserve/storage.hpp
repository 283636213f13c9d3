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

#ifndef MINISERVE_STORAGE_HPP_
#define MINISERVE_STORAGE_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "miniserve/clock.hpp"

namespace miniserve {

enum class StorageBackendKind { kFile, kHttp, kUnsupported };

struct StorageBackend {
  StorageBackendKind kind;
  std::string scheme;  // e.g. "file", "gs", "azure-blob"
};

// Recognizes the scheme of a storageUri. Cloud schemes resolve to
// kUnsupported; an unrecognizable prefix throws Error{kUnknownScheme}.
StorageBackend ResolveScheme(std::string_view uri);

struct ArtifactManifest {
  std::string uri;
  std::filesystem::path local_path;
  std::uint64_t total_bytes = 0;
  std::size_t file_count = 0;
  std::string checksum;            // hex sha256 over (path, content hash) pairs
  Duration simulated_transfer{0};  // portion of fetch_duration spent on the clock
  Duration fetch_duration{0};
};

struct StorageOptions {
  double bandwidth_bytes_per_second = 100e6;
  // Base for relative file:// URIs (file://models/m1).
  std::filesystem::path base_dir = std::filesystem::current_path();
};

// Copies or downloads artifacts into `dest` through a staging directory
// renamed into place, so a failed fetch leaves nothing at `dest`. Only the
// I/O happens here; callers wait out `simulated_transfer` on their clock.
// Throws Error{kUnknownScheme | kUnsupportedScheme | kFetchFailed}.
ArtifactManifest Fetch(std::string_view uri, const std::filesystem::path& dest,
                       const Clock& clock, const StorageOptions& options,
                       Duration extra_transfer = Duration::zero());

// True iff the on-disk content still matches the manifest.
bool Verify(const ArtifactManifest& manifest);

struct DirectoryDigest {
  std::uint64_t total_bytes = 0;
  std::size_t file_count = 0;
  std::string checksum;
};
DirectoryDigest DigestDirectory(const std::filesystem::path& dir);

}  // namespace miniserve

#endif  // MINISERVE_STORAGE_HPP_
