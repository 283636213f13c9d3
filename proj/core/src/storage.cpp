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

#include "miniserve/storage.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <vector>

#include "hash.hpp"
#include "miniserve/error.hpp"

namespace miniserve {
namespace fs = std::filesystem;
namespace {

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::kFetchFailed, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& p, std::string_view data) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kFetchFailed, "cannot write " + p.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(Errc::kFetchFailed, "short write " + p.string());
}

// One fetch per destination at a time.
std::shared_ptr<std::mutex> DestLock(const fs::path& dest) {
  static std::mutex mu;
  static std::map<std::string, std::weak_ptr<std::mutex>> locks;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = locks[dest.lexically_normal().string()];
  auto m = slot.lock();
  if (!m) {
    m = std::make_shared<std::mutex>();
    slot = m;
  }
  return m;
}

fs::path FilePathFromUri(std::string_view uri, const StorageOptions& options) {
  std::string_view rest = uri.substr(std::string_view("file://").size());
  fs::path p(rest);
  if (p.is_relative()) p = options.base_dir / p;
  return p;
}

void CopyFromFile(const fs::path& src, const fs::path& staging) {
  std::error_code ec;
  const auto status = fs::status(src, ec);
  if (ec || !fs::exists(status)) {
    throw Error(Errc::kFetchFailed, "source missing: " + src.string());
  }
  if (fs::is_directory(status)) {
    fs::copy(src, staging, fs::copy_options::recursive, ec);
  } else {
    fs::copy_file(src, staging / src.filename(), ec);
  }
  if (ec) throw Error(Errc::kFetchFailed, "copy " + src.string() + ": " + ec.message());
}

struct HttpTarget {
  std::string host_port;  // scheme://host:port
  std::string path;
};

HttpTarget SplitHttpUri(std::string_view uri) {
  const auto after = uri.find("://") + 3;
  const auto slash = uri.find('/', after);
  if (slash == std::string_view::npos) return {std::string(uri), "/"};
  return {std::string(uri.substr(0, slash)), std::string(uri.substr(slash))};
}

// Empty optional on 404; throws on every other failure.
std::optional<std::string> HttpTryGet(httplib::Client& client, const std::string& path) {
  auto res = client.Get(path);
  if (!res) {
    throw Error(Errc::kFetchFailed,
                "GET " + path + ": " + httplib::to_string(res.error()));
  }
  if (res->status == 404) return std::nullopt;
  if (res->status != 200) {
    throw Error(Errc::kFetchFailed,
                "GET " + path + ": HTTP " + std::to_string(res->status));
  }
  return res->body;
}

std::string HttpGet(httplib::Client& client, const std::string& path) {
  auto body = HttpTryGet(client, path);
  if (!body) throw Error(Errc::kFetchFailed, "GET " + path + ": HTTP 404");
  return *body;
}

void CopyFromHttp(std::string_view uri, const fs::path& staging) {
  const HttpTarget target = SplitHttpUri(uri);
  httplib::Client client(target.host_port);
  client.set_connection_timeout(5);
  client.set_read_timeout(30);
  // Directories carry an index.txt listing relative file paths; anything
  // without one is fetched as a single file.
  std::string dir = target.path;
  if (dir.empty() || dir.back() != '/') dir += '/';
  const std::optional<std::string> index = HttpTryGet(client, dir + "index.txt");
  if (!index) {
    if (target.path.back() == '/') {
      throw Error(Errc::kFetchFailed, "GET " + dir + "index.txt: HTTP 404");
    }
    const fs::path name = fs::path(target.path).filename();
    WriteFile(staging / name, HttpGet(client, target.path));
    return;
  }
  std::istringstream lines(*index);
  std::string rel;
  while (std::getline(lines, rel)) {
    if (rel.empty()) continue;
    if (rel.find("..") != std::string::npos || rel.front() == '/') {
      throw Error(Errc::kFetchFailed, "unsafe path in index: " + rel);
    }
    WriteFile(staging / rel, HttpGet(client, dir + rel));
  }
}

}  // namespace

StorageBackend ResolveScheme(std::string_view uri) {
  if (uri.empty()) throw Error(Errc::kUnknownScheme, "empty uri");
  const auto pos = uri.find("://");
  if (pos == std::string_view::npos || pos == 0) {
    throw Error(Errc::kUnknownScheme, "no scheme in '" + std::string(uri) + "'");
  }
  const std::string scheme(uri.substr(0, pos));
  if (scheme == "file") return {StorageBackendKind::kFile, scheme};
  if (scheme == "http") return {StorageBackendKind::kHttp, scheme};
  if (scheme == "gs" || scheme == "s3") return {StorageBackendKind::kUnsupported, scheme};
  if (scheme == "azure" || scheme == "wasb" || scheme == "wasbs") {
    return {StorageBackendKind::kUnsupported, "azure-blob"};
  }
  if (scheme == "https") {
    const bool blob = uri.find(".blob.core.windows.net") != std::string_view::npos;
    return {StorageBackendKind::kUnsupported, blob ? "azure-blob" : "https"};
  }
  throw Error(Errc::kUnknownScheme, "unrecognized scheme '" + scheme + "'");
}

DirectoryDigest DigestDirectory(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> entries;
  DirectoryDigest digest;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return digest;
  for (auto it = fs::recursive_directory_iterator(dir, ec);
       !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    const std::string content = ReadFile(it->path());
    digest.total_bytes += content.size();
    entries.emplace_back(fs::relative(it->path(), dir).generic_string(),
                         internal::Sha256Hex(content));
  }
  std::sort(entries.begin(), entries.end());
  std::string joined;
  for (const auto& [path, hash] : entries) {
    joined += path;
    joined.push_back('\0');
    joined += hash;
    joined.push_back('\n');
  }
  digest.file_count = entries.size();
  digest.checksum = internal::Sha256Hex(joined);
  return digest;
}

ArtifactManifest Fetch(std::string_view uri, const fs::path& dest, const Clock& clock,
                       const StorageOptions& options, Duration extra_transfer) {
  const StorageBackend backend = ResolveScheme(uri);
  if (backend.kind == StorageBackendKind::kUnsupported) {
    throw Error(Errc::kUnsupportedScheme, backend.scheme);
  }
  const auto lock = DestLock(dest);
  std::lock_guard<std::mutex> guard(*lock);

  static std::atomic<std::uint64_t> staging_seq{0};
  const Timestamp start = clock.Now();
  fs::path staging = dest;
  staging += ".staging-" + std::to_string(staging_seq.fetch_add(1));

  std::error_code ec;
  try {
    fs::create_directories(staging, ec);
    if (ec) throw Error(Errc::kFetchFailed, "create " + staging.string() + ": " + ec.message());
    if (backend.kind == StorageBackendKind::kFile) {
      CopyFromFile(FilePathFromUri(uri, options), staging);
    } else {
      CopyFromHttp(uri, staging);
    }
    const DirectoryDigest digest = DigestDirectory(staging);
    if (digest.file_count == 0) throw Error(Errc::kFetchFailed, "no artifacts at " + std::string(uri));

    fs::remove_all(dest, ec);
    fs::rename(staging, dest, ec);
    if (ec) throw Error(Errc::kFetchFailed, "rename into " + dest.string() + ": " + ec.message());

    ArtifactManifest m;
    m.uri = std::string(uri);
    m.local_path = dest;
    m.total_bytes = digest.total_bytes;
    m.file_count = digest.file_count;
    m.checksum = digest.checksum;
    const double bw = options.bandwidth_bytes_per_second;
    m.simulated_transfer =
        extra_transfer + (bw > 0 ? FromSeconds(static_cast<double>(m.total_bytes) / bw)
                                 : Duration::zero());
    m.fetch_duration = (clock.Now() - start) + m.simulated_transfer;
    return m;
  } catch (const Error&) {
    fs::remove_all(staging, ec);
    throw;
  } catch (const std::exception& e) {
    fs::remove_all(staging, ec);
    throw Error(Errc::kFetchFailed, e.what());
  }
}

bool Verify(const ArtifactManifest& manifest) {
  try {
    const DirectoryDigest now = DigestDirectory(manifest.local_path);
    return now.total_bytes == manifest.total_bytes && now.checksum == manifest.checksum;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace miniserve
