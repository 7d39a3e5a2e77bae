// Copyright 2026 The softbridge Authors
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

#ifndef SOFTBRIDGE_IO_HPP_
#define SOFTBRIDGE_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "softbridge/tensor_nn.hpp"

namespace softbridge::io {

namespace fs = std::filesystem;

inline constexpr const char* kArtifactVersion = "1.0.0";

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

// Header plus one line per row; every number printed with 17 significant
// digits so it parses back bit-exactly. Throws ContractError on NaN/Inf or a
// ragged row before anything is written, std::runtime_error on I/O failure.
void write_csv(const fs::path& path, const CsvTable& table);
CsvTable read_csv(const fs::path& path);
std::string format_double(double x);

// Plain-text configuration: one "key = value" per line, '#' starts a comment.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<config>");
  static KeyValueConfig load(const fs::path& path);

  // Throws UsageError naming the first key not in `allowed`.
  void require_known(const std::set<std::string>& allowed) const;
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a_file(const fs::path& path);
std::string hex64(std::uint64_t x);
std::string build_id();

// Files are written into a staging directory next to the target; finalize()
// writes manifest.json there and renames it into place. An abandoned run
// leaves no target directory behind.
class RunDirectory {
 public:
  explicit RunDirectory(fs::path target);
  ~RunDirectory();
  RunDirectory(const RunDirectory&) = delete;
  RunDirectory& operator=(const RunDirectory&) = delete;

  fs::path file(const std::string& relative) const;
  const fs::path& staging() const { return staging_; }
  const fs::path& target() const { return target_; }

  void finalize(const std::string& command, std::uint64_t seed, double wall_seconds);

 private:
  fs::path target_;
  fs::path staging_;
  bool finalized_ = false;
};

// Flat checkpoint layout (all integers little-endian):
//   8 bytes  magic "SBRIDGE\0"
//   u32      format version (1)
//   u32      entry count N
//   N times: u32 name length, name bytes, u64 rows, u64 cols
//   then for each entry in order, rows*cols IEEE-754 f64 values, little-endian,
//   in column-major order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const fs::path& path, const ParamList& params);
// Shapes and names must match exactly.
void read_checkpoint(const fs::path& path, const ParamList& params);

}  // namespace softbridge::io

#endif  // SOFTBRIDGE_IO_HPP_
