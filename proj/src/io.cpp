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

#include "softbridge/io.hpp"

#include <unistd.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "softbridge/errors.hpp"

#ifndef SOFTBRIDGE_BUILD_ID
#define SOFTBRIDGE_BUILD_ID "unknown"
#endif

namespace softbridge::io {

namespace {

std::runtime_error io_error(const fs::path& path, const std::string& what) {
  return std::runtime_error(path.string() + ": " + what);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), 8);
}

std::uint64_t get_bytes(std::istream& in, int n, const fs::path& path) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), n);
  if (!in) throw io_error(path, "truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

constexpr std::array<char, 8> kMagic{'S', 'B', 'R', 'I', 'D', 'G', 'E', '\0'};

}  // namespace

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double x) {
  std::array<char, 64> buf{};
  const int n = std::snprintf(buf.data(), buf.size(), "%.17g", x);
  return std::string(buf.data(), static_cast<std::size_t>(n));
}

void write_csv(const fs::path& path, const CsvTable& table) {
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) {
      throw ContractError(path.string() + ": row " + std::to_string(r) + " has " +
                          std::to_string(row.size()) + " fields, header has " +
                          std::to_string(table.header.size()));
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (!std::isfinite(row[c])) {
        throw ContractError(path.string() + ": non-finite value in column '" + table.header[c] +
                            "' at row " + std::to_string(r));
      }
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error(path, std::string("cannot open for writing: ") + std::strerror(errno));
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c) out << ',';
    out << table.header[c];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << format_double(row[c]);
    }
    out << '\n';
  }
  out.flush();
  if (!out) throw io_error(path, "write failed");
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(path, "cannot open for reading");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw io_error(path, "missing header");
  t.header = split(line, ',');
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& field : split(line, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        throw io_error(path, "bad number '" + field + "' on line " + std::to_string(lineno));
      }
      row.push_back(v);
    }
    if (row.size() != t.header.size()) {
      throw io_error(path, "ragged row on line " + std::to_string(lineno));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Config

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) throw UsageError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (cfg.values_.count(key)) {
      throw UsageError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void KeyValueConfig::require_known(const std::set<std::string>& allowed) const {
  for (const auto& [key, value] : values_) {
    if (!allowed.count(key)) throw UsageError(origin_ + ": unknown key '" + key + "'");
  }
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  double v = 0.0;
  const auto& s = it->second;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw UsageError(origin_ + ": '" + key + "' expects a number, got '" + s + "'");
  }
  return v;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::int64_t v = 0;
  const auto& s = it->second;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw UsageError(origin_ + ": '" + key + "' expects an integer, got '" + s + "'");
  }
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw UsageError(origin_ + ": '" + key + "' expects true or false, got '" + it->second + "'");
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

// ---------------------------------------------------------------------------
// Manifest and run directories

std::uint64_t fnv1a_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(path, "cannot open for checksum");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::array<char, 65536> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string hex64(std::uint64_t x) {
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(x));
  return std::string(buf.data(), 16);
}

std::string build_id() { return SOFTBRIDGE_BUILD_ID; }

RunDirectory::RunDirectory(fs::path target) : target_(std::move(target)) {
  if (target_.empty()) throw UsageError("output directory must not be empty");
  // "run0/" names the directory run0.
  while (target_.filename().empty() && target_.parent_path() != target_) target_ = target_.parent_path();
  if (fs::exists(target_)) {
    const bool previous_run = fs::exists(target_ / "manifest.json");
    const bool empty = fs::is_directory(target_) && fs::is_empty(target_);
    if (!previous_run && !empty) {
      throw UsageError(target_.string() +
                       " exists and is not a previous run directory; refusing to overwrite");
    }
  }
  staging_ = target_;
  staging_ += ".partial-" + std::to_string(::getpid());
  fs::remove_all(staging_);
  fs::create_directories(staging_);
}

RunDirectory::~RunDirectory() {
  if (!finalized_) {
    std::error_code ec;
    fs::remove_all(staging_, ec);
  }
}

fs::path RunDirectory::file(const std::string& relative) const {
  const fs::path p = staging_ / relative;
  fs::create_directories(p.parent_path());
  return p;
}

void RunDirectory::finalize(const std::string& command, std::uint64_t seed, double wall_seconds) {
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  std::vector<fs::path> listing;
  for (const auto& entry : fs::recursive_directory_iterator(staging_)) {
    if (entry.is_regular_file()) listing.push_back(entry.path());
  }
  std::sort(listing.begin(), listing.end());
  for (const auto& p : listing) {
    files.push_back({{"path", fs::relative(p, staging_).generic_string()},
                     {"bytes", fs::file_size(p)},
                     {"fnv1a64", hex64(fnv1a_file(p))}});
  }
  nlohmann::ordered_json manifest;
  manifest["artifact_version"] = kArtifactVersion;
  manifest["build_id"] = build_id();
  manifest["command"] = command;
  manifest["seed"] = seed;
  manifest["wall_seconds"] = wall_seconds;
  manifest["files"] = files;
  {
    std::ofstream out(staging_ / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw io_error(staging_ / "manifest.json", "cannot write manifest");
    out << manifest.dump(2) << '\n';
    if (!out) throw io_error(staging_ / "manifest.json", "write failed");
  }
  if (fs::exists(target_)) fs::remove_all(target_);
  if (!target_.parent_path().empty()) fs::create_directories(target_.parent_path());
  fs::rename(staging_, target_);
  finalized_ = true;
}

// ---------------------------------------------------------------------------
// Checkpoints

void write_checkpoint(const fs::path& path, const ParamList& params) {
  if (!all_finite(params)) throw ContractError(path.string() + ": non-finite parameters");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error(path, "cannot open checkpoint for writing");
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u64(out, static_cast<std::uint64_t>(p.rows));
    put_u64(out, static_cast<std::uint64_t>(p.cols));
  }
  for (const auto& p : params) {
    for (const double v : p.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  out.flush();
  if (!out) throw io_error(path, "checkpoint write failed");
}

void read_checkpoint(const fs::path& path, const ParamList& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(path, "cannot open checkpoint");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw io_error(path, "not a checkpoint (bad magic)");
  const auto version = get_bytes(in, 4, path);
  if (version != kCheckpointVersion) {
    throw io_error(path, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get_bytes(in, 4, path);
  if (count != params.size()) {
    throw io_error(path, "checkpoint has " + std::to_string(count) + " entries, expected " +
                             std::to_string(params.size()));
  }
  for (const auto& p : params) {
    const auto len = get_bytes(in, 4, path);
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    const auto rows = get_bytes(in, 8, path);
    const auto cols = get_bytes(in, 8, path);
    if (!in || name != p.name || rows != static_cast<std::uint64_t>(p.rows) ||
        cols != static_cast<std::uint64_t>(p.cols)) {
      throw ShapeError(path.string() + ": shape manifest mismatch at " + p.name);
    }
  }
  for (const auto& p : params) {
    for (double& v : p.data) v = std::bit_cast<double>(get_bytes(in, 8, path));
  }
}

}  // namespace softbridge::io
