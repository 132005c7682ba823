#pragma once

// CSV and run-manifest output. CSV: comma separated, header row, '.' decimal
// point, LF line endings, doubles printed with 17 significant digits so that
// values round-trip exactly.

#include <chrono>
#include <clocale>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rbmc/config.hpp"
#include "rbmc/core.hpp"

#ifndef RBMC_VERSION
#define RBMC_VERSION "unknown"
#endif

namespace rbmc {

inline const char* artifact_version() { return RBMC_VERSION; }

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Guard against a locale with a decimal comma.
  for (char* p = buf; *p; ++p)
    if (*p == ',') *p = '.';
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
      : path_(path), columns_(header.size()) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    row_.clear();
    for (auto& h : header) cell(h);
    end_row();
  }

  CsvWriter& cell(const std::string& s) {
    row_.push_back(s);
    return *this;
  }
  CsvWriter& cell(const char* s) { return cell(std::string(s)); }
  CsvWriter& cell(double v) { return cell(format_double(v)); }
  template <class I>
    requires std::is_integral_v<I>
  CsvWriter& cell(I v) {
    return cell(std::to_string(v));
  }
  CsvWriter& blank() { return cell(std::string()); }

  void end_row() {
    if (row_.size() != columns_)
      throw std::logic_error("CsvWriter: row width mismatch in " +
                             path_.string());
    for (std::size_t i = 0; i < row_.size(); ++i) {
      if (i) out_ << ',';
      out_ << row_[i];
    }
    out_ << '\n';
    row_.clear();
  }

  template <class... T>
  void row(const T&... v) {
    (cell(v), ...);
    end_row();
  }

  void close() {
    out_.close();
    if (!out_) throw std::runtime_error("error writing " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::size_t columns_;
  std::ofstream out_;
  std::vector<std::string> row_;
};

// Minimal CSV reader for tests and reruns: returns rows of raw cells.
inline std::vector<std::vector<std::string>> read_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string c;
    std::istringstream ls(line);
    while (std::getline(ls, c, ',')) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

// Manifest: resolved config, seed, version, timing and run statistics.
struct Manifest {
  nlohmann::ordered_json doc;

  explicit Manifest(const Config& cfg) {
    doc["artifact"] = "rbmc";
    doc["version"] = artifact_version();
    doc["kind"] = to_string(cfg.kind());
    doc["seed"] = cfg.integer("experiment", "seed");
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    for (const auto& [section, keys] : cfg.values())
      for (const auto& [k, v] : keys) c[section][k] = v;
    doc["config"] = c;
    doc["files"] = nlohmann::ordered_json::array();
    doc["notes"] = nlohmann::ordered_json::array();
  }

  void set(const std::string& key, nlohmann::ordered_json v) {
    doc[key] = std::move(v);
  }
  void note(const std::string& s) { doc["notes"].push_back(s); }
  void file(const std::string& name) { doc["files"].push_back(name); }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
  }
};

// Rebuilds the configuration stored in a manifest.
inline Config config_from_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
  if (!j.contains("config") || !j["config"].is_object())
    throw ConfigError("manifest " + path.string() + " has no config object");
  Config::Table t;
  for (const auto& [section, keys] : j["config"].items()) {
    if (!keys.is_object())
      throw ConfigError("manifest: section " + section + " is not an object");
    for (const auto& [k, v] : keys.items()) {
      if (!v.is_string())
        throw ConfigError("manifest: value " + section + "." + k +
                          " is not a string");
      t[section][k] = v.get<std::string>();
    }
  }
  return Config::from_table(t, path.string());
}

}  // namespace rbmc
