#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fwsim/math.hpp"

namespace fwsim {

/// Flat `key = value` text config with '#' comments. Doubles are written
/// with 17 significant digits so a dump/load round trip is bit-exact.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  std::string serialize() const;
  void save(const std::string& path) const;

  bool has(const std::string& key) const;
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  void set_string(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double value);
  void set_int(const std::string& key, std::int64_t value);
  void set_bool(const std::string& key, bool value);
  void set_vec3(const std::string& key, const Vec3& value);

  /// Getters throw std::runtime_error on a missing key or a bad value;
  /// the *_or forms substitute a default instead.
  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  Vec3 get_vec3(const std::string& key) const;

  std::string get_string_or(const std::string& key, const std::string& fallback) const;
  double get_double_or(const std::string& key, double fallback) const;
  std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;
  bool get_bool_or(const std::string& key, bool fallback) const;
  Vec3 get_vec3_or(const std::string& key, const Vec3& fallback) const;

 private:
  std::map<std::string, std::string> values_;
};

std::string format_double(double v);

/// Minimal CSV table writer; all numeric cells use format_double so files
/// compare byte-identical between deterministic runs.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns);
  void append_row(const std::vector<double>& row);
  const std::vector<std::string>& columns() const { return columns_; }
  std::string serialize() const;
  void save(const std::string& path) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
};

struct CsvTable {
  std::vector<std::string> columns;
  MatX data;  // rows x columns

  int column_index(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// FNV-1a 64-bit, used to stamp config snapshots into checkpoints.
std::uint64_t fnv1a_hash(const std::string& text);

}  // namespace fwsim
