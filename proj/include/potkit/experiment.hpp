#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "potkit/geometry.hpp"
#include "potkit/kernels.hpp"
#include "potkit/measures.hpp"
#include "potkit/reconstruct.hpp"
#include "potkit/stochastic.hpp"

namespace potkit::experiment {

using json = nlohmann::ordered_json;

/// Schema violation; the message starts with the offending field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Path-aware read-only view of a config node.
class Node {
 public:
  Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return *j_; }
  bool has(const std::string& key) const;
  Node at(const std::string& key) const;
  Node at(std::size_t i) const;
  std::size_t size() const;
  bool is_number() const { return j_->is_number(); }
  bool is_string() const { return j_->is_string(); }
  bool is_array() const { return j_->is_array(); }
  bool is_object() const { return j_->is_object(); }

  double number() const;
  double positive() const;
  std::int64_t integer() const;
  std::uint64_t u64() const;
  std::string string() const;
  bool boolean() const;
  std::vector<double> numbers() const;
  Point point() const;

  double number_or(const std::string& key, double fallback) const;
  std::int64_t integer_or(const std::string& key, std::int64_t fallback) const;
  std::string string_or(const std::string& key, const std::string& fallback) const;
  bool boolean_or(const std::string& key, bool fallback) const;

  /// Throws on keys outside the allowed list.
  void expect_keys(const std::vector<std::string>& allowed) const;
  [[noreturn]] void fail(const std::string& what) const;

 private:
  const json* j_;
  std::string path_;
};

Domain parse_domain(const Node& n);
OperatorSpec parse_operator(const Node& n);
Density parse_density(const Node& n, const Domain& dom);
MeasureData parse_measure(const Node& n, const Domain& dom);
Cutoff parse_cutoff(const Node& n, const Domain& dom);
std::vector<double> parse_steps(const Node& grid);

/// 17 significant digits; "nan", "inf", "-inf" for non-finite values.
std::string format_number(double v);

/// Builds CSV text with #-prefixed comment lines and a fixed column order.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}
  void comment(const std::string& line) { comments_.push_back(line); }
  void row(const std::vector<std::string>& cells);
  void row(const std::vector<double>& values);
  std::string str() const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::string> comments_;
  std::vector<std::string> rows_;
};

struct RunOutput {
  std::string stem;
  std::string csv;
  json report;
  /// False when an expected verdict or acceptance check failed.
  bool verdict_ok = true;
};

inline const std::vector<std::string> kSubcommands = {"solve", "reduite", "tail", "reconstruct",
                                                     "mc",    "verify",  "constants"};

/// Parses a config document; syntax errors become ConfigError.
json parse_config_text(const std::string& text, const std::string& origin);
json load_config(const std::filesystem::path& path);

/// Directory holding the shipped presets: $POTKIT_PRESETS, else the source tree.
std::filesystem::path preset_dir();
std::filesystem::path preset_path(const std::string& name);
std::vector<std::string> preset_names();

/// Executes a subcommand. The seed, when given, overrides the config seed.
RunOutput run(const std::string& subcommand, const json& config);

/// Writes <dir>/<stem>.csv and <dir>/<stem>.json through temporary files and renames.
void write_outputs(const RunOutput& out, const std::filesystem::path& dir);

/// Atomic text write (temporary file in the same directory, then rename).
void write_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace potkit::experiment
