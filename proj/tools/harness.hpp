#pragma once

// Experiment harness behind the nrsle command: per-kind config schemas,
// output directories keyed by a parameter hash, CSV and JSON emission.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nrsle::harness {

enum ExitCode : int { kOk = 0, kValidation = 2, kRuntime = 3, kAcceptance = 4 };

/// One [section] of an INI file. Every key must be read; leftovers are
/// reported by finish().
class Config {
 public:
  Config() = default;
  static Config from_file(const std::filesystem::path& path, const std::string& section);
  static Config from_string(const std::string& text, const std::string& section);

  double number(const std::string& key, double fallback);
  int integer(const std::string& key, int fallback);
  std::string text(const std::string& key, const std::string& fallback);
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback);
  bool has(const std::string& key) const { return raw_.count(key) > 0; }

  /// Throws ValidationError naming the first key nobody asked for.
  void finish() const;
  /// Resolved values, defaults included, in key order.
  const std::map<std::string, std::string>& echo() const { return echo_; }

 private:
  static Config parse(std::istream& in, const std::string& section, const std::string& origin);

  std::map<std::string, std::string> raw_;
  std::map<std::string, std::string> echo_;
};

/// RFC 4180 writer; fields with commas, quotes or line breaks are quoted.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<std::string>& fields);

 private:
  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
};

std::string csv_field(const std::string& value);
/// Shortest round-trip decimal form.
std::string number_text(double value);

struct RunRequest {
  std::string kind;
  std::optional<std::filesystem::path> config;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  /// --out-dir, else $NRSLE_OUT_DIR, else ./runs.
  std::optional<std::filesystem::path> out_dir;
};

struct RunResult {
  int exit_code = kOk;
  std::filesystem::path directory;
  std::string message;
};

/// Validates the config, runs the experiment and writes its files.
RunResult run(const RunRequest& request);

const std::vector<std::string>& kinds();

/// Hex SHA-256 of `text`.
std::string sha256_hex(const std::string& text);

}  // namespace nrsle::harness
