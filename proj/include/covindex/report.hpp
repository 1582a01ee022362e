#pragma once

// Tabular output: a fixed CSV header with provenance comment lines, and a
// JSON mirror carrying the same rows plus command-specific detail.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace covindex {

inline constexpr const char* kCsvHeader = "study,space,N,k,n,upper,lower,kind,seed,notes";

struct ReportRow {
  std::string study;
  std::string space;
  std::size_t N = 0;
  std::size_t k = 0;
  std::optional<std::size_t> n;
  std::optional<double> upper;
  std::optional<double> lower;
  std::string kind;
  std::uint64_t seed = 0;
  std::string notes;
};

struct Report {
  nlohmann::json config;  // resolved run configuration, echoed for provenance
  std::vector<ReportRow> rows;
  std::vector<std::string> footer;  // emitted as "# " comment lines after the rows
  nlohmann::json detail = nlohmann::json::object();
};

/// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

/// printf "%.10g"; non-finite values print as inf / -inf / nan.
std::string format_number(double v);

/// Quotes a CSV field when it contains a comma, quote or line break.
std::string csv_field(const std::string& s);

std::string render_csv(const Report& report);
std::string render_json(const Report& report);

/// Writes to a sibling temporary file and renames it over the target.
void write_atomic(const std::string& path, const std::string& content);

}  // namespace covindex
