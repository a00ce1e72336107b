#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace ptctc::io {

inline constexpr const char* kVersion = "0.1.0";

/// Full-precision scientific notation ("%.16e", 17 significant digits).
/// Non-finite values print as nan, inf and -inf.
std::string format_double(double value);

/// 64-bit FNV-1a, printed as 16 lowercase hex digits by config_hash.
std::uint64_t fnv1a(std::string_view bytes);
/// Hash of the compact dump of `canonical`; object keys are already sorted.
std::string config_hash(const nlohmann::json& canonical);

/// An empty cell is std::monostate (blank in CSV, null in JSON).
using Cell = std::variant<std::monostate, double, long long, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

struct Metadata {
  std::string command;
  std::string config_hash;
  /// Extra "key: value" header lines, in order.
  std::vector<std::pair<std::string, std::string>> extra;
};

/// `#`-prefixed metadata lines (version, command, config hash, columns),
/// then an RFC-4180 header row and one row per record.
std::string render_csv(const Table& table, const Metadata& meta);

nlohmann::json metadata_json(const Metadata& meta, const std::vector<std::string>& columns);
/// {"meta": ..., "columns": [...], "rows": [[...], ...]}.
nlohmann::json table_json(const Table& table, const Metadata& meta);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partial file. Throws std::runtime_error on I/O failure.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace ptctc::io
