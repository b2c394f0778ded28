#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace minto::csv {

/// RFC-4180 quoting: fields containing a comma, quote, CR or LF are wrapped in
/// quotes with embedded quotes doubled.
std::string field(std::string_view value);
std::string row(const std::vector<std::string>& fields);

/// Parses RFC-4180 text (CRLF or LF line ends). Throws ContractError on an
/// unterminated quoted field.
std::vector<std::vector<std::string>> parse(std::string_view text);

/// Header plus rows with lookup by column name.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const;
};

Table read_table(const std::filesystem::path& path);

}  // namespace minto::csv
