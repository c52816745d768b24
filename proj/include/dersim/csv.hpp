#pragma once

// Minimal delimited-table reader used by the grid loader and parameter files.
// Accepts ',' or ';' separated files (SimBench exports use ';'), '#' comment
// lines, and an optional column alias map so foreign column names can be
// mapped onto the canonical schema without editing the data.

#include "dersim/common.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dersim {

/// Error in a data file. Carries the file and 1-based line for diagnostics.
class TableError : public ConfigError {
public:
    enum class Kind { missing_file, missing_column, bad_value, dangling_reference, duplicate_id, invariant };

    TableError(Kind kind, std::filesystem::path file, std::size_t line, const std::string& message);

    Kind kind() const noexcept { return kind_; }
    const std::filesystem::path& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    Kind kind_;
    std::filesystem::path file_;
    std::size_t line_;
};

const char* to_string(TableError::Kind kind);

/// canonical column name -> name used in the source file
using ColumnAliases = std::map<std::string, std::string, std::less<>>;

class CsvTable {
public:
    static CsvTable read(const std::filesystem::path& path, const ColumnAliases& aliases = {});
    static CsvTable parse(std::string_view text, std::filesystem::path origin = "<memory>",
                          const ColumnAliases& aliases = {});

    const std::filesystem::path& path() const noexcept { return path_; }
    std::size_t rows() const noexcept { return cells_.size(); }
    const std::vector<std::string>& header() const noexcept { return header_; }

    bool has_column(std::string_view name) const;
    std::size_t require_column(std::string_view name) const;
    /// Source line of a data row, for diagnostics.
    std::size_t line_of(std::size_t row) const { return lines_.at(row); }

    const std::string& text(std::size_t row, std::string_view column) const;
    Real real(std::size_t row, std::string_view column) const;
    int integer(std::size_t row, std::string_view column) const;
    std::optional<Real> optional_real(std::size_t row, std::string_view column) const;
    std::optional<std::string> optional_text(std::size_t row, std::string_view column) const;

    [[noreturn]] void fail(TableError::Kind kind, std::size_t row, const std::string& message) const;

private:
    std::optional<std::size_t> find_column(std::string_view name) const;

    std::filesystem::path path_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> cells_;
    std::vector<std::size_t> lines_;
    ColumnAliases aliases_;
};

/// Two-column key/value file (manifest, column maps).
std::map<std::string, std::string, std::less<>> read_key_values(const std::filesystem::path& path);

} // namespace dersim
