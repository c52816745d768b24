#include "dersim/csv.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace dersim {

namespace {

std::string trim(std::string_view s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos)
        return {};
    auto end = s.find_last_not_of(" \t\r\n");
    std::string out(s.substr(begin, end - begin + 1));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"')
        out = out.substr(1, out.size() - 2);
    return out;
}

std::vector<std::string> split(std::string_view line, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    bool quoted = false;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i < line.size() && line[i] == '"')
            quoted = !quoted;
        if (i == line.size() || (line[i] == delim && !quoted)) {
            out.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

bool is_blank_or_comment(std::string_view line) {
    auto pos = line.find_first_not_of(" \t\r");
    return pos == std::string_view::npos || line[pos] == '#';
}

} // namespace

TableError::TableError(Kind kind, std::filesystem::path file, std::size_t line, const std::string& message)
    : ConfigError(file.string() + (line ? ":" + std::to_string(line) : std::string{}) + ": " +
                  to_string(kind) + ": " + message),
      kind_(kind), file_(std::move(file)), line_(line) {}

const char* to_string(TableError::Kind kind) {
    switch (kind) {
    case TableError::Kind::missing_file: return "missing file";
    case TableError::Kind::missing_column: return "missing column";
    case TableError::Kind::bad_value: return "bad value";
    case TableError::Kind::dangling_reference: return "dangling reference";
    case TableError::Kind::duplicate_id: return "duplicate id";
    case TableError::Kind::invariant: return "invariant violated";
    }
    return "error";
}

CsvTable CsvTable::read(const std::filesystem::path& path, const ColumnAliases& aliases) {
    std::ifstream in(path);
    if (!in)
        throw TableError(TableError::Kind::missing_file, path, 0, "cannot open file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str(), path, aliases);
}

CsvTable CsvTable::parse(std::string_view text, std::filesystem::path origin, const ColumnAliases& aliases) {
    CsvTable table;
    table.path_ = std::move(origin);
    table.aliases_ = aliases;

    std::size_t line_no = 0;
    char delim = ',';
    bool have_header = false;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (is_blank_or_comment(line)) {
            if (end == text.size())
                break;
            continue;
        }
        if (!have_header) {
            delim = std::count(line.begin(), line.end(), ';') > std::count(line.begin(), line.end(), ',') ? ';' : ',';
            table.header_ = split(line, delim);
            have_header = true;
        } else {
            auto cells = split(line, delim);
            if (cells.size() != table.header_.size())
                throw TableError(TableError::Kind::bad_value, table.path_, line_no,
                                 "expected " + std::to_string(table.header_.size()) + " fields, found " +
                                     std::to_string(cells.size()));
            table.cells_.push_back(std::move(cells));
            table.lines_.push_back(line_no);
        }
        if (end == text.size())
            break;
    }
    if (!have_header)
        throw TableError(TableError::Kind::missing_column, table.path_, 0, "file has no header row");
    return table;
}

std::optional<std::size_t> CsvTable::find_column(std::string_view name) const {
    std::string_view source = name;
    if (auto it = aliases_.find(name); it != aliases_.end())
        source = it->second;
    auto it = std::find(header_.begin(), header_.end(), source);
    if (it == header_.end())
        return std::nullopt;
    return static_cast<std::size_t>(it - header_.begin());
}

bool CsvTable::has_column(std::string_view name) const { return find_column(name).has_value(); }

std::size_t CsvTable::require_column(std::string_view name) const {
    if (auto idx = find_column(name))
        return *idx;
    throw TableError(TableError::Kind::missing_column, path_, lines_.empty() ? 1 : lines_.front() - 1,
                     "required column '" + std::string(name) + "' not found");
}

const std::string& CsvTable::text(std::size_t row, std::string_view column) const {
    return cells_.at(row).at(require_column(column));
}

Real CsvTable::real(std::size_t row, std::string_view column) const {
    const auto& cell = text(row, column);
    Real value{};
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size())
        fail(TableError::Kind::bad_value, row, "column '" + std::string(column) + "': '" + cell + "' is not a number");
    return value;
}

int CsvTable::integer(std::size_t row, std::string_view column) const {
    const auto& cell = text(row, column);
    int value{};
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size())
        fail(TableError::Kind::bad_value, row, "column '" + std::string(column) + "': '" + cell + "' is not an integer");
    return value;
}

std::optional<Real> CsvTable::optional_real(std::size_t row, std::string_view column) const {
    if (!has_column(column) || text(row, column).empty())
        return std::nullopt;
    return real(row, column);
}

std::optional<std::string> CsvTable::optional_text(std::size_t row, std::string_view column) const {
    if (!has_column(column) || text(row, column).empty())
        return std::nullopt;
    return text(row, column);
}

void CsvTable::fail(TableError::Kind kind, std::size_t row, const std::string& message) const {
    throw TableError(kind, path_, row < lines_.size() ? lines_[row] : 0, message);
}

std::map<std::string, std::string, std::less<>> read_key_values(const std::filesystem::path& path) {
    auto table = CsvTable::read(path);
    if (table.header().size() < 2)
        throw TableError(TableError::Kind::missing_column, path, 1, "expected key,value columns");
    std::map<std::string, std::string, std::less<>> out;
    for (std::size_t r = 0; r < table.rows(); ++r) {
        const auto& key = table.text(r, table.header()[0]);
        if (!out.emplace(key, table.text(r, table.header()[1])).second)
            table.fail(TableError::Kind::duplicate_id, r, "key '" + key + "' repeated");
    }
    return out;
}

} // namespace dersim
