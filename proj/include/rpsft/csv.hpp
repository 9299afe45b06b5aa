#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rpsft {

/// 17 significant digits, enough for an exact round trip.
std::string format_number(double v);
std::string format_number(std::uint64_t v);

/// Comment header ("# " lines), a column row, then data rows.
class CsvTable {
public:
    CsvTable(std::vector<std::string> header, std::vector<std::string> columns);

    /// Throws ParameterError when the cell count differs from the column count.
    void add_row(std::vector<std::string> cells);
    std::string to_string() const;
    /// Throws IoError on failure.
    void write(const std::filesystem::path& path) const;

private:
    std::vector<std::string> header_;
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

/// Writes `text` to `path`, throwing IoError on failure.
void write_text_file(const std::filesystem::path& path, std::string_view text);

} // namespace rpsft
