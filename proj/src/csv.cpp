#include "rpsft/csv.hpp"

#include "rpsft/error.hpp"

#include <cstdio>
#include <fstream>

namespace rpsft {

namespace {

std::string join(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) {
            out += ',';
        }
        out += cells[i];
    }
    return out;
}

} // namespace

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_number(std::uint64_t v) {
    return std::to_string(v);
}

CsvTable::CsvTable(std::vector<std::string> header, std::vector<std::string> columns)
    : header_(std::move(header)), columns_(std::move(columns)) {
    if (columns_.empty()) {
        throw ParameterError("csv table needs at least one column");
    }
}

void CsvTable::add_row(std::vector<std::string> cells) {
    if (cells.size() != columns_.size()) {
        throw ParameterError("csv row has " + std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(columns_.size()));
    }
    rows_.push_back(std::move(cells));
}

std::string CsvTable::to_string() const {
    std::string out;
    for (const auto& h : header_) {
        out += "# " + h + "\n";
    }
    out += join(columns_) + "\n";
    for (const auto& r : rows_) {
        out += join(r) + "\n";
    }
    return out;
}

void CsvTable::write(const std::filesystem::path& path) const {
    write_text_file(path, to_string());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) {
        throw IoError("failed writing " + path.string());
    }
}

} // namespace rpsft
