#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace popsan {

// Stable float formatting: same value -> same bytes, so fixed-seed runs can
// be compared byte for byte.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header)
        : out_(path, std::ios::binary), ncols_(header.size()) {
        if (!out_) throw std::runtime_error("cannot open CSV for writing: " + path);
        write_row_strings(header);
    }

    void row(const std::vector<double>& values) {
        if (values.size() != ncols_)
            throw std::runtime_error("CSV row width mismatch");
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(format_double(v));
        write_row_strings(cells);
    }

    void row_mixed(const std::vector<std::string>& cells) {
        if (cells.size() != ncols_)
            throw std::runtime_error("CSV row width mismatch");
        write_row_strings(cells);
    }

    void flush() { out_.flush(); }

private:
    void write_row_strings(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    std::ofstream out_;
    size_t ncols_;
};

}  // namespace popsan
