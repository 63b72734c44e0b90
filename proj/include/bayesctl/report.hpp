#pragma once

// CSV reports. Layout: one `# key=value ...` provenance line, one header
// row, then data rows. Doubles are written with 17 significant digits so
// they parse back to the same value.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bayesctl/errors.hpp"

namespace bayesctl {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct CsvTable {
    std::string provenance;  // written as "# <provenance>", omitted when empty
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

inline std::string render_csv(const CsvTable& t) {
    std::ostringstream out;
    if (!t.provenance.empty()) out << "# " << t.provenance << '\n';
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << '\n';
    };
    line(t.header);
    for (const auto& r : t.rows) line(r);
    return out.str();
}

/// Writes the table to `path` ("-" for standard output). Refuses empty
/// tables without touching the filesystem.
inline void emit_report(const CsvTable& t, const std::string& path) {
    if (t.rows.empty()) throw InvalidInput("emit_report: no results to write");
    for (const auto& r : t.rows)
        if (r.size() != t.header.size())
            throw InvalidInput("emit_report: row width does not match header");
    const std::string text = render_csv(t);
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("emit_report: cannot write " + path);
    out << text;
    if (!out) throw InvalidInput("emit_report: write failed for " + path);
}

}  // namespace bayesctl
