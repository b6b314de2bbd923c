#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "gamelab/errors.hpp"
#include "gamelab/util.hpp"

namespace gamelab {

// Small column-oriented table with byte-stable serialization. Cells are
// preformatted strings; numeric helpers use shortest round-trip formatting,
// so identical runs produce identical bytes.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void header(std::vector<std::string> cols) { columns = std::move(cols); }

    std::vector<std::string>& add_row() {
        rows.emplace_back();
        return rows.back();
    }

    void push_row(std::vector<std::string> cells) {
        if (!columns.empty() && cells.size() != columns.size())
            fail(ErrorCode::bad_config, "row width does not match header");
        rows.push_back(std::move(cells));
    }

    std::string to_csv() const {
        std::string out;
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out += ',';
            out += columns[i];
        }
        out += '\n';
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out += ',';
                out += row[i];
            }
            out += '\n';
        }
        return out;
    }

    // JSON mirror of the same table: {"schema_version":1,"columns":[...],"rows":[[...]]}.
    // Cells are emitted as JSON strings to keep the encoding trivially stable.
    std::string to_json() const {
        auto quote = [](const std::string& s) {
            std::string out = "\"";
            for (char ch : s) {
                if (ch == '"' || ch == '\\') {
                    out += '\\';
                    out += ch;
                } else if (ch == '\n') {
                    out += "\\n";
                } else {
                    out += ch;
                }
            }
            out += '"';
            return out;
        };
        std::string out = "{\"schema_version\":1,\"columns\":[";
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out += ',';
            out += quote(columns[i]);
        }
        out += "],\"rows\":[";
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (r) out += ',';
            out += '[';
            for (std::size_t i = 0; i < rows[r].size(); ++i) {
                if (i) out += ',';
                out += quote(rows[r][i]);
            }
            out += ']';
        }
        out += "]}\n";
        return out;
    }
};

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::io_error, "cannot open for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::io_error, "write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io_error, "cannot open for reading: " + path);
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

}  // namespace gamelab
