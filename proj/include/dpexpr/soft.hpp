#ifndef DPEXPR_SOFT_HPP
#define DPEXPR_SOFT_HPP

#include "dataset.hpp"
#include "errors.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

/**
 * @file soft.hpp
 * @brief Reading GEO SOFT dataset files, plain TSV matrices and group sidecar files.
 *
 * Only the parts of a GDS SOFT file needed here are interpreted: the `^DATASET` line, `^SUBSET` stanzas with their
 * `!subset_description` and `!subset_sample_id` keys, and the tab-separated table between `!dataset_table_begin`
 * and `!dataset_table_end`. Everything else is skipped.
 */

namespace dpexpr {

struct ProbeRecord {
    std::string id_ref;
    std::string identifier;
    std::vector<double> values;
};

struct SoftSubset {
    std::string subset_id;
    std::string description;
    std::string type;
    std::vector<std::string> sample_ids;
};

struct SoftDataset {
    std::string dataset_id;

    /**
     * `ID_REF`, `IDENTIFIER`, then one sample identifier per column.
     */
    std::vector<std::string> table_header;

    std::vector<ProbeRecord> rows;
    std::vector<SoftSubset> subsets;

    /**
     * Rows removed because of missing values, when `ParseOptions::drop_incomplete_probes` is set.
     */
    std::size_t dropped_rows = 0;

    std::size_t num_samples() const { return table_header.size() < 2 ? 0 : table_header.size() - 2; }

    std::vector<std::string> sample_ids() const {
        if (table_header.size() < 2) {
            return {};
        }
        return std::vector<std::string>(table_header.begin() + 2, table_header.end());
    }
};

struct ParseOptions {
    /**
     * Drop rows with missing values instead of failing.
     */
    bool drop_incomplete_probes = false;

    /**
     * If set, the table rows are exactly the physical lines `first..last` (1-based, inclusive), ignoring the table markers.
     * The header is still taken from the line after `!dataset_table_begin` when present.
     */
    std::optional<std::pair<std::size_t, std::size_t>> line_window;
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline bool is_missing(std::string_view field) {
    auto t = trim(field);
    if (t.empty()) {
        return true;
    }
    auto l = lower(t);
    return l == "null" || l == "nan" || l == "na";
}

enum class CellStatus { Ok, Missing };

inline CellStatus parse_cell(std::string_view field, double& value, std::size_t line_no, std::size_t col) {
    if (is_missing(field)) {
        return CellStatus::Missing;
    }
    auto t = trim(field);
    if (!t.empty() && t.front() == '+') {
        t.remove_prefix(1);
    }
    auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw Error(ErrorCode::UnparseableValue, "line " + std::to_string(line_no) + ", column " + std::to_string(col + 1) + ": '" + std::string(field) + "'");
    }
    return CellStatus::Ok;
}

/**
 * Iterates over lines with their 1-based line numbers, stripping any trailing carriage return.
 */
template<class Function_>
void for_each_line(std::string_view text, Function_ fun) {
    std::size_t line_no = 0, start = 0;
    while (start < text.size()) {
        auto pos = text.find('\n', start);
        auto end = (pos == std::string_view::npos ? text.size() : pos);
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        ++line_no;
        if (!fun(line_no, line)) {
            return;
        }
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
}

// Parses one table row into `ds`. Returns false if the row was dropped for missing values.
inline bool append_row(SoftDataset& ds, std::string_view line, std::size_t line_no, std::size_t expected_cols, const ParseOptions& options) {
    auto fields = split_tabs(line);
    if (fields.size() != expected_cols) {
        throw Error(ErrorCode::RaggedRow, "line " + std::to_string(line_no) + ": expected " + std::to_string(expected_cols) + " columns, got " + std::to_string(fields.size()));
    }
    ProbeRecord rec;
    rec.id_ref = std::string(fields[0]);
    rec.identifier = std::string(fields[1]);
    rec.values.resize(expected_cols - 2);
    for (std::size_t c = 2; c < expected_cols; ++c) {
        if (parse_cell(fields[c], rec.values[c - 2], line_no, c) == CellStatus::Missing) {
            if (options.drop_incomplete_probes) {
                ++ds.dropped_rows;
                return false;
            }
            throw Error(ErrorCode::MissingValue, "line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) + " (probe '" + rec.id_ref + "')");
        }
    }
    ds.rows.push_back(std::move(rec));
    return true;
}

inline std::pair<std::string_view, std::string_view> split_key_value(std::string_view line) {
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
        return { trim(line), {} };
    }
    return { trim(line.substr(0, eq)), trim(line.substr(eq + 1)) };
}

}

/**
 * Parses the text of a GDS SOFT file.
 * Throws `MissingTableMarkers`, `MalformedHeader`, `RaggedRow`, `UnparseableValue`, `MissingValue` or `UnknownSampleId`.
 */
inline SoftDataset parse_soft(std::string_view text, const ParseOptions& options = {}) {
    SoftDataset ds;
    bool seen_begin = false, seen_end = false, in_table = false, want_header = false;
    std::size_t header_line = 0;
    SoftSubset* current_subset = nullptr;

    // Window rows are collected raw because the header may only be known afterwards.
    std::vector<std::pair<std::size_t, std::string_view>> window_rows;

    detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        if (options.line_window && line_no >= options.line_window->first && line_no <= options.line_window->second) {
            window_rows.emplace_back(line_no, line);
        }

        if (want_header) {
            ds.table_header.clear();
            for (auto f : detail::split_tabs(line)) {
                ds.table_header.emplace_back(f);
            }
            header_line = line_no;
            want_header = false;
            in_table = true;
            return true;
        }

        if (in_table) {
            if (line.starts_with("!dataset_table_end")) {
                in_table = false;
                seen_end = true;
            } else if (!options.line_window && !line.empty()) {
                detail::append_row(ds, line, line_no, ds.table_header.size(), options);
            }
            return true;
        }

        if (line.starts_with("!dataset_table_begin")) {
            seen_begin = true;
            want_header = true;
            return true;
        }

        if (line.starts_with("^")) {
            auto [key, value] = detail::split_key_value(line);
            if (key == "^DATASET") {
                ds.dataset_id = std::string(value);
                current_subset = nullptr;
            } else if (key == "^SUBSET") {
                ds.subsets.push_back(SoftSubset{});
                ds.subsets.back().subset_id = std::string(value);
                current_subset = &ds.subsets.back();
            } else {
                current_subset = nullptr;
            }
            return true;
        }

        if (current_subset && line.starts_with("!subset_")) {
            auto [key, value] = detail::split_key_value(line);
            if (key == "!subset_description") {
                current_subset->description = std::string(value);
            } else if (key == "!subset_type") {
                current_subset->type = std::string(value);
            } else if (key == "!subset_sample_id") {
                std::size_t start = 0;
                while (start <= value.size()) {
                    auto comma = value.find(',', start);
                    auto id = detail::trim(value.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
                    if (!id.empty()) {
                        current_subset->sample_ids.emplace_back(id);
                    }
                    if (comma == std::string_view::npos) {
                        break;
                    }
                    start = comma + 1;
                }
            }
        }
        return true;
    });

    if (options.line_window) {
        if (!seen_begin) {
            // No structural header available: synthesize one from the widest window row.
            std::size_t cols = 0;
            for (const auto& wr : window_rows) {
                cols = std::max(cols, detail::split_tabs(wr.second).size());
            }
            ds.table_header = { "ID_REF", "IDENTIFIER" };
            for (std::size_t c = 2; c < cols; ++c) {
                ds.table_header.push_back("COL" + std::to_string(c));
            }
        }
        for (const auto& wr : window_rows) {
            detail::append_row(ds, wr.second, wr.first, ds.table_header.size(), options);
        }
    } else if (!seen_begin || !seen_end) {
        throw Error(ErrorCode::MissingTableMarkers, seen_begin ? "no '!dataset_table_end' line" : "no '!dataset_table_begin' line");
    }

    if (ds.table_header.size() < 3 || ds.table_header[0] != "ID_REF" || ds.table_header[1] != "IDENTIFIER") {
        throw Error(ErrorCode::MalformedHeader, "line " + std::to_string(header_line) + ": table header must start with ID_REF, IDENTIFIER and name at least one sample");
    }

    std::unordered_set<std::string> columns(ds.table_header.begin() + 2, ds.table_header.end());
    for (const auto& sub : ds.subsets) {
        for (const auto& id : sub.sample_ids) {
            if (!columns.count(id)) {
                throw Error(ErrorCode::UnknownSampleId, "subset '" + sub.subset_id + "' lists sample '" + id + "' that is not a table column");
            }
        }
    }
    return ds;
}

/**
 * Parses a TSV matrix with header `probe_id<TAB>identifier<TAB>samples...`.
 * If the second header column is not named `identifier`, every column after the first is a sample
 * and the probe id doubles as the identifier.
 */
inline SoftDataset parse_tsv(std::string_view text, const ParseOptions& options = {}) {
    SoftDataset ds;
    bool has_identifier = true;
    std::size_t file_cols = 0;

    detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        if (file_cols == 0) {
            if (line.empty() || line.starts_with("#")) {
                return true;
            }
            auto fields = detail::split_tabs(line);
            file_cols = fields.size();
            has_identifier = fields.size() >= 2 && detail::lower(detail::trim(fields[1])) == "identifier";
            ds.table_header = { "ID_REF", "IDENTIFIER" };
            for (std::size_t c = (has_identifier ? 2 : 1); c < fields.size(); ++c) {
                ds.table_header.emplace_back(detail::trim(fields[c]));
            }
            if (ds.table_header.size() < 3) {
                throw Error(ErrorCode::MalformedHeader, "line " + std::to_string(line_no) + ": TSV header names no sample columns");
            }
            return true;
        }
        if (line.empty()) {
            return true;
        }
        if (has_identifier) {
            detail::append_row(ds, line, line_no, file_cols, options);
        } else {
            auto tab = line.find('\t');
            std::string expanded;
            if (tab == std::string_view::npos) {
                expanded = std::string(line);
            } else {
                expanded = std::string(line.substr(0, tab)) + "\t" + std::string(line.substr(0, tab)) + std::string(line.substr(tab));
            }
            detail::append_row(ds, expanded, line_no, file_cols + 1, options);
        }
        return true;
    });

    if (file_cols == 0) {
        throw Error(ErrorCode::MalformedHeader, "empty TSV input");
    }
    return ds;
}

/**
 * Writes the expression table as TSV in the format read by `parse_tsv()`, with values in shortest round-trip form.
 */
inline std::string write_tsv(const SoftDataset& ds) {
    std::string out = "probe_id\tidentifier";
    for (std::size_t c = 2; c < ds.table_header.size(); ++c) {
        out += '\t';
        out += ds.table_header[c];
    }
    out += '\n';
    char buffer[64];
    for (const auto& row : ds.rows) {
        out += row.id_ref;
        out += '\t';
        out += row.identifier;
        for (auto v : row.values) {
            auto res = std::to_chars(buffer, buffer + sizeof(buffer), v);
            out += '\t';
            out.append(buffer, res.ptr);
        }
        out += '\n';
    }
    return out;
}

/**
 * Parses a sidecar file of `sample_id<TAB>case|control` lines. Blank lines and `#` comments are skipped.
 */
inline GroupAssignment parse_group_sidecar(std::string_view text) {
    GroupAssignment out;
    detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        auto t = detail::trim(line);
        if (t.empty() || t.starts_with("#")) {
            return true;
        }
        auto fields = detail::split_tabs(t);
        if (fields.size() != 2) {
            throw Error(ErrorCode::RaggedRow, "groups line " + std::to_string(line_no) + ": expected 2 columns, got " + std::to_string(fields.size()));
        }
        auto label = detail::lower(detail::trim(fields[1]));
        auto id = std::string(detail::trim(fields[0]));
        if (label == "case") {
            out.case_sample_ids.push_back(id);
        } else if (label == "control") {
            out.control_sample_ids.push_back(id);
        } else {
            throw Error(ErrorCode::UnparseableValue, "groups line " + std::to_string(line_no) + ": label must be 'case' or 'control', got '" + std::string(fields[1]) + "'");
        }
        return true;
    });
    return out;
}

/**
 * Builds a group assignment from subset stanzas. Each name matches a subset's description or its subset id;
 * several names may be given per group. Throws `MissingSubset` when a name matches nothing.
 */
inline GroupAssignment groups_from_subsets(const SoftDataset& ds, const std::vector<std::string>& case_subsets, const std::vector<std::string>& control_subsets) {
    if (ds.subsets.empty()) {
        throw Error(ErrorCode::MissingSubset, "dataset has no ^SUBSET stanzas");
    }
    auto collect = [&](const std::vector<std::string>& names, std::vector<std::string>& dest) {
        for (const auto& name : names) {
            bool found = false;
            for (const auto& sub : ds.subsets) {
                if (sub.description == name || sub.subset_id == name) {
                    dest.insert(dest.end(), sub.sample_ids.begin(), sub.sample_ids.end());
                    found = true;
                }
            }
            if (!found) {
                throw Error(ErrorCode::MissingSubset, "no subset with description or id '" + name + "'");
            }
        }
    };
    GroupAssignment out;
    collect(case_subsets, out.case_sample_ids);
    collect(control_subsets, out.control_sample_ids);
    return out;
}

/**
 * Assembles a validated `ExpressionMatrix` with the case columns first, then the control columns, each in file order.
 * Table columns in neither group are ignored.
 */
inline ExpressionMatrix to_matrix(const SoftDataset& ds, const GroupAssignment& groups) {
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t c = 2; c < ds.table_header.size(); ++c) {
        position.emplace(ds.table_header[c], c - 2);
    }

    std::unordered_map<std::string, Group> assigned;
    auto assign = [&](const std::vector<std::string>& ids, Group g) {
        for (const auto& id : ids) {
            if (!position.count(id)) {
                throw Error(ErrorCode::UnknownSampleId, "sample '" + id + "' is not a column of the expression table");
            }
            auto [it, inserted] = assigned.emplace(id, g);
            if (!inserted && it->second != g) {
                throw Error(ErrorCode::InvalidArgument, "sample '" + id + "' is assigned to both groups");
            }
        }
    };
    assign(groups.case_sample_ids, Group::Case);
    assign(groups.control_sample_ids, Group::Control);

    std::vector<std::size_t> columns;
    ExpressionMatrix mat;
    for (auto g : { Group::Case, Group::Control }) {
        for (std::size_t c = 2; c < ds.table_header.size(); ++c) {
            auto it = assigned.find(ds.table_header[c]);
            if (it != assigned.end() && it->second == g) {
                columns.push_back(c - 2);
                mat.sample_ids.push_back(ds.table_header[c]);
                mat.groups.push_back(g);
            }
        }
    }

    mat.probe_ids.reserve(ds.rows.size());
    mat.probe_identifiers.reserve(ds.rows.size());
    mat.values.reserve(ds.rows.size() * columns.size());
    for (const auto& row : ds.rows) {
        mat.probe_ids.push_back(row.id_ref);
        mat.probe_identifiers.push_back(row.identifier);
        for (auto c : columns) {
            mat.values.push_back(row.values[c]);
        }
    }

    validate(mat);
    return mat;
}

/**
 * Decompresses gzip data.
 */
inline std::string gunzip(std::string_view compressed) {
    z_stream strm{};
    if (inflateInit2(&strm, 15 + 16) != Z_OK) {
        throw Error(ErrorCode::Io, "cannot initialize zlib");
    }
    std::string out;
    char buffer[1 << 16];
    strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
    strm.avail_in = static_cast<uInt>(compressed.size());

    int status = Z_OK;
    while (true) {
        strm.next_out = reinterpret_cast<Bytef*>(buffer);
        strm.avail_out = sizeof(buffer);
        status = inflate(&strm, Z_NO_FLUSH);
        if (status != Z_OK && status != Z_STREAM_END) {
            inflateEnd(&strm);
            throw Error(ErrorCode::Io, "corrupt gzip stream");
        }
        out.append(buffer, sizeof(buffer) - strm.avail_out);
        if (status == Z_STREAM_END) {
            // Concatenated members.
            if (strm.avail_in > 0) {
                inflateReset(&strm);
                continue;
            }
            break;
        }
        if (strm.avail_in == 0 && strm.avail_out != 0) {
            inflateEnd(&strm);
            throw Error(ErrorCode::Io, "truncated gzip stream");
        }
    }
    inflateEnd(&strm);
    return out;
}

inline bool is_gzip(std::string_view bytes) {
    return bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f && static_cast<unsigned char>(bytes[1]) == 0x8b;
}

/**
 * Reads a whole file, transparently decompressing it if it starts with the gzip magic bytes.
 */
inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open '" + path + "'");
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (is_gzip(bytes)) {
        return gunzip(bytes);
    }
    return bytes;
}

/**
 * True if `text` looks like a SOFT file rather than a TSV matrix.
 */
inline bool looks_like_soft(std::string_view text) {
    return text.starts_with("^") || text.starts_with("!") || text.find("\n!dataset_table_begin") != std::string_view::npos;
}

/**
 * Loads a SOFT or TSV file, choosing the parser from the content.
 */
inline SoftDataset load_dataset(const std::string& path, const ParseOptions& options = {}) {
    auto text = read_text_file(path);
    if (options.line_window || looks_like_soft(text)) {
        return parse_soft(text, options);
    }
    return parse_tsv(text, options);
}

}

#endif
