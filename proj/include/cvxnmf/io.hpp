#pragma once

// File formats: MatrixMarket matrices, CSV tables and the per-run JSON summary.
// Requires nlohmann/json (vendor/json.hpp) on the include path.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "errors.hpp"
#include "graph_partition.hpp"
#include "matrix.hpp"

namespace cvxnmf {

enum class MatrixFormat { coordinate, array };

struct MatrixFile {
    Matrix values;
    bool symmetric = false;
    MatrixFormat format = MatrixFormat::coordinate;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline double parse_real(std::string_view tok, std::size_t line) {
    double v = 0.0;
    const char* first = tok.data();
    if (!tok.empty() && tok.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError("bad number '" + std::string(tok) + "'", line);
    if (!std::isfinite(v)) throw ParseError("non-finite value '" + std::string(tok) + "'", line);
    return v;
}

inline std::size_t parse_index(std::string_view tok, std::size_t line) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError("bad integer '" + std::string(tok) + "'", line);
    return static_cast<std::size_t>(v);
}

/// Shortest decimal that reads back to the same double.
inline std::string format_real(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace detail

/// Writes `content` to a sibling temporary file and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open '" + tmp.string() + "' for writing");
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        f.flush();
        if (!f) throw IoError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move output into place at '" + path.string() + "'");
    }
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Parses MatrixMarket text: `coordinate` or `array`, `real` or `integer`,
/// `general` or `symmetric`. A symmetric file fills both triangles (entries
/// given in either triangle are mirrored). Parse errors carry the line.
inline MatrixFile parse_matrix_market(std::string_view text) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    auto next_line = [&](std::string_view& out) {
        if (pos >= text.size()) return false;
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        out = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        return true;
    };

    std::string_view line;
    if (!next_line(line)) throw ParseError("empty file", 1);
    const auto head = detail::split_ws(line);
    if (head.size() != 5 || head[0] != "%%MatrixMarket" || detail::lower(head[1]) != "matrix")
        throw ParseError("expected '%%MatrixMarket matrix <format> <field> <symmetry>'", line_no);
    MatrixFile out;
    const std::string fmt = detail::lower(head[2]);
    if (fmt == "coordinate") out.format = MatrixFormat::coordinate;
    else if (fmt == "array") out.format = MatrixFormat::array;
    else throw ParseError("unsupported format '" + std::string(head[2]) + "'", line_no);
    const std::string field = detail::lower(head[3]);
    if (field != "real" && field != "integer" && field != "double")
        throw ParseError("unsupported field '" + std::string(head[3]) + "'", line_no);
    const std::string sym = detail::lower(head[4]);
    if (sym == "symmetric") out.symmetric = true;
    else if (sym != "general") throw ParseError("unsupported symmetry '" + std::string(head[4]) + "'", line_no);

    // Data lines: skip comments and blank lines.
    auto next_data = [&](std::vector<std::string_view>& toks) {
        while (next_line(line)) {
            if (!line.empty() && line.front() == '%') continue;
            toks = detail::split_ws(line);
            if (!toks.empty()) return true;
        }
        return false;
    };

    std::vector<std::string_view> toks;
    if (!next_data(toks)) throw ParseError("missing size line", line_no + 1);
    const std::size_t want = out.format == MatrixFormat::coordinate ? 3 : 2;
    if (toks.size() != want) throw ParseError("size line needs " + std::to_string(want) + " integers", line_no);
    const std::size_t m = detail::parse_index(toks[0], line_no);
    const std::size_t n = detail::parse_index(toks[1], line_no);
    if (out.symmetric && m != n) throw ParseError("symmetric matrix must be square", line_no);
    out.values = Matrix(m, n);

    if (out.format == MatrixFormat::coordinate) {
        const std::size_t nnz = detail::parse_index(toks[2], line_no);
        for (std::size_t e = 0; e < nnz; ++e) {
            if (!next_data(toks))
                throw ParseError("expected " + std::to_string(nnz) + " entries, found " + std::to_string(e),
                                 line_no + 1);
            if (toks.size() != 3) throw ParseError("entry line needs 'i j value'", line_no);
            const std::size_t i = detail::parse_index(toks[0], line_no);
            const std::size_t j = detail::parse_index(toks[1], line_no);
            if (i < 1 || i > m || j < 1 || j > n) throw ParseError("index out of range", line_no);
            const double v = detail::parse_real(toks[2], line_no);
            out.values(i - 1, j - 1) = v;
            if (out.symmetric) out.values(j - 1, i - 1) = v;
        }
    } else {
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = out.symmetric ? j : 0; i < m; ++i) {
                if (!next_data(toks)) throw ParseError("too few array values", line_no + 1);
                if (toks.size() != 1) throw ParseError("array line needs one value", line_no);
                const double v = detail::parse_real(toks[0], line_no);
                out.values(i, j) = v;
                if (out.symmetric) out.values(j, i) = v;
            }
    }
    if (next_data(toks)) throw ParseError("unexpected data after the last entry", line_no);
    return out;
}

inline MatrixFile read_matrix_file(const std::filesystem::path& path) {
    return parse_matrix_market(read_file(path));
}

inline Matrix read_matrix(const std::filesystem::path& path) { return read_matrix_file(path).values; }

/// Reads a matrix that must be symmetric (checked with the SymMatrix tolerance).
inline SymMatrix read_sym_matrix(const std::filesystem::path& path) {
    auto f = read_matrix_file(path);
    return SymMatrix(std::move(f.values));
}

/// MatrixMarket text. Symmetric output stores the lower triangle only.
/// Coordinate output lists every entry that is not +0.0 (so −0.0 survives a
/// round trip); array output is column-major.
inline std::string format_matrix_market(const Matrix& a, MatrixFormat format, bool symmetric) {
    if (symmetric && a.rows() != a.cols()) throw InvalidInput("format_matrix_market: symmetric needs a square matrix");
    std::string out = "%%MatrixMarket matrix ";
    out += format == MatrixFormat::coordinate ? "coordinate" : "array";
    out += " real ";
    out += symmetric ? "symmetric\n" : "general\n";
    auto in_storage = [&](std::size_t i, std::size_t j) { return !symmetric || i >= j; };
    if (format == MatrixFormat::coordinate) {
        std::string body;
        std::size_t nnz = 0;
        for (std::size_t j = 0; j < a.cols(); ++j)
            for (std::size_t i = 0; i < a.rows(); ++i) {
                const double v = a(i, j);
                if (!in_storage(i, j) || (v == 0.0 && !std::signbit(v))) continue;
                ++nnz;
                body += std::to_string(i + 1) + ' ' + std::to_string(j + 1) + ' ' + detail::format_real(v) + '\n';
            }
        out += std::to_string(a.rows()) + ' ' + std::to_string(a.cols()) + ' ' + std::to_string(nnz) + '\n';
        out += body;
    } else {
        out += std::to_string(a.rows()) + ' ' + std::to_string(a.cols()) + '\n';
        for (std::size_t j = 0; j < a.cols(); ++j)
            for (std::size_t i = symmetric ? j : 0; i < a.rows(); ++i) out += detail::format_real(a(i, j)) + '\n';
    }
    return out;
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& a,
                         MatrixFormat format = MatrixFormat::coordinate, bool symmetric = false) {
    if (!all_finite(a)) throw InvalidInput("write_matrix: non-finite entries in '" + path.string() + "'");
    write_file_atomic(path, format_matrix_market(a, format, symmetric));
}

inline void write_matrix(const std::filesystem::path& path, const SymMatrix& a,
                         MatrixFormat format = MatrixFormat::coordinate) {
    write_matrix(path, a.matrix(), format, true);
}

inline void write_matrix(const std::filesystem::path& path, const FactorMatrix& u,
                         MatrixFormat format = MatrixFormat::coordinate) {
    write_matrix(path, u.matrix(), format, false);
}

// ---- CSV --------------------------------------------------------------------

inline std::string format_labels_csv(const PartitionLabels& labels) {
    std::string out = "node,cluster\n";
    for (std::size_t i = 0; i < labels.size(); ++i)
        out += std::to_string(i) + ',' + std::to_string(labels.labels[i]) + '\n';
    return out;
}

inline void write_labels_csv(const std::filesystem::path& path, const PartitionLabels& labels) {
    write_file_atomic(path, format_labels_csv(labels));
}

inline std::string format_results_csv(const std::vector<SweepResultRow>& rows) {
    std::string out = "alpha,beta,method,mean_perf,std_perf,n,trials\n";
    for (const auto& r : rows) {
        out += detail::format_real(r.alpha) + ',' + detail::format_real(r.beta) + ',' +
               std::string(to_string(r.method)) + ',' + detail::format_real(r.mean_perf) + ',' +
               detail::format_real(r.std_perf) + ',' + std::to_string(r.n) + ',' +
               std::to_string(r.trials) + '\n';
    }
    return out;
}

inline void write_results_csv(const std::filesystem::path& path, const std::vector<SweepResultRow>& rows) {
    write_file_atomic(path, format_results_csv(rows));
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        std::string_view f = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
        out.push_back(f);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

} // namespace detail

/// Grid file: rows `alpha,beta`, optional header line `alpha,beta`.
inline std::vector<SweepPoint> parse_grid_csv(std::string_view text) {
    std::vector<SweepPoint> grid;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        const auto f = detail::split_csv(line);
        if (f.size() == 1 && f[0].empty()) continue;
        if (line_no == 1 && f.size() == 2 && detail::lower(f[0]) == "alpha" && detail::lower(f[1]) == "beta")
            continue;
        if (f.size() != 2) throw ParseError("grid rows need 'alpha,beta'", line_no);
        grid.push_back({detail::parse_real(f[0], line_no), detail::parse_real(f[1], line_no)});
    }
    if (grid.empty()) throw ParseError("grid file has no rows", line_no == 0 ? 1 : line_no);
    return grid;
}

inline std::vector<SweepPoint> read_grid_csv(const std::filesystem::path& path) {
    return parse_grid_csv(read_file(path));
}

// ---- run summary ------------------------------------------------------------

struct RunSummary {
    std::string command;
    std::map<std::string, std::string> parameters;
    double objective = 0.0;
    std::optional<double> gap;
    std::size_t iterations = 0;
    std::int64_t wall_time_ms = 0;
    std::vector<std::string> artifact_paths;
};

inline nlohmann::ordered_json to_json(const RunSummary& s) {
    nlohmann::ordered_json j;
    j["command"] = s.command;
    j["parameters"] = s.parameters;
    j["objective"] = s.objective;
    j["gap"] = s.gap ? nlohmann::ordered_json(*s.gap) : nlohmann::ordered_json(nullptr);
    j["iterations"] = s.iterations;
    j["wall_time_ms"] = s.wall_time_ms;
    j["artifact_paths"] = s.artifact_paths;
    return j;
}

inline RunSummary run_summary_from_json(const nlohmann::json& j) {
    RunSummary s;
    s.command = j.at("command").get<std::string>();
    s.parameters = j.at("parameters").get<std::map<std::string, std::string>>();
    s.objective = j.at("objective").is_null() ? std::nan("") : j.at("objective").get<double>();
    if (!j.at("gap").is_null()) s.gap = j.at("gap").get<double>();
    s.iterations = j.at("iterations").get<std::size_t>();
    s.wall_time_ms = j.at("wall_time_ms").get<std::int64_t>();
    s.artifact_paths = j.at("artifact_paths").get<std::vector<std::string>>();
    return s;
}

inline void write_run_summary(const std::filesystem::path& path, const RunSummary& s) {
    write_file_atomic(path, to_json(s).dump(2) + '\n');
}

inline RunSummary read_run_summary(const std::filesystem::path& path) {
    try {
        return run_summary_from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what(), 1);
    }
}

} // namespace cvxnmf
