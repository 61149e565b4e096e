#pragma once

// Matrix ingestion and export.
//
// CSV: one observation per line, comma-separated reals; blank lines and lines
// starting with '#' are skipped. Binary: "DAK1", u64 N, u64 d (little-endian),
// then N*d IEEE-754 doubles in row-major order.

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <iterator>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dak/core/error.hpp"
#include "dak/core/sample_matrix.hpp"

namespace dak::io {

static_assert(std::endian::native == std::endian::little, "binary matrix I/O assumes a little-endian host");

inline constexpr char kBinaryMagic[4] = {'D', 'A', 'K', '1'};

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

/// Parses one CSV line into reals. Throws input_error naming the line.
inline std::vector<double> parse_csv_row(std::string_view line, std::size_t line_no) {
    std::vector<double> row;
    std::size_t pos = 0;
    for (;;) {
        const auto comma = line.find(',', pos);
        const auto cell = trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        double v = 0.0;
        const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (cell.empty() || ec != std::errc{} || end != cell.data() + cell.size()) {
            throw input_error("line " + std::to_string(line_no) + ": non-numeric cell '" + std::string(cell) + "'");
        }
        if (!std::isfinite(v)) throw input_error("line " + std::to_string(line_no) + ": non-finite value");
        row.push_back(v);
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return row;
}

inline bool skip_line(std::string_view line) {
    const auto t = trim(line);
    return t.empty() || t.front() == '#';
}

inline SampleMatrix parse_csv(std::string_view text) {
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        if (!skip_line(line)) {
            rows.push_back(parse_csv_row(line, line_no));
            if (rows.back().size() != rows.front().size()) {
                throw input_error("line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(rows.front().size()) + " values, found " +
                                  std::to_string(rows.back().size()));
            }
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    if (rows.empty()) throw input_error("input contains no observations");
    return SampleMatrix::from_rows(rows);
}

inline SampleMatrix parse_binary(std::string_view bytes) {
    constexpr std::size_t header = 4 + 2 * sizeof(std::uint64_t);
    if (bytes.size() < header || std::memcmp(bytes.data(), kBinaryMagic, 4) != 0) {
        throw input_error("binary input: missing DAK1 header");
    }
    std::uint64_t n = 0, d = 0;
    std::memcpy(&n, bytes.data() + 4, sizeof n);
    std::memcpy(&d, bytes.data() + 12, sizeof d);
    if (d != 0 && n > (bytes.size() - header) / sizeof(double) / d) {
        throw input_error("binary input: truncated payload for N=" + std::to_string(n) + ", d=" + std::to_string(d));
    }
    if (bytes.size() != header + n * d * sizeof(double)) {
        throw input_error("binary input: payload size does not match N=" + std::to_string(n) + ", d=" +
                          std::to_string(d));
    }
    std::vector<double> values(n * d);
    std::memcpy(values.data(), bytes.data() + header, values.size() * sizeof(double));
    return SampleMatrix::from_row_major(n, d, values);
}

inline bool is_binary(std::string_view bytes) {
    return bytes.size() >= 4 && std::memcmp(bytes.data(), kBinaryMagic, 4) == 0;
}

/// Reads the whole stream, then dispatches on the magic bytes.
inline SampleMatrix read_matrix(std::istream& in) {
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return is_binary(bytes) ? parse_binary(bytes) : parse_csv(bytes);
}

inline void write_csv(std::ostream& out, const SampleMatrix& z) {
    char buf[32];
    for (std::size_t i = 0; i < z.n_obs(); ++i) {
        for (std::size_t k = 0; k < z.n_dims(); ++k) {
            if (k) out.put(',');
            const auto res = std::to_chars(buf, buf + sizeof buf, z(i, k));
            out.write(buf, res.ptr - buf);
        }
        out.put('\n');
    }
}

inline void write_binary(std::ostream& out, const SampleMatrix& z) {
    out.write(kBinaryMagic, 4);
    const std::uint64_t n = z.n_obs(), d = z.n_dims();
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&d), sizeof d);
    for (std::size_t i = 0; i < z.n_obs(); ++i)
        for (std::size_t k = 0; k < z.n_dims(); ++k) {
            const double v = z(i, k);
            out.write(reinterpret_cast<const char*>(&v), sizeof v);
        }
}

/// Incremental reader for monitor input: one observation per call.
class RowReader {
public:
    explicit RowReader(std::istream& in) : in_(in) {}

    std::optional<std::vector<double>> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (skip_line(line)) continue;
            return parse_csv_row(line, line_no_);
        }
        return std::nullopt;
    }

private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

}  // namespace dak::io
