#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gasnorm/errors.hpp"
#include "gasnorm/matrix.hpp"

namespace gasnorm {

/// Multivariate series: values indexed (time, feature), one name per feature
/// and a strictly increasing integer time tick per row.
class SeriesFrame {
public:
    SeriesFrame() = default;

    SeriesFrame(Matrix values, std::vector<std::string> feature_names, std::vector<std::int64_t> time_index)
        : values_(std::move(values)), names_(std::move(feature_names)), time_(std::move(time_index)) {
        validate();
    }

    /// Frame with generated names f0..f{k-1} and ticks 0..T-1.
    explicit SeriesFrame(Matrix values) : values_(std::move(values)) {
        names_.reserve(values_.cols());
        for (std::size_t c = 0; c < values_.cols(); ++c) names_.push_back("f" + std::to_string(c));
        time_.resize(values_.rows());
        for (std::size_t r = 0; r < time_.size(); ++r) time_[r] = static_cast<std::int64_t>(r);
        validate();
    }

    SeriesFrame(Matrix values, std::vector<std::string> feature_names)
        : SeriesFrame(std::move(values)) {
        if (feature_names.size() != values_.cols()) {
            throw StructuralError("feature name count does not match column count");
        }
        names_ = std::move(feature_names);
    }

    [[nodiscard]] std::size_t length() const noexcept { return values_.rows(); }
    [[nodiscard]] std::size_t features() const noexcept { return values_.cols(); }
    [[nodiscard]] const Matrix& values() const noexcept { return values_; }
    [[nodiscard]] const std::vector<std::string>& feature_names() const noexcept { return names_; }
    [[nodiscard]] const std::vector<std::int64_t>& time_index() const noexcept { return time_; }

    [[nodiscard]] std::vector<double> feature(std::size_t c) const { return values_.col(c); }
    [[nodiscard]] double operator()(std::size_t t, std::size_t c) const noexcept { return values_(t, c); }

    /// Rows [first, first + count), names and ticks preserved.
    [[nodiscard]] SeriesFrame slice(std::size_t first, std::size_t count) const {
        if (first + count > length()) throw ArgumentError("frame slice out of range");
        SeriesFrame out;
        out.values_ = values_.slice_rows(first, count);
        out.names_ = names_;
        out.time_.assign(time_.begin() + static_cast<std::ptrdiff_t>(first),
                         time_.begin() + static_cast<std::ptrdiff_t>(first + count));
        return out;
    }

    /// Same names and ticks, new values of identical shape.
    [[nodiscard]] SeriesFrame with_values(Matrix values) const {
        if (values.rows() != length() || values.cols() != features()) {
            throw StructuralError("replacement values change the frame shape");
        }
        return SeriesFrame(std::move(values), names_, time_);
    }

    friend bool operator==(const SeriesFrame&, const SeriesFrame&) = default;

private:
    void validate() const {
        if (names_.size() != values_.cols()) {
            throw StructuralError("feature name count does not match column count");
        }
        if (time_.size() != values_.rows()) {
            throw StructuralError("time index length does not match row count");
        }
        for (std::size_t r = 1; r < time_.size(); ++r) {
            if (time_[r] <= time_[r - 1]) throw StructuralError("time index must be strictly increasing");
        }
        for (std::size_t r = 0; r < values_.rows(); ++r) {
            for (std::size_t c = 0; c < values_.cols(); ++c) {
                if (!std::isfinite(values_(r, c))) {
                    throw DomainError("non-finite value at row " + std::to_string(r) + ", column " +
                                      std::to_string(c));
                }
            }
        }
    }

    Matrix values_;
    std::vector<std::string> names_;
    std::vector<std::int64_t> time_;
};

/// Chronological split configuration. `context_length` and `horizon` size the
/// training windows and must fit inside the training segment.
struct SplitSpec {
    double train_fraction = 0.6;
    double val_fraction = 0.2;
    std::size_t context_length = 25;
    std::size_t horizon = 1;

    void validate() const {
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ArgumentError("train_fraction must be in (0, 1)");
        if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ArgumentError("val_fraction must be in [0, 1)");
        if (!(train_fraction + val_fraction < 1.0)) throw ArgumentError("train_fraction + val_fraction must be < 1");
        if (context_length == 0) throw ArgumentError("context_length must be positive");
        if (horizon == 0) throw ArgumentError("horizon must be positive");
    }
};

struct SplitFrames {
    SeriesFrame train;
    SeriesFrame validation;
    SeriesFrame test;
};

/// One (context, target) pair cut from a frame; `start` is the row of the first context step.
struct Window {
    std::size_t start = 0;
    Matrix context;
    Matrix target;
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t begin = 0;
    while (true) {
        const auto comma = line.find(',', begin);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(begin));
            break;
        }
        cells.push_back(line.substr(begin, comma - begin));
        begin = comma + 1;
    }
    return cells;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double parse_cell(std::string_view cell, std::size_t row, std::size_t column) {
    cell = trim(cell);
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double value = 0.0;
    const auto* first = cell.data();
    const auto* last = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (cell.empty() || ec != std::errc() || ptr != last) {
        throw ParseError("non-numeric cell '" + std::string(cell) + "'", row, column);
    }
    if (!std::isfinite(value)) {
        throw ParseError("non-finite cell '" + std::string(cell) + "'", row, column);
    }
    return value;
}

} // namespace detail

/// Parses CSV text from a stream; see load_csv.
inline SeriesFrame parse_csv(std::istream& in, bool has_header) {
    std::vector<std::string> names;
    std::vector<double> data;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::size_t line_no = 0;
    bool header_pending = has_header;
    std::string line;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (header_pending) {
            for (const auto cell : cells) names.emplace_back(detail::trim(cell));
            cols = names.size();
            header_pending = false;
            continue;
        }
        if (cols == 0) cols = cells.size();
        if (cells.size() != cols) {
            throw StructuralError("ragged row " + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                                  " cells, found " + std::to_string(cells.size()));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) data.push_back(detail::parse_cell(cells[c], line_no, c + 1));
        ++rows;
    }
    if (rows == 0) throw StructuralError("CSV input contains no data rows");

    Matrix values(rows, cols, std::move(data));
    if (names.empty()) return SeriesFrame(std::move(values));
    return SeriesFrame(std::move(values), std::move(names));
}

/// Loads a comma-separated numeric file, one feature per column. Without a
/// header the features are named f0..f{k-1}. LF and CRLF line endings accepted.
inline SeriesFrame load_csv(const std::string& path, bool has_header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    return parse_csv(in, has_header);
}

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

/// Writes values with a header row and LF line endings; numbers round-trip exactly.
inline void write_csv(std::ostream& out, const Matrix& values, const std::vector<std::string>& names) {
    for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
    out << '\n';
    for (std::size_t r = 0; r < values.rows(); ++r) {
        for (std::size_t c = 0; c < values.cols(); ++c) out << (c ? "," : "") << format_double(values(r, c));
        out << '\n';
    }
}

inline void write_csv(std::ostream& out, const SeriesFrame& frame) {
    write_csv(out, frame.values(), frame.feature_names());
}

inline void write_csv(const std::string& path, const SeriesFrame& frame) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    write_csv(out, frame);
}

/// Lag-`order` difference x_t - x_{t-order}; the result is `order` rows shorter.
inline SeriesFrame difference(const SeriesFrame& frame, std::size_t order) {
    if (order == 0) throw ArgumentError("difference order must be positive");
    if (order >= frame.length()) throw ArgumentError("difference order must be smaller than the series length");
    const auto n = frame.length() - order;
    Matrix out(n, frame.features());
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t c = 0; c < frame.features(); ++c) out(t, c) = frame(t + order, c) - frame(t, c);
    }
    std::vector<std::int64_t> ticks(frame.time_index().begin() + static_cast<std::ptrdiff_t>(order),
                                    frame.time_index().end());
    return SeriesFrame(std::move(out), frame.feature_names(), std::move(ticks));
}

/// Inverse of difference: rebuilds the level series from its first `order` rows.
inline Matrix undifference(const Matrix& diffs, const Matrix& head) {
    const auto order = head.rows();
    if (order == 0 || head.cols() != diffs.cols()) throw ArgumentError("undifference needs a non-empty matching head");
    Matrix out(order + diffs.rows(), diffs.cols());
    for (std::size_t t = 0; t < order; ++t) {
        for (std::size_t c = 0; c < diffs.cols(); ++c) out(t, c) = head(t, c);
    }
    for (std::size_t t = 0; t < diffs.rows(); ++t) {
        for (std::size_t c = 0; c < diffs.cols(); ++c) out(t + order, c) = out(t, c) + diffs(t, c);
    }
    return out;
}

/// Segment lengths for a series of length T: floor on train, floor on
/// validation, remainder to test.
inline std::array<std::size_t, 3> split_lengths(std::size_t length, double train_fraction, double val_fraction) {
    constexpr double eps = 1e-9;
    const auto total = static_cast<double>(length);
    const auto n_train = static_cast<std::size_t>(std::floor(total * train_fraction + eps));
    const auto n_val = static_cast<std::size_t>(std::floor(total * val_fraction + eps));
    if (n_train + n_val > length) throw ArgumentError("split fractions exceed the series length");
    return {n_train, n_val, length - n_train - n_val};
}

/// Chronological train/validation/test split. A zero validation fraction
/// yields an empty validation frame; any other empty segment is an error.
inline SplitFrames split(const SeriesFrame& frame, const SplitSpec& spec) {
    spec.validate();
    const auto [n_train, n_val, n_test] = split_lengths(frame.length(), spec.train_fraction, spec.val_fraction);
    if (n_train == 0) throw ArgumentError("split leaves the training segment empty");
    if (n_test == 0) throw ArgumentError("split leaves the test segment empty");
    if (spec.val_fraction > 0.0 && n_val == 0) throw ArgumentError("split leaves the validation segment empty");
    if (spec.context_length + spec.horizon > n_train) {
        throw ArgumentError("context_length + horizon exceeds the training segment length");
    }
    return {frame.slice(0, n_train), frame.slice(n_train, n_val), frame.slice(n_train + n_val, n_test)};
}

/// Number of windows `windows()` produces.
inline std::size_t window_count(std::size_t length, std::size_t context_length, std::size_t horizon,
                                std::size_t stride) {
    if (context_length + horizon > length) return 0;
    return (length - context_length - horizon) / stride + 1;
}

/// Sliding (context, target) pairs with contexts starting at multiples of `stride`.
inline std::vector<Window> windows(const SeriesFrame& frame, std::size_t context_length, std::size_t horizon,
                                   std::size_t stride) {
    if (context_length == 0 || horizon == 0 || stride == 0) {
        throw ArgumentError("context_length, horizon and stride must be positive");
    }
    if (context_length + horizon > frame.length()) {
        throw ArgumentError("context_length + horizon exceeds the frame length");
    }
    const auto n = window_count(frame.length(), context_length, horizon, stride);
    std::vector<Window> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto start = i * stride;
        out.push_back({start, frame.values().slice_rows(start, context_length),
                       frame.values().slice_rows(start + context_length, horizon)});
    }
    return out;
}

} // namespace gasnorm
