#pragma once

// Panel CSV ingestion, growth-rate transform, standardization and summary
// moments, plus the small CSV helpers shared by all writers.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "qvtv/core.hpp"
#include "qvtv/errors.hpp"

namespace qvtv {

// ---------------------------------------------------------------- csv helpers

/// Shortest round-trip decimal representation (locale independent).
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

/// Empty string for NaN (nullable CSV field).
inline std::string fmt_double_opt(double x) { return std::isnan(x) ? "" : format_double(x); }

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Strict decimal parse; returns false on junk, empty or trailing characters.
inline bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
    return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

inline bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

/// YYYY-MM-DD with a real calendar day.
inline bool is_iso_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
        if (s[static_cast<std::size_t>(i)] < '0' || s[static_cast<std::size_t>(i)] > '9') return false;
    const int y = std::stoi(std::string(s.substr(0, 4)));
    const int m = std::stoi(std::string(s.substr(5, 2)));
    const int d = std::stoi(std::string(s.substr(8, 2)));
    static constexpr int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m < 1 || m > 12 || d < 1) return false;
    const int md = days[m - 1] + (m == 2 && is_leap(y) ? 1 : 0);
    return d <= md;
}

/// Writes `content` to `path` through a temporary file and rename.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open '" + tmp + "' for writing");
        f << content;
        if (!f) throw IoError("write failed for '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot rename '" + tmp + "' to '" + path + "'");
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

// ---------------------------------------------------------------- panel

struct TransformRecord {
    std::string kind;  // "growth_rates" or "standardize"
    Vec mean;
    Vec sd;
};

struct TimeSeriesPanel {
    std::vector<std::string> dates;
    Mat values;  // T x n
    std::vector<std::string> names;
    std::vector<TransformRecord> transform_log;

    int T() const { return static_cast<int>(values.rows()); }
    int n() const { return static_cast<int>(values.cols()); }

    /// Row index of `date`, or -1.
    int row_of(const std::string& date) const {
        const auto it = std::lower_bound(dates.begin(), dates.end(), date);
        if (it == dates.end() || *it != date) return -1;
        return static_cast<int>(it - dates.begin());
    }

    /// Rows [begin, end) as a new panel sharing names.
    TimeSeriesPanel slice(int begin, int end) const {
        TimeSeriesPanel p;
        p.dates.assign(dates.begin() + begin, dates.begin() + end);
        p.values = values.middleRows(begin, end - begin);
        p.names = names;
        p.transform_log = transform_log;
        return p;
    }
};

inline TimeSeriesPanel parse_csv(std::istream& in, const std::string& source = "<stream>") {
    auto fail = [&](int line, const std::string& msg) -> IoError {
        std::ostringstream os;
        os << source << ":" << line << ": " << msg;
        return IoError(os.str());
    };
    std::string line;
    int lineno = 0;
    TimeSeriesPanel p;
    // header
    while (std::getline(in, line)) {
        ++lineno;
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) throw fail(lineno, "empty file");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "date") throw fail(lineno, "first header column must be 'date'");
    if (header.size() < 2) throw fail(lineno, "no value columns");
    p.names.assign(header.begin() + 1, header.end());
    const auto n = p.names.size();
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != n + 1) {
            std::ostringstream os;
            os << "expected " << n + 1 << " fields, got " << cells.size();
            throw fail(lineno, os.str());
        }
        if (!is_iso_date(cells[0])) throw fail(lineno, "invalid ISO-8601 date '" + cells[0] + "'");
        if (!p.dates.empty()) {
            if (cells[0] == p.dates.back()) throw fail(lineno, "duplicate date " + cells[0]);
            if (cells[0] < p.dates.back())
                throw fail(lineno, "dates not increasing: " + cells[0] + " after " + p.dates.back());
        }
        std::vector<double> r(n);
        for (std::size_t j = 0; j < n; ++j) {
            if (cells[j + 1].empty())
                throw fail(lineno, "missing value in column " + std::to_string(j + 2) + " ('" + p.names[j] + "')");
            if (!parse_double(cells[j + 1], r[j]) || !std::isfinite(r[j]))
                throw fail(lineno, "non-numeric or non-finite value '" + cells[j + 1] + "' in column " +
                                       std::to_string(j + 2) + " ('" + p.names[j] + "')");
        }
        p.dates.push_back(cells[0]);
        rows.push_back(std::move(r));
    }
    p.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (std::size_t j = 0; j < n; ++j) p.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = rows[t][j];
    return p;
}

inline TimeSeriesPanel load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open '" + path + "'");
    return parse_csv(f, path);
}

inline std::string panel_to_csv(const TimeSeriesPanel& p) {
    std::ostringstream os;
    os << "date";
    for (const auto& nme : p.names) os << ',' << nme;
    os << '\n';
    for (int t = 0; t < p.T(); ++t) {
        os << p.dates[static_cast<std::size_t>(t)];
        for (int j = 0; j < p.n(); ++j) os << ',' << format_double(p.values(t, j));
        os << '\n';
    }
    return os.str();
}

inline void write_csv(const TimeSeriesPanel& p, const std::string& path) { write_file_atomic(path, panel_to_csv(p)); }

/// 100 (x_t - x_{t-1}) / x_{t-1}; the first date is dropped.
inline TimeSeriesPanel growth_rates(const TimeSeriesPanel& p) {
    if (p.T() < 2) throw std::invalid_argument("growth_rates: need at least two rows");
    for (int t = 0; t < p.T(); ++t)
        for (int j = 0; j < p.n(); ++j)
            if (!(p.values(t, j) > 0.0)) {
                std::ostringstream os;
                os << "growth_rates: non-positive price " << p.values(t, j) << " at " << p.dates[static_cast<std::size_t>(t)]
                   << " in column '" << p.names[static_cast<std::size_t>(j)] << "'";
                throw std::invalid_argument(os.str());
            }
    TimeSeriesPanel g;
    g.names = p.names;
    g.dates.assign(p.dates.begin() + 1, p.dates.end());
    const auto T = p.T() - 1;
    g.values = 100.0 * (p.values.bottomRows(T) - p.values.topRows(T)).cwiseQuotient(p.values.topRows(T));
    g.transform_log = p.transform_log;
    g.transform_log.push_back({"growth_rates", {}, {}});
    return g;
}

/// Rebuilds prices from growth rates and the initial price level.
inline Mat cumulate_growth(const Mat& growth, const Vec& initial) {
    Mat out(growth.rows() + 1, growth.cols());
    out.row(0) = initial.transpose();
    for (Eigen::Index t = 0; t < growth.rows(); ++t)
        out.row(t + 1) = out.row(t).cwiseProduct((1.0 + growth.row(t).array() / 100.0).matrix());
    return out;
}

struct Standardization {
    Vec mean;
    Vec sd;

    Mat apply(const Mat& x) const {
        return (x.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array();
    }
    Mat invert(const Mat& z) const {
        return (z.array().rowwise() * sd.transpose().array()).matrix().rowwise() + mean.transpose();
    }
    double invert(double z, int j) const { return z * sd[j] + mean[j]; }
};

/// Column means and sample standard deviations (divisor T - 1).
inline Standardization standardization_of(const Mat& x) {
    if (x.rows() < 2) throw std::invalid_argument("standardize: need at least two rows");
    Standardization s;
    s.mean = x.colwise().mean().transpose();
    s.sd.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double v = (x.col(j).array() - s.mean[j]).square().sum() / static_cast<double>(x.rows() - 1);
        if (!(v > 0.0)) throw std::invalid_argument("standardize: zero-variance column " + std::to_string(j));
        s.sd[j] = std::sqrt(v);
    }
    return s;
}

inline std::pair<TimeSeriesPanel, Standardization> standardize(const TimeSeriesPanel& p) {
    const Standardization s = standardization_of(p.values);
    TimeSeriesPanel out = p;
    out.values = s.apply(p.values);
    out.transform_log.push_back({"standardize", s.mean, s.sd});
    return {out, s};
}

inline TimeSeriesPanel destandardize(const TimeSeriesPanel& p, const Standardization& s) {
    TimeSeriesPanel out = p;
    out.values = s.invert(p.values);
    if (!out.transform_log.empty() && out.transform_log.back().kind == "standardize") out.transform_log.pop_back();
    return out;
}

struct SummaryRow {
    std::string period;
    std::string variable;
    int count = 0;
    double variance = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;  // non-excess
};

struct SubPeriod {
    std::string label;
    std::string first;  // inclusive ISO dates; empty = open end
    std::string last;
};

/// Sample variance (T - 1 divisor) and moment-ratio skewness / kurtosis.
inline SummaryRow moments_of(const Eigen::Ref<const Vec>& x) {
    const auto T = x.size();
    if (T < 4) throw std::invalid_argument("summary_stats: a sub-period needs at least 4 points");
    SummaryRow r;
    r.count = static_cast<int>(T);
    const double m = x.mean();
    const Vec c = x.array() - m;
    const double m2 = c.squaredNorm() / static_cast<double>(T);
    const double m3 = c.array().cube().sum() / static_cast<double>(T);
    const double m4 = c.array().square().square().sum() / static_cast<double>(T);
    r.variance = c.squaredNorm() / static_cast<double>(T - 1);
    r.skewness = m3 / std::pow(m2, 1.5);
    r.kurtosis = m4 / (m2 * m2);
    return r;
}

inline std::vector<SummaryRow> summary_stats(const TimeSeriesPanel& p, const std::vector<SubPeriod>& periods) {
    std::vector<SummaryRow> out;
    for (const auto& per : periods) {
        std::vector<int> rows;
        for (int t = 0; t < p.T(); ++t) {
            const auto& d = p.dates[static_cast<std::size_t>(t)];
            if ((per.first.empty() || d >= per.first) && (per.last.empty() || d <= per.last)) rows.push_back(t);
        }
        if (rows.size() < 4)
            throw std::invalid_argument("summary_stats: sub-period '" + per.label + "' has fewer than 4 points");
        for (int j = 0; j < p.n(); ++j) {
            Vec x(static_cast<Eigen::Index>(rows.size()));
            for (std::size_t i = 0; i < rows.size(); ++i) x[static_cast<Eigen::Index>(i)] = p.values(rows[i], j);
            SummaryRow r = moments_of(x);
            r.period = per.label;
            r.variable = p.names[static_cast<std::size_t>(j)];
            out.push_back(r);
        }
    }
    return out;
}

inline std::string summary_to_csv(const std::vector<SummaryRow>& rows) {
    std::ostringstream os;
    os << "period,variable,count,variance,skewness,kurtosis\n";
    for (const auto& r : rows)
        os << r.period << ',' << r.variable << ',' << r.count << ',' << format_double(r.variance) << ','
           << format_double(r.skewness) << ',' << format_double(r.kurtosis) << '\n';
    return os.str();
}

}  // namespace qvtv
