#include "emospace/stats_eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace emospace {

double cohen_kappa(std::span<const std::size_t> a, std::span<const std::size_t> b, std::size_t categories) {
    if (a.size() != b.size()) {
        fail(ErrorCode::DimMismatch, "kappa needs equal-length sequences (" + std::to_string(a.size()) + " vs " +
                                         std::to_string(b.size()) + ")");
    }
    if (a.empty()) fail(ErrorCode::EmptyInput, "kappa of empty sequences");
    std::vector<long long> count_a(categories, 0), count_b(categories, 0);
    long long agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] >= categories || b[i] >= categories) {
            fail(ErrorCode::IndexOutOfRange, "code at position " + std::to_string(i) + " exceeds category count " +
                                                 std::to_string(categories));
        }
        ++count_a[a[i]];
        ++count_b[b[i]];
        if (a[i] == b[i]) ++agree;
    }
    const auto n = static_cast<long long>(a.size());
    long long chance = 0;  // n^2 * p_e
    for (std::size_t c = 0; c < categories; ++c) chance += count_a[c] * count_b[c];
    const long long total = n * n;
    if (chance == total) {
        if (agree == n) return 1.0;
        fail(ErrorCode::DegenerateMarginals, "chance agreement is 1 but observed agreement is not");
    }
    // (p_o - p_e) / (1 - p_e) with both scaled by n^2 to stay exact.
    return static_cast<double>(agree * n - chance) / static_cast<double>(total - chance);
}

PairwiseKappa pairwise_kappa(const AnnotationMatrix& m) {
    if (m.labels.size() < 2) fail(ErrorCode::InvalidArgument, "pairwise kappa needs at least two annotators");
    PairwiseKappa out;
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        for (std::size_t j = i + 1; j < m.labels.size(); ++j) {
            try {
                out.pairs.push_back({i, j, cohen_kappa(m.labels[i], m.labels[j], m.categories)});
            } catch (const Error& ex) {
                if (ex.code() != ErrorCode::DegenerateMarginals) throw;
                out.degenerate.push_back({i, j, std::numeric_limits<double>::quiet_NaN()});
            }
        }
    }
    if (!out.pairs.empty()) {
        double s = 0.0;
        for (const auto& p : out.pairs) s += p.kappa;
        out.mean = s / static_cast<double>(out.pairs.size());
        double v = 0.0;
        for (const auto& p : out.pairs) v += (p.kappa - out.mean) * (p.kappa - out.mean);
        out.stddev = std::sqrt(v / static_cast<double>(out.pairs.size()));
    }
    return out;
}

Mat within_subject_ranks(const Mat& values) {
    Mat ranks(values.rows(), values.cols());
    std::vector<std::size_t> order(values.cols());
    for (std::size_t s = 0; s < values.rows(); ++s) {
        auto row = values.row(s);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return row[x] < row[y]; });
        std::size_t i = 0;
        while (i < order.size()) {
            std::size_t j = i;
            while (j + 1 < order.size() && row[order[j + 1]] == row[order[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t t = i; t <= j; ++t) ranks(s, order[t]) = avg;
            i = j + 1;
        }
    }
    return ranks;
}

namespace {

void check_ratings(const Mat& values) {
    if (values.rows() < 2) fail(ErrorCode::TooFewSubjects, "Friedman test needs at least 2 subjects");
    if (values.cols() < 2) fail(ErrorCode::TooFewSubjects, "Friedman test needs at least 2 treatments");
    require_finite(values.data(), "ratings");
}

}  // namespace

double friedman_statistic(const Mat& values) {
    check_ratings(values);
    const auto n = static_cast<double>(values.rows());
    const auto k = static_cast<double>(values.cols());
    const Mat ranks = within_subject_ranks(values);

    double spread = 0.0;
    for (std::size_t j = 0; j < values.cols(); ++j) {
        double r = 0.0;
        for (std::size_t s = 0; s < values.rows(); ++s) r += ranks(s, j);
        const double dev = r / n - (k + 1.0) / 2.0;
        spread += dev * dev;
    }
    double ties = 0.0;  // sum of t^3 - t over tie groups
    for (std::size_t s = 0; s < values.rows(); ++s) {
        std::vector<double> row(values.row(s).begin(), values.row(s).end());
        std::sort(row.begin(), row.end());
        std::size_t i = 0;
        while (i < row.size()) {
            std::size_t j = i;
            while (j + 1 < row.size() && row[j + 1] == row[i]) ++j;
            const auto t = static_cast<double>(j - i + 1);
            ties += t * t * t - t;
            i = j + 1;
        }
    }
    const double correction = 1.0 - ties / (n * (k * k * k - k));
    if (correction <= 0.0) return 0.0;  // every subject rated all treatments equally
    return 12.0 * n / (k * (k + 1.0)) * spread / correction;
}

FriedmanResult friedman_test(const RatingMatrix& m) {
    check_ratings(m.values);
    FriedmanResult out;
    out.chi2 = friedman_statistic(m.values);
    out.df = m.values.cols() - 1;
    out.p_value = chi_square_sf(out.chi2, static_cast<double>(out.df));
    const Mat ranks = within_subject_ranks(m.values);
    out.mean_ranks.assign(m.values.cols(), 0.0);
    for (std::size_t j = 0; j < m.values.cols(); ++j) {
        for (std::size_t s = 0; s < m.values.rows(); ++s) out.mean_ranks[j] += ranks(s, j);
        out.mean_ranks[j] /= static_cast<double>(m.values.rows());
    }
    return out;
}

double regularized_gamma_q(double a, double x) {
    if (!(a > 0.0) || x < 0.0) fail(ErrorCode::InvalidArgument, "regularized_gamma_q needs a > 0 and x >= 0");
    if (x == 0.0) return 1.0;
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-16;
    const double log_prefix = -x + a * std::log(x) - std::lgamma(a);
    if (x < a + 1.0) {
        // Series for P(a, x).
        double term = 1.0 / a;
        double sum = term;
        for (int n = 1; n < kMaxIter; ++n) {
            term *= x / (a + n);
            sum += term;
            if (std::abs(term) < std::abs(sum) * kEps) break;
        }
        return std::clamp(1.0 - sum * std::exp(log_prefix), 0.0, 1.0);
    }
    // Continued fraction for Q(a, x), modified Lentz.
    constexpr double kTiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) break;
    }
    return std::clamp(std::exp(log_prefix) * h, 0.0, 1.0);
}

double chi_square_sf(double x, double df) {
    if (!(df > 0.0)) fail(ErrorCode::InvalidArgument, "chi-square needs df > 0");
    if (x <= 0.0) return 1.0;
    return regularized_gamma_q(0.5 * df, 0.5 * x);
}

double alignment_score(std::span<const double> a, std::span<const double> b) {
    return 100.0 * std::max(0.0, cosine_sim(a, b));
}

namespace {

std::vector<std::vector<std::string>> split_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) {
            const auto first = cell.find_first_not_of(" \t");
            const auto last = cell.find_last_not_of(" \t");
            cells.push_back(first == std::string::npos ? "" : cell.substr(first, last - first + 1));
        }
        if (line.back() == ',') cells.emplace_back();
        rows.push_back(std::move(cells));
    }
    if (rows.size() < 2) fail(ErrorCode::FormatError, "CSV needs a header row and at least one data row");
    return rows;
}

[[noreturn]] void bad_cell(std::size_t row, std::size_t col, const std::string& cell, const char* expected) {
    fail(ErrorCode::FormatError, "row " + std::to_string(row) + ", column " + std::to_string(col) + ": '" + cell +
                                     "' is not " + expected);
}

}  // namespace

AnnotationMatrix parse_annotation_csv(const std::string& text) {
    const auto rows = split_csv(text);
    const std::size_t width = rows[0].size();
    AnnotationMatrix out;
    std::size_t max_code = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != width) {
            fail(ErrorCode::FormatError, "row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                                             " cells, header has " + std::to_string(width));
        }
        std::vector<std::size_t> codes;
        for (std::size_t c = 0; c < width; ++c) {
            const std::string& cell = rows[r][c];
            std::size_t v = 0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
                bad_cell(r + 1, c + 1, cell, "a nonnegative integer code");
            }
            codes.push_back(v);
            max_code = std::max(max_code, v);
        }
        out.labels.push_back(std::move(codes));
    }
    out.categories = max_code + 1;
    return out;
}

RatingMatrix parse_rating_csv(const std::string& text) {
    const auto rows = split_csv(text);
    const std::size_t width = rows[0].size();
    RatingMatrix out;
    out.values = Mat(0, width);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != width) {
            fail(ErrorCode::FormatError, "row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                                             " cells, header has " + std::to_string(width));
        }
        Vec values;
        for (std::size_t c = 0; c < width; ++c) {
            const std::string& cell = rows[r][c];
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
                bad_cell(r + 1, c + 1, cell, "a finite number");
            }
            values.push_back(v);
        }
        out.values.append_row(values);
    }
    return out;
}

nlohmann::json to_json(const PairwiseKappa& result) {
    const auto pairs_json = [](const std::vector<KappaPair>& pairs, bool with_kappa) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : pairs) {
            nlohmann::json item = {{"first", p.first}, {"second", p.second}};
            if (with_kappa) item["kappa"] = p.kappa;
            arr.push_back(item);
        }
        return arr;
    };
    return {{"mean", result.mean},
            {"std", result.stddev},
            {"pairs", pairs_json(result.pairs, true)},
            {"degenerate", pairs_json(result.degenerate, false)}};
}

nlohmann::json to_json(const FriedmanResult& result) {
    return {{"chi2", result.chi2}, {"p", result.p_value}, {"df", result.df}, {"mean_ranks", result.mean_ranks}};
}

}  // namespace emospace
