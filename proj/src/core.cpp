#include "emospace/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

namespace emospace {

void Mat::append_row(std::span<const double> values) {
    if (rows_ > 0 && values.size() != cols_) {
        fail(ErrorCode::DimMismatch, "append_row: expected " + std::to_string(cols_) + " columns, got " +
                                         std::to_string(values.size()));
    }
    if (rows_ == 0) cols_ = values.size();
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
}

void Mat::erase_rows_keep(const std::vector<bool>& keep) {
    std::vector<double> out;
    out.reserve(data_.size());
    std::size_t kept = 0;
    for (std::size_t r = 0; r < rows_; ++r) {
        if (!keep[r]) continue;
        auto src = row(r);
        out.insert(out.end(), src.begin(), src.end());
        ++kept;
    }
    data_ = std::move(out);
    rows_ = kept;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound == 0) fail(ErrorCode::InvalidArgument, "Rng::below: bound must be positive");
    // Rejection sampling keeps the result unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % bound;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        fail(ErrorCode::DimMismatch, "dot: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Vec normalized(std::span<const double> a) {
    Vec out(a.begin(), a.end());
    normalize_in_place(out);
    return out;
}

void normalize_in_place(std::span<double> a) {
    const double n = norm(a);
    if (!(n > 0.0)) fail(ErrorCode::ZeroVector, "cannot normalize a zero vector");
    for (double& x : a) x /= n;
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        fail(ErrorCode::DimMismatch, "cosine_sim: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    const double na = norm(a);
    const double nb = norm(b);
    if (!(na > 0.0) || !(nb > 0.0)) fail(ErrorCode::ZeroVector, "cosine_sim of a zero-norm vector");
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

Vec softmax(std::span<const double> xs, double temperature) {
    if (xs.empty()) fail(ErrorCode::EmptyInput, "softmax of an empty sequence");
    if (!(temperature > 0.0)) fail(ErrorCode::InvalidTemperature, "softmax temperature must be > 0");
    const double peak = *std::max_element(xs.begin(), xs.end());
    Vec w(xs.size());
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        w[i] = std::exp((xs[i] - peak) / temperature);
        total += w[i];
    }
    for (double& x : w) x /= total;
    return w;
}

double gelu(double x) { return 0.5 * x * std::erfc(-x / std::numbers::sqrt2); }

double gelu_derivative(double x) {
    const double cdf = 0.5 * std::erfc(-x / std::numbers::sqrt2);
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Vec gaussian_vector(std::size_t n, double stddev, Rng& rng) {
    Vec v(n);
    for (double& x : v) x = stddev * rng.normal();
    return v;
}

Mat gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
    Mat m(rows, cols);
    for (double& x : m.data()) x = stddev * rng.normal();
    return m;
}

Mat orthogonal_init(std::size_t rows, std::size_t cols, Rng& rng) {
    if (rows > cols) {
        fail(ErrorCode::TooManyRows,
             "orthogonal_init: " + std::to_string(rows) + " rows cannot be orthonormal in R^" + std::to_string(cols));
    }
    if (rows == 0) return Mat(0, cols);
    // Columns of the (cols x rows) Gaussian matrix become the output rows.
    Eigen::MatrixXd a(cols, rows);
    for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
    const Eigen::MatrixXd& r = qr.matrixQR();
    Mat out(rows, cols);
    for (std::size_t j = 0; j < rows; ++j) {
        const double sign = r(j, j) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < cols; ++i) out(j, i) = sign * q(i, j);
    }
    return out;
}

Vec mat_t_vec(const Mat& m, std::span<const double> x) {
    if (x.size() != m.rows()) {
        fail(ErrorCode::DimMismatch, "expected input of size " + std::to_string(m.rows()) + ", got " +
                                         std::to_string(x.size()));
    }
    Vec y(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double xi = x[i];
        auto row = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) y[j] += xi * row[j];
    }
    return y;
}

Vec mat_vec(const Mat& m, std::span<const double> x) {
    if (x.size() != m.cols()) {
        fail(ErrorCode::DimMismatch, "expected input of size " + std::to_string(m.cols()) + ", got " +
                                         std::to_string(x.size()));
    }
    Vec y(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) y[i] = dot(m.row(i), x);
    return y;
}

void require_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) fail(ErrorCode::InvariantViolation, std::string(what) + " contains a non-finite entry");
    }
}

}  // namespace emospace
