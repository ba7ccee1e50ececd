#pragma once

// Vector and matrix primitives shared by every module. All arithmetic is
// 64-bit; 32-bit values only appear at the file-format boundary.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "emospace/error.hpp"

namespace emospace {

using Vec = std::vector<double>;

// Dense row-major matrix.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    void append_row(std::span<const double> values);
    void erase_rows_keep(const std::vector<bool>& keep);

    bool operator==(const Mat&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Seeded generator: "mt19937_64/v1". Uniform and normal transforms are
// implemented locally on top of the engine.
class Rng {
public:
    static constexpr const char* kAlgorithm = "mt19937_64/v1";

    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    // Uniform integer in [0, bound); bound > 0.
    std::uint64_t below(std::uint64_t bound);
    // Standard normal via Box-Muller.
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
Vec normalized(std::span<const double> a);
void normalize_in_place(std::span<double> a);

// <a,b>/(|a||b|). Throws ZeroVector / DimMismatch.
double cosine_sim(std::span<const double> a, std::span<const double> b);

// Temperature softmax with max-subtraction. Throws EmptyInput / InvalidTemperature.
Vec softmax(std::span<const double> xs, double temperature = 1.0);

// Exact erf form x * Phi(x).
double gelu(double x);
double gelu_derivative(double x);
double sigmoid(double x);

Vec gaussian_vector(std::size_t n, double stddev, Rng& rng);
Mat gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng);

// Orthonormal rows from the QR factorization of a seeded Gaussian matrix, with
// R's diagonal forced positive. Throws TooManyRows when rows > cols.
Mat orthogonal_init(std::size_t rows, std::size_t cols, Rng& rng);

// y = M^T x  (x has M.rows() entries)
Vec mat_t_vec(const Mat& m, std::span<const double> x);
// y = M x  (x has M.cols() entries)
Vec mat_vec(const Mat& m, std::span<const double> x);

void require_finite(std::span<const double> values, const char* what);

}  // namespace emospace
