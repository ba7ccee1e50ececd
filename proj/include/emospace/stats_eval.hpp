#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emospace/core.hpp"

namespace emospace {

// annotators x items categorical codes.
struct AnnotationMatrix {
    std::vector<std::vector<std::size_t>> labels;
    std::size_t categories = 0;
};

// subjects x treatments ratings.
struct RatingMatrix {
    Mat values;
};

// Unweighted (nominal) Cohen's kappa.
double cohen_kappa(std::span<const std::size_t> a, std::span<const std::size_t> b, std::size_t categories);

struct KappaPair {
    std::size_t first = 0;
    std::size_t second = 0;
    double kappa = 0.0;
};

struct PairwiseKappa {
    double mean = 0.0;
    double stddev = 0.0;  // population
    std::vector<KappaPair> pairs;
    std::vector<KappaPair> degenerate;  // excluded from mean/stddev; kappa is NaN
};

PairwiseKappa pairwise_kappa(const AnnotationMatrix& m);

struct FriedmanResult {
    double chi2 = 0.0;
    double p_value = 1.0;
    std::size_t df = 0;
    Vec mean_ranks;
};

// Average ranks within subjects, tie-corrected statistic, chi-square p-value
// with k - 1 degrees of freedom.
FriedmanResult friedman_test(const RatingMatrix& m);
// Within-subject average ranks (1-based).
Mat within_subject_ranks(const Mat& values);
// The tie-corrected statistic alone.
double friedman_statistic(const Mat& values);

// Regularized upper incomplete gamma Q(a, x).
double regularized_gamma_q(double a, double x);
double chi_square_sf(double x, double df);

// 100 * max(0, cos(a, b)).
double alignment_score(std::span<const double> a, std::span<const double> b);

// CSV with a header row; one annotator (or subject) per row. Malformed cells
// raise FormatError naming the 1-based row and column.
AnnotationMatrix parse_annotation_csv(const std::string& text);
RatingMatrix parse_rating_csv(const std::string& text);

nlohmann::json to_json(const PairwiseKappa& result);
nlohmann::json to_json(const FriedmanResult& result);

}  // namespace emospace
