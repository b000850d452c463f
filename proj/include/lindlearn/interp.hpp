#pragma once

// Robust polynomial interpolation of measured time traces and extraction of
// the trace derivative at t = 0.
//
// The pipeline fits a low-degree polynomial to noisy samples on a window
// [a, b] with 0 <= a < b, tolerating bounded per-sample noise plus a minority
// of arbitrary outliers:
//   1. a partition-weighted l1 regression over Chebyshev partitions of the
//      rescaled domain [-1, 1],
//   2. iterated l-infinity refinement on per-partition median residuals,
//      guarded so a round is only accepted when it does not increase the
//      weighted-l1 objective.
// The derivative of the fitted polynomial is then extrapolated to t = 0
// (left of the data window), with a rigorous worst-case error budget from the
// Markov brothers' inequality.

#include <cstdint>
#include <utility>
#include <vector>

#include "lindlearn/rng.hpp"

namespace lindlearn {

struct PolynomialFit {
    int degree = 0;
    // Monomial coefficients on the rescaled domain [-1, 1]:
    // p(x) = sum_k coefficients[k] * x^k.
    std::vector<double> coefficients;
    double domain_a = 0.0;  // physical window start (us), >= 0
    double domain_b = 1.0;  // physical window end (us), > domain_a
    // Max over non-empty partitions of |median residual| of the final fit: an
    // outlier-resistant summary of the achieved fit quality.
    double residual_sup = 0.0;

    double to_unit(double t) const {
        return (2.0 * t - domain_a - domain_b) / (domain_b - domain_a);
    }
    double evaluate_unit(double x) const;
    double evaluate(double t) const { return evaluate_unit(to_unit(t)); }
};

enum class NodeDistribution { chebyshev, uniform, explicit_list };

struct FitConfig {
    std::vector<int> degrees_to_try = {1, 2, 3, 4, 5, 6, 7};
    double outlier_fraction_budget = 0.4;  // must stay < 1/2
    // 0 = automatic: ceil(log2(max(d, 2))) + 1 rounds of l-infinity refinement.
    int linf_iterations = 0;
    NodeDistribution node_distribution = NodeDistribution::chebyshev;
    // robust_fit demands |points| >= max(d+1, ceil(factor * d * ln d)); degree
    // selection silently skips candidate degrees the sample count cannot carry.
    int min_points_factor = 4;
};

struct Sample {
    double x = 0.0;  // physical time (us)
    double y = 0.0;  // measured value
};

// Degree-selection result: the chosen fit plus the cross-validation score per
// candidate degree (mean absolute held-out residual, leave-20%-out).
struct FitSelection {
    PolynomialFit fit;
    std::vector<std::pair<int, double>> cv_scores;  // (degree, score)
};

// m i.i.d. draws from the Chebyshev (arcsine) measure mapped to [a, b]:
// x = cos(pi*u) with u uniform on [0, 1], then affine to the window.
std::vector<double> chebyshev_sample(int m, double a, double b, Rng& rng);

// Partition-weighted l1 regression: minimizes
//   sum_j width(I_j) * mean_{x_i in I_j} |y_i - p(x_i)|
// over degree-`degree` polynomials, where {I_j} are the m_partitions
// equal-Chebyshev-measure partitions of [-1, 1] and width() is Euclidean
// interval length (empty partitions contribute zero).  m_partitions <= 0
// selects the default 2*(degree+1).
PolynomialFit l1_regression(const std::vector<Sample>& points, int degree,
                            int m_partitions, double domain_a, double domain_b);

// l-infinity regression on per-partition sample medians: minimizes
//   max_j |p(x~_j) - y~_j|
// where x~_j, y~_j are the medians of x and y over non-empty partition j.
PolynomialFit linf_regression(const std::vector<Sample>& points, int degree,
                              int m_partitions, double domain_a, double domain_b);

// l1 fit followed by guarded iterated l-infinity refinement on residuals.
// Contract (validated statistically): if more than half of the samples are
// sigma-close to a degree-`degree` polynomial p, then sup_[a,b] |p - fit|
// <= 3*sigma with >= 95% success over random node draws.
PolynomialFit robust_fit(const std::vector<Sample>& points, int degree,
                         const FitConfig& cfg, double domain_a, double domain_b);

// robust_fit with degree selected from cfg.degrees_to_try by leave-20%-out
// cross-validation (5 folds, fold assignment drawn from cv_rng); picks the
// smallest mean absolute held-out residual.
FitSelection robust_fit_auto(const std::vector<Sample>& points, const FitConfig& cfg,
                             double domain_a, double domain_b, Rng& cv_rng);

// p'(t = 0) through the affine chain rule.  Requires domain_a >= 0 (the
// extrapolation point lies left of the data window).
double derivative_at_zero(const PolynomialFit& fit);

// Markov brothers' constant
//   C_M(d, k) = d^2 (d^2 - 1^2) ... (d^2 - (k-1)^2) / (1 * 3 * 5 ... (2k-1)),
// the sup-norm amplification of the k-th derivative of a degree-d polynomial
// bounded on [-1, 1].  Computed in log space for d > 15.
double markov_constant(int d, int k);

// Worst-case bound on |p'(0) - q'(0)| for two degree-d polynomials with
// sup_[a,b] |p - q| <= 3*sigma:
//   3*sigma * sum_{k=1}^{d} (2/(b-a))^k a^(k-1) C_M(d, k) / (k-1)!.
double derivative_error_budget(double a, double b, int d, double sigma);

struct TimeGrid {
    double t0 = 0.0;     // first sample time (us)
    double t_max = 0.0;  // last sample time (us)
    int m_points = 0;    // number of samples
};

// Sampling-window recipe: t0 = 1/d^2 and t_max = 2 + t0 in rescaled units,
// m = ceil(4*d*log(d+1)) points, scaled to physical us by time_scale.
// `epsilon` is part of the calling convention (the target precision that
// produced d upstream) but does not enter the window formulas.
TimeGrid choose_time_grid(double epsilon, int d, double time_scale = 1.0);

// Fit-degree heuristic ceil(2*e*t_max*region_size*ln(1/epsilon)) - 1 for a
// trace generated by dynamics with interaction strength/degree product
// region_size, clamped to [d_min, d_max].
int degree_heuristic(double t_max, double region_size, double epsilon, int d_min = 1,
                     int d_max = 7);

}  // namespace lindlearn
