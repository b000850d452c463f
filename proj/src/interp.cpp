#include "lindlearn/interp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lindlearn/common.hpp"
#include "lindlearn/simplex.hpp"

namespace lindlearn {

namespace {

// Chebyshev partitions of [-1, 1]: partition j (0-based, j = 0 nearest x = 1)
// is [cos(pi*(j+1)/m), cos(pi*j/m)]; all carry equal arcsine measure 1/m.
int partition_index(double x, int m) {
    const double u = std::acos(std::clamp(x, -1.0, 1.0)) / PI;  // in [0, 1]
    int j = static_cast<int>(std::ceil(u * m)) - 1;
    return std::clamp(j, 0, m - 1);
}

double partition_width(int j, int m) {
    return std::cos(PI * j / m) - std::cos(PI * (j + 1) / m);
}

Eigen::MatrixXd vandermonde(const std::vector<double>& x, int degree) {
    Eigen::MatrixXd v(x.size(), degree + 1);
    for (std::size_t i = 0; i < x.size(); ++i) {
        double p = 1.0;
        for (int k = 0; k <= degree; ++k) {
            v(static_cast<Eigen::Index>(i), k) = p;
            p *= x[i];
        }
    }
    return v;
}

// The monomial basis is acceptable only while the design matrix stays well
// conditioned; d <= ~10 on [-1, 1] keeps this far below the ceiling.
void assert_conditioning(const Eigen::MatrixXd& v) {
    if (v.rows() < v.cols()) return;  // underdetermined: conditioning unscored
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(v);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    const double smax = svd.singularValues()(0);
    if (!(smin > 0.0) || smax / smin >= 1e8)
        fail_numerical("polynomial design matrix condition number exceeds 1e8");
}

double median(std::vector<double> v) {
    const std::size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + n / 2, v.end());
    double hi = v[n / 2];
    if (n % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + n / 2 - 1, v.end());
    return 0.5 * (v[n / 2 - 1] + hi);
}

struct UnitData {
    std::vector<double> x;        // rescaled sample positions in [-1, 1]
    std::vector<double> y;
    std::vector<int> part;        // partition index per sample
    std::vector<double> weight;   // width(I_j) / |I_j| per sample
    int m = 0;                    // partition count
};

UnitData prepare(const std::vector<Sample>& points, int degree, int m_partitions,
                 double a, double b) {
    if (!(b > a)) fail_config("fit window requires domain_b > domain_a");
    if (points.empty()) fail_config("fit requires at least one sample");
    if (m_partitions <= 0) m_partitions = 2 * (degree + 1);

    UnitData d;
    d.m = m_partitions;
    d.x.reserve(points.size());
    d.y.reserve(points.size());
    for (const Sample& s : points) {
        d.x.push_back((2.0 * s.x - a - b) / (b - a));
        d.y.push_back(s.y);
    }
    std::vector<double> sorted = d.x;
    std::sort(sorted.begin(), sorted.end());
    int distinct = 1;
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i] - sorted[i - 1] > 1e-12) ++distinct;
    if (distinct < degree + 1)
        fail_config("fit of degree " + std::to_string(degree) + " needs at least " +
                    std::to_string(degree + 1) + " distinct sample times");

    std::vector<int> count(static_cast<std::size_t>(d.m), 0);
    d.part.reserve(points.size());
    for (double x : d.x) {
        const int j = partition_index(x, d.m);
        d.part.push_back(j);
        ++count[static_cast<std::size_t>(j)];
    }
    d.weight.reserve(points.size());
    for (int j : d.part)
        d.weight.push_back(partition_width(j, d.m) / count[static_cast<std::size_t>(j)]);
    return d;
}

double evaluate_poly(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) acc = acc * x + c[k];
    return acc;
}

// Weighted l1 objective sum_j width(I_j) * mean_{I_j} |y - p(x)|, expressed
// through the per-point weights of `prepare`.
double weighted_l1_objective(const UnitData& d, const std::vector<double>& c) {
    double tot = 0.0;
    for (std::size_t i = 0; i < d.x.size(); ++i)
        tot += d.weight[i] * std::abs(d.y[i] - evaluate_poly(c, d.x[i]));
    return tot;
}

std::vector<double> l1_solve(const UnitData& d, int degree) {
    const int n = static_cast<int>(d.x.size());
    const int nc = degree + 1;
    const Eigen::MatrixXd v = vandermonde(d.x, degree);
    assert_conditioning(v);

    // Variables [c+ (nc), c- (nc), r (n)], all >= 0; p = c+ - c-.
    // |y_i - p(x_i)| <= r_i becomes two inequality rows per sample.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * n, 2 * nc + n);
    Eigen::VectorXd b(2 * n);
    Eigen::VectorXd cost = Eigen::VectorXd::Zero(2 * nc + n);
    for (int i = 0; i < n; ++i) {
        A.block(i, 0, 1, nc) = v.row(i);
        A.block(i, nc, 1, nc) = -v.row(i);
        A(i, 2 * nc + i) = -1.0;
        b(i) = d.y[static_cast<std::size_t>(i)];
        A.block(n + i, 0, 1, nc) = -v.row(i);
        A.block(n + i, nc, 1, nc) = v.row(i);
        A(n + i, 2 * nc + i) = -1.0;
        b(n + i) = -d.y[static_cast<std::size_t>(i)];
        cost(2 * nc + i) = d.weight[static_cast<std::size_t>(i)];
    }
    const LpSolution sol = solve_lp(A, b, cost);
    std::vector<double> c(static_cast<std::size_t>(nc));
    for (int k = 0; k < nc; ++k) c[static_cast<std::size_t>(k)] = sol.x(k) - sol.x(nc + k);
    return c;
}

struct MedianPoints {
    std::vector<double> x;
    std::vector<double> y;
};

MedianPoints partition_medians(const UnitData& d, const std::vector<double>& y) {
    MedianPoints mp;
    for (int j = 0; j < d.m; ++j) {
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < d.x.size(); ++i) {
            if (d.part[i] == j) {
                xs.push_back(d.x[i]);
                ys.push_back(y[i]);
            }
        }
        if (xs.empty()) continue;
        mp.x.push_back(median(xs));
        mp.y.push_back(median(ys));
    }
    return mp;
}

std::vector<double> linf_solve(const MedianPoints& mp, int degree) {
    if (mp.x.empty()) fail_config("l-infinity regression: all partitions are empty");
    const int k = static_cast<int>(mp.x.size());
    const int nc = degree + 1;
    const Eigen::MatrixXd v = vandermonde(mp.x, degree);
    assert_conditioning(v);

    // Variables [c+ (nc), c- (nc), s]; minimize s with |y~_j - p(x~_j)| <= s.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * k, 2 * nc + 1);
    Eigen::VectorXd b(2 * k);
    Eigen::VectorXd cost = Eigen::VectorXd::Zero(2 * nc + 1);
    cost(2 * nc) = 1.0;
    for (int i = 0; i < k; ++i) {
        A.block(i, 0, 1, nc) = v.row(i);
        A.block(i, nc, 1, nc) = -v.row(i);
        A(i, 2 * nc) = -1.0;
        b(i) = mp.y[static_cast<std::size_t>(i)];
        A.block(k + i, 0, 1, nc) = -v.row(i);
        A.block(k + i, nc, 1, nc) = v.row(i);
        A(k + i, 2 * nc) = -1.0;
        b(k + i) = -mp.y[static_cast<std::size_t>(i)];
    }
    const LpSolution sol = solve_lp(A, b, cost);
    std::vector<double> c(static_cast<std::size_t>(nc));
    for (int kk = 0; kk < nc; ++kk)
        c[static_cast<std::size_t>(kk)] = sol.x(kk) - sol.x(nc + kk);
    return c;
}

double residual_sup_of(const UnitData& d, const std::vector<double>& c) {
    std::vector<double> resid(d.x.size());
    for (std::size_t i = 0; i < d.x.size(); ++i)
        resid[i] = d.y[i] - evaluate_poly(c, d.x[i]);
    const MedianPoints mp = partition_medians(d, resid);
    double sup = 0.0;
    for (double y : mp.y) sup = std::max(sup, std::abs(y));
    return sup;
}

PolynomialFit make_fit(const UnitData& d, std::vector<double> c, int degree, double a,
                       double b) {
    PolynomialFit fit;
    fit.degree = degree;
    fit.domain_a = a;
    fit.domain_b = b;
    fit.residual_sup = residual_sup_of(d, c);
    fit.coefficients = std::move(c);
    return fit;
}

int auto_linf_iterations(int degree) {
    return static_cast<int>(std::ceil(std::log2(std::max(degree, 2)))) + 1;
}

int min_points_for(int degree, int factor) {
    const double soft = factor * degree * std::log(static_cast<double>(degree));
    return std::max(degree + 1, static_cast<int>(std::ceil(soft)));
}

std::vector<double> robust_solve(const UnitData& d, int degree, int iterations) {
    std::vector<double> c = l1_solve(d, degree);
    std::vector<double> resid(d.x.size());
    for (int round = 0; round < iterations; ++round) {
        for (std::size_t i = 0; i < d.x.size(); ++i)
            resid[i] = d.y[i] - evaluate_poly(c, d.x[i]);
        const std::vector<double> q = linf_solve(partition_medians(d, resid), degree);
        std::vector<double> cand(c.size());
        for (std::size_t k = 0; k < c.size(); ++k) cand[k] = c[k] + q[k];
        // Guarded acceptance: an l-infinity round may only replace the fit if
        // it does not worsen the outlier-robust l1 objective.  Without the
        // guard, heavy outlier fractions (~40%) can corrupt the medians and
        // walk the fit away from the l1 optimum.
        if (weighted_l1_objective(d, cand) <= weighted_l1_objective(d, c) + 1e-12)
            c = std::move(cand);
    }
    return c;
}

}  // namespace

double PolynomialFit::evaluate_unit(double x) const {
    return evaluate_poly(coefficients, x);
}

std::vector<double> chebyshev_sample(int m, double a, double b, Rng& rng) {
    if (m < 1) fail_config("chebyshev_sample requires m >= 1");
    if (!(b > a)) fail_config("chebyshev_sample requires b > a");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        const double x = std::cos(PI * rng.uniform());
        out.push_back(a + (b - a) * (x + 1.0) / 2.0);
    }
    return out;
}

PolynomialFit l1_regression(const std::vector<Sample>& points, int degree,
                            int m_partitions, double domain_a, double domain_b) {
    if (degree < 0) fail_config("l1_regression requires degree >= 0");
    UnitData d = prepare(points, degree, m_partitions, domain_a, domain_b);
    return make_fit(d, l1_solve(d, degree), degree, domain_a, domain_b);
}

PolynomialFit linf_regression(const std::vector<Sample>& points, int degree,
                              int m_partitions, double domain_a, double domain_b) {
    if (degree < 0) fail_config("linf_regression requires degree >= 0");
    UnitData d = prepare(points, degree, m_partitions, domain_a, domain_b);
    return make_fit(d, linf_solve(partition_medians(d, d.y), degree), degree, domain_a,
                    domain_b);
}

PolynomialFit robust_fit(const std::vector<Sample>& points, int degree,
                         const FitConfig& cfg, double domain_a, double domain_b) {
    if (degree < 1) fail_config("robust_fit requires degree >= 1");
    if (!(cfg.outlier_fraction_budget < 0.5))
        fail_config("outlier_fraction_budget must stay below 1/2");
    const int need = min_points_for(degree, cfg.min_points_factor);
    if (static_cast<int>(points.size()) < need)
        fail_config("robust_fit of degree " + std::to_string(degree) + " needs >= " +
                    std::to_string(need) + " samples, got " +
                    std::to_string(points.size()));
    UnitData d = prepare(points, degree, 2 * (degree + 1), domain_a, domain_b);
    const int iters =
        cfg.linf_iterations > 0 ? cfg.linf_iterations : auto_linf_iterations(degree);
    return make_fit(d, robust_solve(d, degree, iters), degree, domain_a, domain_b);
}

FitSelection robust_fit_auto(const std::vector<Sample>& points, const FitConfig& cfg,
                             double domain_a, double domain_b, Rng& cv_rng) {
    if (cfg.degrees_to_try.empty()) fail_config("degrees_to_try is empty");
    const int n = static_cast<int>(points.size());

    // Leave-20%-out cross-validation: one random shuffle, five consecutive
    // folds, score = mean absolute held-out residual pooled over folds.
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(
            cv_rng.uniform_below(static_cast<std::uint64_t>(i) + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    constexpr int kFolds = 5;

    FitSelection sel;
    int best_degree = -1;
    double best_score = std::numeric_limits<double>::infinity();
    for (int degree : cfg.degrees_to_try) {
        if (degree < 1) fail_config("degrees_to_try entries must be >= 1");
        if (n < min_points_for(degree, cfg.min_points_factor)) continue;
        double total_abs = 0.0;
        long total_count = 0;
        bool usable = true;
        for (int fold = 0; fold < kFolds && usable; ++fold) {
            const int lo = fold * n / kFolds;
            const int hi = (fold + 1) * n / kFolds;
            if (hi == lo) continue;
            std::vector<Sample> train;
            train.reserve(static_cast<std::size_t>(n - (hi - lo)));
            for (int i = 0; i < n; ++i)
                if (i < lo || i >= hi)
                    train.push_back(points[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
            try {
                UnitData d = prepare(train, degree, 2 * (degree + 1), domain_a, domain_b);
                const int iters = cfg.linf_iterations > 0 ? cfg.linf_iterations
                                                          : auto_linf_iterations(degree);
                const std::vector<double> c = robust_solve(d, degree, iters);
                for (int i = lo; i < hi; ++i) {
                    const Sample& s = points[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
                    const double x = (2.0 * s.x - domain_a - domain_b) / (domain_b - domain_a);
                    total_abs += std::abs(s.y - evaluate_poly(c, x));
                    ++total_count;
                }
            } catch (const Error&) {
                usable = false;  // fold too degenerate for this degree
            }
        }
        if (!usable || total_count == 0) continue;
        const double score = total_abs / static_cast<double>(total_count);
        sel.cv_scores.emplace_back(degree, score);
        if (score < best_score) {
            best_score = score;
            best_degree = degree;
        }
    }
    if (best_degree < 0)
        fail_config("no candidate degree is admissible for " + std::to_string(n) +
                    " samples");
    sel.fit = robust_fit(points, best_degree, cfg, domain_a, domain_b);
    return sel;
}

double derivative_at_zero(const PolynomialFit& fit) {
    if (fit.domain_a < 0.0)
        fail_config("derivative_at_zero requires domain_a >= 0");
    const double x0 = fit.to_unit(0.0);
    double dp = 0.0;
    double p = 1.0;  // x0^(k-1)
    for (std::size_t k = 1; k < fit.coefficients.size(); ++k) {
        dp += static_cast<double>(k) * fit.coefficients[k] * p;
        p *= x0;
    }
    return dp * 2.0 / (fit.domain_b - fit.domain_a);
}

double markov_constant(int d, int k) {
    if (k < 1 || k > d) fail_config("markov_constant requires 1 <= k <= d");
    if (d <= 15) {
        double v = 1.0;
        for (int j = 0; j < k; ++j) v *= static_cast<double>(d) * d - static_cast<double>(j) * j;
        for (int j = 1; j < 2 * k; j += 2) v /= j;
        return v;
    }
    double lg = 0.0;
    for (int j = 0; j < k; ++j)
        lg += std::log(static_cast<double>(d) * d - static_cast<double>(j) * j);
    for (int j = 1; j < 2 * k; j += 2) lg -= std::log(static_cast<double>(j));
    return std::exp(lg);
}

double derivative_error_budget(double a, double b, int d, double sigma) {
    if (d < 1) fail_config("derivative_error_budget requires d >= 1");
    if (!(b > a) || a < 0.0)
        fail_config("derivative_error_budget requires 0 <= a < b");
    if (sigma < 0.0) fail_config("derivative_error_budget requires sigma >= 0");
    const double two_over = 2.0 / (b - a);
    double sum = 0.0;
    if (d <= 15 && a > 0.0) {
        double fact = 1.0;  // (k-1)!
        for (int k = 1; k <= d; ++k) {
            if (k > 1) fact *= k - 1;
            sum += std::pow(two_over, k) * std::pow(a, k - 1) * markov_constant(d, k) / fact;
        }
    } else if (a == 0.0) {
        sum = two_over * markov_constant(d, 1);  // only the k = 1 term survives
    } else {
        for (int k = 1; k <= d; ++k) {
            double lg = k * std::log(two_over) + (k - 1) * std::log(a) - std::lgamma(k);
            for (int j = 0; j < k; ++j)
                lg += std::log(static_cast<double>(d) * d - static_cast<double>(j) * j);
            for (int j = 1; j < 2 * k; j += 2) lg -= std::log(static_cast<double>(j));
            sum += std::exp(lg);
        }
    }
    return 3.0 * sigma * sum;
}

TimeGrid choose_time_grid(double epsilon, int d, double time_scale) {
    if (!(epsilon > 0.0)) fail_config("choose_time_grid requires epsilon > 0");
    if (d < 1) fail_config("choose_time_grid requires d >= 1");
    if (!(time_scale > 0.0)) fail_config("choose_time_grid requires time_scale > 0");
    TimeGrid g;
    const double t0_unit = 1.0 / (static_cast<double>(d) * d);
    g.t0 = t0_unit * time_scale;
    g.t_max = (2.0 + t0_unit) * time_scale;
    g.m_points = std::max(
        d + 1, static_cast<int>(std::ceil(4.0 * d * std::log(static_cast<double>(d) + 1.0))));
    return g;
}

int degree_heuristic(double t_max, double region_size, double epsilon, int d_min,
                     int d_max) {
    if (!(t_max > 0.0) || !(region_size > 0.0) || !(epsilon > 0.0))
        fail_config("degree_heuristic requires positive arguments");
    if (d_min < 1 || d_max < d_min) fail_config("degree_heuristic: bad clamp range");
    int d = d_min;
    if (epsilon < 1.0) {
        const double raw =
            2.0 * std::exp(1.0) * t_max * region_size * std::log(1.0 / epsilon);
        d = static_cast<int>(std::ceil(raw)) - 1;
    }
    return std::clamp(d, d_min, d_max);
}

}  // namespace lindlearn
