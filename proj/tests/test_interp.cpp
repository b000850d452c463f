#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lindlearn/common.hpp"
#include "lindlearn/interp.hpp"
#include "lindlearn/rng.hpp"

using namespace lindlearn;

namespace {

double eval_monomial(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) acc = acc * x + c[k];
    return acc;
}

// Sup distance between a fit and a truth polynomial given in the unit basis,
// measured on a dense grid of the unit interval.
double sup_error_unit(const PolynomialFit& fit, const std::vector<double>& truth) {
    double sup = 0.0;
    for (int i = 0; i <= 400; ++i) {
        const double x = -1.0 + 2.0 * i / 400.0;
        sup = std::max(sup, std::abs(fit.evaluate_unit(x) - eval_monomial(truth, x)));
    }
    return sup;
}

std::vector<Sample> make_samples(const std::vector<double>& t, const std::vector<double>& y) {
    std::vector<Sample> s(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) s[i] = {t[i], y[i]};
    return s;
}

// One randomized robust-fit trial on the unit window; returns sup error / sigma.
double robust_trial(Rng& rng, int d, double sigma, double out_frac) {
    std::vector<double> truth(static_cast<std::size_t>(d) + 1);
    for (double& c : truth) c = rng.uniform(-1.0, 1.0);
    // Calibrated audit size: at the theoretical-minimum point count a sparsely
    // populated Chebyshev partition can be 100% outliers, which no weighting
    // scheme survives.  25(d+1) keeps every partition well occupied.
    const int n = 25 * (d + 1);
    std::vector<Sample> pts(static_cast<std::size_t>(n));
    for (Sample& p : pts) {
        const double x = std::cos(PI * rng.uniform());
        p = {x, eval_monomial(truth, x) + rng.uniform(-sigma, sigma)};
    }
    const int n_out = static_cast<int>(out_frac * n);
    // Corrupt a random subset with large two-sided outliers.
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i)
        std::swap(idx[static_cast<std::size_t>(i)],
                  idx[static_cast<std::size_t>(rng.uniform_below(static_cast<std::uint64_t>(i) + 1))]);
    for (int k = 0; k < n_out; ++k) {
        const double mag = rng.uniform(5.0, 15.0);
        pts[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])].y +=
            (rng.uniform() < 0.5 ? -1.0 : 1.0) * mag;
    }
    FitConfig cfg;
    const PolynomialFit fit = robust_fit(pts, d, cfg, -1.0, 1.0);
    return sup_error_unit(fit, truth) / sigma;
}

}  // namespace

TEST_SUITE("interp") {

TEST_CASE("chebyshev_sample stays in range and follows the arcsine law") {
    Rng rng(11);
    const double a = 0.5, b = 2.5;
    const int n = 100000;
    std::vector<double> t = chebyshev_sample(n, a, b, rng);
    std::vector<double> xu(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(t[i] >= a);
        CHECK(t[i] <= b);
        xu[i] = (2.0 * t[i] - a - b) / (b - a);
    }
    std::sort(xu.begin(), xu.end());
    // CDF of x = cos(pi*u): F(v) = 1 - arccos(v)/pi.
    double ks = 0.0;
    for (std::size_t i = 0; i < xu.size(); ++i) {
        const double f = 1.0 - std::acos(std::clamp(xu[i], -1.0, 1.0)) / PI;
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        ks = std::max({ks, std::abs(f - lo), std::abs(f - hi)});
    }
    CHECK(ks < 0.01);

    CHECK_THROWS_AS(chebyshev_sample(10, 1.0, 1.0, rng), Error);
    CHECK_THROWS_AS(chebyshev_sample(0, 0.0, 1.0, rng), Error);
}

TEST_CASE("l1 regression reproduces exact lines and shrugs off 10% outliers") {
    Rng rng(21);
    // Exact line.
    std::vector<double> t, y;
    for (int i = 0; i < 12; ++i) {
        const double ti = 0.1 + 0.2 * i;
        t.push_back(ti);
        y.push_back(2.5 * ti - 0.7);
    }
    const PolynomialFit line = l1_regression(make_samples(t, y), 1, -1, 0.1, 2.3);
    for (int i = 0; i <= 50; ++i) {
        const double ti = 0.1 + (2.3 - 0.1) * i / 50.0;
        CHECK(std::abs(line.evaluate(ti) - (2.5 * ti - 0.7)) < 1e-8);
    }
    CHECK(line.residual_sup < 1e-8);

    // Quadratic with bounded noise: sup error <= 10 * d^2 * sigma.
    const double sigma = 0.01;
    const int d = 2;
    std::vector<double> truth = {0.3, -1.1, 0.8};
    std::vector<Sample> clean, dirty;
    for (int i = 0; i < 60; ++i) {
        const double x = std::cos(PI * rng.uniform());
        const double v = eval_monomial(truth, x) + rng.uniform(-sigma, sigma);
        clean.push_back({x, v});
        dirty.push_back({x, v});
    }
    const PolynomialFit qfit = l1_regression(clean, d, 2 * (d + 1), -1.0, 1.0);
    CHECK(sup_error_unit(qfit, truth) <= 10.0 * d * d * sigma);

    // 10% outliers of magnitude 10 barely move the fit.
    for (int k = 0; k < 6; ++k) dirty[static_cast<std::size_t>(10 * k)].y += 10.0;
    const PolynomialFit dfit = l1_regression(dirty, d, 2 * (d + 1), -1.0, 1.0);
    double shift = 0.0;
    for (int i = 0; i <= 200; ++i) {
        const double x = -1.0 + i / 100.0;
        shift = std::max(shift, std::abs(dfit.evaluate_unit(x) - qfit.evaluate_unit(x)));
    }
    CHECK(shift <= 5.0 * sigma);
}

TEST_CASE("linf regression fits medians and ignores a single outlier") {
    // Constant data -> constant polynomial.
    std::vector<Sample> pts;
    for (int i = 0; i < 15; ++i)
        pts.push_back({std::cos(PI * (i + 0.5) / 15.0), 4.2});
    PolynomialFit c0 = linf_regression(pts, 2, 4, -1.0, 1.0);
    for (int i = 0; i <= 20; ++i)
        CHECK(std::abs(c0.evaluate_unit(-1.0 + i / 10.0) - 4.2) < 1e-9);

    // Exact polynomial data -> objective ~ 0.
    std::vector<double> truth = {0.2, 1.0, -0.5, 0.3};
    std::vector<Sample> exact;
    for (int i = 0; i < 24; ++i) {
        const double x = std::cos(PI * (i + 0.5) / 24.0);
        exact.push_back({x, eval_monomial(truth, x)});
    }
    PolynomialFit pf = linf_regression(exact, 3, 8, -1.0, 1.0);
    CHECK(pf.residual_sup < 1e-9);
    CHECK(sup_error_unit(pf, truth) < 1e-8);

    // Raising the maximum-y element of a partition leaves that partition's
    // median untouched (the middle ranks see the same values for both odd and
    // even counts), so the dirty solve sees byte-identical median points.
    std::vector<Sample> dirty = exact;
    const auto part_of = [](double x) {
        const double u = std::acos(std::clamp(x, -1.0, 1.0)) / PI;
        return std::clamp(static_cast<int>(std::ceil(u * 4.0)) - 1, 0, 3);
    };
    std::size_t worst = dirty.size();
    for (std::size_t i = 0; i < dirty.size(); ++i) {
        if (part_of(dirty[i].x) != 0) continue;
        if (worst == dirty.size() || dirty[i].y > dirty[worst].y) worst = i;
    }
    REQUIRE(worst < dirty.size());
    dirty[worst].y += 50.0;
    PolynomialFit pd = linf_regression(dirty, 3, 4, -1.0, 1.0);
    PolynomialFit pc = linf_regression(exact, 3, 4, -1.0, 1.0);
    for (std::size_t k = 0; k < pc.coefficients.size(); ++k)
        CHECK(std::abs(pd.coefficients[k] - pc.coefficients[k]) < 1e-12);
}

TEST_CASE("robust_fit recovers a noiseless cubic to 1e-9") {
    Rng rng(31);
    std::vector<double> truth = {0.4, -0.9, 0.25, 0.7};
    std::vector<Sample> pts;
    for (int i = 0; i < 30; ++i) {
        const double x = std::cos(PI * rng.uniform());
        pts.push_back({x, eval_monomial(truth, x)});
    }
    FitConfig cfg;
    const PolynomialFit fit = robust_fit(pts, 3, cfg, -1.0, 1.0);
    CHECK(sup_error_unit(fit, truth) < 1e-9);

    // Arbitrary (uniform) node lists are accepted too.
    std::vector<Sample> upts;
    for (int i = 0; i < 30; ++i) {
        const double t = 0.1 + (1.9 - 0.1) * i / 29.0;
        upts.push_back({t, 1.0 + t - 0.5 * t * t * t});
    }
    const PolynomialFit uf = robust_fit(upts, 3, cfg, 0.1, 1.9);
    for (int i = 0; i <= 40; ++i) {
        const double t = 0.1 + (1.9 - 0.1) * i / 40.0;
        CHECK(std::abs(uf.evaluate(t) - (1.0 + t - 0.5 * t * t * t)) < 1e-8);
    }

    CHECK_THROWS_AS(robust_fit(pts, 3, FitConfig{.outlier_fraction_budget = 0.6}, -1.0, 1.0),
                    Error);
    std::vector<Sample> few(pts.begin(), pts.begin() + 4);
    CHECK_THROWS_AS(robust_fit(few, 3, cfg, -1.0, 1.0), Error);
}

TEST_CASE("robust_fit meets the 3-sigma contract, including 40% outliers") {
    Rng rng(41);
    int fails = 0;
    const int trials = 150;
    for (int t = 0; t < trials; ++t) {
        const int d = 1 + static_cast<int>(rng.uniform_below(5));
        const double sigma = std::pow(10.0, rng.uniform(-4.0, -1.0));
        const double frac = rng.uniform(0.0, 0.4);
        if (robust_trial(rng, d, sigma, frac) > 3.0) ++fails;
    }
    CHECK(fails <= trials / 20);  // >= 95% success

    int fails40 = 0;
    for (int t = 0; t < 60; ++t) {
        const int d = 1 + static_cast<int>(rng.uniform_below(5));
        const double sigma = std::pow(10.0, rng.uniform(-4.0, -1.0));
        if (robust_trial(rng, d, sigma, 0.4) > 3.0) ++fails40;
    }
    CHECK(fails40 <= 3);
}

TEST_CASE("affine round trip: window fit equals unit fit within 1e-10") {
    Rng rng(51);
    const double a = 0.3, b = 2.7;
    std::vector<double> truth = {0.1, -0.6, 0.9, 0.2};
    std::vector<Sample> unit_pts, win_pts;
    for (int i = 0; i < 40; ++i) {
        const double x = std::cos(PI * rng.uniform());
        const double y = eval_monomial(truth, x) + rng.uniform(-1e-3, 1e-3);
        unit_pts.push_back({x, y});
        win_pts.push_back({a + (b - a) * (x + 1.0) / 2.0, y});
    }
    FitConfig cfg;
    const PolynomialFit fu = robust_fit(unit_pts, 3, cfg, -1.0, 1.0);
    const PolynomialFit fw = robust_fit(win_pts, 3, cfg, a, b);
    for (int i = 0; i <= 80; ++i) {
        const double x = -1.0 + 2.0 * i / 80.0;
        const double t = a + (b - a) * (x + 1.0) / 2.0;
        CHECK(std::abs(fw.evaluate(t) - fu.evaluate_unit(x)) < 1e-10);
    }
}

TEST_CASE("doubling the noise at fixed nodes at most doubles the p95 error") {
    Rng rng(61);
    std::vector<double> e1, e2;
    for (int t = 0; t < 500; ++t) {
        const int d = 3;
        std::vector<double> truth(4);
        for (double& c : truth) c = rng.uniform(-1.0, 1.0);
        const double sigma = std::pow(10.0, rng.uniform(-3.0, -1.5));
        std::vector<Sample> p1, p2;
        for (int i = 0; i < 40; ++i) {
            const double x = std::cos(PI * rng.uniform());
            const double u = rng.uniform(-1.0, 1.0);
            const double base = eval_monomial(truth, x);
            p1.push_back({x, base + sigma * u});
            p2.push_back({x, base + 2.0 * sigma * u});
        }
        FitConfig cfg;
        e1.push_back(sup_error_unit(robust_fit(p1, d, cfg, -1.0, 1.0), truth) / sigma);
        e2.push_back(sup_error_unit(robust_fit(p2, d, cfg, -1.0, 1.0), truth) / sigma);
    }
    std::sort(e1.begin(), e1.end());
    std::sort(e2.begin(), e2.end());
    const double p95_1 = e1[static_cast<std::size_t>(0.95 * e1.size())];
    const double p95_2 = e2[static_cast<std::size_t>(0.95 * e2.size())];
    CHECK(p95_2 <= 2.0 * p95_1 * 1.05);
}

TEST_CASE("derivative_at_zero matches independent monomial conversion") {
    // p(t) = 3t + 1 fitted on [0.1, 2.1].
    std::vector<Sample> line;
    for (int i = 0; i < 12; ++i) {
        const double t = 0.1 + 2.0 * i / 11.0;
        line.push_back({t, 3.0 * t + 1.0});
    }
    FitConfig cfg;
    const PolynomialFit lf = robust_fit(line, 1, cfg, 0.1, 2.1);
    CHECK(std::abs(derivative_at_zero(lf) - 3.0) < 1e-9);

    // p(t) = t^2 has p'(0) = 0.
    std::vector<Sample> quad;
    for (int i = 0; i < 25; ++i) {
        const double t = 0.05 + 1.95 * i / 24.0;
        quad.push_back({t, t * t});
    }
    const PolynomialFit qf = robust_fit(quad, 2, cfg, 0.05, 2.0);
    CHECK(std::abs(derivative_at_zero(qf)) < 1e-9);

    // Random degree-5 unit-basis coefficients against an independent
    // unit->physical monomial conversion (binomial expansion).
    Rng rng(71);
    for (int rep = 0; rep < 20; ++rep) {
        PolynomialFit fit;
        fit.degree = 5;
        fit.domain_a = 0.2;
        fit.domain_b = 1.7;
        fit.coefficients.resize(6);
        for (double& c : fit.coefficients) c = rng.uniform(-2.0, 2.0);

        const double alpha = 2.0 / (fit.domain_b - fit.domain_a);
        const double beta = -(fit.domain_a + fit.domain_b) / (fit.domain_b - fit.domain_a);
        // Expand sum_k c_k (alpha*t + beta)^k into t-monomials.
        std::vector<double> tco(7, 0.0);
        std::vector<double> pw = {1.0};  // (alpha*t + beta)^k coefficients
        for (int k = 0; k <= 5; ++k) {
            for (std::size_t j = 0; j < pw.size(); ++j) tco[j] += fit.coefficients[static_cast<std::size_t>(k)] * pw[j];
            std::vector<double> nxt(pw.size() + 1, 0.0);
            for (std::size_t j = 0; j < pw.size(); ++j) {
                nxt[j] += beta * pw[j];
                nxt[j + 1] += alpha * pw[j];
            }
            pw = nxt;
        }
        CHECK(std::abs(derivative_at_zero(fit) - tco[1]) < 1e-12 * std::max(1.0, std::abs(tco[1])));
    }

    PolynomialFit neg;
    neg.degree = 1;
    neg.coefficients = {0.0, 1.0};
    neg.domain_a = -1.0;
    neg.domain_b = 1.0;
    CHECK_THROWS_AS(derivative_at_zero(neg), Error);
}

TEST_CASE("markov constants and the derivative budget") {
    for (int d = 1; d <= 12; ++d) CHECK(markov_constant(d, 1) == doctest::Approx(d * d));
    CHECK(markov_constant(3, 2) == doctest::Approx(24.0));
    CHECK(markov_constant(2, 2) == doctest::Approx(2.0 * 2 * (4 - 1) / 3.0));

    // Log-space path (d > 15) agrees with a long-double direct product.
    for (int d : {16, 20}) {
        for (int k : {1, 3, 7}) {
            long double v = 1.0L;
            for (int j = 0; j < k; ++j) v *= static_cast<long double>(d) * d - static_cast<long double>(j) * j;
            for (int j = 1; j < 2 * k; j += 2) v /= j;
            CHECK(markov_constant(d, k) == doctest::Approx(static_cast<double>(v)).epsilon(1e-10));
        }
    }
    CHECK_THROWS_AS(markov_constant(3, 0), Error);
    CHECK_THROWS_AS(markov_constant(3, 4), Error);

    // Corollary bound: with a = d^-2, b = 2 + a the budget is <= 3*e*sigma/a.
    for (int d = 1; d <= 7; ++d) {
        const double a = 1.0 / (d * d);
        const double b = 2.0 + a;
        const double E = derivative_error_budget(a, b, d, 1.0) / 3.0;
        CHECK(E * a <= std::exp(1.0) + 1e-9);
    }

    // Budget scales linearly in sigma and matches the log-space evaluation.
    const double b1 = derivative_error_budget(0.04, 2.04, 5, 1e-3);
    const double b2 = derivative_error_budget(0.04, 2.04, 5, 2e-3);
    CHECK(b2 == doctest::Approx(2.0 * b1).epsilon(1e-12));
    for (int d : {16, 18}) {
        const double a = 1.0 / (d * d);
        // Direct long-double sum against the log-space implementation.
        long double sum = 0.0L;
        long double fact = 1.0L;
        for (int k = 1; k <= d; ++k) {
            if (k > 1) fact *= k - 1;
            long double cm = 1.0L;
            for (int j = 0; j < k; ++j) cm *= static_cast<long double>(d) * d - static_cast<long double>(j) * j;
            for (int j = 1; j < 2 * k; j += 2) cm /= j;
            sum += powl(2.0L / 2.0L, k) * powl(static_cast<long double>(a), k - 1) * cm / fact;
        }
        const double got = derivative_error_budget(a, a + 2.0, d, 1.0 / 3.0);
        CHECK(got == doctest::Approx(static_cast<double>(sum)).epsilon(1e-9));
    }

    // Upper-bound property: random polynomial pairs with sup difference 3*sigma.
    Rng rng(81);
    for (int trial = 0; trial < 500; ++trial) {
        const int d = 1 + static_cast<int>(rng.uniform_below(7));
        const double a = 1.0 / (d * d), b = 2.0 + a;
        std::vector<double> g(static_cast<std::size_t>(d) + 1);
        for (double& c : g) c = rng.uniform(-1.0, 1.0);
        double sup = 0.0;
        for (int i = 0; i <= 600; ++i) {
            const double t = a + (b - a) * i / 600.0;
            sup = std::max(sup, std::abs(eval_monomial(g, t)));
        }
        const double sigma = sup / 3.0;
        CHECK(std::abs(g[1]) <= derivative_error_budget(a, b, d, sigma) * (1.0 + 1e-9));
    }
}

TEST_CASE("time grid and degree heuristics") {
    TimeGrid g1 = choose_time_grid(1e-3, 1);
    CHECK(g1.t0 == doctest::Approx(1.0));
    CHECK(g1.t_max == doctest::Approx(3.0));
    CHECK(g1.m_points >= 2);

    TimeGrid g7 = choose_time_grid(1e-3, 7);
    CHECK(g7.t0 == doctest::Approx(1.0 / 49.0));

    TimeGrid g5 = choose_time_grid(1e-3, 5, 0.75);
    CHECK(g5.t0 == doctest::Approx(0.75 / 25.0));
    CHECK(g5.t_max == doctest::Approx(0.75 * (2.0 + 1.0 / 25.0)));
    CHECK(g5.m_points == 36);

    CHECK_THROWS_AS(choose_time_grid(0.0, 3), Error);

    // 2e * t_max * g|B| * ln(1/eps) = 2e at product 1, eps = 1/e -> degree 5.
    CHECK(degree_heuristic(1.0, 1.0, std::exp(-1.0)) == 5);
    CHECK(degree_heuristic(1.0, 1.0, 0.9999) == 1);   // clamps up to d_min
    CHECK(degree_heuristic(50.0, 10.0, 1e-6) == 7);   // clamps down to d_max
    CHECK_THROWS_AS(degree_heuristic(-1.0, 1.0, 0.5), Error);
}

TEST_CASE("cross-validated degree selection is faithful and deterministic") {
    Rng data_rng(91);
    std::vector<double> truth = {0.5, -1.2, 0.8};  // quadratic
    std::vector<Sample> pts;
    for (int i = 0; i < 60; ++i) {
        const double x = std::cos(PI * data_rng.uniform());
        pts.push_back({x, eval_monomial(truth, x) + data_rng.uniform(-1e-3, 1e-3)});
    }
    FitConfig cfg;
    Rng cv1(12345), cv2(12345);
    const FitSelection s1 = robust_fit_auto(pts, cfg, -1.0, 1.0, cv1);
    const FitSelection s2 = robust_fit_auto(pts, cfg, -1.0, 1.0, cv2);

    REQUIRE(!s1.cv_scores.empty());
    double best = s1.cv_scores.front().second;
    int best_degree = s1.cv_scores.front().first;
    for (const auto& [deg, score] : s1.cv_scores) {
        if (score < best) {
            best = score;
            best_degree = deg;
        }
    }
    CHECK(s1.fit.degree == best_degree);
    // The selected degree's score never exceeds the best by more than 1e-12.
    for (const auto& [deg, score] : s1.cv_scores)
        if (deg == s1.fit.degree) CHECK(score <= best + 1e-12);
    CHECK(s1.fit.degree >= 2);  // a line cannot explain the quadratic
    CHECK(sup_error_unit(s1.fit, truth) < 0.05);

    // Determinism under an identical cross-validation stream.
    CHECK(s1.fit.degree == s2.fit.degree);
    REQUIRE(s1.cv_scores.size() == s2.cv_scores.size());
    for (std::size_t i = 0; i < s1.cv_scores.size(); ++i)
        CHECK(s1.cv_scores[i].second == s2.cv_scores[i].second);
    for (std::size_t k = 0; k < s1.fit.coefficients.size(); ++k)
        CHECK(s1.fit.coefficients[k] == s2.fit.coefficients[k]);
}

}  // TEST_SUITE
