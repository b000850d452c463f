#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "lindlearn/shadows.hpp"

using namespace lindlearn;

namespace {

ShadowRecord make_record(std::vector<Axis> b, std::vector<Axis> s, std::vector<int> e,
                         std::vector<int> m) {
    ShadowRecord r;
    r.basis = std::move(b);
    r.prep_axis = std::move(s);
    r.prep_sign = std::move(e);
    r.outcome = std::move(m);
    return r;
}

}  // namespace

TEST_SUITE("shadows") {

TEST_CASE("rounds draw uniform settings and identity outcomes echo preparation") {
    const IdentityChannel channel(2);
    Rng rng(301);
    const int rounds = 30000;
    std::array<std::array<int, 3>, 2> basis_counts{};
    int plus_signs = 0, mismatched = 0, mismatched_plus = 0;
    for (int r = 0; r < rounds; ++r) {
        const ShadowRecord rec = run_round(channel, rng);
        REQUIRE(rec.basis.size() == 2);
        REQUIRE(rec.outcome.size() == 2);
        for (int q = 0; q < 2; ++q) {
            ++basis_counts[static_cast<std::size_t>(q)][static_cast<int>(rec.basis[static_cast<std::size_t>(q)])];
            if (rec.prep_sign[static_cast<std::size_t>(q)] > 0) ++plus_signs;
            if (rec.basis[static_cast<std::size_t>(q)] == rec.prep_axis[static_cast<std::size_t>(q)]) {
                // Identity channel: matched-axis readout repeats the prepared sign.
                CHECK(rec.outcome[static_cast<std::size_t>(q)] ==
                      rec.prep_sign[static_cast<std::size_t>(q)]);
            } else {
                ++mismatched;
                if (rec.outcome[static_cast<std::size_t>(q)] > 0) ++mismatched_plus;
            }
        }
    }
    // Axis frequencies within 5 sigma of 1/3, signs within 5 sigma of 1/2.
    const double tol_axis = 5.0 * std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / rounds);
    for (int q = 0; q < 2; ++q)
        for (int a = 0; a < 3; ++a)
            CHECK(std::abs(basis_counts[static_cast<std::size_t>(q)][a] / double(rounds) - 1.0 / 3.0) < tol_axis);
    CHECK(std::abs(plus_signs / double(2 * rounds) - 0.5) < 5.0 * std::sqrt(0.25 / (2 * rounds)));
    // Mismatched-axis readout of the identity channel is a fair coin.
    CHECK(std::abs(mismatched_plus / double(mismatched) - 0.5) <
          5.0 * std::sqrt(0.25 / mismatched));
}

TEST_CASE("estimator_value walks the documented ladder") {
    const PauliString z0 = parse_pauli("Z0", 1);
    const PauliString x0 = parse_pauli("X0", 1);
    const Axis Z = Axis::Z, X = Axis::X, Y = Axis::Y;

    CHECK(estimator_value(make_record({Z}, {Z}, {1}, {1}), z0, z0) == doctest::Approx(4.5));
    CHECK(estimator_value(make_record({Z}, {Z}, {1}, {-1}), z0, z0) == doctest::Approx(-4.5));
    CHECK(estimator_value(make_record({Z}, {Z}, {-1}, {-1}), z0, z0) == doctest::Approx(4.5));
    CHECK(estimator_value(make_record({X}, {Z}, {1}, {1}), z0, z0) == 0.0);  // basis misses P_a
    CHECK(estimator_value(make_record({Z}, {Z}, {1}, {1}), z0, x0) == 0.0);  // prep misses P_b

    // Two sites, weights 2 + 1: magnitude 3^3 / 2, sign from M- and E-parities.
    const PauliString yy = parse_pauli("Y0 Y1", 2);
    const PauliString z1 = parse_pauli("Z1", 2);
    const ShadowRecord rec = make_record({Y, Y}, {X, Z}, {-1, 1}, {1, -1});
    CHECK(estimator_value(rec, yy, z1) == doctest::Approx(-13.5));
    const PauliString neg_yy = parse_pauli("-Y0 Y1", 2);
    CHECK(estimator_value(rec, neg_yy, z1) == doctest::Approx(13.5));

    CHECK_THROWS_AS(static_cast<void>(estimator_value(rec, z0, z0)), Error);
}

TEST_CASE("median_of_means is robust to a corrupted group") {
    std::vector<double> v;
    for (int i = 1; i <= 12; ++i) v.push_back(i);
    CHECK(median_of_means(v, 4) == doctest::Approx(6.5));
    CHECK(median_of_means(v, 1) == doctest::Approx(6.5));

    std::vector<double> w(15, 1.0);
    w[0] = w[1] = w[2] = 1000.0;  // the first group goes wild
    CHECK(median_of_means(w, 5) == doctest::Approx(1.0));

    // Remainder values are dropped: 14 values over 4 groups -> groups of 3.
    std::vector<double> u(14, 2.0);
    u[13] = 1e9;
    CHECK(median_of_means(u, 4) == doctest::Approx(2.0));

    CHECK_THROWS_AS(static_cast<void>(median_of_means(v, 0)), Error);
    CHECK_THROWS_AS(static_cast<void>(median_of_means(v, 13)), Error);
}

TEST_CASE("plan sizes follow the guarantee formulas") {
    const ShadowPlanSizes s = shadow_plan_sizes(3, 0.1, 0.05, 2, 2);
    CHECK(s.rounds_per_group == 10800);
    CHECK(s.groups == 9);
    CHECK(s.total_rounds == 97200);

    const ShadowPlanSizes t = shadow_plan_sizes(2, 0.3, 0.1, 1, 1);
    CHECK(t.rounds_per_group == 400);
    CHECK(t.groups == 5);

    CHECK_THROWS_AS(static_cast<void>(shadow_plan_sizes(-1, 0.1, 0.1, 1, 1)), Error);
    CHECK_THROWS_AS(static_cast<void>(shadow_plan_sizes(2, 0.0, 0.1, 1, 1)), Error);
    CHECK_THROWS_AS(static_cast<void>(shadow_plan_sizes(2, 0.1, 1.0, 1, 1)), Error);
    CHECK_THROWS_AS(static_cast<void>(shadow_plan_sizes(2, 0.1, 0.1, 0, 1)), Error);
}

TEST_CASE("identity channel reproduces the delta overlap with honest hit rates") {
    const IdentityChannel channel(2);
    const std::vector<PauliString> pa = {parse_pauli("X0", 2), parse_pauli("Y0 Y1", 2)};
    const std::vector<PauliString> pb = {parse_pauli("X0", 2), parse_pauli("Z1", 2)};
    const double eps = 0.3, delta = 0.1;
    Rng rng(401);
    const std::vector<OverlapEstimate> est = estimate_overlaps(channel, pa, pb, eps, delta, rng);
    REQUIRE(est.size() == 4);

    const auto expect_overlap = [](const OverlapEstimate& e) {
        return e.pauli_a == e.pauli_b ? 1.0 : 0.0;
    };
    for (const OverlapEstimate& e : est) {
        CHECK(std::abs(e.value - expect_overlap(e)) <= eps);
        CHECK(e.samples_used == 9600);  // B = 4*27/0.09 = 1200, K = 8
        CHECK(e.epsilon == eps);
        CHECK(e.delta == delta);
    }

    // Nonzero estimator frequency 3^{-wa-wb} within 5 binomial sigmas.
    const std::array<int, 4> wsum = {2, 2, 3, 3};  // (X0|X0), (X0|Z1), (YY|X0), (YY|Z1)
    for (int p = 0; p < 4; ++p) {
        const double prob = std::pow(3.0, -wsum[static_cast<std::size_t>(p)]);
        const double s = static_cast<double>(est[static_cast<std::size_t>(p)].samples_used);
        const double sigma = std::sqrt(s * prob * (1.0 - prob));
        CHECK(std::abs(est[static_cast<std::size_t>(p)].nonzero_count - s * prob) < 5.0 * sigma);
    }

    // Same seed, same answer.
    Rng rng2(401);
    const std::vector<OverlapEstimate> again = estimate_overlaps(channel, pa, pb, eps, delta, rng2);
    for (std::size_t k = 0; k < est.size(); ++k) CHECK(again[k].value == est[k].value);
}

TEST_CASE("depolarizing channel shrinks the diagonal overlap") {
    const DepolarizingChannel channel(1, 0.4);
    Rng rng(402);
    const std::vector<OverlapEstimate> est =
        estimate_overlaps(channel, {parse_pauli("Z0", 1)}, {parse_pauli("Z0", 1)}, 0.25, 0.1, rng);
    CHECK(std::abs(est[0].value - 0.6) <= 0.25);
    CHECK_THROWS_AS(DepolarizingChannel(1, 1.5), Error);
}

TEST_CASE("axis whitelists rescale the estimator weights") {
    const IdentityChannel channel(1);
    ShadowOptions opts;
    opts.axes = {Axis::X, Axis::Z};
    Rng rng(403);
    const std::vector<OverlapEstimate> est = estimate_overlaps(
        channel, {parse_pauli("X0", 1)}, {parse_pauli("X0", 1)}, 0.3, 0.1, rng, opts);
    CHECK(std::abs(est[0].value - 1.0) <= 0.3);
    // B = ceil(4 * 2^2 / 0.09) = 178 rounds per group.
    CHECK(est[0].samples_used == 178 * 5);

    // Estimator magnitude uses the axis-set size, not 3.
    const ShadowRecord rec = make_record({Axis::X}, {Axis::X}, {1}, {1});
    CHECK(estimator_value(rec, parse_pauli("X0", 1), parse_pauli("X0", 1), 2) ==
          doctest::Approx(2.0));

    // A Pauli outside the whitelist is refused.
    CHECK_THROWS_AS(static_cast<void>(estimate_overlaps(channel, {parse_pauli("Y0", 1)},
                                                        {parse_pauli("Y0", 1)}, 0.3, 0.1, rng,
                                                        opts)),
                    Error);
}

TEST_CASE("oracle channel is unbiased against the exact propagator") {
    // Rabi drive plus amplitude damping on one site.
    GeneralModel m;
    m.n_qubits = 1;
    m.terms.push_back({0.8, pauli1(1, 0, Axis::X)});
    const double t1 = 5.0;
    DMatrix d = dmat_zero();
    dmat_set(d, Axis::X, Axis::X, 1.0 / (4.0 * t1));
    dmat_set(d, Axis::Y, Axis::Y, 1.0 / (4.0 * t1));
    dmat_set(d, Axis::X, Axis::Y, cplx(0.0, -1.0 / (4.0 * t1)));
    dmat_set(d, Axis::Y, Axis::X, cplx(0.0, 1.0 / (4.0 * t1)));
    m.dissipators[0] = d;
    const DenseOracle oracle(m);

    // t = 0 overlaps are exact deltas.
    CHECK(reference_overlap(oracle, parse_pauli("Z0", 1), parse_pauli("Z0", 1), 0.0, 0.01) ==
          doctest::Approx(1.0));
    CHECK(reference_overlap(oracle, parse_pauli("Z0", 1), parse_pauli("X0", 1), 0.0, 0.01) ==
          doctest::Approx(0.0).epsilon(1e-12));

    const double t = 0.7;
    const double ref = reference_overlap(oracle, parse_pauli("Z0", 1), parse_pauli("Z0", 1), t, 0.005);
    const OracleChannel channel(oracle, t, 0.005);
    Rng rng(404);
    const std::vector<OverlapEstimate> est =
        estimate_overlaps(channel, {parse_pauli("Z0", 1)}, {parse_pauli("Z0", 1)}, 0.3, 0.1, rng);
    CHECK(std::abs(est[0].value - ref) <= 0.3);

    // Pure amplitude damping has the closed form tr(Z Lambda(Z))/2 = e^{-t/T1}.
    GeneralModel damp = m;
    damp.terms.clear();
    const DenseOracle damp_oracle(damp);
    const double ref_damp =
        reference_overlap(damp_oracle, parse_pauli("Z0", 1), parse_pauli("Z0", 1), t, 0.005);
    CHECK(ref_damp == doctest::Approx(std::exp(-t / t1)).epsilon(1e-5));
}

TEST_CASE("trajectory channel reproduces the chip's damping overlap") {
    ChipModel chip;
    chip.n_qubits = 1;
    chip.omega = {0.5};
    chip.t1 = {20.0};
    chip.t2 = {0.0};
    chip.t2star = {0.0};
    SimConfig cfg;
    cfg.dt = 0.02;
    const double t = 4.0;
    const TrajectoryChannel channel(chip, t, cfg);
    Rng rng(405);
    const std::vector<OverlapEstimate> est =
        estimate_overlaps(channel, {parse_pauli("Z0", 1)}, {parse_pauli("Z0", 1)}, 0.3, 0.1, rng);
    CHECK(std::abs(est[0].value - std::exp(-t / 20.0)) <= 0.3);
}

TEST_CASE("estimate_overlaps rejects bad inputs") {
    const IdentityChannel channel(5);
    Rng rng(406);
    PauliString heavy;
    heavy.n_qubits = 5;
    for (int q = 0; q < 5; ++q) heavy.factors[q] = Axis::X;
    CHECK_THROWS_WITH_AS(static_cast<void>(estimate_overlaps(channel, {heavy}, {heavy}, 0.5,
                                                             0.1, rng)),
                         doctest::Contains("weight"), Error);
    CHECK_THROWS_AS(static_cast<void>(estimate_overlaps(channel, {}, {heavy}, 0.5, 0.1, rng)),
                    Error);
    CHECK_THROWS_AS(static_cast<void>(estimate_overlaps(channel, {parse_pauli("X0", 2)},
                                                        {parse_pauli("X0", 2)}, 0.5, 0.1, rng)),
                    Error);
    ShadowOptions dup;
    dup.axes = {Axis::X, Axis::X};
    CHECK_THROWS_AS(static_cast<void>(estimate_overlaps(channel, {parse_pauli("X0", 5)},
                                                        {parse_pauli("X0", 5)}, 0.5, 0.1, rng,
                                                        dup)),
                    Error);
}

TEST_CASE("overlap estimates serialize to CSV") {
    const IdentityChannel channel(1);
    Rng rng(407);
    const std::vector<OverlapEstimate> est =
        estimate_overlaps(channel, {parse_pauli("Z0", 1)}, {parse_pauli("Z0", 1)}, 0.5, 0.2, rng);
    const std::string csv = overlaps_to_csv(est);
    CHECK(csv.rfind("pa,pb,estimate,epsilon,delta,samples\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    CHECK(csv.find("Z0,Z0,") != std::string::npos);
}

}  // TEST_SUITE
