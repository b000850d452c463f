#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "lindlearn/isolation.hpp"
#include "lindlearn/oracle.hpp"

using namespace lindlearn;

namespace {

DerivativeFn analytic_source(const GeneralModel& m) {
    return [&m](const PauliString& obs, const ProductState& st) {
        return analytic_derivative(m, st, obs);
    };
}

GeneralModel random_pair_model(Rng& rng, double noise_scale, bool complex_d = true) {
    return sample_general_model(2, {{0, 1}}, 1.0, noise_scale, rng, complex_d);
}

}  // namespace

TEST_SUITE("isolation") {

TEST_CASE("parameter keys canonicalize and format") {
    CHECK(pk_two(1, Axis::Y, 0, Axis::X) == pk_two(0, Axis::X, 1, Axis::Y));
    CHECK(pk_two(0, Axis::X, 1, Axis::Y).str() == "a[xy](0,1)");
    CHECK(pk_two(3, Axis::Z, 1, Axis::X).str() == "a[xz](1,3)");
    CHECK(pk_single(2, Axis::Z).str() == "a[z](2)");
    CHECK(pk_axial(0, Axis::Y).str() == "W[y](0)");
    CHECK(pk_diag(1, Axis::Y).str() == "D[yy](1)");
    CHECK(pk_offdiag(0, Axis::Z, Axis::X).str() == "ReD[xz](0)");
    CHECK(pk_offdiag(0, Axis::X, Axis::Z) == pk_offdiag(0, Axis::Z, Axis::X));
    CHECK_THROWS_AS(pk_two(1, Axis::X, 1, Axis::Y), Error);
    CHECK_THROWS_AS(pk_offdiag(0, Axis::X, Axis::X), Error);
    CHECK(pk_single(0, Axis::X) < pk_single(0, Axis::Y));
    CHECK(pk_single(0, Axis::X) < pk_single(1, Axis::X));
}

TEST_CASE("full plan recovers every parameter of random noisy pair models") {
    Rng rng(101);
    const std::vector<IsolationRule> plan = full_plan(2, 0, 1);
    CHECK(plan.size() == 33);
    for (int trial = 0; trial < 100; ++trial) {
        const bool complex_d = trial % 2 == 0;
        const GeneralModel m = random_pair_model(rng, 0.3, complex_d);
        const RecoveryReport rep = recover(plan, analytic_source(m), param_truth(m));
        for (const ParamEstimate& row : rep.rows) {
            REQUIRE(row.truth.has_value());
            CHECK(row.abs_error() < 1e-9);
        }
    }
}

TEST_CASE("recovery agrees with the dense generator as derivative source") {
    Rng rng(102);
    const GeneralModel m = random_pair_model(rng, 0.4);
    const DenseOracle oracle(m);
    const DerivativeFn dense = [&oracle](const PauliString& obs, const ProductState& st) {
        return oracle.derivative(st, obs);
    };
    const RecoveryReport rep = recover(full_plan(2, 0, 1), dense, param_truth(m));
    CHECK(rep.max_abs_error() < 1e-9);
}

TEST_CASE("plans work with swapped site order and spectator sites") {
    Rng rng(103);
    // Swapped order: rules built as (1, 0) must still land on canonical keys.
    const GeneralModel m2 = random_pair_model(rng, 0.25);
    const RecoveryReport swapped = recover(full_plan(2, 1, 0), analytic_source(m2), param_truth(m2));
    CHECK(swapped.max_abs_error() < 1e-9);

    // Spectator site between the pair: its fields and noise must not leak in.
    const GeneralModel m3 = sample_general_model(3, {{0, 2}}, 1.0, 0.3, rng);
    const RecoveryReport rep = recover(full_plan(3, 0, 2), analytic_source(m3), param_truth(m3));
    CHECK(rep.max_abs_error() < 1e-9);
}

TEST_CASE("coupling estimates are independent of the dissipation structure") {
    Rng rng(104);
    GeneralModel noisy = random_pair_model(rng, 0.5);
    GeneralModel clean = noisy;
    clean.dissipators.clear();
    const std::vector<IsolationRule> plan = full_plan(2, 0, 1);
    const RecoveryReport rn = recover(plan, analytic_source(noisy));
    const RecoveryReport rc = recover(plan, analytic_source(clean));
    for (const ParamEstimate& row : rn.rows) {
        if (row.key.kind != ParamKind::TwoQubitA && row.key.kind != ParamKind::SingleA) continue;
        CHECK(std::abs(row.estimate - rc.get(row.key)) < 1e-10);
    }
}

TEST_CASE("the redundant a_yx rule audits coupling symmetry") {
    Rng rng(105);
    const GeneralModel m = random_pair_model(rng, 0.2);
    const RecoveryReport rep = recover(full_plan(2, 0, 1), analytic_source(m));
    CHECK(std::abs(rep.get(pk_two(0, Axis::X, 1, Axis::Y)) -
                   rep.get(pk_two(0, Axis::Y, 1, Axis::X))) < 1e-10);
}

TEST_CASE("recover rejects bad plans and incomplete tables") {
    const std::vector<IsolationRule> plan = plan_two_qubit(2, 0, 1);
    SUBCASE("missing derivative") {
        DerivativeTable empty;
        CHECK_THROWS_WITH_AS(static_cast<void>(recover(plan, empty)),
                             doctest::Contains("missing derivative"), Error);
    }
    SUBCASE("duplicate targets") {
        std::vector<IsolationRule> dup = plan;
        dup.push_back(plan.front());
        DerivativeTable table;
        CHECK_THROWS_WITH_AS(static_cast<void>(recover(dup, table)),
                             doctest::Contains("duplicate"), Error);
    }
    SUBCASE("circular references") {
        std::vector<IsolationRule> cyc;
        cyc.push_back({pk_single(0, Axis::X), {known_term(1.0, pk_single(0, Axis::Y))}, "t"});
        cyc.push_back({pk_single(0, Axis::Y), {known_term(1.0, pk_single(0, Axis::X))}, "t"});
        DerivativeTable table;
        CHECK_THROWS_WITH_AS(static_cast<void>(recover(cyc, table)),
                             doctest::Contains("unresolvable"), Error);
    }
    SUBCASE("dangling reference") {
        std::vector<IsolationRule> dangling;
        dangling.push_back({pk_single(0, Axis::X), {known_term(1.0, pk_single(0, Axis::Z))}, "t"});
        DerivativeTable table;
        CHECK_THROWS_WITH_AS(static_cast<void>(recover(dangling, table)),
                             doctest::Contains("unresolvable"), Error);
    }
    SUBCASE("bad site arguments") {
        CHECK_THROWS_AS(plan_two_qubit(2, 0, 0), Error);
        CHECK_THROWS_AS(plan_two_qubit(1, 0, 1), Error);
        CHECK_THROWS_AS(plan_axial(2, 2), Error);
    }
}

TEST_CASE("chip plan needs exactly twelve derivative pairs") {
    const std::vector<IsolationRule> plan = chip_plan(2, 0, 1);
    CHECK(plan.size() == 8);
    CHECK(required_pairs(plan).size() == 12);
    // The chip plan resolves on its own (its known-parameter references are
    // all inside the plan) and recovers J and Omega of a noisy chip.
    ChipModel chip = chip_preset(2);
    chip.t2star = {0.0, 0.0};  // quasi-static scatter has no Markovian form
    const GeneralModel general = chip_to_general(chip);
    const RecoveryReport rep = recover(plan, analytic_source(general), param_truth(general));
    CHECK(rep.max_abs_error() < 1e-9);
    const double j_khz = chip_J_kHz(rep.get(pk_two(0, Axis::X, 1, Axis::X)));
    const double omega0_khz = chip_Omega_kHz(rep.get(pk_single(0, Axis::Z)));
    CHECK(j_khz == doctest::Approx(chip.edges[0].coupling / KHZ_TO_RAD_PER_US).epsilon(1e-9));
    CHECK(omega0_khz == doctest::Approx(chip.omega[0] / KHZ_TO_RAD_PER_US).epsilon(1e-9));
}

TEST_CASE("full plan pair budget and table formatting") {
    const std::vector<IsolationRule> plan = full_plan(2, 0, 1);
    const auto pairs = required_pairs(plan);
    CHECK(pairs.size() >= 20);
    CHECK(pairs.size() <= 40);
    // Deduplication: listing the plan twice must not add pairs.
    std::vector<IsolationRule> doubled = plan;
    for (const auto& r : plan) doubled.push_back(r);
    CHECK(required_pairs(doubled).size() == pairs.size());

    const std::string table = plan_table(plan);
    CHECK(table.find("a[xx](0,1)") != std::string::npos);
    CHECK(table.find("pair") != std::string::npos);
    CHECK(table.find("relax-offdiag") != std::string::npos);
    CHECK(table.find("*dv(") != std::string::npos);
    CHECK(static_cast<std::size_t>(std::count(table.begin(), table.end(), '\n')) == plan.size());
}

TEST_CASE("param_truth reads back a hand-built model") {
    GeneralModel m;
    m.n_qubits = 2;
    m.terms.push_back({0.7, pauli1(2, 0, Axis::Z)});
    m.terms.push_back({0.7, pauli1(2, 0, Axis::Z)});  // repeated words accumulate
    m.terms.push_back({-0.4, pauli2(2, 0, Axis::X, 1, Axis::Y)});
    DMatrix d = dmat_zero();
    dmat_set(d, Axis::X, Axis::X, 0.5);
    dmat_set(d, Axis::X, Axis::Y, cplx(0.1, 0.2));
    dmat_set(d, Axis::Y, Axis::X, cplx(0.1, -0.2));
    m.dissipators[1] = d;

    const std::map<ParamKey, double> t = param_truth(m);
    CHECK(t.at(pk_single(0, Axis::Z)) == doctest::Approx(1.4));
    CHECK(t.at(pk_two(0, Axis::X, 1, Axis::Y)) == doctest::Approx(-0.4));
    CHECK(t.at(pk_diag(1, Axis::X)) == doctest::Approx(0.5));
    CHECK(t.at(pk_offdiag(1, Axis::X, Axis::Y)) == doctest::Approx(0.1));
    CHECK(t.at(pk_axial(1, Axis::Z)) == doctest::Approx(0.2));  // W_z = Im D_xy
    CHECK(t.at(pk_axial(1, Axis::X)) == doctest::Approx(0.0));
}

TEST_CASE("assemble_dissipator rebuilds the full Hermitian matrix") {
    Rng rng(106);
    const GeneralModel m = random_pair_model(rng, 0.35);
    const RecoveryReport rep = recover(full_plan(2, 0, 1), analytic_source(m));
    for (int site = 0; site < 2; ++site) {
        const DMatrix rebuilt = assemble_dissipator(rep, site);
        const DMatrix& truth = m.dissipators.at(site);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                CHECK(std::abs(rebuilt[r][c] - truth[r][c]) < 1e-9);
    }
}

TEST_CASE("finite_difference_derivative uses the exact t=0 anchor") {
    TimeTrace tr;
    tr.observable = "Z0";
    tr.initial_state = "+z0";
    tr.times = {0.1, 0.2};
    tr.mean = {0.9, 0.8};
    CHECK(finite_difference_derivative(tr, 1) == doctest::Approx(-1.0));

    // Bias check on a known curve: y(t) = cos(2t) from <Z> under a_x = 1
    // (Rabi rotation); y'(0) = 0, y''(0) = -4, so the forward difference
    // reports about (t0/2) y'' = -0.2 at t0 = 0.1.
    GeneralModel m;
    m.n_qubits = 1;
    m.terms.push_back({1.0, pauli1(1, 0, Axis::X)});
    const DenseOracle oracle(m);
    TimeTrace curve;
    curve.observable = "Z0";
    curve.initial_state = "+z0";
    curve.times = {0.1};
    curve.mean = {oracle.trace_curve(parse_product_state("+z0", 1), parse_pauli("Z0", 1),
                                     curve.times, 1e-4)[0]};
    const double fd = finite_difference_derivative(curve, 1);
    CHECK(fd == doctest::Approx(0.5 * 0.1 * -4.0).epsilon(0.05));

    TimeTrace bad = tr;
    bad.times = {0.0, 0.1};
    CHECK_THROWS_AS(static_cast<void>(finite_difference_derivative(bad, 1)), Error);
    TimeTrace empty;
    CHECK_THROWS_AS(static_cast<void>(finite_difference_derivative(empty, 1)), Error);
}

TEST_CASE("recovery report serializes to CSV") {
    Rng rng(107);
    const GeneralModel m = random_pair_model(rng, 0.1);
    const RecoveryReport rep =
        recover(plan_two_qubit(2, 0, 1), analytic_source(m), param_truth(m), "finite_difference");
    const std::string csv = rep.to_csv();
    CHECK(csv.rfind("parameter,kind,estimate,truth,abs_error,method,n_derivatives\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == rep.rows.size() + 1);
    CHECK(csv.find("finite_difference") != std::string::npos);
    CHECK(csv.find("two_qubit_a") != std::string::npos);
    // Pair-coupling names contain the separator, so they must arrive quoted.
    CHECK(csv.find("\"a[xy](0,1)\",two_qubit_a") != std::string::npos);
    CHECK(csv.find(',') != std::string::npos);
    CHECK(csv.find(';') == std::string::npos);  // '.' decimal, ',' separator only
}

}  // TEST_SUITE
