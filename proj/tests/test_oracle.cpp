#include <doctest.h>

#include <cmath>

#include "lindlearn/oracle.hpp"

using namespace lindlearn;

TEST_SUITE_BEGIN("oracle");

TEST_CASE("product densities are unit-trace and reproduce closed-form expectations") {
    ProductState s = product_state(3, {{0, {Axis::Y, -1}}, {2, {Axis::X, 1}}});
    GeneralModel empty;
    empty.n_qubits = 3;
    DenseOracle oracle(empty);
    Eigen::MatrixXcd rho = oracle.product_density(s);
    CHECK(std::abs(rho.trace() - cplx(1.0, 0.0)) < 1e-12);
    CHECK((rho - rho.adjoint()).norm() < 1e-12);
    for (const char* obs : {"Y0", "X2", "Y0 X2", "Z1", "X0", "Y0 Z1"}) {
        PauliString p = parse_pauli(obs, 3);
        CHECK(oracle.expectation(rho, p) == doctest::Approx(expectation(s, p)).epsilon(1e-12));
    }
}

// Keystone cross-validation: the site-local closed-form derivative equals the
// dense tr(L(rho) O) for random general models, random product states, and
// random 1- and 2-qubit observables (mirrors the development-time study).
TEST_CASE("analytic_derivative matches the dense generator") {
    Rng rng(2024);
    const Axis AXES3[3] = {Axis::X, Axis::Y, Axis::Z};
    for (int trial = 0; trial < 12; ++trial) {
        int n = 2 + static_cast<int>(trial % 2);  // alternate n=2, n=3
        std::vector<std::pair<int, int>> edges = {{0, 1}};
        if (n == 3) edges.push_back({1, 2});
        GeneralModel m = sample_general_model(n, edges, 1.0, 0.3, rng,
                                              /*complex_dissipators=*/trial % 3 != 0);
        DenseOracle oracle(m);
        for (int rep = 0; rep < 8; ++rep) {
            ProductState s;
            s.n_qubits = n;
            for (int q = 0; q < n; ++q)
                if (rng.uniform() < 0.75)
                    s.fixed[q] = SiteState{AXES3[rng.uniform_below(3)],
                                           rng.uniform() < 0.5 ? 1 : -1};
            PauliString obs;
            if (rng.uniform() < 0.5) {
                obs = pauli1(n, static_cast<int>(rng.uniform_below(n)),
                             AXES3[rng.uniform_below(3)]);
            } else {
                int qi = static_cast<int>(rng.uniform_below(n));
                int qj = (qi + 1) % n;
                obs = pauli2(n, qi, AXES3[rng.uniform_below(3)], qj,
                             AXES3[rng.uniform_below(3)]);
            }
            double closed = analytic_derivative(m, s, obs);
            double dense = oracle.derivative(s, obs);
            CHECK(closed == doctest::Approx(dense).epsilon(1e-10).scale(1.0));
        }
    }
}

TEST_CASE("amplitude damping relaxes <Z> as 1 - 2 exp(-t/T1)") {
    ChipModel chip;
    chip.n_qubits = 1;
    chip.omega = {0.0};
    chip.t1 = {30.0};
    chip.t2 = {0.0};
    chip.t2star = {0.0};
    DenseOracle oracle(chip_to_general(chip));
    ProductState down = product_state(1, {{0, {Axis::Z, -1}}});  // |1>
    std::vector<double> times = {0.0, 5.0, 15.0, 30.0, 60.0};
    std::vector<double> zs = oracle.trace_curve(down, pauli1(1, 0, Axis::Z), times, 0.05);
    for (std::size_t k = 0; k < times.size(); ++k) {
        double want = 1.0 - 2.0 * std::exp(-times[k] / 30.0);
        CHECK(zs[k] == doctest::Approx(want).epsilon(1e-7));
    }
    // Transverse decay under pure T1 runs at 1/(2 T1).
    ProductState plus = product_state(1, {{0, {Axis::X, 1}}});
    std::vector<double> xs = oracle.trace_curve(plus, pauli1(1, 0, Axis::X), times, 0.05);
    for (std::size_t k = 0; k < times.size(); ++k)
        CHECK(xs[k] == doctest::Approx(std::exp(-times[k] / 60.0)).epsilon(1e-7));
}

TEST_CASE("pure dephasing decays coherences at 1/T2 and leaves populations") {
    ChipModel chip;
    chip.n_qubits = 1;
    chip.omega = {0.0};
    chip.t1 = {0.0};
    chip.t2 = {20.0};
    chip.t2star = {0.0};
    DenseOracle oracle(chip_to_general(chip));
    ProductState plus = product_state(1, {{0, {Axis::X, 1}}});
    std::vector<double> times = {0.0, 4.0, 10.0, 20.0};
    std::vector<double> xs = oracle.trace_curve(plus, pauli1(1, 0, Axis::X), times, 0.02);
    for (std::size_t k = 0; k < times.size(); ++k)
        CHECK(xs[k] == doctest::Approx(std::exp(-times[k] / 20.0)).epsilon(1e-7));
    ProductState up = product_state(1, {{0, {Axis::Z, 1}}});
    std::vector<double> zs = oracle.trace_curve(up, pauli1(1, 0, Axis::Z), times, 0.02);
    for (double z : zs) CHECK(z == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("coherent precession: <Y> under H = (Omega/2) Z") {
    ChipModel chip;
    chip.n_qubits = 1;
    chip.omega = {0.8};
    chip.t1 = {0.0};
    chip.t2 = {0.0};
    chip.t2star = {0.0};
    DenseOracle oracle(chip_to_general(chip));
    ProductState plus = product_state(1, {{0, {Axis::X, 1}}});
    std::vector<double> times = {0.0, 1.0, 2.5, 6.0};
    std::vector<double> xs = oracle.trace_curve(plus, pauli1(1, 0, Axis::X), times, 0.01);
    std::vector<double> ys = oracle.trace_curve(plus, pauli1(1, 0, Axis::Y), times, 0.01);
    for (std::size_t k = 0; k < times.size(); ++k) {
        CHECK(xs[k] == doctest::Approx(std::cos(0.8 * times[k])).epsilon(1e-6));
        CHECK(ys[k] == doctest::Approx(std::sin(0.8 * times[k])).epsilon(1e-6));
    }
}

TEST_CASE("sampled dissipation matrices are PSD and the oracle rejects n > cap") {
    Rng rng(5);
    GeneralModel m = sample_general_model(2, {{0, 1}}, 1.0, 0.2, rng);
    for (const auto& [site, d] : m.dissipators) {
        (void)site;
        CHECK(dmat_min_eigenvalue(d) >= -1e-12);
        CHECK(dmat_max_abs(d) == doctest::Approx(0.2));
    }
    GeneralModel big;
    big.n_qubits = DenseOracle::MAX_QUBITS + 1;
    CHECK_THROWS_AS(DenseOracle{big}, Error);
}

TEST_CASE("trace_curve equals point-wise evolve") {
    Rng rng(7);
    GeneralModel m = sample_general_model(2, {{0, 1}}, 0.7, 0.1, rng);
    DenseOracle oracle(m);
    ProductState s = product_state(2, {{0, {Axis::X, 1}}, {1, {Axis::Z, -1}}});
    PauliString obs = pauli2(2, 0, Axis::Y, 1, Axis::Z);
    std::vector<double> times = {0.1, 0.4, 0.9};
    std::vector<double> curve = oracle.trace_curve(s, obs, times, 0.01);
    for (std::size_t k = 0; k < times.size(); ++k) {
        Eigen::MatrixXcd rho = oracle.evolve(oracle.product_density(s), times[k], 0.01);
        CHECK(curve[k] == doctest::Approx(oracle.expectation(rho, obs)).epsilon(1e-9));
    }
    std::vector<double> bad = {0.5, 0.1};
    CHECK_THROWS_AS(oracle.trace_curve(s, obs, bad, 0.01), Error);
}

TEST_SUITE_END();
