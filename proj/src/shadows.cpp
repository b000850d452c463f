#include "lindlearn/shadows.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace lindlearn {

namespace {

void check_record_shape(const ShadowRecord& rec, int n, const char* who) {
    if (static_cast<int>(rec.basis.size()) != n || static_cast<int>(rec.prep_axis.size()) != n ||
        static_cast<int>(rec.prep_sign.size()) != n)
        fail_config(std::string(who) + ": record shape does not match the register");
}

// Basis-change unitary: measuring sigma_b in the computational basis after
// applying this. X -> H, Y -> H S^dagger, Z -> identity.
Eigen::Matrix2cd basis_rotation(Axis b) {
    const double s = 1.0 / std::sqrt(2.0);
    Eigen::Matrix2cd r;
    switch (b) {
        case Axis::X: r << s, s, s, -s; break;
        case Axis::Y: r << cplx(s, 0.0), cplx(0.0, -s), cplx(s, 0.0), cplx(0.0, s); break;
        case Axis::Z: r.setIdentity(); break;
    }
    return r;
}

// Dense state vector of the prepared product state (site q on bit q).
StateVec prep_state_vector(const ShadowRecord& rec, int n) {
    StateVec psi(std::size_t{1} << n, cplx(1.0, 0.0));
    for (int q = 0; q < n; ++q) {
        const std::array<cplx, 2> amp =
            site_amplitudes(rec.prep_axis[static_cast<std::size_t>(q)],
                            rec.prep_sign[static_cast<std::size_t>(q)]);
        const std::uint64_t bit = std::uint64_t{1} << q;
        for (std::uint64_t idx = 0; idx < psi.size(); ++idx)
            psi[idx] *= amp[(idx & bit) ? 1 : 0];
    }
    return psi;
}

void apply_site_matrix(StateVec& psi, int site, const Eigen::Matrix2cd& m) {
    const std::uint64_t bit = std::uint64_t{1} << site;
    for (std::uint64_t idx = 0; idx < psi.size(); ++idx) {
        if (idx & bit) continue;
        const cplx a = psi[idx], b = psi[idx | bit];
        psi[idx] = m(0, 0) * a + m(0, 1) * b;
        psi[idx | bit] = m(1, 0) * a + m(1, 1) * b;
    }
}

// Sample a bit string from (non-negative, ~normalized) outcome probabilities
// and decode bit q = 0 as outcome +1.
void sample_bit_outcomes(const std::vector<double>& probs, int n, Rng& rng,
                         std::vector<int>& outcome) {
    double total = 0.0;
    for (double p : probs) total += std::max(p, 0.0);
    if (total <= 0.0) fail_numerical("shadow measurement: vanishing probability mass");
    double u = rng.uniform() * total;
    std::size_t pick = probs.size() - 1;
    for (std::size_t idx = 0; idx < probs.size(); ++idx) {
        u -= std::max(probs[idx], 0.0);
        if (u <= 0.0) {
            pick = idx;
            break;
        }
    }
    outcome.resize(static_cast<std::size_t>(n));
    for (int q = 0; q < n; ++q)
        outcome[static_cast<std::size_t>(q)] = (pick >> q) & 1 ? -1 : 1;
}

// Per-site closed-form sampling for channels that keep sites independent:
// p(M=+1) = (1 + scale * E * [S == B]) / 2.
void sample_product_outcomes(const ShadowRecord& rec, int n, double scale, Rng& rng,
                             std::vector<int>& outcome) {
    outcome.resize(static_cast<std::size_t>(n));
    for (int q = 0; q < n; ++q) {
        const std::size_t s = static_cast<std::size_t>(q);
        const double expect =
            rec.basis[s] == rec.prep_axis[s] ? scale * rec.prep_sign[s] : 0.0;
        outcome[s] = rng.uniform() < 0.5 * (1.0 + expect) ? 1 : -1;
    }
}

// Dense matrix of a Pauli word (site q on bit q), including its sign.
Eigen::MatrixXcd dense_pauli_word(const PauliString& p) {
    const int n = p.n_qubits;
    const std::size_t dim = std::size_t{1} << n;
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim),
                                                  static_cast<Eigen::Index>(dim));
    // P|col> = phase(col) |col ^ flip>: X and Y flip the bit, Y and Z add phases.
    std::uint64_t flip = 0;
    for (const auto& [site, ax] : p.factors)
        if (ax != Axis::Z) flip |= std::uint64_t{1} << site;
    for (std::uint64_t col = 0; col < dim; ++col) {
        cplx phase(static_cast<double>(p.sign), 0.0);
        for (const auto& [site, ax] : p.factors) {
            const bool bit = (col >> site) & 1;
            if (ax == Axis::Y) phase *= bit ? cplx(0.0, -1.0) : cplx(0.0, 1.0);
            if (ax == Axis::Z && bit) phase = -phase;
        }
        out(static_cast<Eigen::Index>(col ^ flip), static_cast<Eigen::Index>(col)) = phase;
    }
    return out;
}

double median_sorted_copy(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void fill_round(ShadowRecord& rec, const ShadowChannel& channel, Rng& rng,
                const std::vector<Axis>& axes) {
    if (axes.empty()) fail_config("run_round: empty axis set");
    const int n = channel.n_qubits();
    rec.basis.resize(static_cast<std::size_t>(n));
    rec.prep_axis.resize(static_cast<std::size_t>(n));
    rec.prep_sign.resize(static_cast<std::size_t>(n));
    for (int q = 0; q < n; ++q) {
        const std::size_t s = static_cast<std::size_t>(q);
        rec.basis[s] = axes[rng.uniform_below(axes.size())];
        rec.prep_axis[s] = axes[rng.uniform_below(axes.size())];
        rec.prep_sign[s] = rng.uniform_below(2) ? 1 : -1;
    }
    channel.sample_outcomes(rec, rng);
}

}  // namespace

// --- channels ---------------------------------------------------------------

IdentityChannel::IdentityChannel(int n_qubits) : n_(n_qubits) {
    if (n_ < 1) fail_config("IdentityChannel: need at least one qubit");
}

void IdentityChannel::sample_outcomes(ShadowRecord& rec, Rng& rng) const {
    check_record_shape(rec, n_, "IdentityChannel");
    sample_product_outcomes(rec, n_, 1.0, rng, rec.outcome);
}

DepolarizingChannel::DepolarizingChannel(int n_qubits, double p) : n_(n_qubits), p_(p) {
    if (n_ < 1) fail_config("DepolarizingChannel: need at least one qubit");
    if (p_ < 0.0 || p_ > 1.0) fail_config("DepolarizingChannel: p must lie in [0, 1]");
}

void DepolarizingChannel::sample_outcomes(ShadowRecord& rec, Rng& rng) const {
    check_record_shape(rec, n_, "DepolarizingChannel");
    sample_product_outcomes(rec, n_, 1.0 - p_, rng, rec.outcome);
}

OracleChannel::OracleChannel(const DenseOracle& oracle, double t, double dt_max)
    : oracle_(oracle), t_(t), dt_(dt_max) {
    if (t_ < 0) fail_config("OracleChannel: negative evolution time");
    if (dt_ <= 0) fail_config("OracleChannel: dt_max must be positive");
}

int OracleChannel::n_qubits() const { return oracle_.model().n_qubits; }

void OracleChannel::sample_outcomes(ShadowRecord& rec, Rng& rng) const {
    const int n = n_qubits();
    check_record_shape(rec, n, "OracleChannel");
    const StateVec psi0 = prep_state_vector(rec, n);
    const Eigen::Index dim = static_cast<Eigen::Index>(psi0.size());
    Eigen::VectorXcd v(dim);
    for (Eigen::Index k = 0; k < dim; ++k) v(k) = psi0[static_cast<std::size_t>(k)];
    Eigen::MatrixXcd rho = v * v.adjoint();
    if (t_ > 0) rho = oracle_.evolve(std::move(rho), t_, dt_);

    // Rotate every site into its measurement basis, then read the diagonal.
    StateVec col(psi0.size());
    Eigen::MatrixXcd rotated = rho;
    for (int q = 0; q < n; ++q) {
        const Eigen::Matrix2cd r = basis_rotation(rec.basis[static_cast<std::size_t>(q)]);
        // rho -> (R_q rho R_q^dagger), applied column- then row-wise.
        for (Eigen::Index c = 0; c < dim; ++c) {
            for (std::size_t k = 0; k < col.size(); ++k) col[k] = rotated(static_cast<Eigen::Index>(k), c);
            apply_site_matrix(col, q, r);
            for (std::size_t k = 0; k < col.size(); ++k) rotated(static_cast<Eigen::Index>(k), c) = col[k];
        }
        for (Eigen::Index rrow = 0; rrow < dim; ++rrow) {
            for (std::size_t k = 0; k < col.size(); ++k)
                col[k] = std::conj(rotated(rrow, static_cast<Eigen::Index>(k)));
            apply_site_matrix(col, q, r);
            for (std::size_t k = 0; k < col.size(); ++k)
                rotated(rrow, static_cast<Eigen::Index>(k)) = std::conj(col[k]);
        }
    }
    std::vector<double> probs(psi0.size());
    for (std::size_t k = 0; k < probs.size(); ++k)
        probs[k] = rotated(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)).real();
    sample_bit_outcomes(probs, n, rng, rec.outcome);
}

TrajectoryChannel::TrajectoryChannel(ChipModel model, double t, SimConfig cfg)
    : model_(std::move(model)), t_(t), cfg_(cfg) {
    model_.validate();
    if (t_ < 0) fail_config("TrajectoryChannel: negative evolution time");
}

void TrajectoryChannel::sample_outcomes(ShadowRecord& rec, Rng& rng) const {
    const int n = model_.n_qubits;
    check_record_shape(rec, n, "TrajectoryChannel");
    StateVec psi = prep_state_vector(rec, n);
    if (t_ > 0) psi = simulate_single_trajectory(model_, std::move(psi), t_, cfg_, rng);
    for (int q = 0; q < n; ++q)
        apply_site_matrix(psi, q, basis_rotation(rec.basis[static_cast<std::size_t>(q)]));
    std::vector<double> probs(psi.size());
    for (std::size_t k = 0; k < probs.size(); ++k) probs[k] = std::norm(psi[k]);
    sample_bit_outcomes(probs, n, rng, rec.outcome);
}

// --- rounds and estimators --------------------------------------------------

ShadowRecord run_round(const ShadowChannel& channel, Rng& rng, const std::vector<Axis>& axes) {
    ShadowRecord rec;
    fill_round(rec, channel, rng, axes);
    return rec;
}

double estimator_value(const ShadowRecord& rec, const PauliString& pauli_a,
                       const PauliString& pauli_b, int n_axes) {
    const int n = static_cast<int>(rec.basis.size());
    if (pauli_a.n_qubits != n || pauli_b.n_qubits != n)
        fail_config("estimator_value: Pauli register size does not match the record");
    if (static_cast<int>(rec.outcome.size()) != n)
        fail_config("estimator_value: record has no outcomes");
    for (const auto& [site, ax] : pauli_a.factors)
        if (rec.basis[static_cast<std::size_t>(site)] != ax) return 0.0;
    for (const auto& [site, ax] : pauli_b.factors)
        if (rec.prep_axis[static_cast<std::size_t>(site)] != ax) return 0.0;
    int parity = pauli_a.sign * pauli_b.sign;
    for (const auto& [site, ax] : pauli_a.factors)
        parity *= rec.outcome[static_cast<std::size_t>(site)];
    for (const auto& [site, ax] : pauli_b.factors)
        parity *= rec.prep_sign[static_cast<std::size_t>(site)];
    const double magnitude =
        0.5 * std::pow(static_cast<double>(n_axes), pauli_a.weight() + pauli_b.weight());
    return parity > 0 ? magnitude : -magnitude;
}

double median_of_means(const std::vector<double>& values, int k_groups) {
    if (k_groups < 1) fail_config("median_of_means: need at least one group");
    if (values.size() < static_cast<std::size_t>(k_groups))
        fail_config("median_of_means: fewer values than groups");
    const std::size_t per = values.size() / static_cast<std::size_t>(k_groups);
    std::vector<double> means(static_cast<std::size_t>(k_groups), 0.0);
    for (std::size_t g = 0; g < means.size(); ++g) {
        double s = 0.0;
        for (std::size_t i = g * per; i < (g + 1) * per; ++i) s += values[i];
        means[g] = s / static_cast<double>(per);
    }
    return median_sorted_copy(std::move(means));
}

ShadowPlanSizes shadow_plan_sizes(int max_weight_sum, double epsilon, double delta,
                                  std::size_t n_a, std::size_t n_b, int n_axes) {
    if (max_weight_sum < 0) fail_config("shadow_plan_sizes: negative weight");
    if (!(epsilon > 0.0)) fail_config("shadow_plan_sizes: epsilon must be positive");
    if (!(delta > 0.0 && delta < 1.0)) fail_config("shadow_plan_sizes: delta must lie in (0, 1)");
    if (n_a < 1 || n_b < 1) fail_config("shadow_plan_sizes: empty Pauli lists");
    if (n_axes < 1) fail_config("shadow_plan_sizes: empty axis set");
    ShadowPlanSizes s;
    s.rounds_per_group = static_cast<long long>(
        std::ceil(4.0 * std::pow(static_cast<double>(n_axes), max_weight_sum) /
                  (epsilon * epsilon)));
    const double pairs = static_cast<double>(n_a) * static_cast<double>(n_b);
    s.groups = std::max(1, static_cast<int>(std::ceil(2.0 * std::log(pairs / delta))));
    s.total_rounds = s.rounds_per_group * s.groups;
    return s;
}

std::vector<OverlapEstimate> estimate_overlaps(const ShadowChannel& channel,
                                               const std::vector<PauliString>& paulis_a,
                                               const std::vector<PauliString>& paulis_b,
                                               double epsilon, double delta, Rng& rng,
                                               const ShadowOptions& options) {
    const int n = channel.n_qubits();
    if (paulis_a.empty() || paulis_b.empty())
        fail_config("estimate_overlaps: empty Pauli lists");
    if (options.axes.empty()) fail_config("estimate_overlaps: empty axis set");
    if (std::set<Axis>(options.axes.begin(), options.axes.end()).size() != options.axes.size())
        fail_config("estimate_overlaps: repeated axis in the whitelist");
    const auto validate = [&](const PauliString& p) {
        if (p.n_qubits != n) fail_config("estimate_overlaps: Pauli register size mismatch");
        if (p.weight() > options.weight_cap)
            fail_config("estimate_overlaps: weight of " + p.str() + " exceeds the cap (" +
                        std::to_string(options.weight_cap) + "); raise ShadowOptions::weight_cap "
                        "if the exponential round cost is intended");
        for (const auto& [site, ax] : p.factors)
            if (std::find(options.axes.begin(), options.axes.end(), ax) == options.axes.end())
                fail_config("estimate_overlaps: " + p.str() +
                            " uses an axis outside the whitelist");
    };
    for (const PauliString& p : paulis_a) validate(p);
    for (const PauliString& p : paulis_b) validate(p);

    int wmax = 0;
    for (const PauliString& a : paulis_a)
        for (const PauliString& b : paulis_b) wmax = std::max(wmax, a.weight() + b.weight());
    const int n_axes = static_cast<int>(options.axes.size());
    const ShadowPlanSizes sizes =
        shadow_plan_sizes(wmax, epsilon, delta, paulis_a.size(), paulis_b.size(), n_axes);

    const std::size_t n_pairs = paulis_a.size() * paulis_b.size();
    std::vector<std::vector<double>> group_sums(n_pairs,
                                                std::vector<double>(static_cast<std::size_t>(sizes.groups), 0.0));
    std::vector<long long> nonzero(n_pairs, 0);

    ShadowRecord rec;
    for (int g = 0; g < sizes.groups; ++g) {
        for (long long r = 0; r < sizes.rounds_per_group; ++r) {
            fill_round(rec, channel, rng, options.axes);
            std::size_t p = 0;
            for (const PauliString& a : paulis_a) {
                for (const PauliString& b : paulis_b) {
                    const double x = estimator_value(rec, a, b, n_axes);
                    if (x != 0.0) {
                        group_sums[p][static_cast<std::size_t>(g)] += x;
                        ++nonzero[p];
                    }
                    ++p;
                }
            }
        }
    }

    std::vector<OverlapEstimate> out;
    out.reserve(n_pairs);
    std::size_t p = 0;
    for (const PauliString& a : paulis_a) {
        for (const PauliString& b : paulis_b) {
            std::vector<double> means = group_sums[p];
            for (double& m : means) m /= static_cast<double>(sizes.rounds_per_group);
            OverlapEstimate e;
            e.pauli_a = a.str();
            e.pauli_b = b.str();
            e.value = 2.0 * median_sorted_copy(std::move(means));
            e.epsilon = epsilon;
            e.delta = delta;
            e.samples_used = sizes.total_rounds;
            e.nonzero_count = nonzero[p];
            out.push_back(e);
            ++p;
        }
    }
    return out;
}

std::string overlaps_to_csv(const std::vector<OverlapEstimate>& estimates) {
    std::ostringstream os;
    os.precision(17);
    os << "pa,pb,estimate,epsilon,delta,samples\n";
    for (const OverlapEstimate& e : estimates)
        os << e.pauli_a << "," << e.pauli_b << "," << e.value << "," << e.epsilon << ","
           << e.delta << "," << e.samples_used << "\n";
    return os.str();
}

double reference_overlap(const DenseOracle& oracle, const PauliString& pauli_a,
                         const PauliString& pauli_b, double t, double dt_max) {
    const int n = oracle.model().n_qubits;
    if (pauli_a.n_qubits != n || pauli_b.n_qubits != n)
        fail_config("reference_overlap: Pauli register size mismatch");
    Eigen::MatrixXcd evolved = dense_pauli_word(pauli_b);
    if (t > 0) evolved = oracle.evolve(std::move(evolved), t, dt_max);
    const Eigen::MatrixXcd pa = dense_pauli_word(pauli_a);
    const double dim = static_cast<double>(std::size_t{1} << n);
    return (pa * evolved).trace().real() / dim;
}

}  // namespace lindlearn
