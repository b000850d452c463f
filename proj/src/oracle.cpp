#include "lindlearn/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace lindlearn {

namespace {

Eigen::Matrix3cd to_eigen(const DMatrix& d) {
    Eigen::Matrix3cd m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = d[r][c];
    return m;
}

Eigen::Matrix2cd pauli_matrix(Axis a) {
    Eigen::Matrix2cd m;
    switch (a) {
        case Axis::X: m << 0, 1, 1, 0; break;
        case Axis::Y: m << cplx(0, 0), cplx(0, -1), cplx(0, 1), cplx(0, 0); break;
        case Axis::Z: m << 1, 0, 0, -1; break;
    }
    return m;
}

// Single-site operator embedded into the full register. Index convention
// matches the state-vector code: qubit q is bit q of the index.
Eigen::MatrixXcd embed_site(int n, int site, const Eigen::Matrix2cd& op) {
    int dim = 1 << n;
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
    int bit = 1 << site;
    for (int col = 0; col < dim; ++col) {
        int cb = (col & bit) ? 1 : 0;
        for (int rb = 0; rb < 2; ++rb) {
            cplx v = op(rb, cb);
            if (v == cplx(0, 0)) continue;
            int row = (col & ~bit) | (rb ? bit : 0);
            out(row, col) += v;
        }
    }
    return out;
}

}  // namespace

double dmat_min_eigenvalue(const DMatrix& d) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es(to_eigen(d));
    return es.eigenvalues().minCoeff();
}

DenseOracle::DenseOracle(GeneralModel model) : model_(std::move(model)) {
    model_.validate();
    if (model_.n_qubits > MAX_QUBITS)
        fail_config("dense oracle capped at " + std::to_string(MAX_QUBITS) + " qubits, got " +
                    std::to_string(model_.n_qubits));
    dim_ = 1 << model_.n_qubits;
    ham_ = Eigen::MatrixXcd::Zero(dim_, dim_);
    for (const HamTerm& t : model_.terms) ham_ += t.coeff * dense_pauli(t.word);

    for (const auto& [site, d] : model_.dissipators) {
        SiteChannel ch;
        Eigen::MatrixXcd s[3];
        for (int a = 0; a < 3; ++a)
            s[a] = embed_site(model_.n_qubits, site, pauli_matrix(static_cast<Axis>(a)));
        // Diagonalize D: the channel becomes sum_k rate_k L_k rho L_k^dagger with
        // L_k = sum_mu V(mu, k) sigma_mu. Negative eigenvalues (unphysical D) are
        // kept with their sign so rhs() still matches the algebraic definition.
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3cd> es(to_eigen(d));
        for (int k = 0; k < 3; ++k) {
            double rate = es.eigenvalues()(k);
            if (std::abs(rate) < 1e-15) continue;
            Eigen::MatrixXcd jump = Eigen::MatrixXcd::Zero(dim_, dim_);
            for (int mu = 0; mu < 3; ++mu) jump += es.eigenvectors()(mu, k) * s[mu];
            ch.jumps.emplace_back(rate, std::move(jump));
        }
        ch.kernel = Eigen::MatrixXcd::Zero(dim_, dim_);
        for (int mu = 0; mu < 3; ++mu)
            for (int nu = 0; nu < 3; ++nu) {
                cplx c = d[mu][nu];
                if (c != cplx(0, 0)) ch.kernel += c * (s[nu] * s[mu]);
            }
        channels_.push_back(std::move(ch));
    }
}

Eigen::MatrixXcd DenseOracle::dense_pauli(const PauliString& p) const {
    Eigen::MatrixXcd out =
        Eigen::MatrixXcd::Identity(dim_, dim_) * static_cast<double>(p.sign);
    for (const auto& [site, axis] : p.factors)
        out = embed_site(model_.n_qubits, site, pauli_matrix(axis)) * out;
    return out;
}

Eigen::MatrixXcd DenseOracle::product_density(const ProductState& rho) const {
    if (rho.n_qubits != model_.n_qubits) fail_config("state qubit count mismatch");
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(dim_, dim_);
    out /= static_cast<double>(dim_);
    // rho = prod_sites (I + s sigma_tau)/2 = (I + sum over fixed ... ) expanded
    // multiplicatively: multiply the maximally mixed state by (I + s sigma_tau)
    // per fixed site (these commute across distinct sites).
    for (const auto& [site, st] : rho.fixed) {
        Eigen::Matrix2cd f = Eigen::Matrix2cd::Identity() +
                             static_cast<double>(st.sign) * pauli_matrix(st.axis);
        out = embed_site(model_.n_qubits, site, f) * out;
    }
    return out;
}

Eigen::MatrixXcd DenseOracle::rhs(const Eigen::MatrixXcd& rho) const {
    Eigen::MatrixXcd out = cplx(0, -1) * (ham_ * rho - rho * ham_);
    for (const SiteChannel& ch : channels_) {
        for (const auto& [rate, jump] : ch.jumps)
            out += rate * (jump * rho * jump.adjoint());
        out -= 0.5 * (ch.kernel * rho + rho * ch.kernel);
    }
    return out;
}

Eigen::MatrixXcd DenseOracle::evolve(Eigen::MatrixXcd rho, double t, double dt_max) const {
    if (t < 0) fail_config("negative evolution time");
    if (t == 0) return rho;
    if (dt_max <= 0) fail_config("dt_max must be positive");
    int steps = static_cast<int>(std::ceil(t / dt_max - 1e-12));
    double dt = t / steps;
    for (int s = 0; s < steps; ++s) {
        Eigen::MatrixXcd k1 = rhs(rho);
        Eigen::MatrixXcd k2 = rhs(rho + 0.5 * dt * k1);
        Eigen::MatrixXcd k3 = rhs(rho + 0.5 * dt * k2);
        Eigen::MatrixXcd k4 = rhs(rho + dt * k3);
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return rho;
}

double DenseOracle::expectation(const Eigen::MatrixXcd& rho, const PauliString& obs) const {
    return (dense_pauli(obs) * rho).trace().real();
}

double DenseOracle::derivative(const ProductState& rho, const PauliString& obs) const {
    return (dense_pauli(obs) * rhs(product_density(rho))).trace().real();
}

std::vector<double> DenseOracle::trace_curve(const ProductState& rho, const PauliString& obs,
                                             const std::vector<double>& times,
                                             double dt_max) const {
    Eigen::MatrixXcd state = product_density(rho);
    Eigen::MatrixXcd op = dense_pauli(obs);
    std::vector<double> out;
    out.reserve(times.size());
    double now = 0.0;
    for (double t : times) {
        if (t < now - 1e-12) fail_config("trace_curve times must be ascending");
        if (t > now) {
            state = evolve(std::move(state), t - now, dt_max);
            now = t;
        }
        out.push_back((op * state).trace().real());
    }
    return out;
}

}  // namespace lindlearn
