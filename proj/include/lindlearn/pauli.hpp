// Pauli strings, Pauli-product states, and the site-local trace identities that
// make first-derivative bookkeeping O(weight) instead of O(4^n).
//
// Conventions (fixed throughout the library):
//   - qubit j maps to bit j of the state-vector index (LSB = qubit 0);
//   - sigma_z|0> = +|0>;
//   - a product state fixes a subset of sites to Pauli eigenstates
//     rho_site = (I + s*sigma_tau)/2 and leaves the rest maximally mixed.
#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "lindlearn/common.hpp"

namespace lindlearn {

// Tensor product of single-site Paulis with a +-1 prefactor.
// Sites not present in `factors` carry the identity.
struct PauliString {
    int n_qubits = 0;
    std::map<int, Axis> factors;
    int sign = 1;

    int weight() const { return static_cast<int>(factors.size()); }
    bool is_identity() const { return factors.empty(); }

    // Format: sign prefix only if negative, then "X0 Z3"; identity prints "I".
    std::string str() const;

    bool operator==(const PauliString&) const = default;
};

// Parse "X0", "Y2 Z5", "-X1 X3", "I". Site indices must lie in [0, n_qubits).
PauliString parse_pauli(const std::string& text, int n_qubits);

inline PauliString pauli1(int n, int site, Axis a, int sign = 1) {
    PauliString p;
    p.n_qubits = n;
    p.factors[site] = a;
    p.sign = sign;
    return p;
}

inline PauliString pauli2(int n, int site_i, Axis a, int site_j, Axis b, int sign = 1) {
    PauliString p;
    p.n_qubits = n;
    p.factors[site_i] = a;
    p.factors[site_j] = b;
    p.sign = sign;
    return p;
}

// A fixed Pauli eigenstate on one site: (I + sign*sigma_axis)/2.
struct SiteState {
    Axis axis = Axis::Z;
    int sign = 1;

    bool operator==(const SiteState&) const = default;
};

// Product state: fixed sites as above, absent sites maximally mixed (I/2).
struct ProductState {
    int n_qubits = 0;
    std::map<int, SiteState> fixed;

    // Format: "+z0 -x3" (every fixed site, sign always printed); fully mixed: "mixed".
    std::string str() const;

    bool operator==(const ProductState&) const = default;
};

ProductState parse_product_state(const std::string& text, int n_qubits);

inline ProductState mixed_state(int n_qubits) {
    ProductState s;
    s.n_qubits = n_qubits;
    return s;
}

inline ProductState product_state(int n_qubits,
                                  std::initializer_list<std::pair<int, SiteState>> fixed) {
    ProductState s;
    s.n_qubits = n_qubits;
    for (const auto& [site, st] : fixed) s.fixed[site] = st;
    return s;
}

// --- closed-form traces -----------------------------------------------------

// tr(rho * P): product over the support of P of <sigma_axis> on each site
// (sign if fixed to the same axis, 0 otherwise).
double expectation(const ProductState& rho, const PauliString& obs);

// -i * tr([h, rho] *
//         obs) for a Pauli-string Hamiltonian term h (unit coefficient).
// This is the per-term contribution of the coherent part to d/dt tr(rho_t obs).
double commutator_trace(const PauliString& h, const ProductState& rho, const PauliString& obs);

// tr(sigma_mu^m rho sigma_nu^m obs) - (1/2) tr({sigma_nu^m sigma_mu^m, rho} obs):
// the per-(mu,nu) contribution of site m's dissipator to d/dt tr(rho_t obs).
cplx dissipator_trace(int site, Axis mu, Axis nu, const ProductState& rho,
                      const PauliString& obs);

// --- dense state-vector helpers --------------------------------------------

using StateVec = std::vector<cplx>;

// Single-site amplitudes of the +-1 eigenstate of sigma_axis, in the z basis.
std::array<cplx, 2> site_amplitudes(Axis axis, int sign);

// <psi|P|psi>. P is Hermitian, so the result is real (imaginary part discarded).
double expectation(const StateVec& psi, const PauliString& obs);

// out = P|psi> (out is resized; aliasing with psi is not allowed).
void apply(const PauliString& obs, const StateVec& psi, StateVec& out);

double norm_squared(const StateVec& psi);

}  // namespace lindlearn
