// Model containers.
//
// Two levels of generality:
//   - ChipModel: the transmon-style lattice the stochastic trajectory engine
//     simulates: H = sum_edges J (XX + YY) + sum_j (Omega_j/2) Z, plus per-site
//     T1 (amplitude damping), T2 (white-noise dephasing) and T2* (quasi-static
//     frequency scatter). Internal units: rad/us for energies, us for times.
//   - GeneralModel: arbitrary 1- and 2-local Pauli Hamiltonian terms plus one
//     Hermitian 3x3 dissipation matrix per site (Pauli-basis Lindbladian).
//     This is what the exact oracle evolves and what recovery estimates.
//
// Couplings quoted in kHz convert as 1 kHz = 2*pi*1e-3 rad/us.
#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lindlearn/pauli.hpp"
#include "lindlearn/rng.hpp"

namespace lindlearn {

inline constexpr double KHZ_TO_RAD_PER_US = TWO_PI * 1e-3;

// Hermitian 3x3 matrix over Pauli axes; D[mu][nu] multiplies
// sigma_mu rho sigma_nu - (1/2){sigma_nu sigma_mu, rho}.
using DMatrix = std::array<std::array<cplx, 3>, 3>;

inline cplx dmat_get(const DMatrix& d, Axis mu, Axis nu) {
    return d[static_cast<int>(mu)][static_cast<int>(nu)];
}
inline void dmat_set(DMatrix& d, Axis mu, Axis nu, cplx v) {
    d[static_cast<int>(mu)][static_cast<int>(nu)] = v;
}
inline DMatrix dmat_zero() { return DMatrix{}; }

// Axial vector of the imaginary part: W = (Im D_yz, Im D_zx, Im D_xy).
// It is the piece of the dissipator that rotates Bloch vectors like a magnetic
// field and therefore shadows the Hamiltonian in first-derivative data.
std::array<double, 3> dmat_axial(const DMatrix& d);

double dmat_max_abs(const DMatrix& d);

struct Edge {
    int i = 0;
    int j = 0;
    double coupling = 0.0;  // J in rad/us; Hamiltonian term J*(X_i X_j + Y_i Y_j)

    bool operator==(const Edge&) const = default;
};

inline constexpr double NO_DECAY = 0.0;  // T = 0 disables a channel (infinite lifetime)

struct ChipModel {
    int n_qubits = 0;
    std::vector<Edge> edges;
    std::vector<double> omega;    // rad/us; Hamiltonian term (Omega_j/2) Z_j
    std::vector<double> t1;       // us; 0 = channel off
    std::vector<double> t2;       // us; 0 = channel off
    std::vector<double> t2star;   // us; 0 = channel off

    void validate() const;
    bool has_quasistatic() const;
};

// The 16-qubit example device: 22 couplings, per-site frequencies and decay
// times as sampled for the reference chip. `chip_preset(n)` with n in
// {2, 4, 6, 16} returns the full device or a connected sub-lattice of it
// (sites relabeled contiguously, parameters inherited).
ChipModel chip_preset(int n_qubits);

// Gaussian-sampled rectangular-grid device mirroring the example construction.
struct ChipRecipe {
    int rows = 4;
    int cols = 4;
    double coupling_mean_khz = 0.0;
    double coupling_std_khz = 1.2;
    double az_mean_khz = 0.0;
    double az_std_khz = 1.2;   // a_z = Omega/2 in kHz
    double t1_mean_us = 60.0;
    double t1_std_us = 1.0;
    double t2_mean_us = 65.5;
    double t2_std_us = 0.6;
    double t2star_mean_us = 153.0;
    double t2star_std_us = 6.0;
};

ChipModel sample_chip(const ChipRecipe& recipe, Rng& rng);

struct HamTerm {
    double coeff = 0.0;  // rad/us
    PauliString word;    // weight 1 or 2
};

struct GeneralModel {
    int n_qubits = 0;
    std::vector<HamTerm> terms;
    std::map<int, DMatrix> dissipators;

    void validate() const;

    // Largest |coefficient| over Hamiltonian terms and dissipator entries;
    // the local-strength scale used by degree/budget heuristics.
    double coupling_scale() const;
};

// Expand a chip Hamiltonian + its Markovian noise into the general form:
// T1 -> D_xx = D_yy = 1/(4 T1), D_xy = -i/(4 T1); T2 -> D_zz += 1/(2 T2).
// Quasi-static T2* scatter is not Markovian and cannot be represented here;
// finite t2star raises unless `ignore_quasistatic`.
GeneralModel chip_to_general(const ChipModel& chip, bool ignore_quasistatic = false);

// Random symmetric 2-local model on the given edge list: every one-site axis
// coupling on every site, every symmetric two-site coupling (a_xy = a_yx) on
// every edge, drawn uniform in [-scale, scale]; per-site random Hermitian PSD
// dissipation matrices D = A A^dagger scaled to `noise_scale`.
GeneralModel sample_general_model(int n_qubits, const std::vector<std::pair<int, int>>& edges,
                                  double coupling_scale, double noise_scale, Rng& rng,
                                  bool complex_dissipators = true);

// d/dt tr(rho_t O) at t = 0 from the closed-form site-local traces
// (no dense algebra; exact for product states).
double analytic_derivative(const GeneralModel& model, const ProductState& rho,
                           const PauliString& obs);

// JSON round-trip (schema documented in README).
std::string model_to_json(const ChipModel&);
std::string model_to_json(const GeneralModel&);
ChipModel chip_from_json(const std::string& text);
GeneralModel general_from_json(const std::string& text);
ChipModel load_chip_file(const std::string& path);
GeneralModel load_general_file(const std::string& path);

}  // namespace lindlearn
