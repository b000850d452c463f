// Parameter isolation: closed-form rules that express each model parameter as
// a weighted sum of first derivatives d/dt tr(rho_t O)|_{t=0} over specially
// chosen product states and Pauli observables, plus previously recovered
// parameters.
//
// The rule families (all verified against the dense generator):
//   - two-site couplings a_ab (sigma_a^i sigma_b^j) from two-site observables;
//   - axial dissipation W = (Im D_yz, Im D_zx, Im D_xy) from the fully mixed
//     state, where every Hamiltonian derivative vanishes;
//   - one-site fields a_b (sigma_b^i), corrected by the partner coupling and W;
//   - dissipator diagonal D_bb and off-diagonal real parts Re D_mn, corrected
//     by previously recovered fields.
//
// The two-site rules assume symmetric couplings (a_ab = a_ba), which is how
// `sample_general_model` draws them and what an exchange-coupled chip has; the
// consistency rule for a_yx lets callers audit that assumption on data.
//
// `recover` evaluates a plan against a table of measured derivatives,
// resolving known-parameter references iteratively, so plans may list rules
// in any order. Missing derivatives and circular dependencies are errors.
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lindlearn/model.hpp"
#include "lindlearn/pauli.hpp"
#include "lindlearn/trajectories.hpp"

namespace lindlearn {

// --- parameter identities ---------------------------------------------------

enum class ParamKind : std::uint8_t {
    TwoQubitA,   // coefficient of sigma_{axis_i}^{site_i} sigma_{axis_j}^{site_j}
    SingleA,     // coefficient of sigma_{axis_i}^{site_i}
    AxialW,      // axial dissipation component W_{axis_i} on site_i
    DiagD,       // dissipator diagonal D_{axis_i,axis_i} on site_i
    OffDiagReD,  // Re D_{axis_i,axis_j} on site_i (axis_i < axis_j)
};

struct ParamKey {
    ParamKind kind = ParamKind::SingleA;
    int site_i = 0;
    int site_j = -1;           // second site for TwoQubitA; -1 otherwise
    Axis axis_i = Axis::X;
    Axis axis_j = Axis::X;     // second axis for TwoQubitA / OffDiagReD

    // "a[xy](0,1)", "a[z](0)", "W[x](2)", "D[yy](1)", "ReD[xz](0)".
    std::string str() const;

    auto tied() const { return std::tie(kind, site_i, site_j, axis_i, axis_j); }
    bool operator<(const ParamKey& o) const { return tied() < o.tied(); }
    bool operator==(const ParamKey& o) const { return tied() == o.tied(); }
};

// Factories (canonicalize site order for couplings, axis order for Re D).
ParamKey pk_two(int site_i, Axis axis_i, int site_j, Axis axis_j);
ParamKey pk_single(int site, Axis axis);
ParamKey pk_axial(int site, Axis axis);
ParamKey pk_diag(int site, Axis axis);
ParamKey pk_offdiag(int site, Axis mu, Axis nu);

// --- rules ------------------------------------------------------------------

struct RuleTerm {
    enum class Kind : std::uint8_t { derivative, known_parameter };

    Kind kind = Kind::derivative;
    double weight = 0.0;
    PauliString observable;  // derivative terms only
    ProductState state;      // derivative terms only
    ParamKey param;          // known_parameter terms only
};

inline RuleTerm dv_term(double weight, PauliString obs, ProductState state) {
    RuleTerm t;
    t.kind = RuleTerm::Kind::derivative;
    t.weight = weight;
    t.observable = std::move(obs);
    t.state = std::move(state);
    return t;
}

inline RuleTerm known_term(double weight, ParamKey param) {
    RuleTerm t;
    t.kind = RuleTerm::Kind::known_parameter;
    t.weight = weight;
    t.param = param;
    return t;
}

struct IsolationRule {
    ParamKey target;
    std::vector<RuleTerm> terms;
    std::string equation_tag;  // rule family: "pair", "axial", "field", "relax-diag", "relax-offdiag"
};

// --- plan builders (register size n, sites i != j) --------------------------

// Nine rules: the six independent symmetric couplings a_xy, a_yz, a_xx, a_xz,
// a_yy, a_zz, the redundant a_yx used to audit the symmetry assumption, and
// symmetry aliases a_zx = a_xz, a_zy = a_yz completing the coupling matrix.
std::vector<IsolationRule> plan_two_qubit(int n, int i, int j);

// W_x, W_y, W_z on `site` from the fully mixed state.
std::vector<IsolationRule> plan_axial(int n, int site);

// a_x, a_y, a_z on both sites; depends on pair couplings and axial W.
std::vector<IsolationRule> plan_single_qubit(int n, int i, int j);

// D_xx, D_yy, D_zz and Re D_xy, Re D_xz, Re D_yz on both sites; depends on
// fields, pair couplings and axial W.
std::vector<IsolationRule> plan_dissipation(int n, int i, int j);

// Everything above for an isolated pair: 9 + 3 + 3 + 6 + 12 = 33 rules.
std::vector<IsolationRule> full_plan(int n, int i, int j);

// Minimal plan for one exchange-coupled chip edge: a_xx (the exchange J),
// a_zz (needed by the field rules), a_z and W_x, W_y on both sites.
// Its derivative requirements deduplicate to 12 (observable, state) pairs.
std::vector<IsolationRule> chip_plan(int n, int i, int j);

// Unique (observable, state) pairs a plan needs, in first-use order.
std::vector<std::pair<PauliString, ProductState>> required_pairs(
    const std::vector<IsolationRule>& plan);

// Human-readable table: one line per rule (target, tag, terms).
std::string plan_table(const std::vector<IsolationRule>& plan);

// --- recovery ---------------------------------------------------------------

// Measured derivative estimates keyed by (observable, state) string forms.
class DerivativeTable {
  public:
    void set(const PauliString& obs, const ProductState& state, double value);
    std::optional<double> find(const PauliString& obs, const ProductState& state) const;
    std::size_t size() const { return values_.size(); }

  private:
    std::map<std::pair<std::string, std::string>, double> values_;
};

using DerivativeFn = std::function<double(const PauliString&, const ProductState&)>;

struct ParamEstimate {
    ParamKey key;
    double estimate = 0.0;
    std::optional<double> truth;
    std::string method;
    std::vector<double> derivatives_used;  // raw derivative values consumed, in term order

    double abs_error() const;  // |estimate - truth|; requires truth
};

struct RecoveryReport {
    std::vector<ParamEstimate> rows;  // plan order

    const ParamEstimate* find(const ParamKey& key) const;
    double get(const ParamKey& key) const;  // errors if absent
    double max_abs_error() const;           // over rows with truth; 0 if none
    // Columns: parameter,kind,estimate,truth,abs_error,method,n_derivatives.
    std::string to_csv() const;
};

// Evaluate a plan. Rules may reference each other's targets via
// known_parameter terms; resolution iterates until a fixed point, so plan
// order is irrelevant. Errors: duplicate targets, missing derivatives,
// unresolvable (circular or dangling) references.
RecoveryReport recover(const std::vector<IsolationRule>& plan, const DerivativeTable& table,
                       const std::map<ParamKey, double>& truth = {},
                       const std::string& method = "interpolation");

// Convenience: evaluate `fn` once per required pair, then recover.
RecoveryReport recover(const std::vector<IsolationRule>& plan, const DerivativeFn& fn,
                       const std::map<ParamKey, double>& truth = {},
                       const std::string& method = "interpolation");

// Planted parameter values of a model, keyed like recovery targets
// (coefficients of repeated Pauli words accumulate).
std::map<ParamKey, double> param_truth(const GeneralModel& model);

// Reassemble the full Hermitian dissipator of `site` from recovered pieces:
// diagonal from DiagD, real off-diagonal from OffDiagReD, imaginary part from
// the axial vector (Im D_yz, Im D_zx, Im D_xy) = (W_x, W_y, W_z).
DMatrix assemble_dissipator(const RecoveryReport& report, int site);

// --- derivative estimators ---------------------------------------------------

// Forward difference from the first sample: (mean(t0) - tr(rho_0 O)) / t0,
// with the exact t = 0 value from the product-state closed form. The leading
// bias is (t0/2) * d^2/dt^2 tr(rho_t O). Errors if the first time is not > 0.
double finite_difference_derivative(const TimeTrace& trace, int n_qubits);

// --- chip parameter conversion ----------------------------------------------

// An exchange-coupled chip with H = sum J (XX + YY) + sum (Omega/2) Z quotes
// J and Omega in kHz; the bare Pauli-word coefficients are in rad/us with
// a_xx = a_yy = J and a_z = Omega/2.
inline double chip_J_kHz(double a_xx) { return a_xx / KHZ_TO_RAD_PER_US; }
inline double chip_Omega_kHz(double a_z) { return 2.0 * a_z / KHZ_TO_RAD_PER_US; }

}  // namespace lindlearn
