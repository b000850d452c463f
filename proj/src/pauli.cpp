#include "lindlearn/pauli.hpp"

#include <cctype>
#include <sstream>

namespace lindlearn {

std::string PauliString::str() const {
    if (factors.empty()) return sign < 0 ? "-I" : "I";
    std::ostringstream out;
    if (sign < 0) out << '-';
    bool first = true;
    for (const auto& [site, axis] : factors) {
        if (!first) out << ' ';
        out << axis_char(axis) << site;
        first = false;
    }
    return out.str();
}

PauliString parse_pauli(const std::string& text, int n_qubits) {
    PauliString p;
    p.n_qubits = n_qubits;
    std::istringstream in(text);
    std::string tok;
    bool any = false;
    while (in >> tok) {
        any = true;
        std::size_t pos = 0;
        if (tok[pos] == '+' || tok[pos] == '-') {
            if (tok[pos] == '-') p.sign = -p.sign;
            ++pos;
        }
        if (pos >= tok.size()) fail_config("empty Pauli token in '" + text + "'");
        if (tok[pos] == 'I' || tok[pos] == 'i') {
            if (pos + 1 != tok.size()) fail_config("malformed Pauli token '" + tok + "'");
            continue;
        }
        Axis axis = axis_from_char(tok[pos]);
        ++pos;
        if (pos >= tok.size()) fail_config("Pauli token '" + tok + "' is missing a site index");
        int site = 0;
        try {
            site = std::stoi(tok.substr(pos));
        } catch (const std::exception&) {
            fail_config("bad site index in Pauli token '" + tok + "'");
        }
        if (site < 0 || site >= n_qubits)
            fail_config("Pauli site " + std::to_string(site) + " outside [0, " +
                        std::to_string(n_qubits) + ")");
        if (p.factors.count(site)) fail_config("repeated site in Pauli string '" + text + "'");
        p.factors[site] = axis;
    }
    if (!any) fail_config("empty Pauli string");
    return p;
}

std::string ProductState::str() const {
    if (fixed.empty()) return "mixed";
    std::ostringstream out;
    bool first = true;
    for (const auto& [site, st] : fixed) {
        if (!first) out << ' ';
        out << (st.sign < 0 ? '-' : '+') << static_cast<char>(std::tolower(axis_char(st.axis)))
            << site;
        first = false;
    }
    return out.str();
}

ProductState parse_product_state(const std::string& text, int n_qubits) {
    ProductState s;
    s.n_qubits = n_qubits;
    std::istringstream in(text);
    std::string tok;
    bool any = false;
    while (in >> tok) {
        any = true;
        if (tok == "mixed") {
            if (!s.fixed.empty()) fail_config("'mixed' cannot be combined with fixed sites");
            continue;
        }
        std::size_t pos = 0;
        int sign = 1;
        if (tok[pos] == '+' || tok[pos] == '-') {
            sign = tok[pos] == '-' ? -1 : 1;
            ++pos;
        }
        if (pos >= tok.size()) fail_config("malformed state token '" + tok + "'");
        Axis axis = axis_from_char(tok[pos]);
        ++pos;
        if (pos >= tok.size()) fail_config("state token '" + tok + "' is missing a site index");
        int site = 0;
        try {
            site = std::stoi(tok.substr(pos));
        } catch (const std::exception&) {
            fail_config("bad site index in state token '" + tok + "'");
        }
        if (site < 0 || site >= n_qubits)
            fail_config("state site " + std::to_string(site) + " outside [0, " +
                        std::to_string(n_qubits) + ")");
        if (s.fixed.count(site)) fail_config("repeated site in state '" + text + "'");
        s.fixed[site] = SiteState{axis, sign};
    }
    if (!any) fail_config("empty product-state string");
    return s;
}

// --- word algebra -----------------------------------------------------------

namespace {

// A Pauli word with a complex prefactor, used transiently for trace identities.
struct Word {
    cplx phase{1.0, 0.0};
    std::map<int, Axis> factors;
};

// sigma_a * sigma_b = delta_ab I + i * eps_abc sigma_c (single site).
void mul_site(Word& w, int site, Axis b) {
    auto it = w.factors.find(site);
    if (it == w.factors.end()) {
        w.factors[site] = b;
        return;
    }
    Axis a = it->second;
    if (a == b) {
        w.factors.erase(it);
        return;
    }
    // The third axis: indices sum to 0+1+2 = 3.
    Axis c = static_cast<Axis>(3 - static_cast<int>(a) - static_cast<int>(b));
    w.phase *= cplx(0.0, static_cast<double>(levi_civita(a, b, c)));
    it->second = c;
}

Word mul(const Word& lhs, const Word& rhs) {
    Word out = lhs;
    out.phase *= rhs.phase;
    for (const auto& [site, axis] : rhs.factors) mul_site(out, site, axis);
    return out;
}

Word word_of(const PauliString& p) {
    Word w;
    w.phase = static_cast<double>(p.sign);
    w.factors = p.factors;
    return w;
}

// tr(rho * W) for a product state: sites outside the word's support contribute 1
// (their factor has unit trace); a fixed site contributes its sign when the word
// matches its axis; any other non-identity factor traces to zero.
cplx trace_with(const ProductState& rho, const Word& w) {
    double prod = 1.0;
    for (const auto& [site, axis] : w.factors) {
        auto it = rho.fixed.find(site);
        if (it == rho.fixed.end()) return cplx(0.0, 0.0);
        if (it->second.axis != axis) return cplx(0.0, 0.0);
        prod *= static_cast<double>(it->second.sign);
    }
    return w.phase * prod;
}

}  // namespace

double expectation(const ProductState& rho, const PauliString& obs) {
    return trace_with(rho, word_of(obs)).real();
}

double commutator_trace(const PauliString& h, const ProductState& rho, const PauliString& obs) {
    // -i tr([h, rho] obs) = -i [ tr(rho obs h) - tr(rho h obs) ].
    Word wh = word_of(h), wo = word_of(obs);
    cplx t = trace_with(rho, mul(wo, wh)) - trace_with(rho, mul(wh, wo));
    return (cplx(0.0, -1.0) * t).real();
}

cplx dissipator_trace(int site, Axis mu, Axis nu, const ProductState& rho,
                      const PauliString& obs) {
    Word smu, snu;
    smu.factors[site] = mu;
    snu.factors[site] = nu;
    Word wo = word_of(obs);
    // tr(s_mu rho s_nu O) = tr(rho * s_nu O s_mu); anticommutator halves likewise.
    cplx gain = trace_with(rho, mul(mul(snu, wo), smu));
    Word numu = mul(snu, smu);
    cplx lossA = trace_with(rho, mul(wo, numu));   // tr(s_nu s_mu rho O)
    cplx lossB = trace_with(rho, mul(numu, wo));   // tr(rho s_nu s_mu O)
    return gain - 0.5 * (lossA + lossB);
}

// --- dense state-vector helpers --------------------------------------------

std::array<cplx, 2> site_amplitudes(Axis axis, int sign) {
    const double r = 1.0 / std::sqrt(2.0);
    switch (axis) {
        case Axis::X: return sign > 0 ? std::array<cplx, 2>{r, r} : std::array<cplx, 2>{r, -r};
        case Axis::Y:
            return sign > 0 ? std::array<cplx, 2>{r, cplx(0.0, r)}
                            : std::array<cplx, 2>{r, cplx(0.0, -r)};
        case Axis::Z:
            return sign > 0 ? std::array<cplx, 2>{1.0, 0.0} : std::array<cplx, 2>{0.0, 1.0};
    }
    fail_numerical("unreachable axis");
}

namespace {

// Per-index action of a Pauli string: |idx> -> phase(idx) * |idx ^ flip_mask>.
struct PauliAction {
    std::uint64_t flip_mask = 0;
    std::uint64_t y_mask = 0;
    std::uint64_t z_mask = 0;
    double sign = 1.0;
    int n_y = 0;

    explicit PauliAction(const PauliString& p) {
        sign = static_cast<double>(p.sign);
        for (const auto& [site, axis] : p.factors) {
            std::uint64_t bit = std::uint64_t{1} << site;
            switch (axis) {
                case Axis::X: flip_mask |= bit; break;
                case Axis::Y:
                    flip_mask |= bit;
                    y_mask |= bit;
                    ++n_y;
                    break;
                case Axis::Z: z_mask |= bit; break;
            }
        }
    }

    cplx phase(std::uint64_t idx) const {
        // sigma_y: |0> -> i|1>, |1> -> -i|0>; sigma_z: (-1)^bit; sigma_x: 1.
        int y_ones = __builtin_popcountll(idx & y_mask);
        int z_ones = __builtin_popcountll(idx & z_mask);
        // Each Y contributes i * (-1)^bit; collect i^n_y * (-1)^(#set Y bits).
        static const cplx i_pow[4] = {cplx(1, 0), cplx(0, 1), cplx(-1, 0), cplx(0, -1)};
        cplx ph = i_pow[n_y % 4];
        if ((y_ones + z_ones) % 2) ph = -ph;
        return sign * ph;
    }
};

}  // namespace

double expectation(const StateVec& psi, const PauliString& obs) {
    PauliAction act(obs);
    cplx acc(0.0, 0.0);
    for (std::uint64_t idx = 0; idx < psi.size(); ++idx) {
        acc += std::conj(psi[idx ^ act.flip_mask]) * act.phase(idx) * psi[idx];
    }
    return acc.real();
}

void apply(const PauliString& obs, const StateVec& psi, StateVec& out) {
    PauliAction act(obs);
    out.assign(psi.size(), cplx(0.0, 0.0));
    for (std::uint64_t idx = 0; idx < psi.size(); ++idx) {
        out[idx ^ act.flip_mask] += act.phase(idx) * psi[idx];
    }
}

double norm_squared(const StateVec& psi) {
    double acc = 0.0;
    for (const cplx& a : psi) acc += std::norm(a);
    return acc;
}

}  // namespace lindlearn
