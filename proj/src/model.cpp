#include "lindlearn/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace lindlearn {

std::array<double, 3> dmat_axial(const DMatrix& d) {
    return {dmat_get(d, Axis::Y, Axis::Z).imag(), dmat_get(d, Axis::Z, Axis::X).imag(),
            dmat_get(d, Axis::X, Axis::Y).imag()};
}

double dmat_max_abs(const DMatrix& d) {
    double m = 0.0;
    for (const auto& row : d)
        for (const cplx& v : row) m = std::max(m, std::abs(v));
    return m;
}

void ChipModel::validate() const {
    if (n_qubits <= 0) fail_config("chip model must have at least one qubit");
    auto check_len = [&](const std::vector<double>& v, const char* name) {
        if (static_cast<int>(v.size()) != n_qubits)
            fail_config(std::string(name) + " must have one entry per qubit");
    };
    check_len(omega, "omega");
    check_len(t1, "t1");
    check_len(t2, "t2");
    check_len(t2star, "t2star");
    for (double t : t1)
        if (t < 0) fail_config("negative T1");
    for (double t : t2)
        if (t < 0) fail_config("negative T2");
    for (double t : t2star)
        if (t < 0) fail_config("negative T2*");
    std::set<std::pair<int, int>> seen;
    for (const Edge& e : edges) {
        if (e.i < 0 || e.i >= n_qubits || e.j < 0 || e.j >= n_qubits || e.i == e.j)
            fail_config("edge endpoints out of range");
        auto key = std::minmax(e.i, e.j);
        if (!seen.insert(key).second) fail_config("duplicate edge in chip model");
    }
}

bool ChipModel::has_quasistatic() const {
    return std::any_of(t2star.begin(), t2star.end(), [](double t) { return t > 0; });
}

namespace {

struct ChipTableRow {
    double az_khz, t1_us, t2_us, t2star_us;
};

// Per-site parameters of the 16-qubit reference device (site order 1..16).
constexpr ChipTableRow CHIP16_SITES[16] = {
    {1.73807, 58.5227, 65.9752, 151.515},   {-0.816877, 60.0269, 65.1704, 166.667},
    {-1.0602, 59.2424, 64.6375, 163.934},   {-0.913223, 61.0255, 65.7397, 149.254},
    {-1.23118, 59.0545, 66.0886, 147.059},  {-0.654699, 60.0915, 66.1118, 151.515},
    {-0.514756, 59.8856, 65.1432, 153.846}, {2.0817, 61.0389, 64.8252, 158.73},
    {-0.568581, 60.5375, 66.2155, 158.73},  {-0.710498, 61.5036, 65.389, 149.254},
    {1.86153, 59.8949, 65.825, 147.059},    {-2.03725, 60.3777, 65.1203, 153.846},
    {-1.31695, 57.5781, 65.6052, 156.25},   {-0.902159, 59.1881, 65.8892, 158.73},
    {-0.202118, 60.0283, 66.2967, 144.928}, {0.136975, 58.9397, 66.0541, 149.254},
};

struct ChipTableEdge {
    int i, j;          // 1-based site labels
    double a_xx_khz;   // = a_yy
};

constexpr ChipTableEdge CHIP16_EDGES[22] = {
    {1, 2, 1.28112},    {2, 3, -0.716875},  {3, 4, -0.956949},  {4, 5, -0.819328},
    {1, 6, -1.1682},    {2, 7, -0.213057},  {3, 8, -0.563789},  {4, 9, 1.74022},
    {5, 10, 1.68348},   {6, 7, -1.51535},   {7, 8, -0.729672},  {8, 9, 1.6622},
    {9, 10, -0.314438}, {11, 12, -0.475787},{6, 11, 1.3663},    {7, 12, -2.03531},
    {12, 13, -1.22632}, {13, 8, -0.717182}, {13, 14, -0.546421},{14, 9, 1.90836},
    {14, 15, -0.781306},{11, 16, -0.358714},
};

ChipModel chip_subset(const std::vector<int>& sites_1based) {
    ChipModel m;
    m.n_qubits = static_cast<int>(sites_1based.size());
    std::map<int, int> relabel;
    for (int k = 0; k < m.n_qubits; ++k) {
        int s = sites_1based[k];
        relabel[s] = k;
        const ChipTableRow& row = CHIP16_SITES[s - 1];
        m.omega.push_back(2.0 * row.az_khz * KHZ_TO_RAD_PER_US);  // Omega = 2 a_z
        m.t1.push_back(row.t1_us);
        m.t2.push_back(row.t2_us);
        m.t2star.push_back(row.t2star_us);
    }
    for (const ChipTableEdge& e : CHIP16_EDGES) {
        auto it_i = relabel.find(e.i), it_j = relabel.find(e.j);
        if (it_i == relabel.end() || it_j == relabel.end()) continue;
        m.edges.push_back(Edge{it_i->second, it_j->second, e.a_xx_khz * KHZ_TO_RAD_PER_US});
    }
    m.validate();
    return m;
}

}  // namespace

ChipModel chip_preset(int n_qubits) {
    switch (n_qubits) {
        case 2: return chip_subset({1, 2});
        case 4: return chip_subset({1, 2, 6, 7});
        case 6: return chip_subset({1, 2, 3, 6, 7, 8});
        case 16: {
            std::vector<int> all(16);
            for (int k = 0; k < 16; ++k) all[k] = k + 1;
            return chip_subset(all);
        }
        default:
            fail_config("chip preset available for n in {2, 4, 6, 16}, got " +
                        std::to_string(n_qubits));
    }
}

ChipModel sample_chip(const ChipRecipe& recipe, Rng& rng) {
    if (recipe.rows <= 0 || recipe.cols <= 0) fail_config("chip recipe needs positive grid size");
    ChipModel m;
    m.n_qubits = recipe.rows * recipe.cols;
    auto idx = [&](int r, int c) { return r * recipe.cols + c; };
    for (int q = 0; q < m.n_qubits; ++q) {
        double az = rng.gaussian(recipe.az_mean_khz, recipe.az_std_khz);
        m.omega.push_back(2.0 * az * KHZ_TO_RAD_PER_US);
        m.t1.push_back(std::max(1.0, rng.gaussian(recipe.t1_mean_us, recipe.t1_std_us)));
        m.t2.push_back(std::max(1.0, rng.gaussian(recipe.t2_mean_us, recipe.t2_std_us)));
        m.t2star.push_back(
            std::max(1.0, rng.gaussian(recipe.t2star_mean_us, recipe.t2star_std_us)));
    }
    for (int r = 0; r < recipe.rows; ++r) {
        for (int c = 0; c < recipe.cols; ++c) {
            if (c + 1 < recipe.cols) {
                double j = rng.gaussian(recipe.coupling_mean_khz, recipe.coupling_std_khz);
                m.edges.push_back(Edge{idx(r, c), idx(r, c + 1), j * KHZ_TO_RAD_PER_US});
            }
            if (r + 1 < recipe.rows) {
                double j = rng.gaussian(recipe.coupling_mean_khz, recipe.coupling_std_khz);
                m.edges.push_back(Edge{idx(r, c), idx(r + 1, c), j * KHZ_TO_RAD_PER_US});
            }
        }
    }
    m.validate();
    return m;
}

void GeneralModel::validate() const {
    if (n_qubits <= 0) fail_config("model must have at least one qubit");
    for (const HamTerm& t : terms) {
        if (t.word.n_qubits != n_qubits) fail_config("Hamiltonian term qubit count mismatch");
        if (t.word.weight() < 1 || t.word.weight() > 2)
            fail_config("Hamiltonian terms must have weight 1 or 2");
        for (const auto& [site, axis] : t.word.factors) {
            (void)axis;
            if (site < 0 || site >= n_qubits) fail_config("Hamiltonian term site out of range");
        }
    }
    for (const auto& [site, d] : dissipators) {
        if (site < 0 || site >= n_qubits) fail_config("dissipator site out of range");
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                if (std::abs(d[a][b] - std::conj(d[b][a])) > 1e-12 * (1.0 + dmat_max_abs(d)))
                    fail_config("dissipation matrix is not Hermitian");
    }
}

double GeneralModel::coupling_scale() const {
    double g = 0.0;
    for (const HamTerm& t : terms) g = std::max(g, std::abs(t.coeff));
    for (const auto& [site, d] : dissipators) {
        (void)site;
        g = std::max(g, dmat_max_abs(d));
    }
    return g;
}

GeneralModel chip_to_general(const ChipModel& chip, bool ignore_quasistatic) {
    chip.validate();
    if (chip.has_quasistatic() && !ignore_quasistatic)
        fail_config("quasi-static T2* scatter has no Markovian (Lindblad) representation; "
                    "disable it or pass ignore_quasistatic");
    GeneralModel g;
    g.n_qubits = chip.n_qubits;
    for (const Edge& e : chip.edges) {
        g.terms.push_back({e.coupling, pauli2(g.n_qubits, e.i, Axis::X, e.j, Axis::X)});
        g.terms.push_back({e.coupling, pauli2(g.n_qubits, e.i, Axis::Y, e.j, Axis::Y)});
    }
    for (int q = 0; q < chip.n_qubits; ++q) {
        if (chip.omega[q] != 0.0)
            g.terms.push_back({0.5 * chip.omega[q], pauli1(g.n_qubits, q, Axis::Z)});
        DMatrix d = dmat_zero();
        bool any = false;
        if (chip.t1[q] > 0) {
            double r = 1.0 / (4.0 * chip.t1[q]);
            dmat_set(d, Axis::X, Axis::X, r);
            dmat_set(d, Axis::Y, Axis::Y, r);
            dmat_set(d, Axis::X, Axis::Y, cplx(0.0, -r));
            dmat_set(d, Axis::Y, Axis::X, cplx(0.0, r));
            any = true;
        }
        if (chip.t2[q] > 0) {
            dmat_set(d, Axis::Z, Axis::Z,
                     dmat_get(d, Axis::Z, Axis::Z) + 1.0 / (2.0 * chip.t2[q]));
            any = true;
        }
        if (any) g.dissipators[q] = d;
    }
    g.validate();
    return g;
}

GeneralModel sample_general_model(int n_qubits, const std::vector<std::pair<int, int>>& edges,
                                  double coupling_scale, double noise_scale, Rng& rng,
                                  bool complex_dissipators) {
    GeneralModel m;
    m.n_qubits = n_qubits;
    const Axis axes[3] = {Axis::X, Axis::Y, Axis::Z};
    for (int q = 0; q < n_qubits; ++q)
        for (Axis a : axes)
            m.terms.push_back({rng.uniform(-coupling_scale, coupling_scale), pauli1(n_qubits, q, a)});
    for (const auto& [i, j] : edges) {
        // Symmetric couplings only (a_ab = a_ba): weights (a,b) with a <= b get one
        // draw; the cross terms are emitted as two words sharing the coefficient.
        for (int a = 0; a < 3; ++a) {
            for (int b = a; b < 3; ++b) {
                double c = rng.uniform(-coupling_scale, coupling_scale);
                if (a == b) {
                    m.terms.push_back({c, pauli2(n_qubits, i, axes[a], j, axes[b])});
                } else {
                    m.terms.push_back({c, pauli2(n_qubits, i, axes[a], j, axes[b])});
                    m.terms.push_back({c, pauli2(n_qubits, i, axes[b], j, axes[a])});
                }
            }
        }
    }
    if (noise_scale > 0) {
        for (int q = 0; q < n_qubits; ++q) {
            // D = A A^dagger is Hermitian PSD; complex A gives a nonzero axial part.
            std::array<std::array<cplx, 3>, 3> a{};
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    a[r][c] = complex_dissipators ? rng.gaussian_cplx() : cplx(rng.gaussian(), 0.0);
            DMatrix d = dmat_zero();
            double maxab = 0.0;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) {
                    cplx v(0.0, 0.0);
                    for (int k = 0; k < 3; ++k) v += a[r][k] * std::conj(a[c][k]);
                    d[r][c] = v;
                    maxab = std::max(maxab, std::abs(v));
                }
            double scale = maxab > 0 ? noise_scale / maxab : 0.0;
            for (auto& row : d)
                for (cplx& v : row) v *= scale;
            m.dissipators[q] = d;
        }
    }
    m.validate();
    return m;
}

double analytic_derivative(const GeneralModel& model, const ProductState& rho,
                           const PauliString& obs) {
    double acc = 0.0;
    for (const HamTerm& t : model.terms) acc += t.coeff * commutator_trace(t.word, rho, obs);
    cplx diss(0.0, 0.0);
    const Axis axes[3] = {Axis::X, Axis::Y, Axis::Z};
    for (const auto& [site, d] : model.dissipators) {
        for (Axis mu : axes)
            for (Axis nu : axes) {
                cplx coeff = dmat_get(d, mu, nu);
                if (coeff == cplx(0.0, 0.0)) continue;
                diss += coeff * dissipator_trace(site, mu, nu, rho, obs);
            }
    }
    return acc + diss.real();
}

// --- JSON serialization -----------------------------------------------------

namespace {

using nlohmann::json;

json cplx_json(cplx v) { return json::array({v.real(), v.imag()}); }

cplx cplx_from(const json& j) {
    if (!j.is_array() || j.size() != 2) fail_config("complex values must be [re, im] pairs");
    return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

std::string model_to_json(const ChipModel& m) {
    json j;
    j["type"] = "chip";
    j["n_qubits"] = m.n_qubits;
    j["edges"] = json::array();
    for (const Edge& e : m.edges) j["edges"].push_back({{"i", e.i}, {"j", e.j}, {"coupling_rad_us", e.coupling}});
    j["omega_rad_us"] = m.omega;
    j["t1_us"] = m.t1;
    j["t2_us"] = m.t2;
    j["t2star_us"] = m.t2star;
    return j.dump(2);
}

std::string model_to_json(const GeneralModel& m) {
    json j;
    j["type"] = "general";
    j["n_qubits"] = m.n_qubits;
    j["terms"] = json::array();
    for (const HamTerm& t : m.terms)
        j["terms"].push_back({{"coeff_rad_us", t.coeff}, {"pauli", t.word.str()}});
    j["dissipators"] = json::object();
    for (const auto& [site, d] : m.dissipators) {
        json rows = json::array();
        for (int r = 0; r < 3; ++r) {
            json row = json::array();
            for (int c = 0; c < 3; ++c) row.push_back(cplx_json(d[r][c]));
            rows.push_back(row);
        }
        j["dissipators"][std::to_string(site)] = rows;
    }
    return j.dump(2);
}

namespace {

json parse_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) fail_config("malformed JSON model");
    return j;
}

}  // namespace

ChipModel chip_from_json(const std::string& text) {
    json j = parse_json(text);
    if (j.value("type", "") != "chip") fail_config("expected a chip model (type: \"chip\")");
    ChipModel m;
    try {
        m.n_qubits = j.at("n_qubits").get<int>();
        for (const json& e : j.at("edges"))
            m.edges.push_back(Edge{e.at("i").get<int>(), e.at("j").get<int>(),
                                   e.at("coupling_rad_us").get<double>()});
        m.omega = j.at("omega_rad_us").get<std::vector<double>>();
        m.t1 = j.at("t1_us").get<std::vector<double>>();
        m.t2 = j.at("t2_us").get<std::vector<double>>();
        m.t2star = j.at("t2star_us").get<std::vector<double>>();
    } catch (const json::exception& e) {
        fail_config(std::string("chip model JSON: ") + e.what());
    }
    m.validate();
    return m;
}

GeneralModel general_from_json(const std::string& text) {
    json j = parse_json(text);
    if (j.value("type", "") != "general")
        fail_config("expected a general model (type: \"general\")");
    GeneralModel m;
    try {
        m.n_qubits = j.at("n_qubits").get<int>();
        for (const json& t : j.at("terms"))
            m.terms.push_back({t.at("coeff_rad_us").get<double>(),
                               parse_pauli(t.at("pauli").get<std::string>(), m.n_qubits)});
        if (j.contains("dissipators")) {
            for (const auto& [key, rows] : j.at("dissipators").items()) {
                int site = std::stoi(key);
                DMatrix d = dmat_zero();
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c) d[r][c] = cplx_from(rows.at(r).at(c));
                m.dissipators[site] = d;
            }
        }
    } catch (const json::exception& e) {
        fail_config(std::string("general model JSON: ") + e.what());
    }
    m.validate();
    return m;
}

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_config("cannot open model file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

ChipModel load_chip_file(const std::string& path) { return chip_from_json(slurp(path)); }
GeneralModel load_general_file(const std::string& path) { return general_from_json(slurp(path)); }

}  // namespace lindlearn
