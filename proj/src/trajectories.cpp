#include "lindlearn/trajectories.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace lindlearn {

double auto_dt(const ChipModel& model, const std::vector<double>& times) {
    double dt = 1e9;
    for (int q = 0; q < model.n_qubits; ++q) {
        if (model.t1[q] > 0) dt = std::min(dt, model.t1[q] / 1000.0);
        if (model.t2[q] > 0) dt = std::min(dt, model.t2[q] / 1000.0);
    }
    for (double t : times)
        if (t > 0) {
            dt = std::min(dt, t / 10.0);
            break;
        }
    if (dt >= 1e9) {
        // Noise-free model with no positive sample time: resolve the fastest
        // Hamiltonian scale instead.
        double g = 0.0;
        for (const Edge& e : model.edges) g = std::max(g, std::abs(e.coupling));
        for (double w : model.omega) g = std::max(g, std::abs(w));
        dt = g > 0 ? 0.01 / g : 1e-3;
    }
    return dt;
}

namespace {

struct ZRot {
    // diag(e^{-i theta/2}, e^{+i theta/2}) on one site.
    cplx p0, p1;
};

// In-place single-site z rotation.
void apply_zrot(StateVec& psi, int site, const ZRot& r) {
    const std::uint64_t bit = std::uint64_t{1} << site;
    for (std::uint64_t idx = 0; idx < psi.size(); ++idx)
        psi[idx] *= (idx & bit) ? r.p1 : r.p0;
}

// In-place exp(-i theta X_i X_j) over all amplitudes.
void apply_xx(StateVec& psi, int site_i, int site_j, double theta) {
    const std::uint64_t mask = (std::uint64_t{1} << site_i) | (std::uint64_t{1} << site_j);
    const double c = std::cos(theta), s = std::sin(theta);
    const cplx mis(0.0, -s);
    for (std::uint64_t idx = 0; idx < psi.size(); ++idx) {
        std::uint64_t partner = idx ^ mask;
        if (partner < idx) continue;  // handle each pair once
        cplx a = psi[idx], b = psi[partner];
        psi[idx] = c * a + mis * b;
        psi[partner] = c * b + mis * a;
    }
}

// In-place exp(-i theta Y_i Y_j): like XX but the flip term carries
// sign -1 when the two bits are equal, +1 when they differ.
void apply_yy(StateVec& psi, int site_i, int site_j, double theta) {
    const std::uint64_t bi = std::uint64_t{1} << site_i;
    const std::uint64_t bj = std::uint64_t{1} << site_j;
    const std::uint64_t mask = bi | bj;
    const double c = std::cos(theta), s = std::sin(theta);
    const cplx mis(0.0, -s);
    for (std::uint64_t idx = 0; idx < psi.size(); ++idx) {
        std::uint64_t partner = idx ^ mask;
        if (partner < idx) continue;
        bool equal_bits = ((idx & bi) != 0) == ((idx & bj) != 0);
        cplx f = equal_bits ? -mis : mis;
        cplx a = psi[idx], b = psi[partner];
        psi[idx] = c * a + f * b;
        psi[partner] = c * b + f * a;
    }
}

void renormalize(StateVec& psi) {
    double n2 = norm_squared(psi);
    if (n2 <= 0) fail_numerical("trajectory state norm collapsed to zero");
    double inv = 1.0 / std::sqrt(n2);
    for (cplx& a : psi) a *= inv;
}

// Per-site amplitude damping: jump probability p = w1 * (1 - e^{-dt/T1}) with
// w1 the excited-state weight; jump maps amp(.,1) onto amp(.,0), no-jump damps
// amp(.,1) by e^{-dt/(2T1)}. State renormalized after each site.
void apply_damping(StateVec& psi, int site, double dt_over_t1, double u) {
    const std::uint64_t bit = std::uint64_t{1} << site;
    double w1 = 0.0;
    for (std::uint64_t idx = 0; idx < psi.size(); ++idx)
        if (idx & bit) w1 += std::norm(psi[idx]);
    const double mu2 = 1.0 - std::exp(-dt_over_t1);
    if (u < w1 * mu2) {
        for (std::uint64_t idx = 0; idx < psi.size(); ++idx) {
            if (idx & bit) {
                psi[idx ^ bit] = psi[idx];
                psi[idx] = cplx(0.0, 0.0);
            }
        }
    } else {
        const double decay = std::exp(-0.5 * dt_over_t1);
        for (std::uint64_t idx = 0; idx < psi.size(); ++idx)
            if (idx & bit) psi[idx] *= decay;
    }
    renormalize(psi);
}

StateVec sample_initial_state(const ProductState& state, Rng& rng) {
    const int n = state.n_qubits;
    std::vector<int> unfixed;
    for (int q = 0; q < n; ++q)
        if (!state.fixed.count(q)) unfixed.push_back(q);

    // Joint Gaussian-random unit vector on the unfixed subregister: its outer
    // product averages to I/2^k, realizing the maximally mixed factor.
    std::vector<cplx> rand_part(std::size_t{1} << unfixed.size());
    if (!unfixed.empty()) {
        double n2 = 0.0;
        for (cplx& a : rand_part) {
            a = rng.gaussian_cplx();
            n2 += std::norm(a);
        }
        double inv = 1.0 / std::sqrt(n2);
        for (cplx& a : rand_part) a *= inv;
    } else {
        rand_part[0] = cplx(1.0, 0.0);
    }

    std::vector<std::array<cplx, 2>> site_amp(n);
    for (const auto& [site, st] : state.fixed) site_amp[site] = site_amplitudes(st.axis, st.sign);

    StateVec psi(std::size_t{1} << n);
    for (std::uint64_t idx = 0; idx < psi.size(); ++idx) {
        cplx amp(1.0, 0.0);
        std::uint64_t packed = 0;
        for (std::size_t k = 0; k < unfixed.size(); ++k)
            if (idx & (std::uint64_t{1} << unfixed[k])) packed |= std::uint64_t{1} << k;
        amp = rand_part[packed];
        for (const auto& [site, st] : state.fixed) {
            (void)st;
            amp *= site_amp[site][(idx >> site) & 1];
        }
        psi[idx] = amp;
    }
    return psi;
}

struct StepPlan {
    double dt = 0.0;
    int total_steps = 0;
    std::vector<int> sample_steps;        // ascending step indices to record
    std::vector<double> snapped_times;
};

StepPlan plan_steps(const ChipModel& model, const std::vector<double>& times,
                    const SimConfig& cfg) {
    StepPlan plan;
    plan.dt = cfg.dt > 0 ? cfg.dt : auto_dt(model, times);
    int prev = -1;
    for (double t : times) {
        if (t < 0) fail_config("negative sample time");
        int k = static_cast<int>(std::llround(t / plan.dt));
        if (std::abs(k * plan.dt - t) > 0.5 * plan.dt + 1e-12)
            fail_numerical("sample time cannot be snapped to a step boundary");
        if (k < prev) fail_config("sample times must be ascending");
        plan.sample_steps.push_back(k);
        plan.snapped_times.push_back(k * plan.dt);
        prev = k;
    }
    plan.total_steps = plan.sample_steps.empty() ? 0 : plan.sample_steps.back();
    return plan;
}

class TrajectoryWorkspace {
  public:
    TrajectoryWorkspace(const ChipModel& model, const StepPlan& plan, const SimConfig& cfg)
        : model_(model), plan_(plan), cfg_(cfg) {
        dephasing_variance_factor_ =
            cfg.dephasing == DephasingConvention::calibrated ? 2.0 : 4.0;
    }

    // Runs one trajectory; appends expectation values into `out` in
    // (sample time, observable) order.
    void run(const ProductState& state, const std::vector<PauliString>& observables,
             std::uint64_t traj_index, double* out) {
        Rng rng = Rng::stream(cfg_.master_seed, fnv1a64(state.str()), traj_index);
        StateVec psi = sample_initial_state(state, rng);

        // Quasi-static frequency scatter, one draw per site per trajectory.
        std::vector<double> beta(model_.n_qubits, 0.0);
        for (int q = 0; q < model_.n_qubits; ++q)
            if (model_.t2star[q] > 0)
                beta[q] = rng.gaussian(0.0, std::sqrt(2.0) / model_.t2star[q]);

        const double dt = plan_.dt;
        std::vector<ZRot> half_z(model_.n_qubits);
        for (int q = 0; q < model_.n_qubits; ++q) {
            double theta = (model_.omega[q] + beta[q]) * dt * 0.5;
            half_z[q] = ZRot{std::polar(1.0, -0.5 * theta), std::polar(1.0, 0.5 * theta)};
        }

        std::size_t cursor = 0;
        auto record = [&](int step) {
            while (cursor < plan_.sample_steps.size() && plan_.sample_steps[cursor] == step) {
                for (std::size_t o = 0; o < observables.size(); ++o)
                    out[cursor * observables.size() + o] = expectation(psi, observables[o]);
                ++cursor;
            }
        };

        record(0);
        for (int step = 0; step < plan_.total_steps; ++step) {
            trotter_step(psi, half_z, dt);
            apply_noise(psi, rng, dt);
            record(step + 1);
        }
    }

    // Evolves `psi` in place over the full step plan, drawing the quasi-static
    // offsets and all noise from `rng`. No sampling, no recording.
    void run_from(StateVec& psi, Rng& rng) {
        std::vector<double> beta(model_.n_qubits, 0.0);
        for (int q = 0; q < model_.n_qubits; ++q)
            if (model_.t2star[q] > 0)
                beta[q] = rng.gaussian(0.0, std::sqrt(2.0) / model_.t2star[q]);

        const double dt = plan_.dt;
        std::vector<ZRot> half_z(model_.n_qubits);
        for (int q = 0; q < model_.n_qubits; ++q) {
            double theta = (model_.omega[q] + beta[q]) * dt * 0.5;
            half_z[q] = ZRot{std::polar(1.0, -0.5 * theta), std::polar(1.0, 0.5 * theta)};
        }
        for (int step = 0; step < plan_.total_steps; ++step) {
            trotter_step(psi, half_z, dt);
            apply_noise(psi, rng, dt);
        }
        renormalize(psi);
    }

  private:
    void trotter_step(StateVec& psi, const std::vector<ZRot>& half_z, double dt) {
        for (int q = 0; q < model_.n_qubits; ++q) apply_zrot(psi, q, half_z[q]);
        for (const Edge& e : model_.edges) apply_yy(psi, e.i, e.j, e.coupling * dt * 0.5);
        for (const Edge& e : model_.edges) apply_xx(psi, e.i, e.j, e.coupling * dt);
        for (const Edge& e : model_.edges) apply_yy(psi, e.i, e.j, e.coupling * dt * 0.5);
        for (int q = 0; q < model_.n_qubits; ++q) apply_zrot(psi, q, half_z[q]);
    }

    void apply_noise(StateVec& psi, Rng& rng, double dt) {
        for (int q = 0; q < model_.n_qubits; ++q) {
            if (model_.t2[q] <= 0) continue;
            double gamma =
                rng.gaussian(0.0, std::sqrt(dephasing_variance_factor_ * dt / model_.t2[q]));
            apply_zrot(psi, q, ZRot{std::polar(1.0, -0.5 * gamma), std::polar(1.0, 0.5 * gamma)});
        }
        for (int q = 0; q < model_.n_qubits; ++q) {
            if (model_.t1[q] <= 0) continue;
            apply_damping(psi, q, dt / model_.t1[q], rng.uniform());
        }
    }

    const ChipModel& model_;
    const StepPlan& plan_;
    const SimConfig& cfg_;
    double dephasing_variance_factor_ = 2.0;
};

}  // namespace

std::vector<TimeTrace> simulate_traces(const ChipModel& model, const ProductState& state,
                                       const std::vector<PauliString>& observables,
                                       const std::vector<double>& times, const SimConfig& cfg) {
    model.validate();
    if (state.n_qubits != model.n_qubits) fail_config("state qubit count mismatch");
    for (const PauliString& o : observables)
        if (o.n_qubits != model.n_qubits) fail_config("observable qubit count mismatch");
    if (observables.empty() || times.empty()) fail_config("nothing to simulate");
    if (cfg.n_trajectories < 1) fail_config("need at least one trajectory");

    StepPlan plan = plan_steps(model, times, cfg);
    const std::size_t n_obs = observables.size();
    const std::size_t n_times = plan.sample_steps.size();
    const std::size_t per_traj = n_obs * n_times;
    std::vector<double> slab(per_traj * cfg.n_trajectories, 0.0);

    int n_threads = cfg.threads > 0
                        ? cfg.threads
                        : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min<int>(n_threads, cfg.n_trajectories);

    auto worker = [&](int w) {
        TrajectoryWorkspace ws(model, plan, cfg);
        for (int k = w; k < cfg.n_trajectories; k += n_threads)
            ws.run(state, observables, static_cast<std::uint64_t>(k), &slab[k * per_traj]);
    };
    if (n_threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int w = 0; w < n_threads; ++w) pool.emplace_back(worker, w);
        for (std::thread& t : pool) t.join();
    }

    // Reduce in trajectory order (bit-identical for any thread count).
    std::vector<TimeTrace> traces(n_obs);
    for (std::size_t o = 0; o < n_obs; ++o) {
        TimeTrace& tr = traces[o];
        tr.observable = observables[o].str();
        tr.initial_state = state.str();
        tr.times = plan.snapped_times;
        tr.mean.assign(n_times, 0.0);
        tr.std_error.assign(n_times, 0.0);
        tr.seed = cfg.master_seed;
    }
    const double m = static_cast<double>(cfg.n_trajectories);
    for (std::size_t ti = 0; ti < n_times; ++ti) {
        for (std::size_t o = 0; o < n_obs; ++o) {
            double sum = 0.0;
            for (int k = 0; k < cfg.n_trajectories; ++k)
                sum += slab[k * per_traj + ti * n_obs + o];
            double mean = sum / m;
            double ss = 0.0;
            for (int k = 0; k < cfg.n_trajectories; ++k) {
                double d = slab[k * per_traj + ti * n_obs + o] - mean;
                ss += d * d;
            }
            traces[o].mean[ti] = mean;
            traces[o].std_error[ti] =
                cfg.n_trajectories > 1 ? std::sqrt(ss / (m - 1.0) / m) : 0.0;
        }
    }
    return traces;
}

void apply_measurement_noise(TimeTrace& trace, const NoiseSpec& noise,
                             std::uint64_t master_seed) {
    if (noise.mode == NoiseSpec::Mode::none) return;
    Rng rng = Rng::stream(master_seed, fnv1a64("measurement-noise"),
                          fnv1a64(trace.observable + "|" + trace.initial_state));
    if (noise.mode == NoiseSpec::Mode::gaussian) {
        if (noise.sigma < 0) fail_config("negative noise sigma");
        for (std::size_t k = 0; k < trace.mean.size(); ++k) {
            trace.mean[k] += rng.gaussian(0.0, noise.sigma);
            trace.std_error[k] = noise.sigma;
        }
        trace.shots_or_sigma = noise.sigma;
        return;
    }
    // Projective shots: the +1-outcome probability is p = (1 + <O>)/2; the
    // recorded mean is the empirical 2 k/S - 1. Large S uses the Gaussian
    // approximation to the binomial (documented determinism trade-off).
    if (noise.shots < 1) fail_config("shot count must be >= 1");
    const long long s = noise.shots;
    for (std::size_t k = 0; k < trace.mean.size(); ++k) {
        double p = std::clamp(0.5 * (1.0 + trace.mean[k]), 0.0, 1.0);
        long long hits = 0;
        if (s <= 1024) {
            for (long long i = 0; i < s; ++i)
                if (rng.uniform() < p) ++hits;
        } else {
            double approx = s * p + std::sqrt(s * p * (1.0 - p)) * rng.gaussian();
            hits = std::clamp<long long>(std::llround(approx), 0, s);
        }
        double phat = (static_cast<double>(hits) + 1.0) / (static_cast<double>(s) + 2.0);
        trace.mean[k] = 2.0 * static_cast<double>(hits) / static_cast<double>(s) - 1.0;
        trace.std_error[k] = 2.0 * std::sqrt(phat * (1.0 - phat) / static_cast<double>(s));
    }
    trace.shots_or_sigma = static_cast<double>(s);
}

double initial_expectation(const TimeTrace& trace, int n_qubits) {
    return expectation(parse_product_state(trace.initial_state, n_qubits),
                       parse_pauli(trace.observable, n_qubits));
}

StateVec simulate_single_trajectory(const ChipModel& model, StateVec psi, double t_final,
                                    const SimConfig& cfg, Rng& rng) {
    model.validate();
    if (psi.size() != (std::size_t{1} << model.n_qubits))
        fail_config("simulate_single_trajectory: state dimension mismatch");
    if (t_final < 0) fail_config("simulate_single_trajectory: negative evolution time");
    const StepPlan plan = plan_steps(model, {t_final}, cfg);
    TrajectoryWorkspace ws(model, plan, cfg);
    ws.run_from(psi, rng);
    return psi;
}

}  // namespace lindlearn
