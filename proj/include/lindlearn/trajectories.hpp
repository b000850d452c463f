// Stochastic pure-state trajectory simulation of chip models.
//
// One trajectory = one pure state evolved with
//   - second-order Trotter steps  Z(dt/2) Y(dt/2) X(dt) Y(dt/2) Z(dt/2)
//     (XX terms mutually commute, as do YY and Z, so each pass is exact);
//   - quasi-static per-trajectory frequency shifts beta_j ~ N(0, 2/T2*^2)
//     folded into the Z pass (Gaussian free-induction decay exp(-(t/T2*)^2));
//   - per-step random z-rotations for white-noise dephasing;
//   - per-step jump/no-jump amplitude damping (T1).
// Observables are averaged over trajectories; the ensemble mean estimates
// tr(rho_t O) for the Lindblad/quasi-static mixture.
//
// Determinism: trajectory k of a given initial state draws from the stream
// (master_seed, hash(state), k) regardless of thread count; reductions run in
// trajectory order. Outputs are bit-identical for a fixed master seed.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lindlearn/model.hpp"

namespace lindlearn {

// White-noise dephasing per-step variance convention: `calibrated` uses
// Var(gamma) = 2 dt/T2 (coherences decay as exp(-t/T2), consistent with a
// Lindblad rate D_zz = 1/(2 T2)); `paper_variance` uses 4 dt/T2 (decay
// exp(-2t/T2)), kept for comparison with the source prescription.
enum class DephasingConvention { calibrated, paper_variance };

struct SimConfig {
    double dt = 0.0;                  // us; 0 = auto (min(T1,T2)/1000, t_first/10)
    int n_trajectories = 189;
    int threads = 0;                  // 0 = hardware concurrency
    DephasingConvention dephasing = DephasingConvention::calibrated;
    std::uint64_t master_seed = 1;
};

// One measured observable curve. `shots_or_sigma` records the measurement-noise
// model applied afterwards: 0 = raw trajectory mean (std_error = ensemble SE),
// values < 1 = Gaussian noise sigma, values >= 1 = projective shot count.
struct TimeTrace {
    std::string observable;
    std::string initial_state;
    std::vector<double> times;     // us (snapped to step boundaries)
    std::vector<double> mean;
    std::vector<double> std_error;
    double shots_or_sigma = 0.0;
    std::uint64_t seed = 0;
};

struct NoiseSpec {
    enum class Mode { none, gaussian, shots };
    Mode mode = Mode::none;
    double sigma = 0.0;
    long long shots = 0;
};

// Step size satisfying dt <= min(T1, T2)/1000 over sites with active channels
// and dt <= t_first/10 for the earliest positive sample time.
double auto_dt(const ChipModel& model, const std::vector<double>& times);

// Evolve one ensemble from `state`; measure every observable at every time.
// Times must be ascending; they are snapped to the nearest step boundary and
// the snapped values are recorded in the traces.
std::vector<TimeTrace> simulate_traces(const ChipModel& model, const ProductState& state,
                                       const std::vector<PauliString>& observables,
                                       const std::vector<double>& times, const SimConfig& cfg);

// Replace the mean with a noisy measurement record (deterministic per
// (master_seed, trace identity)). Mode `none` leaves the trace untouched.
void apply_measurement_noise(TimeTrace& trace, const NoiseSpec& noise,
                             std::uint64_t master_seed);

// Exact t = 0 value tr(rho_0 O) of a trace's product state (closed form).
double initial_expectation(const TimeTrace& trace, int n_qubits);

// One stochastic trajectory from an explicit initial state vector: the same
// second-order Trotter splitting and noise unravelling as the ensemble runs,
// with every random draw (quasi-static offsets first, then per-step noise)
// taken from `rng`. Returns the normalized final state; t_final must snap to
// a step boundary. Used by protocols that measure single shots, not means.
StateVec simulate_single_trajectory(const ChipModel& model, StateVec psi, double t_final,
                                    const SimConfig& cfg, Rng& rng);

}  // namespace lindlearn
