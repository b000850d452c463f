// Experiment harness: configuration files, trace simulation, recovery,
// overlap estimation, and the estimation-methodology sweeps. This is the layer
// the command-line tool and the Python bindings both sit on.
//
// A single TOML-style config file describes one experiment end to end: which
// device model to use (preset, sampled recipe, or JSON file), the sampling
// window and grid, the simulation backend (stochastic trajectories or the
// dense exact integrator), the measurement-noise model, the fit settings, and
// the derivative-estimation methods to run. Every stochastic choice derives
// from `master_seed`, so re-running any command with the same config writes
// byte-identical output files.
//
// Commands (each validates the config, then writes files into `output_dir`):
//   cmd_simulate  one trace CSV per (observable, state) pair required by the
//                 model's recovery plan, plus the plan table itself;
//   cmd_recover   robust polynomial fits per trace, derivative extraction,
//                 parameter recovery (interpolation and/or finite difference);
//   cmd_shadows   randomized-measurement overlap estimates for the configured
//                 Pauli lists;
//   cmd_figure    the error-vs-noise / error-vs-window / per-parameter sweep
//                 tables ("fig2", "fig3", "fig4").
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lindlearn/interp.hpp"
#include "lindlearn/isolation.hpp"
#include "lindlearn/model.hpp"
#include "lindlearn/trajectories.hpp"

namespace lindlearn {

// --- configuration ----------------------------------------------------------

enum class GridSpacing { chebyshev, uniform };

// Deterministic sample-time grid on [t0, t_max]: `chebyshev` places the m
// Chebyshev nodes (ascending, endpoints excluded), matching the partition
// weighting of the robust fit; `uniform` is an inclusive linspace.
struct GridConfig {
    double t0 = 0.03;     // us; must be > 0 (the derivative is extrapolated to 0)
    double t_max = 1.53;  // us
    int n_points = 36;
    GridSpacing spacing = GridSpacing::chebyshev;
};

struct ModelSection {
    enum class Kind { chip_preset, chip_recipe, chip_file, general_file };
    Kind kind = Kind::chip_preset;
    int n_qubits = 2;        // chip_preset: 2, 4, 6 or 16
    std::string path;        // chip_file / general_file: JSON model file
    ChipRecipe recipe;       // chip_recipe: sampled with stream (master_seed, "sample-model")
    // Zero the quasi-static T2* scatter after materializing the chip. Required
    // for the dense-oracle backend, which evolves Markovian models only.
    bool zero_quasistatic = false;
};

// Which engine produces the simulated traces.
enum class SimBackend { trajectory, oracle };

struct ShadowSection {
    // identity | depolarizing | oracle | trajectory
    std::string backend = "identity";
    double epsilon = 0.1;      // per-overlap additive accuracy
    double delta = 0.05;       // total failure probability
    double time_us = 0.1;      // evolution time for the oracle/trajectory channels
    double depolarize_p = 0.0; // depolarizing backend only
    int weight_cap = 4;        // refuse Pauli weights above this (cost guard)
    std::vector<std::string> paulis_a = {"X0"};  // observable-side Pauli strings
    std::vector<std::string> paulis_b = {"X0"};  // state-side Pauli strings
};

struct FigureSection {
    int instances = 100;      // device instances (fig2/fig3) or noise redraws (fig4)
    // Registers above the dense-oracle cap (6 qubits) are refused unless this
    // is set; the large path runs on trajectory ensembles instead and is slow.
    bool allow_large = false;
};

struct ExperimentConfig {
    ModelSection model;
    GridConfig grid;
    SimConfig sim;            // sim.master_seed is overwritten by master_seed below
    FitConfig fit;
    NoiseSpec noise;
    ShadowSection shadows;
    FigureSection figure;
    SimBackend backend = SimBackend::trajectory;
    std::vector<std::string> methods = {"interpolation"};  // subset of
                              // {interpolation, finite_difference, shadows}
    std::string output_dir = "out";
    std::uint64_t master_seed = 1;

    bool has_method(const std::string& name) const;
    void validate() const;  // throws Error(ErrorCode::config) with a reason
};

// Parse / emit the TOML-style config text. The serializer is canonical
// (fixed section and key order), and parsing its output reproduces the config
// exactly: config_to_toml(config_from_toml(config_to_toml(c))) ==
// config_to_toml(c). Unknown keys, duplicate keys and malformed lines are
// config errors that name the offending line.
ExperimentConfig config_from_toml(const std::string& text);
std::string config_to_toml(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

// --- derived pieces ---------------------------------------------------------

// Number of qubits the configured model acts on (loads file-backed models).
int model_n_qubits(const ExperimentConfig& cfg);

// The chip described by [model] (config error for kind = general_file).
// Recipe chips are sampled from the stream (master_seed, "sample-model"), so
// the device is a deterministic function of the config.
ChipModel materialize_chip(const ExperimentConfig& cfg);

// The general (Lindblad) form of the configured model. Chip kinds pass
// through chip_to_general, which refuses finite T2* scatter unless
// model.zero_quasistatic cleared it or `ignore_quasistatic` is set.
GeneralModel materialize_general(const ExperimentConfig& cfg, bool ignore_quasistatic = false);

// Recovery plan for the configured model: the union over chip edges of
// chip_plan (exchange coupling, fields, axial dissipation), or over the
// coupled pairs of a general model of full_plan, deduplicated by target so a
// shared site is recovered once. A model with no two-site coupling yields an
// empty plan.
std::vector<IsolationRule> experiment_plan(const ExperimentConfig& cfg);

// Ascending sample times for the configured grid.
std::vector<double> grid_times(const GridConfig& grid);

// "trace-<observable>-<state>.csv" with spaces removed and signs mapped to
// p/m, e.g. trace-X0Y1-py0pz1.csv; the fully mixed state prints "mixed".
std::string trace_filename(const PauliString& obs, const ProductState& state);

// Trace CSV round-trip. Columns:
//   observable,initial_state,time_us,mean,std_error,shots_or_sigma,seed
// one row per sample time, observable/state/shots/seed repeated on each row.
void write_trace_csv(const std::string& path, const TimeTrace& trace);
TimeTrace read_trace_csv(const std::string& path);

// --- commands ---------------------------------------------------------------

// Simulate every trace the plan needs and write them (plus plan.txt) into
// output_dir. Trajectory backend: ensembles of cfg.sim.n_trajectories per
// initial state; oracle backend: dense exact curves. Measurement noise from
// [noise] is applied either way.
void cmd_simulate(const ExperimentConfig& cfg);

// Read the traces cmd_simulate wrote and recover model parameters. Writes
// fits.json (per-trace fit reports: degree, coefficients, window, residual
// summary, derivative at zero, worst-case derivative error budget) and
// recovery.csv (one row per parameter and method, with planted truth).
// Missing trace files are config errors naming the file.
void cmd_recover(const ExperimentConfig& cfg);

// Run the randomized-measurement protocol for the configured Pauli lists and
// write shadows.csv (pair overlap estimates with sample counts).
void cmd_shadows(const ExperimentConfig& cfg);

// Methodology sweep tables. `which` selects:
//   fig2  exchange-coupling error vs window start t0 under a fixed total
//         measurement budget t0 * shots = 1e7 (so sigma(t0) = sqrt(t0/1e7));
//   fig3  exchange-coupling error vs measurement noise sigma in {1e-9..1e-5}
//         at the fixed window [0.03, 1.53] us;
//   fig4  per-parameter interpolation-vs-finite-difference comparison on the
//         4-qubit preset sub-lattice at the window [0.1, 5.1] us.
// fig2/fig3 sample `instances` devices from the configured recipe (defaults
// to a 2x2 grid when the model is not a recipe); fig4 redraws measurement
// noise `instances` times on the fixed preset. Quasi-static T2* scatter is
// zeroed: the sweeps evaluate estimation error against the Markovian
// generator, whose parameters are the well-defined truth. Columns are the
// median and 25/75 percentiles of absolute recovery error over instances,
// for interpolation and finite differences, plus the analytic leading-order
// finite-difference bias (t_first/2) * d^2/dt^2 tr(rho_t O).
struct FigureTable {
    std::vector<std::string> columns;           // numeric column names
    std::vector<std::string> row_labels;        // fig4: parameter names; else empty
    std::vector<std::vector<double>> rows;      // one inner vector per row
    std::string to_csv() const;
};
FigureTable run_figure(const ExperimentConfig& cfg, const std::string& which);
void cmd_figure(const ExperimentConfig& cfg, const std::string& which);  // writes <which>.csv

}  // namespace lindlearn
