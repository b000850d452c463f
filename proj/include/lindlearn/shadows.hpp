// Process shadows: randomized prepare-and-measure tomography of a channel.
//
// Protocol per round: draw a uniform measurement axis B_q and preparation
// axis S_q per site plus a sign E_q (the prepared state is the product of
// (I + E_q sigma_{S_q})/2 eigenstates), push the state through the channel,
// rotate each site into its B_q basis and read out bits (bit 0 -> M_q = +1).
//
// The pair estimator for Pauli words P_a (measured) and P_b (prepared) is
//   X = sign(P_a) sign(P_b) * 3^{w_a + w_b} / 2 * parity-match indicator,
// nonzero only when B matches supp(P_a) and S matches supp(P_b), which
// happens with frequency 3^{-w_a-w_b}. Its mean is half the process overlap
//   overlap(a, b) = tr(P_a Lambda(P_b)) / 2^n,
// so reported estimates are debiased by the factor 2. Estimates for all pairs
// share one round stream; median-of-means over K groups of B rounds gives the
// (epsilon, delta) guarantee with B = ceil(4 * 3^w / eps^2) at the largest
// pair weight w and K = ceil(2 ln(n_a n_b / delta)).
#pragma once

#include <string>
#include <vector>

#include "lindlearn/model.hpp"
#include "lindlearn/oracle.hpp"
#include "lindlearn/trajectories.hpp"

namespace lindlearn {

// One round: per-site measurement basis B, preparation axis S, preparation
// sign E, and measured outcome M.
struct ShadowRecord {
    std::vector<Axis> basis;      // B
    std::vector<Axis> prep_axis;  // S
    std::vector<int> prep_sign;   // E, +-1
    std::vector<int> outcome;     // M, +-1
};

// A channel that can complete a round: given prep and basis, sample outcomes.
class ShadowChannel {
  public:
    virtual ~ShadowChannel() = default;
    virtual int n_qubits() const = 0;
    // Fill rec.outcome from rec.{prep_axis, prep_sign, basis}, consuming rng.
    virtual void sample_outcomes(ShadowRecord& rec, Rng& rng) const = 0;
};

// Lambda = id. Sites stay independent, so outcomes sample from the closed-form
// single-site marginal p(M=+1) = (1 + E * [S==B]) / 2.
class IdentityChannel final : public ShadowChannel {
  public:
    explicit IdentityChannel(int n_qubits);
    int n_qubits() const override { return n_; }
    void sample_outcomes(ShadowRecord& rec, Rng& rng) const override;

  private:
    int n_;
};

// Per-site depolarizing: rho -> (1-p) rho + p I/2 independently on each site.
class DepolarizingChannel final : public ShadowChannel {
  public:
    DepolarizingChannel(int n_qubits, double p);
    int n_qubits() const override { return n_; }
    void sample_outcomes(ShadowRecord& rec, Rng& rng) const override;

  private:
    int n_;
    double p_;
};

// Exact Lindblad evolution for time t (the oracle reference must outlive the
// channel). Outcomes sample from the exact rotated density-matrix diagonal.
class OracleChannel final : public ShadowChannel {
  public:
    OracleChannel(const DenseOracle& oracle, double t, double dt_max);
    int n_qubits() const override;
    void sample_outcomes(ShadowRecord& rec, Rng& rng) const override;

  private:
    const DenseOracle& oracle_;
    double t_;
    double dt_;
};

// One stochastic trajectory of the chip noise model per round; outcomes sample
// from the final state vector. This is the measure-what-you-simulate backend.
class TrajectoryChannel final : public ShadowChannel {
  public:
    TrajectoryChannel(ChipModel model, double t, SimConfig cfg);
    int n_qubits() const override { return model_.n_qubits; }
    void sample_outcomes(ShadowRecord& rec, Rng& rng) const override;

  private:
    ChipModel model_;
    double t_;
    SimConfig cfg_;
};

// Draw one round: B, S uniform over `axes` per site, E uniform +-1, then the
// channel fills M.
ShadowRecord run_round(const ShadowChannel& channel, Rng& rng,
                       const std::vector<Axis>& axes = {Axis::X, Axis::Y, Axis::Z});

// The single-round pair estimator X described above. `n_axes` is the size of
// the axis set the round was drawn from (3 for the full protocol); restricted
// axis sets rescale the inverse sampling weights accordingly.
double estimator_value(const ShadowRecord& rec, const PauliString& pauli_a,
                       const PauliString& pauli_b, int n_axes = 3);

// Means of `k_groups` consecutive equal-size groups (any remainder is
// dropped), then the median of those means (even count: average of the middle
// two). Errors if values are fewer than k_groups or k_groups < 1.
double median_of_means(const std::vector<double>& values, int k_groups);

struct OverlapEstimate {
    std::string pauli_a;
    std::string pauli_b;
    double value = 0.0;    // debiased: 2 * median-of-means of X
    double epsilon = 0.0;
    double delta = 0.0;
    long long samples_used = 0;    // total rounds S = K * B (shared by all pairs)
    long long nonzero_count = 0;   // rounds where this pair's X was nonzero
};

struct ShadowOptions {
    int weight_cap = 4;  // refuse Pauli words heavier than this (variance guard)
    std::vector<Axis> axes = {Axis::X, Axis::Y, Axis::Z};
};

// Round counts for a target accuracy: rounds_per_group B, groups K, total S.
struct ShadowPlanSizes {
    long long rounds_per_group = 0;
    int groups = 0;
    long long total_rounds = 0;
};
ShadowPlanSizes shadow_plan_sizes(int max_weight_sum, double epsilon, double delta,
                                  std::size_t n_a, std::size_t n_b, int n_axes = 3);

// Estimate overlap(a, b) for every pair in paulis_a x paulis_b from one shared
// round stream, to +-epsilon with failure probability delta per pair.
std::vector<OverlapEstimate> estimate_overlaps(const ShadowChannel& channel,
                                               const std::vector<PauliString>& paulis_a,
                                               const std::vector<PauliString>& paulis_b,
                                               double epsilon, double delta, Rng& rng,
                                               const ShadowOptions& options = {});

// Columns: pa,pb,estimate,epsilon,delta,samples.
std::string overlaps_to_csv(const std::vector<OverlapEstimate>& estimates);

// Exact overlap tr(P_a Lambda_t(P_b)) / 2^n by evolving the P_b matrix under
// the (linear) Lindblad propagator. Ground truth for unbiasedness audits.
double reference_overlap(const DenseOracle& oracle, const PauliString& pauli_a,
                         const PauliString& pauli_b, double t, double dt_max);

}  // namespace lindlearn
