// Dense exact evolution of small general Lindblad models.
//
// Serves three roles: ground truth for validating the stochastic trajectory
// engine, the derivative feed for recovery tests, and the noiseless backend for
// estimation-methodology sweeps. Dimension is capped (default n <= 6, 64x64
// density matrices) because cost grows as 8^n.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lindlearn/model.hpp"

namespace lindlearn {

// Smallest eigenvalue of a Hermitian dissipation matrix (>= 0 means physical).
double dmat_min_eigenvalue(const DMatrix& d);

class DenseOracle {
  public:
    static constexpr int MAX_QUBITS = 6;

    explicit DenseOracle(GeneralModel model);

    int dim() const { return dim_; }
    const GeneralModel& model() const { return model_; }

    // Density matrix of a product state (mixed sites contribute I/2 exactly).
    Eigen::MatrixXcd product_density(const ProductState& rho) const;

    // Lindblad generator L(rho).
    Eigen::MatrixXcd rhs(const Eigen::MatrixXcd& rho) const;

    // Fixed-step RK4 propagation by time t (us); dt_max bounds the step size.
    Eigen::MatrixXcd evolve(Eigen::MatrixXcd rho, double t, double dt_max) const;

    double expectation(const Eigen::MatrixXcd& rho, const PauliString& obs) const;

    // d/dt tr(rho_t obs) at t = 0: tr(L(rho) obs).
    double derivative(const ProductState& rho, const PauliString& obs) const;

    // tr(rho_t obs) on an ascending time grid (one pass, states reused).
    std::vector<double> trace_curve(const ProductState& rho, const PauliString& obs,
                                    const std::vector<double>& times, double dt_max) const;

  private:
    Eigen::MatrixXcd dense_pauli(const PauliString& p) const;

    GeneralModel model_;
    int dim_ = 0;
    Eigen::MatrixXcd ham_;
    struct SiteChannel {
        std::vector<std::pair<double, Eigen::MatrixXcd>> jumps;  // (rate, L_k)
        Eigen::MatrixXcd kernel;  // sum_munu D_munu sigma_nu sigma_mu
    };
    std::vector<SiteChannel> channels_;
};

}  // namespace lindlearn
