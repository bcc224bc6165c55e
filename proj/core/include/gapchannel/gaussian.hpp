#ifndef GAPCHANNEL_GAUSSIAN_HPP
#define GAPCHANNEL_GAUSSIAN_HPP

#include <Eigen/Dense>

#include "gapchannel/model.hpp"
#include "gapchannel/trace.hpp"

// First and second moments of the oscillator modes evolve linearly and in
// closed form under any quadratic Hamiltonian, no matter whether the state is
// Gaussian; that closure is what this backend integrates exactly. The
// sender's one-phonon Fock initial condition is therefore handled without
// approximation.

namespace gapchannel::gaussian {

//! Means and symmetrized second moments (about the mean) of M modes in the
//! phase-space ordering (q_1..q_M, p_1..p_M). Site ordering follows
//! QuadraticForm: chain 1..N, then S, then R.
struct SecondMomentState {
  int n_modes = 0;
  Eigen::VectorXd mean;      // 2M
  Eigen::MatrixXd moments;   // 2M x 2M, symmetric

  double q2(int mode) const { return moments(mode, mode); }
  double p2(int mode) const { return moments(n_modes + mode, n_modes + mode); }
};

//! Max asymmetry |sigma - sigma^T| of the moment matrix.
double symmetry_defect(const SecondMomentState& state);

//! Smallest eigenvalue of sigma + (i/2) J; >= -tol for Gaussian-physical
//! covariances (uncertainty relation).
double uncertainty_defect(const SecondMomentState& state);

//! Ground-state moments of a positive definite potential block:
//! <q q^T> = V^{-1/2}/2, <p p^T> = V^{+1/2}/2, symmetrized <q p> = 0.
//! A gapless chain (zero mode) is rejected: its position variance diverges.
SecondMomentState ground_moments(const Eigen::MatrixXd& v_block);

//! Ground moments of the chain block of `form` (requires omega_onsite > 0).
SecondMomentState chain_ground_moments(const QuadraticForm& form);

//! Chain in its ground state, sender ancilla with occupation 1, receiver in
//! vacuum; zero means, zero cross correlations.
SecondMomentState initial_transfer_state(const HarmonicSystemConfig& config);

//! Closed-form phase-space flow S(t) of H = 1/2 p^T p + 1/2 q^T V q.
struct SymplecticPropagator {
  double time = 0.0;
  Eigen::MatrixXd s;  // 2M x 2M
};

SymplecticPropagator propagator(const QuadraticForm& form, double t);

//! Max-norm of S^T J S - J.
double symplectic_defect(const SymplecticPropagator& prop);

//! Evolves means and moments from t = 0 by t: sigma -> S sigma S^T.
SecondMomentState propagate(const SecondMomentState& state, const QuadraticForm& form,
                            double t);

//! n_j = (w <q_j^2> + <p_j^2>/w - 1)/2 about the mean; with include_means the
//! coherent (mean-field) part w mean_q^2/2 + mean_p^2/(2w) is added.
double occupation(const SecondMomentState& state, int mode, double frequency,
                  bool include_means = false);

//! Finite-size revival estimate N/(2 Omega): the time a wave packet needs to
//! wrap halfway around the ring.
double revival_time(const HarmonicSystemConfig& config);

//! Full transfer experiment: trace of n_S, n_R, total chain-mode excitation
//! and <H> on the grid 0, dt_record, ..., t_final. Exact in t (normal-mode
//! evolution, no time stepping).
TransferTrace transfer_run(const HarmonicSystemConfig& config, double t_final,
                           double dt_record);

}  // namespace gapchannel::gaussian

#endif
