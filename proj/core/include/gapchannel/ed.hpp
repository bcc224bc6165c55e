#ifndef GAPCHANNEL_ED_HPP
#define GAPCHANNEL_ED_HPP

#include <array>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "gapchannel/model.hpp"
#include "gapchannel/trace.hpp"

// Exact-diagonalization backend for small spin systems (<= 14 spins total).
// Basis convention: amplitude index b encodes site with label L (1-based) in
// bit L-1; bit value 1 means spin up. With N chain sites the sender S is bit
// N and the receiver R is bit N+1.

namespace gapchannel::ed {

constexpr int kMaxSpins = 14;

struct DenseState {
  int n_spins = 0;
  Eigen::VectorXcd amplitudes;

  double norm() const { return amplitudes.norm(); }
  static DenseState product_state(int n_spins, unsigned long long bits);
};

struct SpectrumSummary {
  double ground_energy = 0.0;
  double gap = 0.0;  //!< levels[1] - levels[0]
  std::vector<double> lowest_levels;
  int ground_degeneracy = 1;
};

//! Matrix-free application of a SpinTerms Hamiltonian.
class HamiltonianApplier {
 public:
  explicit HamiltonianApplier(const SpinTerms& terms);

  int n_spins() const { return n_spins_; }
  long long dimension() const { return 1LL << n_spins_; }
  //! One-norm style bound on the spectrum, sum of |coefficients|.
  double norm_bound() const { return norm_bound_; }

  void apply(const Eigen::VectorXcd& in, Eigen::VectorXcd& out) const;
  Eigen::VectorXcd apply(const Eigen::VectorXcd& in) const;

 private:
  struct FlipTerm {
    unsigned long long mask;
    int shift_a, shift_b;  // shift_b < 0 for single-site terms
    std::array<std::complex<double>, 4> phase;
  };
  int n_spins_ = 0;
  double norm_bound_ = 0.0;
  Eigen::VectorXd diagonal_;
  std::vector<FlipTerm> flips_;
};

//! Lowest eigenpairs by deflated Lanczos with full reorthogonalization
//! (dense solve below 512 states). Deterministic starting vectors.
//! Throws std::runtime_error on non-convergence.
std::vector<std::pair<double, Eigen::VectorXcd>> lowest_eigenpairs(
    const HamiltonianApplier& h, int n_pairs, double tol = 1e-12);

struct GroundState {
  DenseState state;
  double energy = 0.0;
  int degeneracy = 1;  //!< reported, never silently broken
};

//! Ground state of the chain-only Hamiltonian (no ancillas). In a degenerate
//! ground space the returned vector maximizes overlap with the all-down
//! product state (documented convention).
GroundState ground_state_chain(const SpinSystemConfig& config);

//! Lowest n_levels of the chain-only Hamiltonian; gap = levels[1] - levels[0].
SpectrumSummary chain_spectrum(const SpinSystemConfig& config, int n_levels);

//! |Psi(0)> = |up_S, down_R, 0_chain>.
DenseState initial_transfer_state(const SpinSystemConfig& config);

struct EvolveOptions {
  double krylov_tol = 1e-12;  //!< per-step accuracy of the Lanczos exponential
  int max_krylov_dim = 96;
  double max_step = 1.0;
  bool record_rdm = true;  //!< two-ancilla reduced density matrix channels
  bool record_moments = true;
};

//! Adaptive Lanczos propagator: advances a state by exp(-i H dt).
class KrylovPropagator {
 public:
  KrylovPropagator(const HamiltonianApplier& h, double tol = 1e-12,
                   int max_dim = 96);
  //! In-place step; returns the norm deviation before renormalization.
  double step(Eigen::VectorXcd& psi, double dt);

 private:
  const HamiltonianApplier& h_;
  double tol_;
  int max_dim_;
};

//! Schroedinger evolution under the full Hamiltonian (chain + ancillas),
//! sampling the four ancilla probabilities, energy moments and the
//! two-ancilla reduced density matrix every dt_record.
TransferTrace evolve_exact(const DenseState& initial, const SpinSystemConfig& config,
                           double t_final, double dt_record,
                           const EvolveOptions& options = {});

//! <H^n> for n = 1..max_n (max_n <= 4), matrix-free.
std::vector<double> hamiltonian_moments(const DenseState& state,
                                        const SpinSystemConfig& config, int max_n);
std::vector<double> hamiltonian_moments(const DenseState& state,
                                        const HamiltonianApplier& h, int max_n);

//! Reduced density matrix of two sites (1-based labels, a != b). Basis index
//! within the 4x4 matrix is 2*s_a + s_b with s = 1 meaning up.
Eigen::Matrix4cd reduced_density_two_sites(const DenseState& state, int site_a,
                                           int site_b);

//! P(down_S down_R), P(up_S down_R), P(down_S up_R), P(up_S up_R).
std::array<double, 4> ancilla_probabilities(const DenseState& state, int n_chain);

}  // namespace gapchannel::ed

#endif
