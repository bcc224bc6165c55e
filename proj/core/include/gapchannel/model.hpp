#ifndef GAPCHANNEL_MODEL_HPP
#define GAPCHANNEL_MODEL_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

// Physical conventions used throughout: hbar = 1, unit masses,
// dimensionless time. Site indices are 1-based in every user-facing
// interface; ancillas are labelled S (sender) and R (receiver).

namespace gapchannel {

enum class Boundary { open, periodic };

//! Spin chain in a transverse field with two ancilla spins attached.
//!
//! H = B sum_i sz_i + sum_i (Jx sx_i sx_{i+1} + Jy sy_i sy_{i+1} + Jz sz_i sz_{i+1})
//!     + B_a (sz_S + sz_R) + J_a (sx_S sx_{m_S} + sx_R sx_{m_R}),  open boundary.
struct SpinSystemConfig {
  int n_sites = 0;       //!< N
  double b_field = 0.0;  //!< B
  double j_x = 0.0;
  double j_y = 0.0;
  double j_z = 0.0;
  double b_ancilla = 0.0;  //!< B_a >= 0
  double j_ancilla = 0.0;  //!< J_a >= 0, weak
  int m_sender = 0;        //!< m_S, 1-based
  int m_receiver = 0;      //!< m_R, 1-based
  Boundary boundary = Boundary::open;
  //! Lifts the centre-placement restriction on m_S, m_R (normally both must
  //! lie strictly inside [N/4, 3N/4] to keep boundary effects away).
  bool allow_boundary_placement = false;
};

//! Ring of N harmonic oscillators plus two ancilla oscillators.
//!
//! H = 1/2 sum_j (p_j^2 + Omega^2 (q_j - q_{j+1})^2 + Omega0^2 q_j^2)
//!     + 1/2 (p_S^2 + w^2 q_S^2 + p_R^2 + w^2 q_R^2)
//!     + J_a (q_S q_{m_S} + q_R q_{m_R}),  with q_{N+1} = q_1.
struct HarmonicSystemConfig {
  int n_sites = 0;            //!< N
  double omega_coupling = 0.0;  //!< Omega > 0
  double omega_onsite = 0.0;    //!< Omega_0 >= 0 (the spectral gap)
  double omega_ancilla = 0.0;   //!< omega > 0
  double j_ancilla = 0.0;       //!< J_a
  int m_sender = 0;
  int m_receiver = 0;
  Boundary boundary = Boundary::periodic;
};

//! Throws std::invalid_argument on any violated config invariant.
void validate(const SpinSystemConfig& config);
void validate(const HarmonicSystemConfig& config);

//! Non-fatal modelling concerns (e.g. the weak-coupling assumption broken).
std::vector<std::string> config_warnings(const SpinSystemConfig& config);
std::vector<std::string> config_warnings(const HarmonicSystemConfig& config);

enum class PauliKind { x, y, z };

//! 2x2 matrix of a Pauli operator in the basis (down = 0, up = 1).
Eigen::Matrix2cd pauli_matrix(PauliKind kind);

struct LocalTerm {
  int site;  //!< 1..N chain, N+1 = S, N+2 = R
  PauliKind op;
  double coefficient;
};

struct BondTerm {
  int site_a;
  int site_b;
  PauliKind op_a;
  PauliKind op_b;
  double coefficient;
};

//! Full Hamiltonian of chain + ancillas as a list of one- and two-site terms.
//! Terms with zero coefficient are never emitted.
struct SpinTerms {
  int n_total = 0;  //!< N + 2 spins
  std::vector<LocalTerm> local;
  std::vector<BondTerm> bond;

  int sender_site() const { return n_total - 1; }    // label N+1
  int receiver_site() const { return n_total; }      // label N+2
  //! Number of connected components of the site/bond graph.
  int connected_components() const;
};

SpinTerms build_spin_terms(const SpinSystemConfig& config);

//! Chain-only Hamiltonian (no ancillas, n_total = N); used for ground states
//! and spectra of the bare chain.
SpinTerms build_chain_terms(const SpinSystemConfig& config);

//! Potential matrix V of H = 1/2 p^T p + 1/2 q^T V q for the coupled
//! harmonic system. Row/column ordering is (chain 1..N, S, R).
struct QuadraticForm {
  int n_chain = 0;
  Eigen::MatrixXd v;

  int dimension() const { return static_cast<int>(v.rows()); }
  int sender_index() const { return n_chain; }        // 0-based
  int receiver_index() const { return n_chain + 1; }  // 0-based
  //! Chain-only block of V (the uncoupled ring).
  Eigen::MatrixXd chain_block() const { return v.topLeftCorner(n_chain, n_chain); }
};

//! Builds V and rejects unstable (indefinite) Hamiltonians at construction.
QuadraticForm build_quadratic_form(const HarmonicSystemConfig& config);

//! Infinite-chain dispersion w_k = sqrt(4 Omega^2 sin^2(k/2) + Omega_0^2).
double dispersion(double k, double omega_coupling, double omega_onsite);
double dispersion(double k, const HarmonicSystemConfig& config);

}  // namespace gapchannel

#endif
