#ifndef GAPCHANNEL_MPS_HPP
#define GAPCHANNEL_MPS_HPP

#include <array>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "gapchannel/model.hpp"
#include "gapchannel/trace.hpp"

// TEBD engine: mixed-canonical matrix product states with second-order
// Trotter gate schedules over the extended chain (ancillas inserted as extra
// sites, crossing chain bonds routed with one swap per substep).

namespace gapchannel::mps {

struct TruncationPolicy {
  int chi_max = 10;          //!< paper default bond dimension
  double rel_cutoff = 1e-10; //!< drop singular values below rel_cutoff * s_max
};

//! One rank-3 tensor per site, physical dimension 2 (0 = down, 1 = up),
//! stored as a pair of (chi_left x chi_right) matrices. Mixed-canonical:
//! sites left of `center` are left isometries, right of it right isometries.
class MatrixProductState {
 public:
  MatrixProductState() = default;
  static MatrixProductState product_state(const std::vector<Eigen::Vector2cd>& locals);

  int length() const { return static_cast<int>(sites_.size()); }
  int center() const { return center_; }
  //! Bond between sites `bond` and `bond`+1.
  int bond_dimension(int bond) const;
  int max_bond_dimension() const;

  const std::array<Eigen::MatrixXcd, 2>& site(int i) const { return sites_[i]; }

  double norm() const;
  void normalize();
  void move_center_to(int i);

  //! Applies a two-site gate on (i, i+1); returns the discarded weight.
  //! `toward_right` selects where the orthogonality center lands.
  double apply_two_site_gate(int i, const Eigen::Matrix4cd& gate,
                             const TruncationPolicy& policy, bool toward_right);
  void apply_single_site_gate(int i, const Eigen::Matrix2cd& gate);

  //! <O_i> (moves the center to i).
  std::complex<double> expectation_local(int i, const Eigen::Matrix2cd& op);
  //! <A_i B_j> for i < j (moves the center to i).
  std::complex<double> expectation_pair(int i, int j, const Eigen::Matrix2cd& op_i,
                                        const Eigen::Matrix2cd& op_j);
  //! Reduced density matrix of sites i < j; basis index 2 s_i + s_j.
  Eigen::Matrix4cd reduced_density_pair(int i, int j);

  //! Max deviation from the left/right isometry conditions.
  double canonical_defect() const;

  //! Inserts a product-state site at `position`, threading the bond through.
  void insert_site(int position, const Eigen::Vector2cd& local);

  //! Checkpoint plumbing: overwrite one site tensor / the center index.
  void restore_site(int i, std::array<Eigen::MatrixXcd, 2> tensor);
  void restore_center(int i);

 private:
  std::vector<std::array<Eigen::MatrixXcd, 2>> sites_;
  int center_ = 0;

  void shift_center_right();
  void shift_center_left();
};

//! Extended 1-D ordering of chain sites and ancillas. Site labels follow
//! SpinTerms: 1..N chain, N+1 = S, N+2 = R. The canonical interior layout is
//! [1..m_S, S, m_S+1 .. m_R-1, R, m_R..N]; the ancilla couplings are then
//! nearest-neighbour and each crossing chain bond costs one swap per Trotter
//! substep. m_S = 1 places S at the head (no crossing bond), m_R = N places
//! R at the tail.
struct ExtendedLayout {
  int n_chain = 0;
  std::vector<int> order;     //!< extended position -> site label
  std::vector<int> position;  //!< site label (1-based) -> extended position

  int length() const { return static_cast<int>(order.size()); }
  int sender_position() const { return position[n_chain + 1]; }
  int receiver_position() const { return position[n_chain + 2]; }
};

ExtendedLayout embed_ancillas(const SpinSystemConfig& config);

//! One entry of a Trotter half-step schedule, acting on extended positions.
struct GateOp {
  int position = 0;      //!< leftmost site of the pair (or the site itself)
  bool is_swap = false;
  bool single_site = false;
  Eigen::Matrix4cd gate; //!< two-site gates, basis index 2 s_left + s_right
  Eigen::Matrix2cd local;
};

//! Second-order (palindromic) plan: one full step applies `forward` and then
//! the same ops reversed, each gate carrying exp(-i h dt/2). Every
//! Hamiltonian term appears exactly once per half step.
struct TrotterPlan {
  double dt = 0.0;
  int order = 2;
  bool imaginary_time = false;
  TruncationPolicy truncation;
  std::vector<GateOp> forward;
};

//! Compiles the term list onto the layout. `terms` may be chain-only (layout
//! then has no ancillas) or the full Hamiltonian.
TrotterPlan make_trotter_plan(const SpinTerms& terms, const ExtendedLayout& layout,
                              double dt, const TruncationPolicy& truncation,
                              bool imaginary_time = false);

//! Default real-time step 0.05 / max|coupling|.
double default_time_step(const SpinSystemConfig& config);

//! Applies one full second-order step; returns the discarded weight.
double apply_trotter_step(MatrixProductState& psi, const TrotterPlan& plan);

struct ItebdOptions {
  TruncationPolicy truncation{10, 1e-10};
  double dt_initial = 0.1;
  int max_halvings = 10;          //!< step-size cascade length
  double energy_tol = 1e-10;      //!< stationarity: |dE| per sweep
  double cascade_tol = 1e-7;      //!< stop refining dt once levels agree
  int max_sweeps_per_level = 20000;
};

struct ItebdResult {
  MatrixProductState state;  //!< chain-only ground state
  double energy = 0.0;
  int sweeps = 0;
};

//! Imaginary-time TEBD ground-state search for the bare chain, with stepwise
//! renormalization and a dt-halving cascade. Throws on non-convergence.
ItebdResult ground_state_itebd(const SpinSystemConfig& config,
                               const ItebdOptions& options = {});

//! Chain ground state with |up>_S |down>_R ancillas inserted per layout.
MatrixProductState initial_transfer_state(const SpinSystemConfig& config,
                                          const ExtendedLayout& layout,
                                          const ItebdOptions& options = {});

struct TebdRunOptions {
  bool record_rdm = true;
  bool record_energy = true;
};

//! Real-time TEBD of the full system; records the four ancilla probabilities,
//! energy and accumulated truncation weight every dt_record. When
//! `final_state` is given the evolved MPS is moved out (for checkpointing).
TransferTrace tebd_run(MatrixProductState initial, const SpinSystemConfig& config,
                       const TrotterPlan& plan, double t_final, double dt_record,
                       const TebdRunOptions& options = {},
                       MatrixProductState* final_state = nullptr);

//! Checkpoint file for resuming long runs. Binary layout: the magic bytes
//! "GAPCHMPS1\n", then int64 site count and int64 center index, then per
//! site int64 rows, int64 cols followed by the two physical blocks (s = 0
//! then s = 1) as row-major (real, imag) interleaved doubles. Little-endian
//! host order; writes are whole-file atomic.
void save_checkpoint(const MatrixProductState& psi, const std::string& path);
MatrixProductState load_checkpoint(const std::string& path);

struct StabilityReport {
  std::vector<std::pair<std::string, double>> channel_deviation;
  double max_deviation = 0.0;
  bool pass = false;
};

//! Max per-channel |difference| of the probability channels of two runs on
//! the same record grid (the paper's chi / dt stability test).
StabilityReport stability_check(const TransferTrace& a, const TransferTrace& b,
                                double tolerance = 1e-2);

}  // namespace gapchannel::mps

#endif
