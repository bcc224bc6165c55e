#ifndef GAPCHANNEL_ANALYSIS_HPP
#define GAPCHANNEL_ANALYSIS_HPP

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gapchannel/ed.hpp"
#include "gapchannel/model.hpp"
#include "gapchannel/mps.hpp"
#include "gapchannel/trace.hpp"

namespace gapchannel::analysis {

enum class Regime { oscillatory, damped };

//! Entanglement transferred per excitation in the single-excitation sector:
//! E_N ~ log2(p + 1) for the transfer probability p.
double log_negativity_approx(double p_transfer);

//! log2 of the trace norm of the partial transpose of a two-qubit density
//! matrix (basis index 2 s_A + s_B). Validates Hermiticity, unit trace and
//! positivity to 1e-10.
double log_negativity_exact(const Eigen::Matrix4cd& rho);

struct TransferMetrics {
  double max_received = 0.0;  //!< peak of the received channel
  double t_peak = 0.0;
  double fitted_frequency = 0.0;   //!< 2 J_a^2 y1 equivalent
  double fitted_decay_rate = 0.0;  //!< 2 J_a^2 x0 equivalent
  double fitted_cosh_rate = 0.0;   //!< 2 J_a^2 x1 equivalent
  double a_plus = 0.0;
  double a_minus = 0.0;
  double fit_residual = 0.0;  //!< rms of the fit residual
  Regime regime = Regime::oscillatory;
};

//! Least-squares fit of (A+ cosh(c t) - A- cos(nu t)) e^{-g t} to a received
//! occupation/probability series. Throws if the window covers neither two
//! oscillation periods nor three decay times.
TransferMetrics fit_series(const std::vector<double>& times,
                           const std::vector<double>& received);

//! fit_series on the received channel of a trace (n_R, else P_du).
TransferMetrics fit_transfer(const TransferTrace& trace);

struct GapEstimate {
  double threshold_parameter = 0.0;
  std::pair<double, double> bracket{0.0, 0.0};
  std::vector<std::pair<double, Regime>> samples;
};

struct SweepOptions {
  double resolution = 0.01;
  int initial_points = 2;  //!< coarse scan size (endpoints included), run concurrently
  double t_final = -1.0;   //!< spin backends: required; harmonic: auto when < 0
  double dt_record = -1.0;
  double t_final_cap = 2e6;  //!< harmonic auto-window cap
  mps::TruncationPolicy truncation{10, 1e-10};  //!< spin MPS backend
  double trotter_dt = -1.0;                     //!< < 0: default 0.05/J_max
  //! Spin backends only: best transfer below this marks the damped side (the
  //! probe's operational criterion; the window must cover the slowest
  //! expected oscillation in the range).
  double completeness_threshold = 0.9;
};

//! Bisects the ancilla frequency omega over [lo, hi] on the regime classifier
//! of gaussian runs (run windows sized from the master coefficients); the
//! threshold estimates the chain gap Omega_0.
GapEstimate gap_probe_sweep_harmonic(const HarmonicSystemConfig& base, double lo,
                                     double hi, const SweepOptions& options);

enum class SpinBackend { ed, mps };

//! Bisects the ancilla splitting B_a; the threshold estimates half the chain
//! gap (the ancilla flip releases 2 B_a).
GapEstimate gap_probe_sweep_spin(const SpinSystemConfig& base, SpinBackend backend,
                                 double lo, double hi, const SweepOptions& options);

//! Entanglement-transfer protocol on the ED backend: a control qubit C starts
//! maximally entangled with the sender; the trace records the four ancilla
//! probabilities, E_N of the (R, C) reduced state and the log2(P+1)
//! approximation.
TransferTrace entanglement_transfer_run(const SpinSystemConfig& config,
                                        double t_final, double dt_record,
                                        const ed::EvolveOptions& options = {});

}  // namespace gapchannel::analysis

#endif
