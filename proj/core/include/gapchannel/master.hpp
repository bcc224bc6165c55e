#ifndef GAPCHANNEL_MASTER_HPP
#define GAPCHANNEL_MASTER_HPP

#include <complex>
#include <utility>
#include <vector>

#include "gapchannel/model.hpp"
#include "gapchannel/trace.hpp"

// Weak-coupling master-equation treatment of the two ancilla oscillators:
// asymptotic chain-correlation integrals evaluated through the
// delta / principal-value split, the coefficients x0, x1, y0, y1 built from
// them, and the closed-form occupation solution they imply.

namespace gapchannel::master {

//! Asymptotic coefficients of the traced master equation. Off resonance
//! (ancilla frequency below the chain band) x0 = x1 = 0 exactly; on
//! resonance x0 > 0 and x0 > |x1|. y0 enters only as a common level shift
//! and is exposed for completeness.
struct MasterCoefficients {
  double x0 = 0.0;
  double x1 = 0.0;
  double y0 = 0.0;
  double y1 = 0.0;
  bool resonant = false;
};

//! Chain/ancilla parameters the correlation integrals depend on. The site
//! indices enter only through delta = |m_S - m_R|.
struct CorrelationKernel {
  int delta = 0;
  double omega_coupling = 0.0;  // Omega
  double omega_onsite = 0.0;    // Omega_0
  double omega_ancilla = 0.0;   // omega

  static CorrelationKernel from_config(const HarmonicSystemConfig& config);
};

//! Upper edge of the chain band, sqrt(4 Omega^2 + Omega_0^2).
double band_top(const CorrelationKernel& kernel);

//! Vacuum correlation <q_j(tau) q_l(0)> of the infinite chain (delta =
//! |j - l|): (1/2pi) int_0^pi dk cos(delta k) exp(-i w_k tau) / w_k by
//! adaptive quadrature. The small-k near-singularity at small Omega_0 is
//! removed by an asinh endpoint substitution; Omega_0 = 0 itself makes the
//! integral log-divergent and is reported as a failure.
std::complex<double> correlation_q(int delta, double tau, double omega_coupling,
                                   double omega_onsite, double abs_tol = 1e-10);

//! Delta part from the dispersion root k* (in closed form), principal value
//! by symmetric excision around k* with Richardson extrapolation. Frequencies
//! within 1e-3 of a band edge are rejected (van Hove divergence).
MasterCoefficients asymptotic_coefficients(const CorrelationKernel& kernel);

//! n_S, n_R at time t: (A+ cosh(2 J^2 x1 t) +/- A- cos(2 J^2 y1 t)) e^{-2 J^2 x0 t},
//! A+- = (n_S0 +/- n_R0)/2, the sender taking '+'.
std::pair<double, double> occupations_closed_form(const MasterCoefficients& c,
                                                  double n_s0, double n_r0,
                                                  double j_ancilla, double t);

//! 2 J_a^2 |y1|; requires off-resonant coefficients.
double oscillation_frequency(const MasterCoefficients& c, double j_ancilla);

struct OccupationTraces {
  std::vector<double> times;
  std::vector<double> n_s;
  std::vector<double> n_r;
};

//! Integrates the 2x2 ancilla second-moment closure <a_j^dag a_l> of the
//! traced master equation with an adaptive embedded Runge-Kutta pair.
//! Exists to certify occupations_closed_form (agreement to 1e-8).
OccupationTraces integrate_master_numerically(const MasterCoefficients& c,
                                              double n_s0, double n_r0,
                                              double j_ancilla,
                                              const std::vector<double>& t_grid);

//! Closed-form solution sampled on a record grid, as a standard trace.
TransferTrace solve_trace(const HarmonicSystemConfig& config, double t_final,
                          double dt_record);

}  // namespace gapchannel::master

#endif
