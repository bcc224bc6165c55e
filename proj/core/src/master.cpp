#include "gapchannel/master.hpp"

#include <cmath>
#include <stdexcept>

#include "gapchannel/config_file.hpp"
#include "gapchannel/quadrature.hpp"

namespace gapchannel::master {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kEdgeMargin = 1e-3;  // van Hove exclusion zone around band edges

double dispersion_sq(double k, double omega_coupling, double omega_onsite) {
  const double s = std::sin(0.5 * k);
  return 4.0 * omega_coupling * omega_coupling * s * s + omega_onsite * omega_onsite;
}

void validate(const CorrelationKernel& kernel) {
  if (kernel.delta < 0)
    throw std::invalid_argument("correlation kernel: delta must be >= 0");
  if (kernel.omega_coupling <= 0.0)
    throw std::invalid_argument("correlation kernel: Omega must be > 0");
  if (kernel.omega_onsite < 0.0)
    throw std::invalid_argument("correlation kernel: Omega_0 must be >= 0");
  if (kernel.omega_ancilla <= 0.0)
    throw std::invalid_argument("correlation kernel: omega must be > 0");
}

}  // namespace

CorrelationKernel CorrelationKernel::from_config(const HarmonicSystemConfig& config) {
  CorrelationKernel kernel;
  kernel.delta = std::abs(config.m_sender - config.m_receiver);
  kernel.omega_coupling = config.omega_coupling;
  kernel.omega_onsite = config.omega_onsite;
  kernel.omega_ancilla = config.omega_ancilla;
  return kernel;
}

double band_top(const CorrelationKernel& kernel) {
  return std::sqrt(4.0 * kernel.omega_coupling * kernel.omega_coupling +
                   kernel.omega_onsite * kernel.omega_onsite);
}

std::complex<double> correlation_q(int delta, double tau, double omega_coupling,
                                   double omega_onsite, double abs_tol) {
  if (delta < 0) throw std::invalid_argument("correlation_q: delta must be >= 0");
  if (omega_coupling <= 0.0)
    throw std::invalid_argument("correlation_q: Omega must be > 0");
  if (omega_onsite < 0.0)
    throw std::invalid_argument("correlation_q: Omega_0 must be >= 0");
  if (omega_onsite == 0.0)
    throw std::runtime_error(
        "correlation_q: quadrature failure, the k-integral is log-divergent at "
        "Omega_0 = 0 (zero mode)");

  auto integrand = [&](double k) {
    const double w = std::sqrt(dispersion_sq(k, omega_coupling, omega_onsite));
    return std::polar(std::cos(delta * k) / w, -w * tau);
  };

  QuadratureControl control;
  control.abs_tol = 0.5 * abs_tol;

  // Near-gapless chains peak sharply at k = 0; substituting
  // k = (Omega_0/Omega) sinh(u) flattens 1/w_k there.
  double split = 0.0;
  std::complex<double> head(0.0, 0.0);
  if (omega_onsite < 0.1 * omega_coupling) {
    split = std::min(1.0, 0.5 * kPi);
    const double ratio = omega_onsite / omega_coupling;
    const double u_max = std::asinh(split / ratio);
    head = integrate_complex(
        [&](double u) {
          const double k = ratio * std::sinh(u);
          return integrand(k) * ratio * std::cosh(u);
        },
        0.0, u_max, control);
  }
  const std::complex<double> tail = integrate_complex(integrand, split, kPi, control);
  return (head + tail) / (2.0 * kPi);
}

namespace {

//! P int_0^pi 2 cos(delta k)/(w_k^2 - w^2) dk. The combined +/- correlation
//! integrand has no 1/w_k factor, so k = 0 is regular even at Omega_0 = 0;
//! the only feature is the simple pole at k* in the resonant case.
double combined_y_integral(int delta, double k_star, const CorrelationKernel& kernel) {
  const double w2 = kernel.omega_ancilla * kernel.omega_ancilla;
  auto integrand = [&](double k) {
    return 2.0 * std::cos(delta * k) /
           (dispersion_sq(k, kernel.omega_coupling, kernel.omega_onsite) - w2);
  };
  QuadratureControl control;
  control.abs_tol = 1e-11;

  if (k_star < 0.0) return integrate(integrand, 0.0, kPi, control);

  // Symmetric excision of width h around the pole; the excised piece expands
  // in odd powers of h, so fit A + c1 h + c3 h^3 + ... through the h levels
  // and read off A. The base width must resolve the cos(delta k) oscillation
  // of the numerator, otherwise the high-order coefficients blow up.
  const double h0 =
      std::min(0.25 * std::min(k_star, kPi - k_star), 0.25 / std::max(1, delta));
  constexpr int kLevels = 5;
  Eigen::VectorXd values(kLevels);
  Eigen::MatrixXd vandermonde(kLevels, kLevels);
  for (int level = 0; level < kLevels; ++level) {
    const double h = h0 / (1 << level);
    values[level] = integrate(integrand, 0.0, k_star - h, control) +
                    integrate(integrand, k_star + h, kPi, control);
    double power = 1.0;
    for (int col = 0; col < kLevels; ++col) {
      vandermonde(level, col) = power;
      power *= (col == 0) ? h : h * h;  // exponents 0, 1, 3, 5, 7
    }
  }
  const Eigen::VectorXd fit = vandermonde.fullPivLu().solve(values);
  return fit[0];
}

}  // namespace

MasterCoefficients asymptotic_coefficients(const CorrelationKernel& kernel) {
  validate(kernel);
  const double w = kernel.omega_ancilla;
  const double lower = kernel.omega_onsite;
  const double upper = band_top(kernel);
  if (w >= lower - kEdgeMargin && w <= lower + kEdgeMargin)
    throw std::invalid_argument(
        "van Hove divergence: omega is within 1e-3 of the lower band edge; "
        "offset omega");
  if (w >= upper - kEdgeMargin && w <= upper + kEdgeMargin)
    throw std::invalid_argument(
        "van Hove divergence: omega is within 1e-3 of the upper band edge; "
        "offset omega");

  MasterCoefficients c;
  c.resonant = w > lower && w < upper;

  double k_star = -1.0;
  if (c.resonant) {
    const double oc = kernel.omega_coupling;
    const double arg = (w * w - lower * lower) / (4.0 * oc * oc);
    k_star = 2.0 * std::asin(std::sqrt(arg));
    // Re C+ = pi f(k*)/|w'(k*)| with f = cos(delta k)/(2 pi w_k); group
    // velocity w'(k) = Omega^2 sin(k)/w_k.
    const double group_velocity = oc * oc * std::sin(k_star) / w;
    c.x0 = 1.0 / (4.0 * w * w * group_velocity);
    c.x1 = std::cos(kernel.delta * k_star) * c.x0;
  }

  c.y0 = -combined_y_integral(0, k_star, kernel) / (4.0 * kPi * w);
  c.y1 = -combined_y_integral(kernel.delta, k_star, kernel) / (4.0 * kPi * w);
  return c;
}

std::pair<double, double> occupations_closed_form(const MasterCoefficients& c,
                                                  double n_s0, double n_r0,
                                                  double j_ancilla, double t) {
  const double j2 = j_ancilla * j_ancilla;
  const double a_plus = 0.5 * (n_s0 + n_r0);
  const double a_minus = 0.5 * (n_s0 - n_r0);
  // cosh(2J^2 x1 t) e^{-2J^2 x0 t} without overflow: x0 >= |x1| on resonance.
  const double g = 2.0 * j2 * std::abs(c.x1) * t;
  const double d = 2.0 * j2 * c.x0 * t;
  const double envelope = 0.5 * (std::exp(g - d) + std::exp(-g - d));
  const double oscillation = a_minus * std::cos(2.0 * j2 * c.y1 * t) * std::exp(-d);
  const double common = a_plus * envelope;
  return {common + oscillation, common - oscillation};
}

double oscillation_frequency(const MasterCoefficients& c, double j_ancilla) {
  if (c.resonant)
    throw std::invalid_argument(
        "oscillation_frequency: resonant coefficients have no oscillatory "
        "interpretation");
  return 2.0 * j_ancilla * j_ancilla * std::abs(c.y1);
}

namespace {

using Matrix2cd = Eigen::Matrix2cd;

//! dN/dt = i J^2 [N, C_Y] - J^2 (N C_X + C_X N) with N = <a_j^dag a_l>.
Matrix2cd closure_rhs(const Matrix2cd& n, const Matrix2cd& cx, const Matrix2cd& cy,
                      double j2) {
  const std::complex<double> i(0.0, 1.0);
  return i * j2 * (n * cy - cy * n) - j2 * (n * cx + cx * n);
}

}  // namespace

OccupationTraces integrate_master_numerically(const MasterCoefficients& c,
                                              double n_s0, double n_r0,
                                              double j_ancilla,
                                              const std::vector<double>& t_grid) {
  Matrix2cd cx, cy;
  cx << c.x0, c.x1, c.x1, c.x0;
  cy << c.y0, c.y1, c.y1, c.y0;
  const double j2 = j_ancilla * j_ancilla;

  Matrix2cd n = Matrix2cd::Zero();
  n(0, 0) = n_s0;
  n(1, 1) = n_r0;

  OccupationTraces out;
  double t = 0.0;
  // Bogacki-Shampine 3(2) embedded pair with PI step control.
  double dt = 1.0;
  const double tol = 1e-12;

  for (double t_target : t_grid) {
    if (t_target < t)
      throw std::invalid_argument("integrate_master_numerically: t_grid not sorted");
    while (t < t_target) {
      if (dt < 1e-12 * std::max(1.0, t_target))
        throw std::runtime_error("integrate_master_numerically: stiff-integration failure");
      const double h = std::min(dt, t_target - t);
      const Matrix2cd k1 = closure_rhs(n, cx, cy, j2);
      const Matrix2cd k2 = closure_rhs(n + 0.5 * h * k1, cx, cy, j2);
      const Matrix2cd k3 = closure_rhs(n + 0.75 * h * k2, cx, cy, j2);
      const Matrix2cd next =
          n + h * (2.0 / 9.0 * k1 + 1.0 / 3.0 * k2 + 4.0 / 9.0 * k3);
      const Matrix2cd k4 = closure_rhs(next, cx, cy, j2);
      const Matrix2cd embedded =
          n + h * (7.0 / 24.0 * k1 + 0.25 * k2 + 1.0 / 3.0 * k3 + 0.125 * k4);
      const double err = (next - embedded).cwiseAbs().maxCoeff();
      const double scale = tol * std::max(1.0, n.cwiseAbs().maxCoeff());
      if (err <= scale) {
        n = next;
        t += h;
      }
      const double grow = err > 0.0 ? 0.9 * std::cbrt(scale / err) : 2.0;
      dt = h * std::min(2.0, std::max(0.2, grow));
    }
    out.times.push_back(t_target);
    out.n_s.push_back(n(0, 0).real());
    out.n_r.push_back(n(1, 1).real());
  }
  return out;
}

TransferTrace solve_trace(const HarmonicSystemConfig& config, double t_final,
                          double dt_record) {
  gapchannel::validate(config);
  if (t_final < 0.0) throw std::invalid_argument("solve_trace: negative t_final");
  if (t_final > 0.0 && dt_record <= 0.0)
    throw std::invalid_argument("solve_trace: dt_record must be positive");

  MasterCoefficients coeffs;
  if (config.j_ancilla != 0.0)
    coeffs = asymptotic_coefficients(CorrelationKernel::from_config(config));

  TransferTrace trace;
  trace.backend = "master";
  trace.config = config_snapshot(config);
  trace.set_config("t_final", t_final);
  trace.set_config("dt_record", dt_record);
  trace.set_config("x0", coeffs.x0);
  trace.set_config("x1", coeffs.x1);
  trace.set_config("y0", coeffs.y0);
  trace.set_config("y1", coeffs.y1);
  trace.set_config("resonant", coeffs.resonant ? "1" : "0");
  trace.add_channel("n_S");
  trace.add_channel("n_R");

  const long long n_steps =
      t_final > 0.0 ? std::llround(std::floor(t_final / dt_record + 1e-9)) : 0;
  for (long long step = 0; step <= n_steps; ++step) {
    const double t = step * dt_record;
    const auto [n_s, n_r] =
        occupations_closed_form(coeffs, 1.0, 0.0, config.j_ancilla, t);
    trace.add_row(t, {n_s, n_r});
  }
  return trace;
}

}  // namespace gapchannel::master
