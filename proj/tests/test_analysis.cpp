#include <doctest.h>

#include <cmath>
#include <random>

#include "gapchannel/analysis.hpp"
#include "gapchannel/gaussian.hpp"
#include "gapchannel/master.hpp"
#include "support/oracles.hpp"

using namespace gapchannel;
using analysis::Regime;

TEST_CASE("log-negativity approximation: endpoints, monotonicity, concavity") {
  CHECK(analysis::log_negativity_approx(0.0) == 0.0);
  CHECK(analysis::log_negativity_approx(1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(analysis::log_negativity_approx(0.5) ==
        doctest::Approx(0.584962500721156).epsilon(1e-12));
  double previous = -1.0, previous_slope = 1e300;
  for (int i = 0; i <= 20; ++i) {
    const double p = i / 20.0;
    const double v = analysis::log_negativity_approx(p);
    CHECK(v > previous);
    if (i > 0) {
      const double slope = (v - previous) / 0.05;
      CHECK(slope < previous_slope);  // concave
      previous_slope = slope;
    }
    previous = v;
  }
  CHECK_THROWS_AS(analysis::log_negativity_approx(-0.1), std::invalid_argument);
  CHECK_THROWS_AS(analysis::log_negativity_approx(1.1), std::invalid_argument);
}

namespace {

Eigen::Matrix4cd bell_state() {
  Eigen::Vector4cd psi = Eigen::Vector4cd::Zero();
  psi[0] = psi[3] = 1.0 / std::sqrt(2.0);
  return psi * psi.adjoint();
}

Eigen::Matrix2cd random_unitary(std::mt19937& rng) {
  std::normal_distribution<double> gauss;
  Eigen::Matrix2cd g;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) g(i, j) = {gauss(rng), gauss(rng)};
  const Eigen::HouseholderQR<Eigen::Matrix2cd> qr(g);
  return qr.householderQ();
}

}  // namespace

TEST_CASE("exact log negativity") {
  CHECK(analysis::log_negativity_exact(bell_state()) ==
        doctest::Approx(1.0).epsilon(1e-12));

  Eigen::Matrix4cd product = Eigen::Matrix4cd::Zero();
  product(1, 1) = 1.0;  // |down, up>
  CHECK(std::abs(analysis::log_negativity_exact(product)) < 1e-12);

  SUBCASE("invalid density matrices are rejected") {
    Eigen::Matrix4cd bad = bell_state();
    bad(0, 1) += std::complex<double>(0.0, 1e-3);  // not Hermitian
    CHECK_THROWS_AS(analysis::log_negativity_exact(bad), std::invalid_argument);
    bad = 2.0 * bell_state();  // trace 2
    CHECK_THROWS_AS(analysis::log_negativity_exact(bad), std::invalid_argument);
    bad = 1.5 * bell_state() - 0.5 * Eigen::Matrix4cd::Identity() * 0.5;
    CHECK_THROWS_AS(analysis::log_negativity_exact(bad), std::invalid_argument);
  }

  SUBCASE("invariant under local unitaries") {
    std::mt19937 rng(7);
    const double reference = analysis::log_negativity_exact(bell_state());
    for (int trial = 0; trial < 8; ++trial) {
      const Eigen::Matrix2cd ua = random_unitary(rng);
      const Eigen::Matrix2cd ub = random_unitary(rng);
      const Eigen::Matrix4cd u = oracles::kron(ua, ub);
      const Eigen::Matrix4cd rotated = u * bell_state() * u.adjoint();
      CHECK(std::abs(analysis::log_negativity_exact(rotated) - reference) < 1e-10);
    }
  }
}

TEST_CASE("fit recovers synthetic model parameters") {
  SUBCASE("pure off-resonant oscillation to 1e-6 relative") {
    const double nu = 3.1e-3;
    std::vector<double> t, y;
    for (int i = 0; i <= 400; ++i) {
      t.push_back(i * 12.5);  // 2.5 periods
      y.push_back(0.5 - 0.5 * std::cos(nu * t.back()));
    }
    const auto m = analysis::fit_series(t, y);
    CHECK(m.fitted_frequency == doctest::Approx(nu).epsilon(1e-6));
    CHECK(m.regime == Regime::oscillatory);
    CHECK(m.fit_residual < 1e-9);
    CHECK(m.max_received == doctest::Approx(1.0).epsilon(1e-3));
  }
  SUBCASE("damped template recovers decay and cosh rates") {
    const double nu = 5e-3, g = 2e-3, c = 1e-3;
    std::vector<double> t, y;
    for (int i = 0; i <= 600; ++i) {
      t.push_back(i * 5.0);
      const double tt = t.back();
      y.push_back((0.5 * std::cosh(c * tt) - 0.5 * std::cos(nu * tt)) *
                  std::exp(-g * tt));
    }
    const auto m = analysis::fit_series(t, y);
    CHECK(m.fitted_frequency == doctest::Approx(nu).epsilon(1e-4));
    CHECK(m.fitted_decay_rate == doctest::Approx(g).epsilon(1e-3));
    CHECK(m.fitted_cosh_rate == doctest::Approx(c).epsilon(1e-2));
    CHECK(m.regime == Regime::damped);
  }
  SUBCASE("flat or too-short series raise insufficient-length errors") {
    std::vector<double> t, y;
    for (int i = 0; i < 50; ++i) {
      t.push_back(i);
      y.push_back(0.0);
    }
    CHECK_THROWS_WITH_AS(analysis::fit_series(t, y), doctest::Contains("insufficient"),
                         std::invalid_argument);
    for (int i = 0; i < 50; ++i) y[i] = 1e-4 * std::sin(1e-5 * t[i]);
    CHECK_THROWS_AS(analysis::fit_series(t, y), std::invalid_argument);
  }
}

TEST_CASE("fitted gaussian frequency matches the master prediction") {
  HarmonicSystemConfig config;
  config.n_sites = 400;
  config.omega_coupling = 1.0;
  config.omega_onsite = 0.7;
  config.omega_ancilla = 0.5;
  config.j_ancilla = 0.05;
  config.m_sender = 196;
  config.m_receiver = 205;

  const auto coeffs =
      master::asymptotic_coefficients(master::CorrelationKernel::from_config(config));
  const double freq = master::oscillation_frequency(coeffs, config.j_ancilla);
  const double period = 2.0 * M_PI / freq;

  const auto trace = gaussian::transfer_run(config, 2.2 * period, period / 180.0);
  const auto metrics = analysis::fit_transfer(trace);
  CHECK(metrics.regime == Regime::oscillatory);
  CHECK(metrics.fitted_frequency == doctest::Approx(freq).epsilon(0.1));
  CHECK(metrics.max_received > 0.9);
}

TEST_CASE("harmonic gap probe recovers the onsite frequency") {
  HarmonicSystemConfig base;
  base.n_sites = 200;
  base.omega_coupling = 1.0;
  base.omega_onsite = 0.7;
  base.omega_ancilla = 0.5;
  base.j_ancilla = 0.05;
  base.m_sender = 96;
  base.m_receiver = 105;

  analysis::SweepOptions options;
  options.resolution = 0.02;
  options.initial_points = 3;
  const auto estimate = analysis::gap_probe_sweep_harmonic(base, 0.5, 0.9, options);
  CHECK(std::abs(estimate.threshold_parameter - 0.7) <= 0.02);
  CHECK(estimate.bracket.second - estimate.bracket.first <= 0.02 + 1e-12);
  REQUIRE(estimate.samples.size() >= 2);
  // bracket endpoints carry opposite regimes
  Regime lo_regime = Regime::oscillatory, hi_regime = Regime::oscillatory;
  for (const auto& [p, r] : estimate.samples) {
    if (p == doctest::Approx(estimate.bracket.first)) lo_regime = r;
    if (p == doctest::Approx(estimate.bracket.second)) hi_regime = r;
  }
  CHECK(lo_regime != hi_regime);
}

TEST_CASE("sweep without a regime change reports an error") {
  HarmonicSystemConfig base;
  base.n_sites = 100;
  base.omega_coupling = 1.0;
  base.omega_onsite = 0.7;
  base.omega_ancilla = 0.5;
  base.j_ancilla = 0.05;
  base.m_sender = 46;
  base.m_receiver = 55;
  analysis::SweepOptions options;
  options.resolution = 0.02;
  CHECK_THROWS_WITH_AS(analysis::gap_probe_sweep_harmonic(base, 0.30, 0.45, options),
                       doctest::Contains("no regime change"), std::runtime_error);
}

TEST_CASE("entanglement protocol: control stays passive, approximation tracks") {
  SpinSystemConfig c;
  c.n_sites = 6;
  c.b_field = 1.0;
  c.j_x = 0.3;
  c.b_ancilla = 0.55;
  c.j_ancilla = 0.05;
  c.m_sender = 2;
  c.m_receiver = 4;
  c.allow_boundary_placement = true;

  const auto trace = analysis::entanglement_transfer_run(c, 60.0, 6.0);
  REQUIRE(trace.has_channel("E_N"));
  REQUIRE(trace.has_channel("E_N_approx"));
  CHECK(std::abs(trace.channel("E_N")[0]) < 1e-9);         // R and C start unentangled
  CHECK(std::abs(trace.channel("E_N_approx")[0]) < 1e-9);  // P_du(0) = 0
  CHECK(trace.channel("P_dd")[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(trace.channel("P_ud")[0] == doctest::Approx(0.5).epsilon(1e-10));
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    CHECK(std::abs(trace.channel("E_N")[i] - trace.channel("E_N_approx")[i]) < 0.05);
    const double total = trace.channel("P_dd")[i] + trace.channel("P_ud")[i] +
                         trace.channel("P_du")[i] + trace.channel("P_uu")[i];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  }
}
