#include <doctest.h>

#include <cmath>
#include <random>

#include "gapchannel/master.hpp"
#include "gapchannel/quadrature.hpp"
#include "support/oracles.hpp"

using namespace gapchannel;
using master::CorrelationKernel;
using master::MasterCoefficients;

namespace {

CorrelationKernel kernel(int delta, double onsite, double ancilla) {
  CorrelationKernel k;
  k.delta = delta;
  k.omega_coupling = 1.0;
  k.omega_onsite = onsite;
  k.omega_ancilla = ancilla;
  return k;
}

}  // namespace

TEST_CASE("adaptive quadrature sanity") {
  QuadratureControl c;
  c.abs_tol = 1e-12;
  CHECK(integrate([](double x) { return x * x; }, 0.0, 1.0, c) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(std::abs(integrate([](double x) { return std::cos(40.0 * x); }, 0.0, M_PI,
                           c)) < 1e-10);
  // steep but integrable
  CHECK(integrate([](double x) { return 1.0 / std::sqrt(x); }, 1e-12, 1.0, c) ==
        doctest::Approx(2.0 * (1.0 - 1e-6)).epsilon(1e-9));
}

TEST_CASE("off-resonant coefficients: exact zeros and closed-form y") {
  const auto c = master::asymptotic_coefficients(kernel(9, 0.7, 0.5));
  CHECK(c.resonant == false);
  CHECK(c.x0 == 0.0);  // exact zero below the band
  CHECK(c.x1 == 0.0);
  const double y1_exact = oracles::y_coefficient_off_resonant(9, 1.0, 0.7, 0.5);
  const double y0_exact = oracles::y_coefficient_off_resonant(0, 1.0, 0.7, 0.5);
  CHECK(c.y1 == doctest::Approx(y1_exact).epsilon(1e-8));
  CHECK(c.y0 == doctest::Approx(y0_exact).epsilon(1e-8));
  CHECK(std::isfinite(c.y1));
  CHECK(c.y1 != 0.0);
}

TEST_CASE("resonant coefficients obey the paper's sign structure") {
  const auto c = master::asymptotic_coefficients(kernel(9, 0.2, 0.5));
  CHECK(c.resonant == true);
  CHECK(c.x0 > 0.0);
  CHECK(c.x0 > std::abs(c.x1));
  CHECK(c.x1 != 0.0);
}

TEST_CASE("delta/principal-value evaluation matches the time-domain oracle") {
  // Resonant and off-resonant representative sets; full 10-set scan runs in
  // the acceptance suite.
  struct Params {
    int delta;
    double onsite, ancilla;
  };
  for (const Params p : {Params{9, 0.2, 0.5}, Params{9, 0.7, 0.5},
                         Params{5, 0.3, 0.8}, Params{0, 0.4, 0.6}}) {
    const auto c = master::asymptotic_coefficients(kernel(p.delta, p.onsite, p.ancilla));
    const auto td = oracles::master_coefficients_time_domain(p.delta, 1.0, p.onsite,
                                                             p.ancilla);
    const double scale = std::max({std::abs(c.x0), std::abs(c.x1), std::abs(c.y0),
                                   std::abs(c.y1)});
    CAPTURE(p.delta);
    CAPTURE(p.onsite);
    CHECK(std::abs(c.x0 - td.x0) < 1e-4 * std::max(scale, std::abs(c.x0)));
    CHECK(std::abs(c.x1 - td.x1) < 1e-4 * std::max(scale, std::abs(c.x1)));
    CHECK(std::abs(c.y0 - td.y0) < 1e-4 * std::max(scale, std::abs(c.y0)));
    CHECK(std::abs(c.y1 - td.y1) < 1e-4 * std::max(scale, std::abs(c.y1)));
  }
}

TEST_CASE("coefficients depend on the sites only through |m_S - m_R|") {
  HarmonicSystemConfig config;
  config.n_sites = 100;
  config.omega_coupling = 1.0;
  config.omega_onsite = 0.7;
  config.omega_ancilla = 0.5;
  config.j_ancilla = 0.05;
  config.m_sender = 40;
  config.m_receiver = 49;
  const auto k1 = CorrelationKernel::from_config(config);
  config.m_sender = 71;
  config.m_receiver = 62;  // swapped order, same separation
  const auto k2 = CorrelationKernel::from_config(config);
  CHECK(k1.delta == 9);
  CHECK(k2.delta == 9);
  const auto c1 = master::asymptotic_coefficients(k1);
  const auto c2 = master::asymptotic_coefficients(k2);
  CHECK(c1.y1 == c2.y1);
  CHECK(c1.x0 == c2.x0);
}

TEST_CASE("band edges raise van Hove errors") {
  CHECK_THROWS_WITH_AS(master::asymptotic_coefficients(kernel(9, 0.5, 0.5)),
                       doctest::Contains("van Hove"), std::invalid_argument);
  const double top = master::band_top(kernel(9, 0.3, 1.0));
  CHECK_THROWS_AS(master::asymptotic_coefficients(kernel(9, 0.3, top)),
                  std::invalid_argument);
  CHECK_NOTHROW(master::asymptotic_coefficients(kernel(9, 0.5, 0.494)));
}

TEST_CASE("regime dichotomy over random in-band parameters") {
  std::mt19937 rng(20260808);
  std::uniform_real_distribution<double> onsite(0.1, 0.9);
  for (int trial = 0; trial < 12; ++trial) {
    const double gap = onsite(rng);
    const double top = std::sqrt(4.0 + gap * gap);
    std::uniform_real_distribution<double> below(0.05, gap - 0.01);
    std::uniform_real_distribution<double> above(gap + 0.01, top - 0.01);
    const int delta = 1 + trial % 10;
    if (gap > 0.08) {
      const auto off = master::asymptotic_coefficients(kernel(delta, gap, below(rng)));
      CHECK(off.resonant == false);
      CHECK(off.x0 == 0.0);
      CHECK(off.x1 == 0.0);
    }
    const auto on = master::asymptotic_coefficients(kernel(delta, gap, above(rng)));
    CHECK(on.resonant == true);
    CHECK(on.x0 > 0.0);
    CHECK(on.x0 > std::abs(on.x1));
  }
}

TEST_CASE("closed-form occupations") {
  const auto off = master::asymptotic_coefficients(kernel(9, 0.7, 0.5));
  const double j_a = 0.05;

  SUBCASE("t = 0 returns the initial occupations") {
    const auto [ns, nr] = master::occupations_closed_form(off, 0.8, 0.3, j_a, 0.0);
    CHECK(ns == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(nr == doctest::Approx(0.3).epsilon(1e-14));
  }

  SUBCASE("perfect transfer at t1 = pi / (2 J^2 y1)") {
    const double t1 = M_PI / (2.0 * j_a * j_a * std::abs(off.y1));
    const auto [ns, nr] = master::occupations_closed_form(off, 1.0, 0.0, j_a, t1);
    CHECK(std::abs(ns) < 1e-9);
    CHECK(nr == doctest::Approx(1.0).epsilon(1e-9));
    // off-resonant sum is conserved exactly
    for (double t : {0.0, 0.3 * t1, 0.7 * t1, 2.0 * t1}) {
      const auto [a, b] = master::occupations_closed_form(off, 1.0, 0.0, j_a, t);
      CHECK(a + b == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  SUBCASE("resonant decay with a transient receiver bump") {
    const auto on = master::asymptotic_coefficients(kernel(9, 0.2, 0.5));
    double peak = 0.0;
    for (double t = 0.0; t <= 2000.0; t += 5.0) {
      const auto [ns, nr] = master::occupations_closed_form(on, 1.0, 0.0, j_a, t);
      peak = std::max(peak, nr);
      CHECK(ns >= -1e-12);
      CHECK(nr >= -1e-12);
    }
    const auto [ns_end, nr_end] =
        master::occupations_closed_form(on, 1.0, 0.0, j_a, 2000.0);
    CHECK(peak > 0.01);          // the excitation appears momentarily in R
    CHECK(nr_end < 0.5 * peak);  // and is finally damped into the chain
    CHECK(ns_end < 0.05);

    // total occupation is non-increasing (x0 >= |x1|)
    double previous = 1.0;
    for (double t = 0.0; t <= 3000.0; t += 10.0) {
      const auto [ns, nr] = master::occupations_closed_form(on, 1.0, 0.0, j_a, t);
      CHECK(ns + nr <= previous + 1e-12);
      previous = ns + nr;
    }
  }
}

TEST_CASE("oscillation frequency: monotone in the gap, quadratic in J_a") {
  const double j_a = 0.05;
  // Figure-7 style sweep at omega = 0.5.
  std::vector<double> freqs;
  for (int i = 0; i < 10; ++i) {
    const double onsite = 0.55 + 0.4 * i / 9.0;
    const auto c = master::asymptotic_coefficients(kernel(9, onsite, 0.5));
    freqs.push_back(master::oscillation_frequency(c, j_a));
  }
  for (std::size_t i = 1; i < freqs.size(); ++i) CHECK(freqs[i] < freqs[i - 1]);
  // Axis scale of the published frequency plot (approximate read-off).
  CHECK(freqs.front() == doctest::Approx(1.4e-3).epsilon(0.1));
  CHECK(freqs.front() < 1.6e-3);
  CHECK(freqs.back() < 1e-4);

  // far detuning: frequency tends to zero
  const auto far = master::asymptotic_coefficients(kernel(9, 5.0, 0.5));
  CHECK(master::oscillation_frequency(far, j_a) < 1e-9);

  // doubling J_a quadruples the frequency
  const auto c = master::asymptotic_coefficients(kernel(9, 0.7, 0.5));
  CHECK(master::oscillation_frequency(c, 2.0 * j_a) ==
        doctest::Approx(4.0 * master::oscillation_frequency(c, j_a)).epsilon(1e-14));

  // resonant coefficients have no oscillation-frequency interpretation
  const auto on = master::asymptotic_coefficients(kernel(9, 0.2, 0.5));
  CHECK_THROWS_AS(master::oscillation_frequency(on, j_a), std::invalid_argument);
}

TEST_CASE("numerical closure integration certifies the closed form") {
  const double j_a = 0.05;
  std::vector<double> grid;
  for (int i = 0; i <= 40; ++i) grid.push_back(i * 120.0);

  SUBCASE("off-resonant") {
    const auto c = master::asymptotic_coefficients(kernel(9, 0.7, 0.5));
    const auto traces = master::integrate_master_numerically(c, 1.0, 0.0, j_a, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto [ns, nr] = master::occupations_closed_form(c, 1.0, 0.0, j_a, grid[i]);
      CHECK(std::abs(traces.n_s[i] - ns) < 1e-8);
      CHECK(std::abs(traces.n_r[i] - nr) < 1e-8);
    }
  }
  SUBCASE("resonant") {
    const auto c = master::asymptotic_coefficients(kernel(9, 0.2, 0.5));
    const auto traces = master::integrate_master_numerically(c, 1.0, 0.0, j_a, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto [ns, nr] = master::occupations_closed_form(c, 1.0, 0.0, j_a, grid[i]);
      CHECK(std::abs(traces.n_s[i] - ns) < 1e-8);
      CHECK(std::abs(traces.n_r[i] - nr) < 1e-8);
    }
  }
  SUBCASE("zero coefficients freeze the occupations") {
    const MasterCoefficients zero{};
    const auto traces = master::integrate_master_numerically(zero, 0.7, 0.2, j_a, grid);
    for (double v : traces.n_s) CHECK(v == doctest::Approx(0.7).epsilon(1e-12));
    for (double v : traces.n_r) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
  }
}

TEST_CASE("vacuum correlation function") {
  SUBCASE("equal-time value is real") {
    const auto c = master::correlation_q(0, 0.0, 1.0, 0.7);
    CHECK(std::abs(c.imag()) < 1e-12);
    CHECK(c.real() > 0.0);
  }
  SUBCASE("clustering: envelope decays with distance") {
    double previous = 1e300;
    for (int delta : {0, 5, 10, 20}) {
      const double mag = std::abs(master::correlation_q(delta, 0.0, 1.0, 0.7));
      CHECK(mag < previous);
      previous = mag;
    }
  }
  SUBCASE("gapless chain reports the divergence") {
    CHECK_THROWS_AS(master::correlation_q(3, 0.0, 1.0, 0.0), std::runtime_error);
  }
  SUBCASE("near-gapless values stay finite through the endpoint substitution") {
    const auto c = master::correlation_q(2, 1.5, 1.0, 1e-3);
    CHECK(std::isfinite(c.real()));
    CHECK(std::isfinite(c.imag()));
  }
}
