#include <doctest.h>

#include <cmath>

#include "gapchannel/model.hpp"

using namespace gapchannel;

namespace {

SpinSystemConfig fig2_spin_config() {
  SpinSystemConfig c;
  c.n_sites = 100;
  c.b_field = 1.0;
  c.j_x = 0.3;
  c.b_ancilla = 0.64;
  c.j_ancilla = 0.05;
  c.m_sender = 45;
  c.m_receiver = 55;
  return c;
}

HarmonicSystemConfig harmonic_config(int n, double onsite, double j_a,
                                     double ancilla = 0.5) {
  HarmonicSystemConfig c;
  c.n_sites = n;
  c.omega_coupling = 1.0;
  c.omega_onsite = onsite;
  c.omega_ancilla = ancilla;
  c.j_ancilla = j_a;
  c.m_sender = std::max(1, n / 2 - 1);
  c.m_receiver = std::min(n, c.m_sender + 2);
  return c;
}

int count_bonds(const SpinTerms& t, PauliKind kind) {
  int n = 0;
  for (const auto& b : t.bond)
    if (b.op_a == kind && b.op_b == kind) ++n;
  return n;
}

}  // namespace

TEST_CASE("spin terms for the 100-site transfer setup") {
  const SpinTerms terms = build_spin_terms(fig2_spin_config());
  int field_terms = 0, ancilla_fields = 0;
  for (const auto& l : terms.local) {
    REQUIRE(l.op == PauliKind::z);
    if (l.site <= 100)
      ++field_terms;
    else
      ++ancilla_fields;
  }
  CHECK(field_terms == 100);
  CHECK(ancilla_fields == 2);

  int chain_bonds = 0, ancilla_bonds = 0;
  for (const auto& b : terms.bond) {
    if (b.site_a <= 100 && b.site_b <= 100)
      ++chain_bonds;
    else
      ++ancilla_bonds;
  }
  CHECK(chain_bonds == 99);  // open boundary
  CHECK(ancilla_bonds == 2);
  CHECK(count_bonds(terms, PauliKind::y) == 0);
  CHECK(count_bonds(terms, PauliKind::z) == 0);
}

TEST_CASE("zero couplings are dropped and decoupled ancillas split the graph") {
  SpinSystemConfig c = fig2_spin_config();
  c.j_y = 0.0;
  c.j_z = 0.0;
  c.j_ancilla = 0.0;
  const SpinTerms terms = build_spin_terms(c);
  for (const auto& b : terms.bond) {
    CHECK(b.op_a == PauliKind::x);
    CHECK(b.coefficient != 0.0);
  }
  CHECK(terms.connected_components() == 3);

  c.j_ancilla = 0.05;
  CHECK(build_spin_terms(c).connected_components() == 1);
}

TEST_CASE("spin term construction is deterministic") {
  const SpinTerms a = build_spin_terms(fig2_spin_config());
  const SpinTerms b = build_spin_terms(fig2_spin_config());
  REQUIRE(a.local.size() == b.local.size());
  REQUIRE(a.bond.size() == b.bond.size());
  for (std::size_t i = 0; i < a.bond.size(); ++i) {
    CHECK(a.bond[i].site_a == b.bond[i].site_a);
    CHECK(a.bond[i].coefficient == b.bond[i].coefficient);
  }
}

TEST_CASE("config validation") {
  SpinSystemConfig c = fig2_spin_config();
  c.m_sender = 60;
  c.m_receiver = 55;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);

  c = fig2_spin_config();
  c.m_sender = 5;  // outside the centre region
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.allow_boundary_placement = true;
  CHECK_NOTHROW(validate(c));

  c = fig2_spin_config();
  c.b_ancilla = -0.1;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
}

TEST_CASE("weak-coupling warning") {
  SpinSystemConfig c = fig2_spin_config();
  CHECK(config_warnings(c).empty());  // 0.05 < 0.2 * min(1, 0.3)
  c.j_ancilla = 0.07;
  CHECK(config_warnings(c).size() == 1);
  c.j_ancilla = 0.0;
  CHECK(config_warnings(c).empty());
}

TEST_CASE("quadratic form matches the ring dispersion") {
  // N=4, Omega=1, Omega_0=0, decoupled ancillas: chain eigenvalues {0,2,2,4}.
  HarmonicSystemConfig c = harmonic_config(4, 0.0, 0.0, 1.0);
  c.m_sender = 1;
  c.m_receiver = 3;
  const QuadraticForm form = build_quadratic_form(c);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(form.chain_block());
  const Eigen::VectorXd ev = es.eigenvalues();
  CHECK(std::abs(ev[0]) < 1e-10);
  CHECK(ev[1] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(ev[2] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(ev[3] == doctest::Approx(4.0).epsilon(1e-10));

  // J_a = 0: block diagonal.
  const int n = c.n_sites;
  CHECK(form.v.block(0, n, n, 2).cwiseAbs().maxCoeff() == 0.0);

  // General N: chain block spectrum equals dispersion^2 on the discrete grid.
  HarmonicSystemConfig big = harmonic_config(12, 0.3, 0.0, 1.0);
  const QuadraticForm big_form = build_quadratic_form(big);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> big_es(big_form.chain_block());
  std::vector<double> expected;
  for (int mode = 0; mode < 12; ++mode) {
    const double k = 2.0 * M_PI * mode / 12.0;
    expected.push_back(std::pow(dispersion(k, big), 2));
  }
  std::sort(expected.begin(), expected.end());
  for (int i = 0; i < 12; ++i)
    CHECK(big_es.eigenvalues()[i] == doctest::Approx(expected[i]).epsilon(1e-10));
}

TEST_CASE("quadratic form structure and symmetry") {
  HarmonicSystemConfig c = harmonic_config(8, 0.7, 0.05);
  const QuadraticForm form = build_quadratic_form(c);
  CHECK(form.dimension() == 10);
  CHECK((form.v - form.v.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(form.v(0, 0) == doctest::Approx(2.0 + 0.49));
  CHECK(form.v(0, 1) == doctest::Approx(-1.0));
  CHECK(form.v(0, 7) == doctest::Approx(-1.0));  // periodic wrap
  CHECK(form.v(form.sender_index(), form.sender_index()) == doctest::Approx(0.25));
  CHECK(form.v(form.sender_index(), c.m_sender - 1) == doctest::Approx(0.05));
}

TEST_CASE("gapless chain with coupled ancillas is rejected as unstable") {
  HarmonicSystemConfig c = harmonic_config(8, 0.0, 0.05);
  CHECK_THROWS_WITH_AS(build_quadratic_form(c),
                       doctest::Contains("unstable Hamiltonian"),
                       std::invalid_argument);
  c.omega_ancilla = 0.0;  // the paper's omega = Omega_0 = 0 failure case
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.omega_ancilla = 0.5;
  c.j_ancilla = 0.0;
  CHECK_NOTHROW(build_quadratic_form(c));  // semi-definite but decoupled
}

TEST_CASE("dispersion relation") {
  CHECK(dispersion(0.0, 1.0, 0.7) == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(dispersion(M_PI, 1.0, 0.0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(dispersion(M_PI / 2, 1.0, 0.2) ==
        doctest::Approx(std::sqrt(2.04)).epsilon(1e-12));

  // Even in k, minimum Omega_0 at k = 0, maximum sqrt(4 Omega^2 + Omega_0^2).
  for (int i = 0; i <= 32; ++i) {
    const double k = -M_PI + 2.0 * M_PI * i / 32.0;
    CHECK(dispersion(k, 1.3, 0.4) == doctest::Approx(dispersion(-k, 1.3, 0.4)));
    CHECK(dispersion(k, 1.3, 0.4) >= 0.4);
    CHECK(dispersion(k, 1.3, 0.4) <= std::sqrt(4.0 * 1.69 + 0.16) + 1e-12);
  }
  CHECK(dispersion(0.0, 1.3, 0.4) == doctest::Approx(0.4));
}
