#include "gapchannel/model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace gapchannel {

namespace {

void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

std::string fmt(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

}  // namespace

void validate(const SpinSystemConfig& c) {
  require(c.n_sites >= 1, "spin config: n_sites must be positive");
  require(c.b_ancilla >= 0.0, "spin config: b_ancilla must be nonnegative");
  require(c.j_ancilla >= 0.0, "spin config: j_ancilla must be nonnegative");
  require(c.m_sender >= 1 && c.m_sender <= c.n_sites,
          "spin config: m_sender outside [1, n_sites]");
  require(c.m_receiver >= 1 && c.m_receiver <= c.n_sites,
          "spin config: m_receiver outside [1, n_sites]");
  require(c.m_sender < c.m_receiver,
          "spin config: requires m_sender < m_receiver");
  require(c.boundary == Boundary::open,
          "spin config: only open boundary conditions are supported");
  if (!c.allow_boundary_placement) {
    const double lo = c.n_sites / 4.0;
    const double hi = 3.0 * c.n_sites / 4.0;
    for (int m : {c.m_sender, c.m_receiver}) {
      require(m > lo && m < hi,
              "spin config: ancilla site " + std::to_string(m) +
                  " is outside the centre region (" + fmt(lo) + ", " + fmt(hi) +
                  "); set allow_boundary_placement to override");
    }
  }
}

void validate(const HarmonicSystemConfig& c) {
  require(c.n_sites >= 1, "harmonic config: n_sites must be positive");
  require(c.omega_coupling > 0.0, "harmonic config: omega_coupling must be > 0");
  require(c.omega_onsite >= 0.0, "harmonic config: omega_onsite must be >= 0");
  require(c.omega_ancilla > 0.0, "harmonic config: omega_ancilla must be > 0");
  require(c.m_sender >= 1 && c.m_sender <= c.n_sites,
          "harmonic config: m_sender outside [1, n_sites]");
  require(c.m_receiver >= 1 && c.m_receiver <= c.n_sites,
          "harmonic config: m_receiver outside [1, n_sites]");
  require(c.m_sender != c.m_receiver,
          "harmonic config: m_sender and m_receiver must differ");
  require(c.boundary == Boundary::periodic,
          "harmonic config: only periodic boundary conditions are supported");
}

std::vector<std::string> config_warnings(const SpinSystemConfig& c) {
  std::vector<std::string> warnings;
  const double j_chain = std::max({std::abs(c.j_x), std::abs(c.j_y), std::abs(c.j_z)});
  const double scale = std::min(std::abs(c.b_field), j_chain);
  if (c.j_ancilla > 0.0 && c.j_ancilla >= 0.2 * scale) {
    warnings.push_back(
        "weak-coupling assumption J_a << (B, J_x, J_y, J_z) is not met: J_a = " +
        fmt(c.j_ancilla) + " vs 0.2 * min(|B|, max|J|) = " + fmt(0.2 * scale));
  }
  return warnings;
}

std::vector<std::string> config_warnings(const HarmonicSystemConfig& c) {
  std::vector<std::string> warnings;
  const double scale = c.omega_onsite > 0.0
                           ? std::min(c.omega_coupling, c.omega_onsite)
                           : c.omega_coupling;
  if (c.j_ancilla != 0.0 && std::abs(c.j_ancilla) >= 0.2 * scale) {
    warnings.push_back("weak-coupling assumption J_a << (Omega, Omega_0) is not met: J_a = " +
                       fmt(c.j_ancilla));
  }
  return warnings;
}

Eigen::Matrix2cd pauli_matrix(PauliKind kind) {
  using namespace std::complex_literals;
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Zero();
  switch (kind) {
    case PauliKind::x:
      m(0, 1) = 1.0;
      m(1, 0) = 1.0;
      break;
    case PauliKind::y:
      m(0, 1) = 1.0i * (-1.0);  // <down|sy|up> = -i
      m(1, 0) = 1.0i;
      break;
    case PauliKind::z:
      m(0, 0) = -1.0;
      m(1, 1) = 1.0;
      break;
  }
  return m;
}

int SpinTerms::connected_components() const {
  std::vector<int> parent(n_total + 1);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const auto& b : bond) parent[find(b.site_a)] = find(b.site_b);
  int count = 0;
  for (int s = 1; s <= n_total; ++s)
    if (find(s) == s) ++count;
  return count;
}

SpinTerms build_spin_terms(const SpinSystemConfig& c) {
  validate(c);
  SpinTerms terms;
  terms.n_total = c.n_sites + 2;
  const int site_s = terms.sender_site();
  const int site_r = terms.receiver_site();

  auto add_local = [&](int site, PauliKind op, double coeff) {
    if (coeff != 0.0) terms.local.push_back({site, op, coeff});
  };
  auto add_bond = [&](int a, int b, PauliKind oa, PauliKind ob, double coeff) {
    if (coeff != 0.0) terms.bond.push_back({a, b, oa, ob, coeff});
  };

  for (int i = 1; i <= c.n_sites; ++i) add_local(i, PauliKind::z, c.b_field);
  for (int i = 1; i < c.n_sites; ++i) {
    add_bond(i, i + 1, PauliKind::x, PauliKind::x, c.j_x);
    add_bond(i, i + 1, PauliKind::y, PauliKind::y, c.j_y);
    add_bond(i, i + 1, PauliKind::z, PauliKind::z, c.j_z);
  }
  add_local(site_s, PauliKind::z, c.b_ancilla);
  add_local(site_r, PauliKind::z, c.b_ancilla);
  add_bond(site_s, c.m_sender, PauliKind::x, PauliKind::x, c.j_ancilla);
  add_bond(site_r, c.m_receiver, PauliKind::x, PauliKind::x, c.j_ancilla);
  return terms;
}

SpinTerms build_chain_terms(const SpinSystemConfig& c) {
  validate(c);
  SpinTerms terms;
  terms.n_total = c.n_sites;
  auto add_local = [&](int site, PauliKind op, double coeff) {
    if (coeff != 0.0) terms.local.push_back({site, op, coeff});
  };
  auto add_bond = [&](int a, int b, PauliKind oa, PauliKind ob, double coeff) {
    if (coeff != 0.0) terms.bond.push_back({a, b, oa, ob, coeff});
  };
  for (int i = 1; i <= c.n_sites; ++i) add_local(i, PauliKind::z, c.b_field);
  for (int i = 1; i < c.n_sites; ++i) {
    add_bond(i, i + 1, PauliKind::x, PauliKind::x, c.j_x);
    add_bond(i, i + 1, PauliKind::y, PauliKind::y, c.j_y);
    add_bond(i, i + 1, PauliKind::z, PauliKind::z, c.j_z);
  }
  return terms;
}

QuadraticForm build_quadratic_form(const HarmonicSystemConfig& c) {
  validate(c);
  const int n = c.n_sites;
  const int dim = n + 2;
  QuadraticForm form;
  form.n_chain = n;
  form.v = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd& v = form.v;

  const double w2 = c.omega_coupling * c.omega_coupling;
  // 1/2 Omega^2 (q_j - q_{j+1})^2 with periodic wrap; a == b contributes nothing.
  for (int j = 0; j < n; ++j) {
    const int a = j;
    const int b = (j + 1) % n;
    v(a, a) += w2;
    v(b, b) += w2;
    v(a, b) -= w2;
    v(b, a) -= w2;
  }
  for (int j = 0; j < n; ++j) v(j, j) += c.omega_onsite * c.omega_onsite;

  const int s = form.sender_index();
  const int r = form.receiver_index();
  v(s, s) = c.omega_ancilla * c.omega_ancilla;
  v(r, r) = c.omega_ancilla * c.omega_ancilla;
  const int ms = c.m_sender - 1;
  const int mr = c.m_receiver - 1;
  v(s, ms) += c.j_ancilla;
  v(ms, s) += c.j_ancilla;
  v(r, mr) += c.j_ancilla;
  v(mr, r) += c.j_ancilla;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(v, Eigen::EigenvaluesOnly);
  const double min_ev = solver.eigenvalues().minCoeff();
  const double scale = std::max(1.0, solver.eigenvalues().cwiseAbs().maxCoeff());
  if (min_ev < -1e-12 * scale) {
    throw std::invalid_argument(
        "unstable Hamiltonian: quadratic form is not positive definite "
        "(smallest eigenvalue " +
        fmt(min_ev) + ")");
  }
  return form;
}

double dispersion(double k, double omega_coupling, double omega_onsite) {
  const double s = std::sin(0.5 * k);
  return std::sqrt(4.0 * omega_coupling * omega_coupling * s * s +
                   omega_onsite * omega_onsite);
}

double dispersion(double k, const HarmonicSystemConfig& config) {
  return dispersion(k, config.omega_coupling, config.omega_onsite);
}

}  // namespace gapchannel
