#include "gapchannel/mps.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#define LAPACK_COMPLEX_CPP
#include <lapacke.h>

#include "gapchannel/config_file.hpp"

namespace gapchannel::mps {

using Complex = std::complex<double>;

namespace {

//! Thin SVD via LAPACK divide-and-conquer; JacobiSVD fallback on the rare
//! zgesdd convergence failure.
void thin_svd(const Eigen::MatrixXcd& a, Eigen::MatrixXcd& u, Eigen::VectorXd& s,
              Eigen::MatrixXcd& vh) {
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  const int k = std::min(m, n);
  Eigen::MatrixXcd work = a;
  u.resize(m, k);
  s.resize(k);
  vh.resize(k, n);
  const int info = LAPACKE_zgesdd(
      LAPACK_COL_MAJOR, 'S', m, n,
      reinterpret_cast<lapack_complex_double*>(work.data()), m, s.data(),
      reinterpret_cast<lapack_complex_double*>(u.data()), m,
      reinterpret_cast<lapack_complex_double*>(vh.data()), k);
  if (info != 0) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a,
                                           Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = svd.matrixU();
    s = svd.singularValues();
    vh = svd.matrixV().adjoint();
  }
}

Eigen::Matrix4cd kron2(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
  Eigen::Matrix4cd out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

Eigen::Matrix4cd swap_gate() {
  Eigen::Matrix4cd s = Eigen::Matrix4cd::Zero();
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) s(2 * a + b, 2 * b + a) = 1.0;
  return s;
}

//! exp(c H) for Hermitian H (c = -i dt/2 or -dt/2).
Eigen::Matrix4cd hermitian_exp(const Eigen::Matrix4cd& h, Complex c) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(h);
  Eigen::Vector4cd phases;
  for (int i = 0; i < 4; ++i) phases[i] = std::exp(c * es.eigenvalues()[i]);
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

Eigen::Matrix2cd hermitian_exp2(const Eigen::Matrix2cd& h, Complex c) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(h);
  Eigen::Vector2cd phases;
  for (int i = 0; i < 2; ++i) phases[i] = std::exp(c * es.eigenvalues()[i]);
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

MatrixProductState MatrixProductState::product_state(
    const std::vector<Eigen::Vector2cd>& locals) {
  MatrixProductState psi;
  psi.sites_.resize(locals.size());
  for (std::size_t i = 0; i < locals.size(); ++i) {
    const double nrm = locals[i].norm();
    if (nrm == 0.0) throw std::invalid_argument("product_state: zero local vector");
    for (int s = 0; s < 2; ++s) {
      psi.sites_[i][s].resize(1, 1);
      psi.sites_[i][s](0, 0) = locals[i][s] / nrm;
    }
  }
  psi.center_ = 0;
  return psi;
}

int MatrixProductState::bond_dimension(int bond) const {
  return static_cast<int>(sites_[bond][0].cols());
}

int MatrixProductState::max_bond_dimension() const {
  int chi = 1;
  for (int b = 0; b + 1 < length(); ++b) chi = std::max(chi, bond_dimension(b));
  return chi;
}

double MatrixProductState::norm() const {
  const auto& c = sites_[center_];
  return std::sqrt(c[0].squaredNorm() + c[1].squaredNorm());
}

void MatrixProductState::normalize() {
  const double n = norm();
  if (n == 0.0) throw std::runtime_error("cannot normalize a zero MPS");
  sites_[center_][0] /= n;
  sites_[center_][1] /= n;
}

void MatrixProductState::shift_center_right() {
  auto& a = sites_[center_];
  const int rows = static_cast<int>(a[0].rows());
  const int cols = static_cast<int>(a[0].cols());
  Eigen::MatrixXcd m(2 * rows, cols);
  m.topRows(rows) = a[0];
  m.bottomRows(rows) = a[1];
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(m);
  const int r = std::min(2 * rows, cols);
  Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(2 * rows, r);
  Eigen::MatrixXcd rest = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  a[0] = q.topRows(rows);
  a[1] = q.bottomRows(rows);
  auto& b = sites_[center_ + 1];
  b[0] = (rest * b[0]).eval();
  b[1] = (rest * b[1]).eval();
  ++center_;
}

void MatrixProductState::shift_center_left() {
  auto& a = sites_[center_];
  const int rows = static_cast<int>(a[0].rows());
  const int cols = static_cast<int>(a[0].cols());
  Eigen::MatrixXcd m(rows, 2 * cols);
  m.leftCols(cols) = a[0];
  m.rightCols(cols) = a[1];
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(m.adjoint());
  const int r = std::min(rows, 2 * cols);
  Eigen::MatrixXcd q =
      (qr.householderQ() * Eigen::MatrixXcd::Identity(2 * cols, r)).adjoint();
  Eigen::MatrixXcd rest =
      Eigen::MatrixXcd(qr.matrixQR().topRows(r).triangularView<Eigen::Upper>())
          .adjoint();
  a[0] = q.leftCols(cols);
  a[1] = q.rightCols(cols);
  auto& b = sites_[center_ - 1];
  b[0] = (b[0] * rest).eval();
  b[1] = (b[1] * rest).eval();
  --center_;
}

void MatrixProductState::move_center_to(int i) {
  if (i < 0 || i >= length())
    throw std::invalid_argument("move_center_to: site out of range");
  while (center_ < i) shift_center_right();
  while (center_ > i) shift_center_left();
}

double MatrixProductState::apply_two_site_gate(int i, const Eigen::Matrix4cd& gate,
                                               const TruncationPolicy& policy,
                                               bool toward_right) {
  if (i < 0 || i + 1 >= length())
    throw std::invalid_argument("apply_two_site_gate: bond out of range");
  if (center_ < i)
    move_center_to(i);
  else if (center_ > i + 1)
    move_center_to(i + 1);

  auto& left = sites_[i];
  auto& right = sites_[i + 1];
  const int chi_l = static_cast<int>(left[0].rows());
  const int chi_r = static_cast<int>(right[0].cols());

  // theta blocks and gate contraction in the 2x2 physical block basis.
  std::array<std::array<Eigen::MatrixXcd, 2>, 2> block;
  for (int sl = 0; sl < 2; ++sl)
    for (int sr = 0; sr < 2; ++sr) block[sl][sr].noalias() = left[sl] * right[sr];

  Eigen::MatrixXcd theta(2 * chi_l, 2 * chi_r);
  for (int sl = 0; sl < 2; ++sl)
    for (int sr = 0; sr < 2; ++sr) {
      Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(chi_l, chi_r);
      for (int tl = 0; tl < 2; ++tl)
        for (int tr = 0; tr < 2; ++tr) {
          const Complex g = gate(2 * sl + sr, 2 * tl + tr);
          if (g != Complex(0.0)) acc.noalias() += g * block[tl][tr];
        }
      theta.block(sl * chi_l, sr * chi_r, chi_l, chi_r) = acc;
    }

  const double theta_norm = theta.norm();
  if (theta_norm == 0.0) throw std::runtime_error("gate produced a zero state");
  theta /= theta_norm;

  Eigen::MatrixXcd u, vh;
  Eigen::VectorXd sv;
  thin_svd(theta, u, sv, vh);

  const int available = static_cast<int>(sv.size());
  int natural_rank = 0;
  for (int j = 0; j < available; ++j)
    if (sv[j] > 1e-14 * sv[0]) natural_rank = j + 1;
  int keep = std::min(policy.chi_max, available);
  if (policy.rel_cutoff > 0.0) {
    int above = 0;
    for (int j = 0; j < available; ++j)
      if (sv[j] >= policy.rel_cutoff * sv[0]) above = j + 1;
    keep = std::min(keep, above);
  } else if (natural_rank > policy.chi_max) {
    throw std::runtime_error(
        "bond dimension overflow: state needs rank " + std::to_string(natural_rank) +
        " > chi_max = " + std::to_string(policy.chi_max) + " with zero cutoff");
  }
  keep = std::max(keep, 1);

  const double total = sv.squaredNorm();
  double kept = 0.0;
  for (int j = 0; j < keep; ++j) kept += sv[j] * sv[j];
  const double discarded = 1.0 - kept / total;
  const Eigen::VectorXd s_kept = sv.head(keep) / std::sqrt(kept);

  if (toward_right) {
    for (int sl = 0; sl < 2; ++sl) left[sl] = u.block(sl * chi_l, 0, chi_l, keep);
    const Eigen::MatrixXcd sv_mat = s_kept.asDiagonal() * vh.topRows(keep);
    for (int sr = 0; sr < 2; ++sr)
      right[sr] = sv_mat.block(0, sr * chi_r, keep, chi_r);
    center_ = i + 1;
  } else {
    const Eigen::MatrixXcd us = u.leftCols(keep) * s_kept.asDiagonal();
    for (int sl = 0; sl < 2; ++sl) left[sl] = us.block(sl * chi_l, 0, chi_l, keep);
    for (int sr = 0; sr < 2; ++sr)
      right[sr] = vh.block(0, sr * chi_r, keep, chi_r);
    center_ = i;
  }
  return std::max(discarded, 0.0);
}

void MatrixProductState::apply_single_site_gate(int i, const Eigen::Matrix2cd& gate) {
  move_center_to(i);
  auto& a = sites_[i];
  const Eigen::MatrixXcd a0 = a[0], a1 = a[1];
  a[0] = gate(0, 0) * a0 + gate(0, 1) * a1;
  a[1] = gate(1, 0) * a0 + gate(1, 1) * a1;
  normalize();
}

std::complex<double> MatrixProductState::expectation_local(int i,
                                                           const Eigen::Matrix2cd& op) {
  move_center_to(i);
  const auto& a = sites_[i];
  Complex val(0.0);
  for (int s = 0; s < 2; ++s)
    for (int t = 0; t < 2; ++t) {
      const Complex o = op(s, t);
      if (o != Complex(0.0)) val += o * (a[s].adjoint() * a[t]).trace();
    }
  return val;
}

std::complex<double> MatrixProductState::expectation_pair(int i, int j,
                                                          const Eigen::Matrix2cd& op_i,
                                                          const Eigen::Matrix2cd& op_j) {
  if (i >= j) throw std::invalid_argument("expectation_pair: requires i < j");
  move_center_to(i);
  const auto& a = sites_[i];
  Eigen::MatrixXcd env = Eigen::MatrixXcd::Zero(a[0].cols(), a[0].cols());
  for (int s = 0; s < 2; ++s)
    for (int t = 0; t < 2; ++t) {
      const Complex o = op_i(s, t);
      if (o != Complex(0.0)) env.noalias() += o * (a[s].adjoint() * a[t]);
    }
  for (int m = i + 1; m < j; ++m) {
    const auto& b = sites_[m];
    Eigen::MatrixXcd next = Eigen::MatrixXcd::Zero(b[0].cols(), b[0].cols());
    for (int s = 0; s < 2; ++s) next.noalias() += b[s].adjoint() * env * b[s];
    env = std::move(next);
  }
  const auto& c = sites_[j];
  Complex val(0.0);
  for (int s = 0; s < 2; ++s)
    for (int t = 0; t < 2; ++t) {
      const Complex o = op_j(s, t);
      if (o != Complex(0.0)) val += o * (c[s].adjoint() * env * c[t]).trace();
    }
  return val;
}

Eigen::Matrix4cd MatrixProductState::reduced_density_pair(int i, int j) {
  if (i >= j) throw std::invalid_argument("reduced_density_pair: requires i < j");
  move_center_to(i);
  const auto& a = sites_[i];
  // env[ket s_i][bra s_i'], row = bra bond, col = ket bond.
  std::array<std::array<Eigen::MatrixXcd, 2>, 2> env;
  for (int s = 0; s < 2; ++s)
    for (int t = 0; t < 2; ++t) env[s][t] = a[t].adjoint() * a[s];
  for (int m = i + 1; m < j; ++m) {
    const auto& b = sites_[m];
    for (int s = 0; s < 2; ++s)
      for (int t = 0; t < 2; ++t) {
        Eigen::MatrixXcd next = Eigen::MatrixXcd::Zero(b[0].cols(), b[0].cols());
        for (int p = 0; p < 2; ++p) next.noalias() += b[p].adjoint() * env[s][t] * b[p];
        env[s][t] = std::move(next);
      }
  }
  const auto& c = sites_[j];
  Eigen::Matrix4cd rho;
  for (int si = 0; si < 2; ++si)
    for (int sj = 0; sj < 2; ++sj)
      for (int ti = 0; ti < 2; ++ti)
        for (int tj = 0; tj < 2; ++tj)
          rho(2 * si + sj, 2 * ti + tj) =
              (c[tj].adjoint() * env[si][ti] * c[sj]).trace();
  return rho;
}

double MatrixProductState::canonical_defect() const {
  double defect = 0.0;
  for (int i = 0; i < length(); ++i) {
    const auto& a = sites_[i];
    if (i < center_) {
      const Eigen::MatrixXcd g =
          a[0].adjoint() * a[0] + a[1].adjoint() * a[1] -
          Eigen::MatrixXcd::Identity(a[0].cols(), a[0].cols());
      defect = std::max(defect, g.cwiseAbs().maxCoeff());
    } else if (i > center_) {
      const Eigen::MatrixXcd g =
          a[0] * a[0].adjoint() + a[1] * a[1].adjoint() -
          Eigen::MatrixXcd::Identity(a[0].rows(), a[0].rows());
      defect = std::max(defect, g.cwiseAbs().maxCoeff());
    }
  }
  return defect;
}

void MatrixProductState::restore_site(int i, std::array<Eigen::MatrixXcd, 2> tensor) {
  if (i < 0 || i >= length())
    throw std::invalid_argument("restore_site: site out of range");
  if (tensor[0].rows() != tensor[1].rows() || tensor[0].cols() != tensor[1].cols())
    throw std::invalid_argument("restore_site: mismatched physical blocks");
  sites_[i] = std::move(tensor);
}

void MatrixProductState::restore_center(int i) {
  if (i < 0 || i >= length())
    throw std::invalid_argument("restore_center: site out of range");
  center_ = i;
}

void MatrixProductState::insert_site(int position, const Eigen::Vector2cd& local) {
  if (position < 0 || position > length())
    throw std::invalid_argument("insert_site: position out of range");
  const double nrm = local.norm();
  if (nrm == 0.0) throw std::invalid_argument("insert_site: zero local vector");
  const int chi =
      position == 0 ? 1 : static_cast<int>(sites_[position - 1][0].cols());
  std::array<Eigen::MatrixXcd, 2> tensor;
  for (int s = 0; s < 2; ++s)
    tensor[s] = (local[s] / nrm) * Eigen::MatrixXcd::Identity(chi, chi);
  sites_.insert(sites_.begin() + position, std::move(tensor));
  if (center_ >= position) ++center_;
}

ExtendedLayout embed_ancillas(const SpinSystemConfig& config) {
  validate(config);
  if (config.m_sender == config.m_receiver)
    throw std::invalid_argument("embed_ancillas: m_sender == m_receiver");
  const int n = config.n_sites;
  const int label_s = n + 1;
  const int label_r = n + 2;
  ExtendedLayout layout;
  layout.n_chain = n;
  if (config.m_sender == 1) layout.order.push_back(label_s);
  for (int j = 1; j <= n; ++j) {
    layout.order.push_back(j);
    if (j == config.m_sender && config.m_sender != 1) layout.order.push_back(label_s);
    if (j == config.m_receiver - 1 && config.m_receiver != n)
      layout.order.push_back(label_r);
  }
  if (config.m_receiver == n) layout.order.push_back(label_r);
  layout.position.assign(n + 3, -1);
  for (int p = 0; p < layout.length(); ++p) layout.position[layout.order[p]] = p;
  return layout;
}

namespace {

ExtendedLayout identity_layout(int n_sites) {
  ExtendedLayout layout;
  layout.n_chain = n_sites;
  layout.order.resize(n_sites);
  layout.position.assign(n_sites + 1, -1);
  for (int j = 0; j < n_sites; ++j) {
    layout.order[j] = j + 1;
    layout.position[j + 1] = j;
  }
  return layout;
}

}  // namespace

TrotterPlan make_trotter_plan(const SpinTerms& terms, const ExtendedLayout& layout,
                              double dt, const TruncationPolicy& truncation,
                              bool imaginary_time) {
  if (dt <= 0.0) throw std::invalid_argument("make_trotter_plan: dt must be > 0");
  const int length = layout.length();
  TrotterPlan plan;
  plan.dt = dt;
  plan.imaginary_time = imaginary_time;
  plan.truncation = truncation;
  const Complex c = imaginary_time ? Complex(-0.5 * dt, 0.0) : Complex(0.0, -0.5 * dt);

  std::vector<Eigen::Matrix2cd> local_h(length, Eigen::Matrix2cd::Zero());
  std::vector<bool> has_local(length, false);
  for (const auto& t : terms.local) {
    const int p = layout.position[t.site];
    local_h[p] += t.coefficient * pauli_matrix(t.op);
    has_local[p] = true;
  }
  std::vector<bool> absorbed(length, false);

  std::map<std::pair<int, int>, Eigen::Matrix4cd> bond_h;
  for (const auto& t : terms.bond) {
    int pa = layout.position[t.site_a];
    int pb = layout.position[t.site_b];
    Eigen::Matrix2cd op_left = pauli_matrix(t.op_a);
    Eigen::Matrix2cd op_right = pauli_matrix(t.op_b);
    if (pa > pb) {
      std::swap(pa, pb);
      std::swap(op_left, op_right);
    }
    auto it = bond_h.try_emplace({pa, pb}, Eigen::Matrix4cd::Zero()).first;
    it->second += t.coefficient * kron2(op_left, op_right);
  }

  // Route each bond to adjacency; `where` maps a compile-time slot (site
  // identity) to its current position, `occupant` the inverse.
  std::vector<int> where(length), occupant(length);
  for (int p = 0; p < length; ++p) where[p] = occupant[p] = p;
  const Eigen::Matrix4cd swap_mat = swap_gate();

  for (auto& [slots, h] : bond_h) {
    int a = where[slots.first];
    int b = where[slots.second];
    // Sorted processing moves only the left partner rightward, so partner
    // order is never inverted.
    if (a > b) throw std::logic_error("trotter routing inverted a bond");
    while (b - a > 1) {
      GateOp op;
      op.position = a;
      op.is_swap = true;
      op.gate = swap_mat;
      plan.forward.push_back(op);
      std::swap(occupant[a], occupant[a + 1]);
      where[occupant[a]] = a;
      where[occupant[a + 1]] = a + 1;
      a = a + 1;
    }
    Eigen::Matrix4cd h_total = h;
    const int left_slot = slots.first;
    const int right_slot = slots.second;
    if (has_local[left_slot] && !absorbed[left_slot]) {
      h_total += kron2(local_h[left_slot], Eigen::Matrix2cd::Identity());
      absorbed[left_slot] = true;
    }
    if (has_local[right_slot] && !absorbed[right_slot]) {
      h_total += kron2(Eigen::Matrix2cd::Identity(), local_h[right_slot]);
      absorbed[right_slot] = true;
    }
    GateOp op;
    op.position = a;
    op.gate = hermitian_exp(h_total, c);
    plan.forward.push_back(op);
  }

  for (int slot = 0; slot < length; ++slot) {
    if (has_local[slot] && !absorbed[slot]) {
      GateOp op;
      op.position = where[slot];
      op.single_site = true;
      op.local = hermitian_exp2(local_h[slot], c);
      plan.forward.push_back(op);
    }
  }
  return plan;
}

double default_time_step(const SpinSystemConfig& config) {
  const double j_max =
      std::max({std::abs(config.b_field), std::abs(config.j_x), std::abs(config.j_y),
                std::abs(config.j_z), config.b_ancilla, config.j_ancilla});
  if (j_max == 0.0) return 0.05;
  return 0.05 / j_max;
}

double apply_trotter_step(MatrixProductState& psi, const TrotterPlan& plan) {
  double discarded = 0.0;
  for (const auto& op : plan.forward) {
    if (op.single_site)
      psi.apply_single_site_gate(op.position, op.local);
    else
      discarded += psi.apply_two_site_gate(op.position, op.gate, plan.truncation, true);
  }
  for (auto it = plan.forward.rbegin(); it != plan.forward.rend(); ++it) {
    if (it->single_site)
      psi.apply_single_site_gate(it->position, it->local);
    else
      discarded += psi.apply_two_site_gate(it->position, it->gate, plan.truncation,
                                           false);
  }
  return discarded;
}

namespace {

double term_energy(MatrixProductState& psi, const SpinTerms& terms,
                   const ExtendedLayout& layout) {
  double energy = 0.0;
  for (const auto& t : terms.local) {
    const int p = layout.position[t.site];
    energy += t.coefficient * psi.expectation_local(p, pauli_matrix(t.op)).real();
  }
  for (const auto& t : terms.bond) {
    int pa = layout.position[t.site_a];
    int pb = layout.position[t.site_b];
    Eigen::Matrix2cd oa = pauli_matrix(t.op_a);
    Eigen::Matrix2cd ob = pauli_matrix(t.op_b);
    if (pa > pb) {
      std::swap(pa, pb);
      std::swap(oa, ob);
    }
    energy += t.coefficient * psi.expectation_pair(pa, pb, oa, ob).real();
  }
  return energy;
}

}  // namespace

ItebdResult ground_state_itebd(const SpinSystemConfig& config,
                               const ItebdOptions& options) {
  validate(config);
  if (options.truncation.chi_max < 2)
    throw std::invalid_argument("ground_state_itebd: chi_max must be >= 2");
  const SpinTerms terms = build_chain_terms(config);
  const ExtendedLayout layout = identity_layout(config.n_sites);

  // Field-aligned product start with a small transverse tilt.
  Eigen::Vector2cd aligned = config.b_field >= 0.0 ? Eigen::Vector2cd(1.0, 0.05)
                                                   : Eigen::Vector2cd(0.05, 1.0);
  MatrixProductState psi = MatrixProductState::product_state(
      std::vector<Eigen::Vector2cd>(config.n_sites, aligned));

  ItebdResult result;
  result.sweeps = 0;
  double level_energy = std::numeric_limits<double>::quiet_NaN();
  bool stationary = false;

  for (int level = 0; level <= options.max_halvings; ++level) {
    const double dt = options.dt_initial / (1 << level);
    const TrotterPlan plan =
        make_trotter_plan(terms, layout, dt, options.truncation, true);
    double energy = term_energy(psi, terms, layout);
    stationary = false;
    for (int sweep = 0; sweep < options.max_sweeps_per_level; ++sweep) {
      apply_trotter_step(psi, plan);
      psi.normalize();
      ++result.sweeps;
      const double next = term_energy(psi, terms, layout);
      const bool done = std::abs(next - energy) <
                        options.energy_tol * std::max(1.0, std::abs(next));
      energy = next;
      if (done) {
        stationary = true;
        break;
      }
    }
    result.energy = energy;
    if (stationary && std::isfinite(level_energy) &&
        std::abs(energy - level_energy) <
            options.cascade_tol * std::max(1.0, std::abs(energy)))
      break;
    level_energy = energy;
  }
  if (!stationary)
    throw std::runtime_error(
        "ground_state_itebd: energy not stationary after the dt cascade");
  result.state = std::move(psi);
  result.state.normalize();
  return result;
}

MatrixProductState initial_transfer_state(const SpinSystemConfig& config,
                                          const ExtendedLayout& layout,
                                          const ItebdOptions& options) {
  ItebdResult ground = ground_state_itebd(config, options);
  MatrixProductState psi = std::move(ground.state);

  // Chain-only insertion index = number of chain sites preceding the ancilla
  // in the extended order. Insert the receiver first so the sender index
  // stays valid.
  int idx_s = 0, idx_r = 0;
  for (int p = 0; p < layout.length(); ++p) {
    const int label = layout.order[p];
    if (label == layout.n_chain + 1) break;
    if (label <= layout.n_chain) ++idx_s;
  }
  for (int p = 0; p < layout.length(); ++p) {
    const int label = layout.order[p];
    if (label == layout.n_chain + 2) break;
    if (label <= layout.n_chain) ++idx_r;
  }
  psi.insert_site(idx_r, Eigen::Vector2cd(1.0, 0.0));  // receiver down
  psi.insert_site(idx_s, Eigen::Vector2cd(0.0, 1.0));  // sender up
  return psi;
}

TransferTrace tebd_run(MatrixProductState initial, const SpinSystemConfig& config,
                       const TrotterPlan& plan, double t_final, double dt_record,
                       const TebdRunOptions& options,
                       MatrixProductState* final_state) {
  validate(config);
  if (plan.imaginary_time)
    throw std::invalid_argument("tebd_run: needs a real-time plan");
  if (t_final < 0.0) throw std::invalid_argument("tebd_run: negative t_final");
  if (t_final > 0.0 && dt_record <= 0.0)
    throw std::invalid_argument("tebd_run: dt_record must be positive");
  const ExtendedLayout layout = embed_ancillas(config);
  if (initial.length() != layout.length())
    throw std::invalid_argument("tebd_run: state length does not match layout");
  const SpinTerms terms = build_spin_terms(config);

  const int ps = layout.sender_position();
  const int pr = layout.receiver_position();
  Eigen::Matrix2cd proj_dn = Eigen::Matrix2cd::Zero();
  Eigen::Matrix2cd proj_up = Eigen::Matrix2cd::Zero();
  proj_dn(0, 0) = 1.0;
  proj_up(1, 1) = 1.0;

  TransferTrace trace;
  trace.backend = "mps";
  trace.config = config_snapshot(config);
  trace.set_config("t_final", t_final);
  trace.set_config("dt_record", dt_record);
  trace.set_config("trotter_dt", plan.dt);
  trace.set_config("chi_max", static_cast<double>(plan.truncation.chi_max));
  trace.set_config("sv_cutoff", plan.truncation.rel_cutoff);
  trace.add_channel("P_dd");
  trace.add_channel("P_ud");
  trace.add_channel("P_du");
  trace.add_channel("P_uu");
  if (options.record_energy) trace.add_channel("energy");
  trace.add_channel("truncation_weight");
  if (options.record_rdm) {
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        trace.add_channel("rho_re_" + std::to_string(i) + std::to_string(j));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        trace.add_channel("rho_im_" + std::to_string(i) + std::to_string(j));
  }

  const long long steps_per_record =
      t_final > 0.0 ? std::max(1LL, std::llround(dt_record / plan.dt)) : 1;
  const long long n_records =
      t_final > 0.0
          ? std::llround(std::floor(t_final / (steps_per_record * plan.dt) + 1e-9))
          : 0;

  double discarded_total = 0.0;
  MatrixProductState& psi = initial;

  auto record = [&](double t) {
    std::vector<double> row;
    row.push_back(psi.expectation_pair(ps, pr, proj_dn, proj_dn).real());
    row.push_back(psi.expectation_pair(ps, pr, proj_up, proj_dn).real());
    row.push_back(psi.expectation_pair(ps, pr, proj_dn, proj_up).real());
    row.push_back(psi.expectation_pair(ps, pr, proj_up, proj_up).real());
    if (options.record_energy) row.push_back(term_energy(psi, terms, layout));
    row.push_back(discarded_total);
    if (options.record_rdm) {
      const Eigen::Matrix4cd rho = psi.reduced_density_pair(ps, pr);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) row.push_back(rho(i, j).real());
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) row.push_back(rho(i, j).imag());
    }
    trace.add_row(t, row);
  };

  record(0.0);
  for (long long rec = 1; rec <= n_records; ++rec) {
    for (long long s = 0; s < steps_per_record; ++s)
      discarded_total += apply_trotter_step(psi, plan);
    record(rec * steps_per_record * plan.dt);
  }
  trace.set_config("total_truncation_weight", discarded_total);
  if (final_state) *final_state = std::move(psi);
  return trace;
}

namespace {
constexpr char kCheckpointMagic[] = "GAPCHMPS1\n";
}

void save_checkpoint(const MatrixProductState& psi, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint '" + tmp + "'");
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
    const std::int64_t length = psi.length();
    const std::int64_t center = psi.center();
    out.write(reinterpret_cast<const char*>(&length), sizeof(length));
    out.write(reinterpret_cast<const char*>(&center), sizeof(center));
    for (int i = 0; i < psi.length(); ++i) {
      const auto& site = psi.site(i);
      const std::int64_t rows = site[0].rows();
      const std::int64_t cols = site[0].cols();
      out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
      out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
      for (int s = 0; s < 2; ++s)
        for (std::int64_t r = 0; r < rows; ++r)
          for (std::int64_t c = 0; c < cols; ++c) {
            const double re = site[s](r, c).real();
            const double im = site[s](r, c).imag();
            out.write(reinterpret_cast<const char*>(&re), sizeof(re));
            out.write(reinterpret_cast<const char*>(&im), sizeof(im));
          }
    }
    if (!out) throw std::runtime_error("write failure on checkpoint '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot rename checkpoint onto '" + path + "'");
}

MatrixProductState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  char magic[sizeof(kCheckpointMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::string(magic, sizeof(magic)) !=
                 std::string(kCheckpointMagic, sizeof(magic)))
    throw std::runtime_error("'" + path + "' is not a gapchannel MPS checkpoint");
  std::int64_t length = 0, center = 0;
  in.read(reinterpret_cast<char*>(&length), sizeof(length));
  in.read(reinterpret_cast<char*>(&center), sizeof(center));
  if (!in || length < 1 || center < 0 || center >= length)
    throw std::runtime_error("corrupt checkpoint header in '" + path + "'");

  MatrixProductState psi = MatrixProductState::product_state(
      std::vector<Eigen::Vector2cd>(length, Eigen::Vector2cd(1.0, 0.0)));
  for (std::int64_t i = 0; i < length; ++i) {
    std::int64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    if (!in || rows < 1 || cols < 1)
      throw std::runtime_error("corrupt checkpoint tensor header in '" + path + "'");
    std::array<Eigen::MatrixXcd, 2> site;
    for (int s = 0; s < 2; ++s) {
      site[s].resize(rows, cols);
      for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) {
          double re = 0.0, im = 0.0;
          in.read(reinterpret_cast<char*>(&re), sizeof(re));
          in.read(reinterpret_cast<char*>(&im), sizeof(im));
          site[s](r, c) = Complex(re, im);
        }
    }
    if (!in) throw std::runtime_error("truncated checkpoint '" + path + "'");
    psi.restore_site(static_cast<int>(i), std::move(site));
  }
  psi.restore_center(static_cast<int>(center));
  return psi;
}

StabilityReport stability_check(const TransferTrace& a, const TransferTrace& b,
                                double tolerance) {
  if (a.times.size() != b.times.size())
    throw std::invalid_argument("stability_check: mismatched record grids");
  for (std::size_t i = 0; i < a.times.size(); ++i)
    if (std::abs(a.times[i] - b.times[i]) > 1e-9 * std::max(1.0, std::abs(a.times[i])))
      throw std::invalid_argument("stability_check: mismatched record grids");

  StabilityReport report;
  for (std::size_t c = 0; c < a.channel_names.size(); ++c) {
    const std::string& name = a.channel_names[c];
    if (name.rfind("P_", 0) != 0 && name.rfind("n_", 0) != 0) continue;
    if (!b.has_channel(name)) continue;
    const auto& col_a = a.channels[c];
    const auto& col_b = b.channel(name);
    double dev = 0.0;
    for (std::size_t i = 0; i < col_a.size(); ++i)
      dev = std::max(dev, std::abs(col_a[i] - col_b[i]));
    report.channel_deviation.emplace_back(name, dev);
    report.max_deviation = std::max(report.max_deviation, dev);
  }
  if (report.channel_deviation.empty())
    throw std::invalid_argument("stability_check: no common probability channels");
  report.pass = report.max_deviation < tolerance;
  return report;
}

}  // namespace gapchannel::mps
