#include "gapchannel/ed.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "gapchannel/config_file.hpp"

namespace gapchannel::ed {

using Complex = std::complex<double>;

DenseState DenseState::product_state(int n_spins, unsigned long long bits) {
  DenseState s;
  s.n_spins = n_spins;
  s.amplitudes = Eigen::VectorXcd::Zero(1LL << n_spins);
  s.amplitudes[static_cast<long long>(bits)] = 1.0;
  return s;
}

namespace {

constexpr Complex kI{0.0, 1.0};

// Phase acquired on one site, indexed by the incoming bit (0 = down).
std::array<Complex, 2> pauli_phase(PauliKind kind) {
  switch (kind) {
    case PauliKind::x:
      return {Complex{1.0}, Complex{1.0}};
    case PauliKind::y:
      return {kI, -kI};  // down->up: +i, up->down: -i
    case PauliKind::z:
      return {Complex{-1.0}, Complex{1.0}};
  }
  return {};
}

bool is_flipping(PauliKind kind) { return kind != PauliKind::z; }

}  // namespace

HamiltonianApplier::HamiltonianApplier(const SpinTerms& terms) {
  n_spins_ = terms.n_total;
  if (n_spins_ < 1 || n_spins_ > kMaxSpins)
    throw std::invalid_argument("ed backend supports 1..14 spins, got " +
                                std::to_string(n_spins_));
  const long long dim = 1LL << n_spins_;
  diagonal_ = Eigen::VectorXd::Zero(dim);

  for (const auto& t : terms.local) {
    norm_bound_ += std::abs(t.coefficient);
    const int shift = t.site - 1;
    if (!is_flipping(t.op)) {
      for (long long b = 0; b < dim; ++b)
        diagonal_[b] += t.coefficient * (((b >> shift) & 1) ? 1.0 : -1.0);
    } else {
      FlipTerm f;
      f.mask = 1ULL << shift;
      f.shift_a = shift;
      f.shift_b = -1;
      const auto phase = pauli_phase(t.op);
      f.phase = {t.coefficient * phase[0], t.coefficient * phase[1], 0.0, 0.0};
      flips_.push_back(f);
    }
  }
  for (const auto& t : terms.bond) {
    norm_bound_ += std::abs(t.coefficient);
    const int sa = t.site_a - 1;
    const int sb = t.site_b - 1;
    const bool fa = is_flipping(t.op_a);
    const bool fb = is_flipping(t.op_b);
    if (!fa && !fb) {
      for (long long b = 0; b < dim; ++b) {
        const double za = ((b >> sa) & 1) ? 1.0 : -1.0;
        const double zb = ((b >> sb) & 1) ? 1.0 : -1.0;
        diagonal_[b] += t.coefficient * za * zb;
      }
    } else {
      FlipTerm f;
      f.mask = (fa ? (1ULL << sa) : 0ULL) | (fb ? (1ULL << sb) : 0ULL);
      f.shift_a = sa;
      f.shift_b = sb;
      const auto pa = pauli_phase(t.op_a);
      const auto pb = pauli_phase(t.op_b);
      for (int ba = 0; ba < 2; ++ba)
        for (int bb = 0; bb < 2; ++bb)
          f.phase[(ba << 1) | bb] = t.coefficient * pa[ba] * pb[bb];
      flips_.push_back(f);
    }
  }
}

void HamiltonianApplier::apply(const Eigen::VectorXcd& in, Eigen::VectorXcd& out) const {
  const long long dim = dimension();
  if (in.size() != dim)
    throw std::invalid_argument("state dimension does not match Hamiltonian");
  out.resize(dim);
  out.array() = diagonal_.array() * in.array();
  for (const auto& f : flips_) {
    const Complex* p = f.phase.data();
    if (f.shift_b < 0) {
      for (long long b = 0; b < dim; ++b) {
        const int bit = static_cast<int>((b >> f.shift_a) & 1);
        out[static_cast<long long>(b ^ f.mask)] += p[bit] * in[b];
      }
    } else {
      for (long long b = 0; b < dim; ++b) {
        const int idx = static_cast<int>(((b >> f.shift_a) & 1) << 1 |
                                         ((b >> f.shift_b) & 1));
        out[static_cast<long long>(b ^ f.mask)] += p[idx] * in[b];
      }
    }
  }
}

Eigen::VectorXcd HamiltonianApplier::apply(const Eigen::VectorXcd& in) const {
  Eigen::VectorXcd out;
  apply(in, out);
  return out;
}

namespace {

// Ritz data of a Lanczos tridiagonal.
struct TridiagEig {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

TridiagEig solve_tridiag(const std::vector<double>& alpha,
                         const std::vector<double>& beta, int m) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    t(i, i) = alpha[i];
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
  return {es.eigenvalues(), es.eigenvectors()};
}

Eigen::VectorXcd random_vector(long long dim, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXcd v(dim);
  for (long long i = 0; i < dim; ++i) v[i] = Complex(gauss(rng), gauss(rng));
  v.normalize();
  return v;
}

void orthogonalize(Eigen::VectorXcd& w, const std::vector<Eigen::VectorXcd>& basis) {
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& v : basis) w -= v.dot(w) * v;
}

}  // namespace

std::vector<std::pair<double, Eigen::VectorXcd>> lowest_eigenpairs(
    const HamiltonianApplier& h, int n_pairs, double tol) {
  const long long dim = h.dimension();
  n_pairs = std::min<long long>(n_pairs, dim);
  std::vector<std::pair<double, Eigen::VectorXcd>> result;

  if (dim <= 512) {
    Eigen::MatrixXcd dense(dim, dim);
    Eigen::VectorXcd unit = Eigen::VectorXcd::Zero(dim), col;
    for (long long j = 0; j < dim; ++j) {
      unit[j] = 1.0;
      h.apply(unit, col);
      dense.col(j) = col;
      unit[j] = 0.0;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense);
    for (int j = 0; j < n_pairs; ++j)
      result.emplace_back(es.eigenvalues()[j], es.eigenvectors().col(j));
    return result;
  }

  const double scale = std::max(1.0, h.norm_bound());
  const int max_iter = 350;
  std::vector<Eigen::VectorXcd> found;

  for (int pair = 0; pair < n_pairs; ++pair) {
    Eigen::VectorXcd v = random_vector(dim, 0x5eed0000u + pair);
    orthogonalize(v, found);
    v.normalize();

    std::vector<Eigen::VectorXcd> basis{v};
    std::vector<double> alpha, beta;
    Eigen::VectorXcd w;
    bool converged = false;
    double theta = 0.0;
    Eigen::VectorXd ritz;

    for (int it = 0; it < max_iter; ++it) {
      h.apply(basis.back(), w);
      orthogonalize(w, found);
      alpha.push_back(basis.back().dot(w).real());
      w -= alpha.back() * basis.back();
      if (basis.size() > 1) w -= beta.back() * basis[basis.size() - 2];
      orthogonalize(w, basis);
      const double b = w.norm();
      const int m = static_cast<int>(alpha.size());

      const bool breakdown = b < 1e-13 * scale;
      if (breakdown || (m >= 2 && m % 5 == 0) || it == max_iter - 1 ||
          m == static_cast<int>(dim)) {
        const auto eig = solve_tridiag(alpha, beta, m);
        const double resid = breakdown ? 0.0 : b * std::abs(eig.vectors(m - 1, 0));
        if (breakdown || resid < tol * scale) {
          theta = eig.values[0];
          ritz = eig.vectors.col(0);
          converged = true;
        }
      }
      if (converged || breakdown) break;
      beta.push_back(b);
      basis.push_back(w / b);
    }

    if (!converged)
      throw std::runtime_error("Lanczos eigensolver failed to converge");
    Eigen::VectorXcd vec = Eigen::VectorXcd::Zero(dim);
    for (int j = 0; j < ritz.size(); ++j) vec += ritz[j] * basis[j];
    orthogonalize(vec, found);
    vec.normalize();
    found.push_back(vec);
    result.emplace_back(theta, vec);
  }

  std::sort(result.begin(), result.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return result;
}

GroundState ground_state_chain(const SpinSystemConfig& config) {
  validate(config);
  if (config.n_sites > kMaxSpins)
    throw std::invalid_argument("ground_state_chain: chain too large for ED");
  const SpinTerms terms = build_chain_terms(config);
  HamiltonianApplier h(terms);

  const double deg_tol_scale = std::max(1.0, h.norm_bound());
  const int max_levels = static_cast<int>(std::min<long long>(8, h.dimension()));
  auto pairs = lowest_eigenpairs(h, std::min(2, max_levels));
  // Extend until the next level clearly separates from the ground energy.
  while (static_cast<int>(pairs.size()) < max_levels &&
         pairs.back().first - pairs.front().first < 1e-8 * deg_tol_scale)
    pairs = lowest_eigenpairs(h, static_cast<int>(pairs.size()) + 1);

  const double e0 = pairs.front().first;
  int degeneracy = 0;
  for (const auto& p : pairs)
    if (p.first - e0 < 1e-8 * deg_tol_scale) ++degeneracy;

  GroundState gs;
  gs.energy = e0;
  gs.degeneracy = degeneracy;
  gs.state.n_spins = config.n_sites;

  // Convention: in a degenerate ground space return the vector of maximal
  // overlap with the all-down product state.
  if (degeneracy > 1) {
    Eigen::VectorXcd proj = Eigen::VectorXcd::Zero(h.dimension());
    for (int j = 0; j < degeneracy; ++j)
      proj += std::conj(pairs[j].second[0]) * pairs[j].second;
    if (proj.norm() > 1e-6) {
      gs.state.amplitudes = proj.normalized();
      return gs;
    }
  }
  gs.state.amplitudes = pairs.front().second;
  return gs;
}

SpectrumSummary chain_spectrum(const SpinSystemConfig& config, int n_levels) {
  validate(config);
  if (config.n_sites > kMaxSpins)
    throw std::invalid_argument("chain_spectrum: chain too large for ED");
  if (n_levels < 2) throw std::invalid_argument("chain_spectrum: n_levels >= 2");
  HamiltonianApplier h(build_chain_terms(config));
  auto pairs = lowest_eigenpairs(h, n_levels);

  SpectrumSummary s;
  for (const auto& p : pairs) s.lowest_levels.push_back(p.first);
  s.ground_energy = s.lowest_levels[0];
  s.gap = s.lowest_levels[1] - s.lowest_levels[0];
  const double deg_tol = 1e-8 * std::max(1.0, h.norm_bound());
  s.ground_degeneracy = 0;
  for (double e : s.lowest_levels)
    if (e - s.ground_energy < deg_tol) ++s.ground_degeneracy;
  return s;
}

DenseState initial_transfer_state(const SpinSystemConfig& config) {
  if (config.n_sites + 2 > kMaxSpins)
    throw std::invalid_argument("initial_transfer_state: system too large for ED");
  const GroundState gs = ground_state_chain(config);
  const int n = config.n_sites;
  DenseState state;
  state.n_spins = n + 2;
  state.amplitudes = Eigen::VectorXcd::Zero(1LL << (n + 2));
  const long long sender_up = 1LL << n;  // S up, R down
  const long long chain_dim = 1LL << n;
  for (long long b = 0; b < chain_dim; ++b)
    state.amplitudes[b | sender_up] = gs.state.amplitudes[b];
  return state;
}

KrylovPropagator::KrylovPropagator(const HamiltonianApplier& h, double tol,
                                   int max_dim)
    : h_(h), tol_(tol), max_dim_(max_dim) {}

double KrylovPropagator::step(Eigen::VectorXcd& psi, double dt) {
  if (dt == 0.0) return 0.0;
  const long long dim = h_.dimension();
  const double scale = std::max(1.0, h_.norm_bound());

  for (int split = 0; split < 30; ++split) {
    const int pieces = 1 << split;
    const double h_step = dt / pieces;
    bool ok = true;
    double max_dev = 0.0;
    Eigen::VectorXcd saved = psi;

    for (int piece = 0; piece < pieces && ok; ++piece) {
      std::vector<Eigen::VectorXcd> basis{psi.normalized()};
      std::vector<double> alpha, beta;
      Eigen::VectorXcd w;
      bool stepped = false;

      while (static_cast<int>(alpha.size()) < max_dim_ &&
             static_cast<long long>(alpha.size()) < dim) {
        h_.apply(basis.back(), w);
        alpha.push_back(basis.back().dot(w).real());
        w -= alpha.back() * basis.back();
        if (basis.size() > 1) w -= beta.back() * basis[basis.size() - 2];
        orthogonalize(w, basis);
        const double b = w.norm();
        const int m = static_cast<int>(alpha.size());
        const bool breakdown = b < 1e-14 * scale;

        if (breakdown || m >= 6) {
          const auto eig = solve_tridiag(alpha, beta, m);
          Eigen::VectorXcd phase(m);
          for (int j = 0; j < m; ++j)
            phase[j] = std::exp(Complex(0.0, -h_step * eig.values[j]));
          const Eigen::VectorXd first = eig.vectors.row(0).transpose();
          Eigen::VectorXcd y =
              eig.vectors.cast<Complex>() * phase.cwiseProduct(first.cast<Complex>());
          const double err = breakdown ? 0.0 : b * std::abs(y[m - 1]);
          if (breakdown || err < tol_) {
            Eigen::VectorXcd next = Eigen::VectorXcd::Zero(dim);
            for (int j = 0; j < m; ++j) next += y[j] * basis[j];
            const double norm = next.norm();
            max_dev = std::max(max_dev, std::abs(1.0 - norm));
            psi = next / norm;
            stepped = true;
            break;
          }
        }
        if (breakdown) break;
        beta.push_back(b);
        basis.push_back(w / b);
      }
      if (!stepped) ok = false;
    }
    if (ok) return max_dev;
    psi = saved;
  }
  throw std::runtime_error("Krylov propagator: step size underflow");
}

std::vector<double> hamiltonian_moments(const DenseState& state,
                                        const HamiltonianApplier& h, int max_n) {
  if (max_n < 1 || max_n > 4)
    throw std::invalid_argument("hamiltonian_moments: max_n must be in 1..4");
  const Eigen::VectorXcd& psi = state.amplitudes;
  Eigen::VectorXcd w1, w2;
  h.apply(psi, w1);
  std::vector<double> moments;
  moments.push_back(psi.dot(w1).real());
  if (max_n >= 2) moments.push_back(w1.squaredNorm());
  if (max_n >= 3) {
    h.apply(w1, w2);
    moments.push_back(w1.dot(w2).real());
  }
  if (max_n >= 4) moments.push_back(w2.squaredNorm());
  return moments;
}

std::vector<double> hamiltonian_moments(const DenseState& state,
                                        const SpinSystemConfig& config, int max_n) {
  HamiltonianApplier h(build_spin_terms(config));
  if (h.dimension() != state.amplitudes.size())
    throw std::invalid_argument("hamiltonian_moments: state/config size mismatch");
  return hamiltonian_moments(state, h, max_n);
}

Eigen::Matrix4cd reduced_density_two_sites(const DenseState& state, int site_a,
                                           int site_b) {
  if (site_a == site_b || site_a < 1 || site_b < 1 || site_a > state.n_spins ||
      site_b > state.n_spins)
    throw std::invalid_argument("reduced_density_two_sites: bad site labels");
  const int pa = site_a - 1;
  const int pb = site_b - 1;
  const unsigned long long mask_a = 1ULL << pa;
  const unsigned long long mask_b = 1ULL << pb;
  const long long dim = state.amplitudes.size();
  Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
  for (long long b = 0; b < dim; ++b) {
    const Complex amp = state.amplitudes[b];
    if (amp == Complex(0.0)) continue;
    const int row = static_cast<int>(((b >> pa) & 1) << 1 | ((b >> pb) & 1));
    const long long rest = b & ~(mask_a | mask_b);
    for (int col = 0; col < 4; ++col) {
      const long long b2 = rest | ((col >> 1) ? mask_a : 0) | ((col & 1) ? mask_b : 0);
      rho(row, col) += amp * std::conj(state.amplitudes[b2]);
    }
  }
  return rho;
}

std::array<double, 4> ancilla_probabilities(const DenseState& state, int n_chain) {
  const int ps = n_chain;
  const int pr = n_chain + 1;
  if (state.n_spins < n_chain + 2)
    throw std::invalid_argument("ancilla_probabilities: state too small");
  std::array<double, 4> p{0.0, 0.0, 0.0, 0.0};
  const long long dim = state.amplitudes.size();
  for (long long b = 0; b < dim; ++b) {
    const int idx = static_cast<int>(((b >> ps) & 1) | ((b >> pr) & 1) << 1);
    p[idx] += std::norm(state.amplitudes[b]);
  }
  return p;  // [P_dd, P_ud, P_du, P_uu]
}

TransferTrace evolve_exact(const DenseState& initial, const SpinSystemConfig& config,
                           double t_final, double dt_record,
                           const EvolveOptions& options) {
  validate(config);
  if (config.n_sites + 2 > kMaxSpins)
    throw std::invalid_argument("evolve_exact: resource limit exceeded (need <= " +
                                std::to_string(kMaxSpins) + " spins)");
  const SpinTerms terms = build_spin_terms(config);
  HamiltonianApplier h(terms);
  if (initial.amplitudes.size() != h.dimension())
    throw std::invalid_argument("evolve_exact: state dimension mismatch");
  if (t_final < 0.0) throw std::invalid_argument("evolve_exact: negative t_final");
  if (t_final > 0.0 && dt_record <= 0.0)
    throw std::invalid_argument("evolve_exact: dt_record must be positive");

  TransferTrace trace;
  trace.backend = "ed";
  trace.config = config_snapshot(config);
  trace.set_config("t_final", t_final);
  trace.set_config("dt_record", dt_record);
  trace.set_config("krylov_tol", options.krylov_tol);
  trace.set_config("krylov_max_dim", static_cast<double>(options.max_krylov_dim));
  trace.set_config("max_step", options.max_step);

  trace.add_channel("P_dd");
  trace.add_channel("P_ud");
  trace.add_channel("P_du");
  trace.add_channel("P_uu");
  if (options.record_moments) {
    trace.add_channel("energy");
    trace.add_channel("energy2");
  }
  if (options.record_rdm) {
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        trace.add_channel("rho_re_" + std::to_string(i) + std::to_string(j));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        trace.add_channel("rho_im_" + std::to_string(i) + std::to_string(j));
  }

  Eigen::VectorXcd psi = initial.amplitudes.normalized();
  KrylovPropagator prop(h, options.krylov_tol, options.max_krylov_dim);
  const long long n_steps =
      t_final > 0.0 ? std::llround(std::floor(t_final / dt_record + 1e-9)) : 0;
  double max_norm_dev = 0.0;

  DenseState current;
  current.n_spins = initial.n_spins;
  auto record = [&](double t) {
    current.amplitudes = psi;
    const auto probs = ancilla_probabilities(current, config.n_sites);
    std::vector<double> row(probs.begin(), probs.end());
    if (options.record_moments) {
      const auto moments = hamiltonian_moments(current, h, 2);
      row.push_back(moments[0]);
      row.push_back(moments[1]);
    }
    if (options.record_rdm) {
      const Eigen::Matrix4cd rho = reduced_density_two_sites(
          current, config.n_sites + 1, config.n_sites + 2);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) row.push_back(rho(i, j).real());
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) row.push_back(rho(i, j).imag());
    }
    trace.add_row(t, row);
  };

  record(0.0);
  for (long long step = 1; step <= n_steps; ++step) {
    double remaining = dt_record;
    while (remaining > 1e-12) {
      const double dt = std::min(options.max_step, remaining);
      max_norm_dev = std::max(max_norm_dev, prop.step(psi, dt));
      remaining -= dt;
    }
    record(step * dt_record);
  }
  trace.set_config("max_norm_deviation", max_norm_dev);
  return trace;
}

}  // namespace gapchannel::ed
