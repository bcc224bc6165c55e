#include "gapchannel/gaussian.hpp"

#include <cmath>
#include <stdexcept>

#include "gapchannel/config_file.hpp"

namespace gapchannel::gaussian {

namespace {

//! Mode frequencies from the eigenvalues of V; rejects indefinite forms.
Eigen::VectorXd frequencies_from(const Eigen::VectorXd& eigenvalues) {
  const double scale = std::max(1.0, eigenvalues.cwiseAbs().maxCoeff());
  Eigen::VectorXd freq(eigenvalues.size());
  for (int j = 0; j < eigenvalues.size(); ++j) {
    if (eigenvalues[j] < -1e-12 * scale)
      throw std::invalid_argument("indefinite quadratic form (eigenvalue " +
                                  std::to_string(eigenvalues[j]) + ")");
    freq[j] = eigenvalues[j] > 0.0 ? std::sqrt(eigenvalues[j]) : 0.0;
  }
  return freq;
}

struct ModeFlow {
  Eigen::VectorXd cos_wt;     // cos(w t)
  Eigen::VectorXd sin_over;   // sin(w t)/w, -> t for w = 0
  Eigen::VectorXd minus_wsin; // -w sin(w t), -> 0 for w = 0
};

ModeFlow mode_flow(const Eigen::VectorXd& freq, double t) {
  const int m = static_cast<int>(freq.size());
  ModeFlow flow{Eigen::VectorXd(m), Eigen::VectorXd(m), Eigen::VectorXd(m)};
  for (int j = 0; j < m; ++j) {
    const double w = freq[j];
    if (w < 1e-300) {
      flow.cos_wt[j] = 1.0;
      flow.sin_over[j] = t;
      flow.minus_wsin[j] = 0.0;
    } else {
      flow.cos_wt[j] = std::cos(w * t);
      flow.sin_over[j] = std::sin(w * t) / w;
      flow.minus_wsin[j] = -w * std::sin(w * t);
    }
  }
  return flow;
}

}  // namespace

double symmetry_defect(const SecondMomentState& state) {
  return (state.moments - state.moments.transpose()).cwiseAbs().maxCoeff();
}

double uncertainty_defect(const SecondMomentState& state) {
  const int m = state.n_modes;
  Eigen::MatrixXcd sigma = state.moments.cast<std::complex<double>>();
  const std::complex<double> half_i(0.0, 0.5);
  for (int j = 0; j < m; ++j) {
    sigma(j, m + j) += half_i;
    sigma(m + j, j) -= half_i;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(sigma, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

SecondMomentState ground_moments(const Eigen::MatrixXd& v_block) {
  const int n = static_cast<int>(v_block.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v_block);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() <= 1e-12 * scale)
    throw std::invalid_argument(
        "ground_moments: potential block is not positive definite (gapless chain "
        "has a divergent zero-mode position variance)");
  const Eigen::VectorXd w = ev.cwiseSqrt();
  const Eigen::MatrixXd& u = es.eigenvectors();

  SecondMomentState state;
  state.n_modes = n;
  state.mean = Eigen::VectorXd::Zero(2 * n);
  state.moments = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  state.moments.topLeftCorner(n, n) = u * (0.5 * w.cwiseInverse()).asDiagonal() *
                                      u.transpose();  // V^{-1/2}/2
  state.moments.bottomRightCorner(n, n) =
      u * (0.5 * w).asDiagonal() * u.transpose();  // V^{+1/2}/2
  return state;
}

SecondMomentState chain_ground_moments(const QuadraticForm& form) {
  return ground_moments(form.chain_block());
}

SecondMomentState initial_transfer_state(const HarmonicSystemConfig& config) {
  const QuadraticForm form = build_quadratic_form(config);
  const int n = config.n_sites;
  const int m = n + 2;
  const SecondMomentState chain = ground_moments(form.chain_block());

  SecondMomentState state;
  state.n_modes = m;
  state.mean = Eigen::VectorXd::Zero(2 * m);
  state.moments = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  state.moments.block(0, 0, n, n) = chain.moments.block(0, 0, n, n);
  state.moments.block(m, m, n, n) = chain.moments.block(n, n, n, n);

  const double w = config.omega_ancilla;
  const int s = form.sender_index();
  const int r = form.receiver_index();
  state.moments(s, s) = 3.0 / (2.0 * w);      // one-phonon Fock state
  state.moments(m + s, m + s) = 3.0 * w / 2.0;
  state.moments(r, r) = 1.0 / (2.0 * w);      // vacuum
  state.moments(m + r, m + r) = w / 2.0;
  return state;
}

SymplecticPropagator propagator(const QuadraticForm& form, double t) {
  const int m = form.dimension();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(form.v);
  const Eigen::VectorXd freq = frequencies_from(es.eigenvalues());
  const Eigen::MatrixXd& u = es.eigenvectors();
  const ModeFlow flow = mode_flow(freq, t);

  SymplecticPropagator prop;
  prop.time = t;
  prop.s.resize(2 * m, 2 * m);
  prop.s.topLeftCorner(m, m) = u * flow.cos_wt.asDiagonal() * u.transpose();
  prop.s.topRightCorner(m, m) = u * flow.sin_over.asDiagonal() * u.transpose();
  prop.s.bottomLeftCorner(m, m) = u * flow.minus_wsin.asDiagonal() * u.transpose();
  prop.s.bottomRightCorner(m, m) = prop.s.topLeftCorner(m, m);
  return prop;
}

double symplectic_defect(const SymplecticPropagator& prop) {
  const int m = static_cast<int>(prop.s.rows()) / 2;
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  j.topRightCorner(m, m) = Eigen::MatrixXd::Identity(m, m);
  j.bottomLeftCorner(m, m) = -Eigen::MatrixXd::Identity(m, m);
  return (prop.s.transpose() * j * prop.s - j).cwiseAbs().maxCoeff();
}

SecondMomentState propagate(const SecondMomentState& state, const QuadraticForm& form,
                            double t) {
  if (state.n_modes != form.dimension())
    throw std::invalid_argument("propagate: state/form dimension mismatch");
  const SymplecticPropagator prop = propagator(form, t);
  SecondMomentState out;
  out.n_modes = state.n_modes;
  out.mean = prop.s * state.mean;
  const Eigen::MatrixXd raw = prop.s * state.moments * prop.s.transpose();
  out.moments = 0.5 * (raw + raw.transpose());  // enforce exact symmetry
  return out;
}

double occupation(const SecondMomentState& state, int mode, double frequency,
                  bool include_means) {
  if (frequency <= 0.0)
    throw std::invalid_argument("occupation: frequency must be positive");
  if (mode < 0 || mode >= state.n_modes)
    throw std::invalid_argument("occupation: mode index out of range");
  double q2 = state.q2(mode);
  double p2 = state.p2(mode);
  if (include_means) {
    q2 += state.mean[mode] * state.mean[mode];
    p2 += state.mean[state.n_modes + mode] * state.mean[state.n_modes + mode];
  }
  return 0.5 * (frequency * q2 + p2 / frequency - 1.0);
}

double revival_time(const HarmonicSystemConfig& config) {
  return config.n_sites / (2.0 * config.omega_coupling);
}

TransferTrace transfer_run(const HarmonicSystemConfig& config, double t_final,
                           double dt_record) {
  validate(config);
  if (t_final < 0.0) throw std::invalid_argument("transfer_run: negative t_final");
  if (t_final > 0.0 && dt_record <= 0.0)
    throw std::invalid_argument("transfer_run: dt_record must be positive");

  const QuadraticForm form = build_quadratic_form(config);
  const int n = config.n_sites;
  const int m = n + 2;
  const SecondMomentState initial = initial_transfer_state(config);

  // Full-system normal modes; all per-sample work is O(M^2).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(form.v);
  const Eigen::VectorXd freq = frequencies_from(es.eigenvalues());
  const Eigen::MatrixXd& u = es.eigenvectors();

  // Initial moments in normal coordinates.
  const Eigen::MatrixXd a0 =
      u.transpose() * initial.moments.topLeftCorner(m, m) * u;
  const Eigen::MatrixXd b0 =
      u.transpose() * initial.moments.topRightCorner(m, m) * u;
  const Eigen::MatrixXd c0 =
      u.transpose() * initial.moments.bottomRightCorner(m, m) * u;

  // Chain-mode number operator as site-basis quadratic forms, padded to M.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> chain_es(form.chain_block());
  const Eigen::VectorXd chain_freq = frequencies_from(chain_es.eigenvalues());
  if (chain_freq.minCoeff() <= 0.0)
    throw std::invalid_argument("transfer_run: gapless chain (omega_onsite = 0)");
  Eigen::MatrixXd wq = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd wp = Eigen::MatrixXd::Zero(m, m);
  wq.topLeftCorner(n, n) = chain_es.eigenvectors() * chain_freq.asDiagonal() *
                           chain_es.eigenvectors().transpose();
  wp.topLeftCorner(n, n) = chain_es.eigenvectors() *
                           chain_freq.cwiseInverse().asDiagonal() *
                           chain_es.eigenvectors().transpose();
  const Eigen::MatrixXd gq = u.transpose() * wq * u;
  const Eigen::MatrixXd gp = u.transpose() * wp * u;
  const Eigen::MatrixXd gq_a = gq.cwiseProduct(a0);
  const Eigen::MatrixXd gq_b = gq.cwiseProduct(b0);
  const Eigen::MatrixXd gq_c = gq.cwiseProduct(c0);
  const Eigen::MatrixXd gp_a = gp.cwiseProduct(a0);
  const Eigen::MatrixXd gp_b = gp.cwiseProduct(b0);
  const Eigen::MatrixXd gp_c = gp.cwiseProduct(c0);

  const Eigen::VectorXd u_s = u.row(form.sender_index()).transpose();
  const Eigen::VectorXd u_r = u.row(form.receiver_index()).transpose();
  const double w_anc = config.omega_ancilla;

  TransferTrace trace;
  trace.backend = "gaussian";
  trace.config = config_snapshot(config);
  trace.set_config("t_final", t_final);
  trace.set_config("dt_record", dt_record);
  trace.add_channel("n_S");
  trace.add_channel("n_R");
  trace.add_channel("n_chain");
  trace.add_channel("energy");

  const long long n_steps =
      t_final > 0.0 ? std::llround(std::floor(t_final / dt_record + 1e-9)) : 0;
  for (long long step = 0; step <= n_steps; ++step) {
    const double t = step * dt_record;
    const ModeFlow flow = mode_flow(freq, t);
    const Eigen::VectorXd& cw = flow.cos_wt;
    const Eigen::VectorXd& sw = flow.sin_over;
    const Eigen::VectorXd& ms = flow.minus_wsin;

    auto var_q = [&](const Eigen::VectorXd& row) {
      const Eigen::VectorXd xc = row.cwiseProduct(cw);
      const Eigen::VectorXd xs = row.cwiseProduct(sw);
      return xc.dot(a0 * xc) + 2.0 * xc.dot(b0 * xs) + xs.dot(c0 * xs);
    };
    auto var_p = [&](const Eigen::VectorXd& row) {
      const Eigen::VectorXd xm = row.cwiseProduct(ms);
      const Eigen::VectorXd xc = row.cwiseProduct(cw);
      return xm.dot(a0 * xm) + 2.0 * xm.dot(b0 * xc) + xc.dot(c0 * xc);
    };

    const double n_s =
        0.5 * (w_anc * var_q(u_s) + var_p(u_s) / w_anc - 1.0);
    const double n_r =
        0.5 * (w_anc * var_q(u_r) + var_p(u_r) / w_anc - 1.0);

    const double tr_q = cw.dot(gq_a * cw) + 2.0 * cw.dot(gq_b * sw) +
                        sw.dot(gq_c * sw);
    const double tr_p = ms.dot(gp_a * ms) + 2.0 * ms.dot(gp_b * cw) +
                        cw.dot(gp_c * cw);
    const double n_chain = 0.5 * (tr_q + tr_p) - 0.5 * n;

    double energy = 0.0;
    for (int j = 0; j < m; ++j) {
      const double aqq = cw[j] * cw[j] * a0(j, j) + 2.0 * cw[j] * sw[j] * b0(j, j) +
                         sw[j] * sw[j] * c0(j, j);
      const double app = ms[j] * ms[j] * a0(j, j) + 2.0 * ms[j] * cw[j] * b0(j, j) +
                         cw[j] * cw[j] * c0(j, j);
      energy += 0.5 * (app + freq[j] * freq[j] * aqq);
    }

    trace.add_row(t, {n_s, n_r, n_chain, energy});
  }
  return trace;
}

}  // namespace gapchannel::gaussian
