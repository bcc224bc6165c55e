#ifndef GAPCHANNEL_TRACE_HPP
#define GAPCHANNEL_TRACE_HPP

#include <string>
#include <utility>
#include <vector>

namespace gapchannel {

//! Time series of observables produced by any backend, together with a config
//! snapshot sufficient to reproduce the run bit-for-bit on the same build.
//!
//! Channel names in use: P_dd, P_ud, P_du, P_uu and energy for spin runs
//! (plus rho_re_ij / rho_im_ij for the two-ancilla reduced density matrix and
//! truncation_weight for MPS runs); n_S, n_R, n_chain, energy for harmonic
//! runs; E_N / E_N_approx for entanglement runs.
struct TransferTrace {
  std::string backend;
  std::vector<std::pair<std::string, std::string>> config;  // ordered key=value
  std::vector<double> times;
  std::vector<std::string> channel_names;
  std::vector<std::vector<double>> channels;  // channel-major, aligned with times

  std::size_t n_samples() const { return times.size(); }

  void set_config(const std::string& key, double value);
  void set_config(const std::string& key, const std::string& value);

  //! Registers a channel; returns its index. Values are appended via row().
  int add_channel(const std::string& name);
  //! Appends one sample row; `values` must match channel order and count.
  void add_row(double time, const std::vector<double>& values);

  //! Column lookup by name; throws std::out_of_range on unknown channel.
  const std::vector<double>& channel(const std::string& name) const;
  bool has_channel(const std::string& name) const;
};

//! Plain-text trace format: '#' header lines carrying a schema version, the
//! config snapshot as key=value pairs and the column order; then one
//! comma-separated row per sample, time first. Numbers round-trip exactly
//! (17 significant digits). Writes are whole-file atomic.
void serialize_trace(const TransferTrace& trace, const std::string& path);
TransferTrace parse_trace(const std::string& path);

//! In-memory serialization used by the file writer and by determinism tests.
std::string trace_to_string(const TransferTrace& trace);

}  // namespace gapchannel

#endif
