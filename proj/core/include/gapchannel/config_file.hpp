#ifndef GAPCHANNEL_CONFIG_FILE_HPP
#define GAPCHANNEL_CONFIG_FILE_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gapchannel/model.hpp"

namespace gapchannel {

//! Flat key=value configuration file. '#' starts a comment, blank lines are
//! ignored, keys match the config field names exactly (n_sites, b_field, j_x,
//! j_y, j_z, b_ancilla, j_ancilla, m_sender, m_receiver, boundary,
//! omega_coupling, omega_onsite, omega_ancilla) plus free-form run keys
//! (t_final, dt_record, chi_max, ...). Duplicate keys are an error.
class KeyValueFile {
 public:
  static KeyValueFile parse_file(const std::string& path);
  static KeyValueFile parse_string(const std::string& text);

  bool has(const std::string& key) const;
  //! Typed getters throw std::invalid_argument naming the offending key.
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  int get_int_or(const std::string& key, int fallback) const;
  std::string get_string_or(const std::string& key, const std::string& fallback) const;

  //! Keys never read through a getter; used to reject misspelled keys.
  std::vector<std::string> unread_keys() const;
  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  mutable std::vector<bool> read_;

  const std::string* find(const std::string& key) const;
};

//! Builds a validated spin config from the model keys of `kv`.
SpinSystemConfig spin_config_from(const KeyValueFile& kv);
//! Builds a validated harmonic config from the model keys of `kv`.
HarmonicSystemConfig harmonic_config_from(const KeyValueFile& kv);

//! Config snapshot entries for traces, in a fixed documented order.
std::vector<std::pair<std::string, std::string>> config_snapshot(
    const SpinSystemConfig& config);
std::vector<std::pair<std::string, std::string>> config_snapshot(
    const HarmonicSystemConfig& config);

}  // namespace gapchannel

#endif
