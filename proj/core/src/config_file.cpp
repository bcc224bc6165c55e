#include "gapchannel/config_file.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gapchannel {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_string(os.str());
}

KeyValueFile KeyValueFile::parse_string(const std::string& text) {
  KeyValueFile kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  " is not of the form key=value: '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  " has an empty key");
    for (const auto& e : kv.entries_)
      if (e.first == key)
        throw std::invalid_argument("duplicate config key '" + key + "'");
    kv.entries_.emplace_back(key, value);
  }
  kv.read_.assign(kv.entries_.size(), false);
  return kv;
}

const std::string* KeyValueFile::find(const std::string& key) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first == key) {
      read_[i] = true;
      return &entries_[i].second;
    }
  }
  return nullptr;
}

bool KeyValueFile::has(const std::string& key) const { return find(key) != nullptr; }

double KeyValueFile::get_double(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) throw std::invalid_argument("missing config key '" + key + "'");
  char* end = nullptr;
  const double x = std::strtod(v->c_str(), &end);
  if (end == v->c_str() || *end != '\0')
    throw std::invalid_argument("config key '" + key + "' has non-numeric value '" +
                                *v + "'");
  return x;
}

int KeyValueFile::get_int(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) throw std::invalid_argument("missing config key '" + key + "'");
  char* end = nullptr;
  const long x = std::strtol(v->c_str(), &end, 10);
  if (end == v->c_str() || *end != '\0')
    throw std::invalid_argument("config key '" + key + "' has non-integer value '" +
                                *v + "'");
  return static_cast<int>(x);
}

std::string KeyValueFile::get_string(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) throw std::invalid_argument("missing config key '" + key + "'");
  return *v;
}

double KeyValueFile::get_double_or(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int KeyValueFile::get_int_or(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::string KeyValueFile::get_string_or(const std::string& key,
                                        const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

std::vector<std::string> KeyValueFile::unread_keys() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (!read_[i]) out.push_back(entries_[i].first);
  return out;
}

namespace {

Boundary boundary_from(const KeyValueFile& kv, const std::string& fallback) {
  const std::string b = kv.get_string_or("boundary", fallback);
  if (b == "open") return Boundary::open;
  if (b == "periodic") return Boundary::periodic;
  throw std::invalid_argument("config key 'boundary' must be open or periodic, got '" +
                              b + "'");
}

}  // namespace

SpinSystemConfig spin_config_from(const KeyValueFile& kv) {
  SpinSystemConfig c;
  c.n_sites = kv.get_int("n_sites");
  c.b_field = kv.get_double("b_field");
  c.j_x = kv.get_double_or("j_x", 0.0);
  c.j_y = kv.get_double_or("j_y", 0.0);
  c.j_z = kv.get_double_or("j_z", 0.0);
  c.b_ancilla = kv.get_double("b_ancilla");
  c.j_ancilla = kv.get_double("j_ancilla");
  c.m_sender = kv.get_int("m_sender");
  c.m_receiver = kv.get_int("m_receiver");
  c.boundary = boundary_from(kv, "open");
  c.allow_boundary_placement = kv.get_int_or("allow_boundary_placement", 0) != 0;
  validate(c);
  return c;
}

HarmonicSystemConfig harmonic_config_from(const KeyValueFile& kv) {
  HarmonicSystemConfig c;
  c.n_sites = kv.get_int("n_sites");
  c.omega_coupling = kv.get_double("omega_coupling");
  c.omega_onsite = kv.get_double("omega_onsite");
  c.omega_ancilla = kv.get_double("omega_ancilla");
  c.j_ancilla = kv.get_double("j_ancilla");
  c.m_sender = kv.get_int("m_sender");
  c.m_receiver = kv.get_int("m_receiver");
  c.boundary = boundary_from(kv, "periodic");
  validate(c);
  return c;
}

std::vector<std::pair<std::string, std::string>> config_snapshot(
    const SpinSystemConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("model", "spin");
  out.emplace_back("n_sites", std::to_string(c.n_sites));
  out.emplace_back("b_field", format_double(c.b_field));
  out.emplace_back("j_x", format_double(c.j_x));
  out.emplace_back("j_y", format_double(c.j_y));
  out.emplace_back("j_z", format_double(c.j_z));
  out.emplace_back("b_ancilla", format_double(c.b_ancilla));
  out.emplace_back("j_ancilla", format_double(c.j_ancilla));
  out.emplace_back("m_sender", std::to_string(c.m_sender));
  out.emplace_back("m_receiver", std::to_string(c.m_receiver));
  out.emplace_back("boundary", "open");
  return out;
}

std::vector<std::pair<std::string, std::string>> config_snapshot(
    const HarmonicSystemConfig& c) {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("model", "harmonic");
  out.emplace_back("n_sites", std::to_string(c.n_sites));
  out.emplace_back("omega_coupling", format_double(c.omega_coupling));
  out.emplace_back("omega_onsite", format_double(c.omega_onsite));
  out.emplace_back("omega_ancilla", format_double(c.omega_ancilla));
  out.emplace_back("j_ancilla", format_double(c.j_ancilla));
  out.emplace_back("m_sender", std::to_string(c.m_sender));
  out.emplace_back("m_receiver", std::to_string(c.m_receiver));
  out.emplace_back("boundary", "periodic");
  return out;
}

}  // namespace gapchannel
