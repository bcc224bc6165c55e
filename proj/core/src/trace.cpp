#include "gapchannel/trace.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gapchannel {

namespace {

constexpr const char* kSchema = "gapchannel.trace.v1";

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

void TransferTrace::set_config(const std::string& key, double value) {
  set_config(key, format_double(value));
}

void TransferTrace::set_config(const std::string& key, const std::string& value) {
  for (auto& kv : config) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  config.emplace_back(key, value);
}

int TransferTrace::add_channel(const std::string& name) {
  channel_names.push_back(name);
  channels.emplace_back();
  return static_cast<int>(channel_names.size()) - 1;
}

void TransferTrace::add_row(double time, const std::vector<double>& values) {
  if (values.size() != channel_names.size())
    throw std::invalid_argument("trace row size does not match channel count");
  times.push_back(time);
  for (std::size_t i = 0; i < values.size(); ++i) channels[i].push_back(values[i]);
}

bool TransferTrace::has_channel(const std::string& name) const {
  for (const auto& n : channel_names)
    if (n == name) return true;
  return false;
}

const std::vector<double>& TransferTrace::channel(const std::string& name) const {
  for (std::size_t i = 0; i < channel_names.size(); ++i)
    if (channel_names[i] == name) return channels[i];
  throw std::out_of_range("trace has no channel named '" + name + "'");
}

std::string trace_to_string(const TransferTrace& trace) {
  std::ostringstream os;
  os << "# schema=" << kSchema << "\n";
  os << "# backend=" << trace.backend << "\n";
  for (const auto& kv : trace.config) os << "# " << kv.first << "=" << kv.second << "\n";
  os << "# columns=time";
  for (const auto& name : trace.channel_names) os << "," << name;
  os << "\n";
  for (std::size_t row = 0; row < trace.times.size(); ++row) {
    os << format_double(trace.times[row]);
    for (const auto& col : trace.channels) os << "," << format_double(col[row]);
    os << "\n";
  }
  return os.str();
}

void serialize_trace(const TransferTrace& trace, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
    out << trace_to_string(trace);
    if (!out) throw std::runtime_error("write failure on '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot rename '" + tmp + "' to '" + path +
                             "': " + std::strerror(errno));
}

TransferTrace parse_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace file '" + path + "'");
  TransferTrace trace;
  bool have_columns = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      if (!body.empty() && body[0] == ' ') body = body.substr(1);
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = body.substr(0, eq);
      const std::string value = body.substr(eq + 1);
      if (key == "schema") {
        if (value != kSchema)
          throw std::runtime_error("unsupported trace schema '" + value + "'");
      } else if (key == "backend") {
        trace.backend = value;
      } else if (key == "columns") {
        auto names = split(value, ',');
        if (names.empty() || names[0] != "time")
          throw std::runtime_error("trace columns must start with 'time'");
        for (std::size_t i = 1; i < names.size(); ++i) trace.add_channel(names[i]);
        have_columns = true;
      } else {
        trace.config.emplace_back(key, value);
      }
      continue;
    }
    if (!have_columns) throw std::runtime_error("trace data before column header");
    const auto fields = split(line, ',');
    if (fields.size() != trace.channel_names.size() + 1)
      throw std::runtime_error("trace row has wrong field count");
    std::vector<double> values(fields.size() - 1);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      char* end = nullptr;
      const double x = std::strtod(fields[i].c_str(), &end);
      if (end == fields[i].c_str())
        throw std::runtime_error("unparseable number '" + fields[i] + "' in trace");
      if (i == 0)
        trace.times.push_back(x);
      else
        values[i - 1] = x;
    }
    for (std::size_t i = 0; i < values.size(); ++i) trace.channels[i].push_back(values[i]);
  }
  return trace;
}

}  // namespace gapchannel
