#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "nsdg/bench.hpp"

namespace nsdg {

namespace {

constexpr const char* kHeader =
    "scheme,k,h_max,field_dofs,system_dofs,u_error,u_order,p_error,p_order,wall_time,status";

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double to_double(const std::string& s, int line) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty())
    throw std::runtime_error("report line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

std::optional<double> to_optional(const std::string& s, int line) {
  if (s.empty()) return std::nullopt;
  return to_double(s, line);
}

}  // namespace

void write_report_csv(std::ostream& out, const ConvergenceReport& report) {
  for (const auto& [key, value] : report.metadata) out << "# " << key << '=' << value << '\n';
  out << kHeader << '\n';
  for (const auto& r : report.rows) {
    out << r.scheme << ',' << r.k << ',' << fmt(r.h_max) << ',' << r.field_dofs << ',' << r.system_dofs << ','
        << fmt(r.u_error) << ',' << fmt(r.u_order) << ',' << fmt(r.p_error) << ',' << fmt(r.p_order) << ','
        << fmt(r.wall_time) << ',' << (r.failed ? "failed" : "ok") << '\n';
  }
}

ConvergenceReport parse_report_csv(std::istream& in) {
  ConvergenceReport rep;
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw std::runtime_error("report line " + std::to_string(lineno) + ": bad metadata");
      rep.metadata[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    if (!header) {
      if (line != kHeader) throw std::runtime_error("report line " + std::to_string(lineno) + ": unexpected header");
      header = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 11)
      throw std::runtime_error("report line " + std::to_string(lineno) + ": expected 11 fields");
    ReportRow r;
    r.scheme = f[0];
    r.k = static_cast<int>(to_double(f[1], lineno));
    r.h_max = to_double(f[2], lineno);
    r.field_dofs = static_cast<int>(to_double(f[3], lineno));
    r.system_dofs = static_cast<int>(to_double(f[4], lineno));
    r.u_error = to_optional(f[5], lineno);
    r.u_order = to_optional(f[6], lineno);
    r.p_error = to_optional(f[7], lineno);
    r.p_order = to_optional(f[8], lineno);
    r.wall_time = to_double(f[9], lineno);
    if (f[10] != "ok" && f[10] != "failed")
      throw std::runtime_error("report line " + std::to_string(lineno) + ": bad status '" + f[10] + "'");
    r.failed = f[10] == "failed";
    rep.rows.push_back(r);
  }
  if (!header) throw std::runtime_error("report: missing header");
  return rep;
}

}  // namespace nsdg
