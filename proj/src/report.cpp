#include "covindex/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "covindex/error.hpp"

namespace covindex {

std::string config_hash(const nlohmann::json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render_csv(const Report& report) {
  std::ostringstream os;
  os << "# config: " << report.config.dump() << "\n";
  os << "# config_hash: " << config_hash(report.config) << "\n";
  os << kCsvHeader << "\n";
  for (const ReportRow& r : report.rows) {
    os << csv_field(r.study) << ',' << csv_field(r.space) << ',' << r.N << ',' << r.k << ',';
    if (r.n) os << *r.n;
    os << ',';
    if (r.upper) os << format_number(*r.upper);
    os << ',';
    if (r.lower) os << format_number(*r.lower);
    os << ',' << csv_field(r.kind) << ',' << r.seed << ',' << csv_field(r.notes) << "\n";
  }
  for (const std::string& line : report.footer) os << "# " << line << "\n";
  return os.str();
}

std::string render_json(const Report& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const ReportRow& r : report.rows) {
    rows.push_back({{"study", r.study},
                    {"space", r.space},
                    {"N", r.N},
                    {"k", r.k},
                    {"n", r.n ? nlohmann::json(*r.n) : nlohmann::json(nullptr)},
                    {"upper", r.upper ? nlohmann::json(*r.upper) : nlohmann::json(nullptr)},
                    {"lower", r.lower ? nlohmann::json(*r.lower) : nlohmann::json(nullptr)},
                    {"kind", r.kind},
                    {"seed", r.seed},
                    {"notes", r.notes}});
  }
  nlohmann::json j = {{"config", report.config},
                      {"config_hash", config_hash(report.config)},
                      {"rows", rows},
                      {"footer", report.footer},
                      {"detail", report.detail}};
  return j.dump(2) + "\n";
}

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::InvalidArgument, "cannot open output file: " + tmp.string());
    out << content;
    out.flush();
    if (!out) fail(ErrorKind::InvalidArgument, "cannot write output file: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::InvalidArgument, "cannot rename output into place: " + path);
  }
}

}  // namespace covindex
