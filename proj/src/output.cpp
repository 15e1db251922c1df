#include "dcm/output.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dcm/errors.hpp"

namespace dcm {

namespace fs = std::filesystem;

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < columns.size(); ++k)
    if (columns[k] == name) return k;
  throw ValidationError("csv: missing column \"" + name + "\"");
}

bool CsvTable::has_column(const std::string& name) const {
  for (const auto& c : columns)
    if (c == name) return true;
  return false;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("error writing " + path.string());
}

void write_csv(const fs::path& path, const CsvTable& table) {
  std::string text;
  for (std::size_t k = 0; k < table.columns.size(); ++k) text += (k ? "," : "") + table.columns[k];
  text += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) text += ',';
      text += format_number(row[k]);
    }
    text += '\n';
  }
  write_text(path, text);
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.columns = split(line);
  if (t.columns.empty()) throw ValidationError(path.string() + ": empty header");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != t.columns.size())
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.columns.size()) + " fields, got " + std::to_string(fields.size()));
    std::vector<double> row;
    for (const auto& f : fields) {
      char* end = nullptr;
      const double x = std::strtod(f.c_str(), &end);
      if (f.empty() || end != f.c_str() + f.size())
        throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": not a number: \"" + f + "\"");
      row.push_back(x);
    }
    t.rows.push_back(std::move(row));
  }
  if (in.bad()) throw IoError("error reading " + path.string());
  return t;
}

CsvTable trajectory_table(const Trajectory& traj) {
  CsvTable t{{"t", "particle", "x", "y"}, {}};
  for (const auto& f : traj.frames)
    for (std::size_t i = 0; i < traj.n_particles; ++i)
      t.rows.push_back({f.t, static_cast<double>(i), f.q[2 * static_cast<Eigen::Index>(i)],
                        f.q[2 * static_cast<Eigen::Index>(i) + 1]});
  return t;
}

CsvTable diagnostics_table(const Trajectory& traj) {
  CsvTable t{{"t", "I_n", "cumulative_dissipation", "F", "ledger_slack", "msd", "activation", "kkt_stationarity",
              "kkt_feasibility", "min_distance", "kkt_complementarity", "h1_sum", "iterations", "converged"},
             {}};
  for (const auto& d : traj.diagnostics)
    t.rows.push_back({d.t, d.delay_quadratic, d.cumulative_dissipation, d.load, d.ledger_slack, d.msd, d.activation,
                      d.kkt.stationarity, d.kkt.feasibility, d.min_distance, d.kkt.complementarity, d.h1_sum,
                      static_cast<double>(d.iterations), d.converged ? 1.0 : 0.0});
  return t;
}

CsvTable multipliers_table(const Trajectory& traj) {
  CsvTable t{{"t", "i", "j", "lambda"}, {}};
  for (std::size_t k = 0; k < traj.multipliers.size() && k < traj.diagnostics.size(); ++k)
    for (const auto& m : traj.multipliers[k])
      t.rows.push_back({traj.diagnostics[k].t, static_cast<double>(m.i), static_cast<double>(m.j), m.lambda});
  return t;
}

CsvTable density_table(const DensityGrid& grid) {
  CsvTable t{{"l", "a_l"}, {}};
  for (std::size_t i = 0; i < grid.size(); ++i) t.columns.push_back("R_" + std::to_string(i));
  for (std::size_t l = 0; l <= grid.L_max; ++l) {
    std::vector<double> row{static_cast<double>(l), static_cast<double>(l) * grid.delta_a};
    for (const auto& p : grid.particles) row.push_back(l < p.R.size() ? p.R[l] : 0.0);
    t.rows.push_back(std::move(row));
  }
  return t;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".dcm_write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

void write_run(const fs::path& dir, const Trajectory& traj) {
  ensure_directory(dir);
  write_csv(dir / "trajectory.csv", trajectory_table(traj));
  write_csv(dir / "diagnostics.csv", diagnostics_table(traj));
  write_csv(dir / "multipliers.csv", multipliers_table(traj));
}

}  // namespace dcm
