#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dcm/linkage.hpp"
#include "dcm/simulation.hpp"

namespace dcm {

/// "%.17g": round-trips every finite double.
std::string format_number(double x);

/// Header plus numeric rows.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Index of a column; throws ValidationError if absent.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

/// Writes a table. Throws IoError on failure.
void write_csv(const std::filesystem::path& path, const CsvTable& table);
/// Reads a table; every row must have as many fields as the header.
/// Throws IoError when unreadable and ValidationError on a malformed body.
CsvTable read_csv(const std::filesystem::path& path);

/// t, particle, x, y for every stored frame.
CsvTable trajectory_table(const Trajectory& traj);
/// One row per step: t, I_n, cumulative_dissipation, F, ledger_slack, msd,
/// activation, kkt_stationarity, kkt_feasibility, min_distance, followed by
/// kkt_complementarity, h1_sum, iterations, converged.
CsvTable diagnostics_table(const Trajectory& traj);
/// t, i, j, lambda for every nonzero multiplier.
CsvTable multipliers_table(const Trajectory& traj);
/// l, a_l, then R_<i> per particle.
CsvTable density_table(const DensityGrid& grid);

/// trajectory.csv, diagnostics.csv and multipliers.csv in dir.
void write_run(const std::filesystem::path& dir, const Trajectory& traj);

/// Writes the whole text or throws IoError.
void write_text(const std::filesystem::path& path, const std::string& text);

/// Creates dir (and parents). Throws IoError if it is not a writable directory.
void ensure_directory(const std::filesystem::path& dir);

}  // namespace dcm
