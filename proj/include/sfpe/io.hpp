#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sfpe/audit.hpp"
#include "sfpe/density.hpp"
#include "sfpe/models.hpp"
#include "sfpe/solver.hpp"

namespace sfpe {

// ---- hashing ----------------------------------------------------------

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file(const std::filesystem::path& path);

// ---- pools file -------------------------------------------------------
// One JSON header line, then m*N*d little-endian IEEE doubles
// (pool-major, then sample-major, then coordinate).

void write_pools(const std::filesystem::path& path, const std::vector<SamplePool>& pools);
std::vector<SamplePool> read_pools(const std::filesystem::path& path);

// ---- CSV --------------------------------------------------------------

/// One row per grid point: coordinates then value.
void write_density_csv(const std::filesystem::path& path, const DensityGrid& grid);

/// One row per run, one column per scaled statistic component.
void write_samples_csv(const std::filesystem::path& path, const Eigen::MatrixXd& samples);
Eigen::MatrixXd read_samples_csv(const std::filesystem::path& path);

// ---- JSON views -------------------------------------------------------

nlohmann::json to_json(const ConditionReport& report);
nlohmann::json to_json(const SupportAudit& audit);
nlohmann::json to_json(const LatticeAudit& audit);
nlohmann::json to_json(const SolveDiagnostics& diag);
nlohmann::json to_json(const DensityGrid& grid);

/// Parses JSON with "line N, column M" diagnostics on failure.
nlohmann::json parse_json_file(const std::filesystem::path& path);
nlohmann::json parse_json_text(const std::string& text, const std::string& origin);

/// Model described by {"model": name, ...params} or {"model":"custom",...}
/// with inline finite-support coefficient tables.
ModelConfig model_from_json(const nlohmann::json& j);
EquationSystem system_from_json(const nlohmann::json& j);

// ---- run manifest -----------------------------------------------------

struct RunManifest {
  std::string command;
  nlohmann::json config;  // full echo: every input needed to re-run
  std::uint64_t seed = 0;
  int threads = 1;
  std::string version;
  double wall_clock_s = 0;
  std::vector<std::pair<std::string, std::string>> outputs;  // (path, sha256)
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace sfpe
