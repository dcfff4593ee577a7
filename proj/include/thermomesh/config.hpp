#pragma once

// Run configuration: YAML file -> validated RunConfig. See
// docs/config_schema.md for keys and units.

#include "thermomesh/errors.hpp"
#include "thermomesh/mesh_model.hpp"
#include "thermomesh/rare_event.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace thermomesh {

/// Malformed or inconsistent configuration (CLI exit code 2).
class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

struct SweepConfig {
    std::vector<double> r_grid;                                // [ohm]
    std::vector<std::pair<std::size_t, std::size_t>> sizes;    // (rows, cols)
    bool size_plateau = true;                                  // false: configured R
    std::size_t full_map_max_pixels = 64 * 64;
    std::optional<double> t_hot;                               // [K]; default t_max
    double kappa_t_amb = 0.0;                                  // [K]; default t_amb
    std::vector<double> kappa_dt;                              // [K]
    std::vector<double> temp_grid;                             // [K]
};

struct DatasetConfig {
    std::size_t n_samples = 1000;
    std::vector<std::optional<double>> snr_db;   // nullopt = noise free
    std::uint64_t seed = 0;
};

struct RecoveryConfig {
    std::string method = "omp";   // "omp" or "matched"
    double amplitude_tolerance = 0.05;
    std::size_t dictionary_points = 64;
};

struct NetConfig {
    double snr_db = 40.0;
    std::optional<double> delta_t;   // [K]; default t_max - t_amb
};

struct RareEventConfig {
    EventStatistics stats;
    std::vector<double> tolerances;
    double ratio_min = 10.0;
    std::vector<double> curve_k;
    std::vector<double> curve_s;
    double mc_s = 0.02;
    std::size_t mc_k = 100;
    std::size_t mc_windows = 100000;
    std::uint64_t mc_seed = 0;
};

struct RunConfig {
    std::string name;
    MeshSpec mesh;
    MaterialSet materials;
    OperatingRange range;
    SweepConfig sweeps;
    DatasetConfig dataset;
    RecoveryConfig recovery;
    NetConfig net;
    std::optional<RareEventConfig> rare_event;
    std::optional<double> readout_energy;   // E_s [J] per sample
    std::string hash;                       // SHA-256 hex of file bytes and overrides

    /// Event temperature used by maps and size sweeps.
    double t_hot() const { return sweeps.t_hot.value_or(range.t_max); }
};

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(const std::string& bytes);

/// Digest of the file bytes followed by one "\n# override <item>" line per
/// override, so a seed passed on the command line changes the hash.
std::string config_hash(const std::string& bytes, const std::vector<std::string>& overrides = {});

/// Parses and validates; throws ConfigError with the offending key path.
RunConfig parse_config(const std::string& yaml_text, const std::vector<std::string>& overrides = {});

/// Reads `path` and parses it. A missing or unreadable file is a ConfigError.
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

}  // namespace thermomesh
