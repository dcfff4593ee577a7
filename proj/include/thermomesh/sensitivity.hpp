#pragma once

// Sensitivity metrics over the boundary response: per-pixel swing, minimum
// sensitivity, sweeps over interlayer resistance, mesh size and hot-spot
// temperature, the super-linearity exponent, NET and channel efficiency.

#include "thermomesh/fields.hpp"
#include "thermomesh/mesh_model.hpp"
#include "thermomesh/network.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace thermomesh {

/// max - min over the entries of one boundary response.
double swing(const Eigen::Ref<const Eigen::VectorXd>& column);

struct SensitivityMap {
    std::vector<double> sigma;     // per pixel [V/K]
    double sigma_min = 0.0;
    std::size_t argmin = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::string interlayer_tag;
    std::string state_label;       // "linear", "ambient", "event" or "state"
    std::optional<double> t_hot;   // absolute [K], event maps only
};

SensitivityMap sensitivity_map(const SensitivityMatrix& a);

/// Map of A assembled at `base` (relative temperatures). Label "ambient" when
/// base is all zero, "state" otherwise.
SensitivityMap nonlinear_sensitivity_map(const MeshSpec& mesh, const MaterialSet& materials,
                                         const TemperatureField& base);

/// All junctions at the reference temperature.
TemperatureField ambient_state(const MeshSpec& mesh);
/// Center junction at t_hot (absolute), the rest at the reference temperature.
TemperatureField center_event_state(const MeshSpec& mesh, const MaterialSet& materials, double t_hot);
std::size_t center_pixel(const MeshSpec& mesh);

/// Column j of A(T) where T has only pixel j at t_hot, for every pixel (or
/// those listed). Uses the rank-one event solver where it is well
/// conditioned and direct assembly otherwise (ideal switch).
Eigen::MatrixXd event_columns(const MeshSpec& mesh, const MaterialSet& materials, double t_hot,
                              const std::vector<std::size_t>& pixels = {});

/// Event-state map: sigma_j is the swing of pixel j's own event column.
/// sigma_min over this map is the event minimum sensitivity.
SensitivityMap event_sensitivity_map(const MeshSpec& mesh, const MaterialSet& materials, double t_hot);

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepSample {
    double x = 0.0;
    double value = 0.0;
};

struct SweepResult {
    std::string variant;
    std::string label;
    std::vector<SweepSample> samples;   // strictly increasing x
    std::optional<double> reference;    // e.g. the baseline sigma_min
};

/// Relative change of the sweep value per decade of x, between sample i and
/// the first sample at least a decade above it. nullopt when no such sample.
std::optional<double> per_decade_change(const SweepResult& sweep, std::size_t i);

/// Index of the smallest x whose per-decade change is <= max_change.
std::optional<std::size_t> plateau_onset(const SweepResult& sweep, double max_change = 0.1);

/// sigma_min of the ConstantR variant over R_grid (ascending, positive);
/// `reference` holds the merged-node baseline.
SweepResult sweep_interlayer_R(const MeshSpec& mesh, const MaterialSet& materials, const std::vector<double>& r_grid);

struct MeshSizeOptions {
    enum class LinearMode { plateau, configured };
    LinearMode linear_mode = LinearMode::plateau;
    double t_hot = 0.0;                          // absolute, for temperature-dependent variants
    std::size_t full_linear_max_pixels = 64 * 64;
    std::size_t full_event_max_pixels = 64 * 64;
    double plateau_change = 0.1;
    double plateau_r_max = 1e12;
};

struct MeshSizePoint {
    std::size_t rows = 0;
    std::size_t cols = 0;
    double sigma_min = 0.0;
    double baseline_sigma_min = 0.0;
    double improvement = 0.0;
    std::optional<double> resistance;   // plateau or configured R for ConstantR
    bool full_map = true;               // false: center pixel only
};

struct MeshSizeSweep {
    std::string variant;
    std::vector<MeshSizePoint> points;

    SweepResult sigma() const;
    SweepResult baseline() const;
    SweepResult improvement() const;
};

/// sigma_min per size (ascending pixel count). ConstantR uses the plateau R
/// or the configured R; temperature-dependent variants use the event state
/// at options.t_hot. Sizes above the caps evaluate the center pixel only.
MeshSizeSweep sweep_mesh_size(const std::vector<std::pair<std::size_t, std::size_t>>& sizes, const MeshSpec& geometry,
                              const MaterialSet& materials, const MeshSizeOptions& options = {});

/// sigma_min for one mesh without sweeping R: full map when small enough,
/// otherwise the center pixel. Temperature-dependent variants at t_hot.
MeshSizePoint evaluate_mesh(const MeshSpec& mesh, const MaterialSet& materials, const MeshSizeOptions& options);

/// Event-state sigma_min as a function of the hot temperature (absolute K grid).
SweepResult sweep_event_temperature(const MeshSpec& mesh, const MaterialSet& materials,
                                    const std::vector<double>& t_hot_grid);

/// Log-uniform grid from lo to hi (inclusive) with `per_decade` points per decade.
std::vector<double> log_grid(double lo, double hi, std::size_t per_decade);

/// d ln y / d ln x on a nonuniform grid: three-point central differences in
/// the interior, three-point one-sided at the ends. Requires x, y > 0.
std::vector<double> log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

struct KappaResult {
    SweepResult kappa;       // x = delta T [K], value = kappa
    SweepResult response;    // x = delta T [K], value = center swing [V]
};

/// Super-linearity exponent of the center-pixel swing. The background sits at
/// t_amb (absolute); the center is heated to t_amb + dT. Throws
/// DegenerateError if any swing is <= 0.
KappaResult superlinearity_kappa(const MeshSpec& mesh, const MaterialSet& materials, double t_amb,
                                 const std::vector<double>& dt_grid);

struct ChannelEfficiency {
    std::size_t n_read = 0;
    double eta = 0.0;
};

ChannelEfficiency channel_efficiency(const MeshSpec& mesh);

struct NetReport {
    std::vector<double> per_pixel;   // [K]; +inf for zero-sensitivity pixels
    std::vector<bool> infinite;
    double net_min = 0.0;
    double net_max = 0.0;
    std::size_t argmin = 0;
};

/// NET_j = noise_std / ||a_j - mean(a_j)||_2. Centering makes it independent
/// of the datum channel.
NetReport net(const Eigen::MatrixXd& columns, double noise_std);

/// Noise std giving `snr_db` relative to the mean over pixels of the
/// mean-square boundary signal when each pixel in turn is at delta_t.
double reference_noise_std(const Eigen::MatrixXd& columns, double delta_t, double snr_db);

}  // namespace thermomesh
