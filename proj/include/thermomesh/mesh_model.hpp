#pragma once

// Sensor geometry, thermocouple materials and interlayer laws.
//
// The mesh is two conductor planes: layer 1 carries M leg-a wires along the
// rows, layer 2 carries N leg-b wires along the columns. Each crossing (i, j)
// is a junction (pixel) where the planes are coupled through an interlayer
// element. All quantities are SI; temperatures are absolute kelvin unless a
// name says "relative".

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

namespace thermomesh {

/// Vacuum permittivity [F/m] (CODATA 2018).
inline constexpr double kVacuumPermittivity = 8.8541878128e-12;

struct MeshSpec {
    std::size_t rows = 16;                  // M
    std::size_t cols = 16;                  // N
    double pitch = 50e-6;                   // junction spacing [m]
    double wire_cross_section = 1e-11;      // [m^2]
    double interlayer_area = 1e-10;         // crossing overlap area [m^2]
    double interlayer_thickness = 1e-6;     // [m]
    double lead_length_fraction = 0.5;      // boundary lead length / pitch

    /// Throws ValidationError when an invariant is violated.
    void validate() const;

    std::size_t pixel_count() const { return rows * cols; }
    std::size_t channel_count() const { return 2 * rows + 2 * cols; }
    double pixel_area() const { return pitch * pitch; }
    double sensing_area() const {
        return (static_cast<double>(rows) * pitch) * (static_cast<double>(cols) * pitch);
    }
    /// Row-major pixel index p = i * N + j (zero based).
    std::size_t pixel(std::size_t row, std::size_t col) const { return row * cols + col; }
};

// ---------------------------------------------------------------------------
// Interlayer variants
// ---------------------------------------------------------------------------

/// Direct metal-metal crossing; the two layer nodes merge into one.
struct NoInterlayer {};

/// Temperature-independent resistor [ohm].
struct ConstantR {
    double resistance = 2.0e3;
};

/// rho(T) = rho0 * exp(beta * (1/T - 1/T0)).
struct Ntc {
    double rho0 = 0.1;      // [ohm m] at t0
    double beta = 4000.0;   // [K]
    double t0 = 1273.0;     // [K]

    double resistivity(double temperature) const;
};

/// One beta-law piece valid on [t_low, t_high].
struct NtcSegment {
    double t_low = 0.0;
    double t_high = 0.0;
    Ntc law;
};

/// Piecewise beta-law fit across the VO2 metal-insulator transition.
struct Vo2Piecewise {
    std::vector<NtcSegment> segments;

    double resistivity(double temperature) const;
};

/// Idealized thermal switch: closed at and above the threshold.
struct IdealSwitch {
    double t_threshold = 350.0;   // [K]
    double r_closed = 1.0;        // [ohm]
    double r_open = 1.0e12;       // [ohm]
};

class InterlayerModel {
public:
    using Variant = std::variant<NoInterlayer, ConstantR, Ntc, Vo2Piecewise, IdealSwitch>;

    InterlayerModel() = default;
    /// Validates the variant's invariants; throws ValidationError.
    explicit InterlayerModel(Variant v);

    const Variant& variant() const { return v_; }
    bool merged() const { return std::holds_alternative<NoInterlayer>(v_); }
    bool temperature_dependent() const;
    /// "none", "constant_r", "ntc", "vo2", "ideal_switch".
    std::string tag() const;

private:
    Variant v_{NoInterlayer{}};
};

struct MaterialSet {
    double seebeck_leg_a = 21.7e-6;       // [V/K], e.g. Chromel
    double seebeck_leg_b = -17.3e-6;      // [V/K], e.g. Alumel
    double resistivity_leg_a = 7.06e-7;   // [ohm m]
    double resistivity_leg_b = 2.9e-7;    // [ohm m]
    InterlayerModel interlayer;
    double interlayer_rel_permittivity = 10.0;
    /// Cold-junction / ambient temperature that relative temperatures are measured from [K].
    double reference_temperature = 298.0;

    void validate() const;
    double seebeck_pair() const { return seebeck_leg_a - seebeck_leg_b; }
};

struct OperatingRange {
    double t_min = 298.0;
    double t_max = 373.0;
    double t_amb = 298.0;

    void validate() const;
};

/// Interlayer resistance at absolute temperature `temperature`.
///
/// NoInterlayer returns 0, meaning "merged node" rather than a physical
/// resistor. IdealSwitch returns r_closed at or above the threshold and
/// r_open below it. Throws DomainError outside a Vo2Piecewise segment
/// coverage or for non-positive temperatures on beta laws.
double interlayer_resistance(const InterlayerModel& model, const MeshSpec& geometry, double temperature);

/// Interlayer resistivity at `temperature`; ConstantR and IdealSwitch are
/// converted through the parallel-plate geometry. NoInterlayer gives 0.
double interlayer_resistivity(const InterlayerModel& model, const MeshSpec& geometry, double temperature);

/// Junction RC time constant rho(T) * eps0 * eps_r (parallel-plate limit).
double rc_time_constant(double resistivity, double rel_permittivity);

/// RC time constant of the configured interlayer at `temperature`. The
/// geometry only matters for variants specified by resistance; for beta
/// laws the result is geometry independent.
double rc_time_constant(const MaterialSet& materials, const MeshSpec& geometry, double temperature);

}  // namespace thermomesh
