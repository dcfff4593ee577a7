#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace thermomesh {

/// Junction temperatures relative to the cold junction [K], row-major over the MN pixels.
struct TemperatureField {
    std::vector<double> values;

    /// Number of nonzero entries (the l0 "norm").
    std::size_t sparsity() const;

    static TemperatureField zeros(std::size_t pixels) { return {std::vector<double>(pixels, 0.0)}; }
    static TemperatureField single(std::size_t pixels, std::size_t pixel, double delta_t);
};

/// Boundary voltages [V], one per perimeter channel.
struct BoundaryReading {
    std::vector<double> voltages;
    double noise_std = 0.0;
    std::optional<double> snr_db;
    std::optional<std::uint64_t> seed;
};

}  // namespace thermomesh
