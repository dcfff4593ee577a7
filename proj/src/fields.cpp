#include "thermomesh/fields.hpp"

#include "thermomesh/errors.hpp"

#include <algorithm>

namespace thermomesh {

std::size_t TemperatureField::sparsity() const {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double v) { return v != 0.0; }));
}

TemperatureField TemperatureField::single(std::size_t pixels, std::size_t pixel, double delta_t) {
    if (pixel >= pixels) {
        throw ValidationError("pixel index out of range");
    }
    TemperatureField t = zeros(pixels);
    t.values[pixel] = delta_t;
    return t;
}

}  // namespace thermomesh
