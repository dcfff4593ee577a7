#pragma once

#include "thermomesh/config.hpp"
#include "thermomesh/mesh_model.hpp"
#include "thermomesh/rng.hpp"

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace fixtures {

inline std::string config_path(const std::string& name) {
    return std::string(THERMOMESH_CONFIG_DIR) + "/" + name + ".yaml";
}

inline thermomesh::RunConfig shipped(const std::string& name) { return thermomesh::load_config(config_path(name)); }

inline thermomesh::MaterialSet with(thermomesh::MaterialSet m, thermomesh::InterlayerModel::Variant v) {
    m.interlayer = thermomesh::InterlayerModel(std::move(v));
    return m;
}

inline thermomesh::MeshSpec sized(thermomesh::MeshSpec mesh, std::size_t rows, std::size_t cols) {
    mesh.rows = rows;
    mesh.cols = cols;
    return mesh;
}

struct Variant {
    std::string name;
    thermomesh::MaterialSet materials;
    thermomesh::OperatingRange range;
};

/// One material set per interlayer variant, shipped parameters where a config exists.
inline std::vector<Variant> all_variants() {
    const auto lin = shipped("linear_16x16");
    const auto cer = shipped("ceramic_16x16");
    const auto vo2 = shipped("vo2_16x16");
    const auto sw = shipped("switch_16x16");
    return {
        {"none", with(lin.materials, thermomesh::NoInterlayer{}), lin.range},
        {"constant_r", lin.materials, lin.range},
        {"ntc", cer.materials, cer.range},
        {"vo2", vo2.materials, vo2.range},
        {"ideal_switch", sw.materials, sw.range},
    };
}

/// Relative temperatures uniform on [0, span] with a fraction of pixels left at zero.
inline std::vector<double> random_state(thermomesh::SplitMix64& rng, std::size_t pixels, double span,
                                        double zero_fraction = 0.3) {
    std::vector<double> t(pixels, 0.0);
    for (auto& v : t) {
        if (rng.uniform() >= zero_fraction) v = span * rng.uniform();
    }
    return t;
}

}  // namespace fixtures
