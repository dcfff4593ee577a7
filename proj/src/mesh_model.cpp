#include "thermomesh/mesh_model.hpp"

#include "thermomesh/errors.hpp"

#include <cmath>
#include <string>

namespace thermomesh {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) {
        throw ValidationError(what);
    }
}

bool positive(double x) { return std::isfinite(x) && x > 0.0; }

void validate_ntc(const Ntc& law, const std::string& ctx) {
    require(positive(law.rho0), ctx + ": rho0 must be > 0");
    require(positive(law.beta), ctx + ": beta must be > 0");
    require(positive(law.t0), ctx + ": t0 must be > 0");
}

// Resistivity continuity at segment joins, relative.
constexpr double kJoinTolerance = 0.01;

}  // namespace

void MeshSpec::validate() const {
    require(rows >= 2 && cols >= 2, "mesh: rows and cols must be >= 2");
    require(positive(pitch), "mesh: pitch must be > 0");
    require(positive(wire_cross_section), "mesh: wire_cross_section must be > 0");
    require(positive(interlayer_area), "mesh: interlayer_area must be > 0");
    require(positive(interlayer_thickness), "mesh: interlayer_thickness must be > 0");
    require(std::isfinite(lead_length_fraction) && lead_length_fraction >= 0.0 && lead_length_fraction <= 1.0,
            "mesh: lead_length_fraction must lie in [0, 1]");
}

double Ntc::resistivity(double temperature) const {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw DomainError("ntc: temperature must be a positive absolute temperature");
    }
    return rho0 * std::exp(beta * (1.0 / temperature - 1.0 / t0));
}

double Vo2Piecewise::resistivity(double temperature) const {
    for (const auto& seg : segments) {
        if (temperature >= seg.t_low && temperature <= seg.t_high) {
            return seg.law.resistivity(temperature);
        }
    }
    throw DomainError("vo2: temperature " + std::to_string(temperature) + " K outside segment coverage [" +
                      std::to_string(segments.front().t_low) + ", " + std::to_string(segments.back().t_high) + "]");
}

InterlayerModel::InterlayerModel(Variant v) : v_(std::move(v)) {
    if (const auto* c = std::get_if<ConstantR>(&v_)) {
        require(positive(c->resistance), "constant_r: resistance must be > 0");
    } else if (const auto* n = std::get_if<Ntc>(&v_)) {
        validate_ntc(*n, "ntc");
    } else if (const auto* p = std::get_if<Vo2Piecewise>(&v_)) {
        require(!p->segments.empty(), "vo2: at least one segment required");
        for (std::size_t k = 0; k < p->segments.size(); ++k) {
            const auto& seg = p->segments[k];
            const std::string ctx = "vo2 segment " + std::to_string(k);
            validate_ntc(seg.law, ctx);
            require(seg.t_low > 0.0 && seg.t_high > seg.t_low, ctx + ": need 0 < t_low < t_high");
            if (k > 0) {
                const auto& prev = p->segments[k - 1];
                require(seg.t_low == prev.t_high, ctx + ": segments must be contiguous and ordered");
                const double left = prev.law.resistivity(prev.t_high);
                const double right = seg.law.resistivity(seg.t_low);
                require(std::abs(left - right) <= kJoinTolerance * std::max(left, right),
                        ctx + ": resistivity discontinuous at join (> 1%)");
            }
        }
    } else if (const auto* s = std::get_if<IdealSwitch>(&v_)) {
        require(positive(s->t_threshold), "ideal_switch: t_threshold must be > 0");
        require(positive(s->r_closed) && positive(s->r_open), "ideal_switch: resistances must be > 0");
        require(s->r_open / s->r_closed >= 1e6, "ideal_switch: r_open / r_closed must be >= 1e6");
    }
}

bool InterlayerModel::temperature_dependent() const {
    return std::holds_alternative<Ntc>(v_) || std::holds_alternative<Vo2Piecewise>(v_) ||
           std::holds_alternative<IdealSwitch>(v_);
}

std::string InterlayerModel::tag() const {
    struct Visitor {
        std::string operator()(const NoInterlayer&) const { return "none"; }
        std::string operator()(const ConstantR&) const { return "constant_r"; }
        std::string operator()(const Ntc&) const { return "ntc"; }
        std::string operator()(const Vo2Piecewise&) const { return "vo2"; }
        std::string operator()(const IdealSwitch&) const { return "ideal_switch"; }
    };
    return std::visit(Visitor{}, v_);
}

void MaterialSet::validate() const {
    require(std::isfinite(seebeck_leg_a) && std::isfinite(seebeck_leg_b), "materials: seebeck must be finite");
    require(seebeck_leg_a - seebeck_leg_b > 0.0, "materials: seebeck_leg_a - seebeck_leg_b must be > 0");
    require(positive(resistivity_leg_a) && positive(resistivity_leg_b), "materials: resistivities must be > 0");
    require(positive(interlayer_rel_permittivity), "materials: interlayer_rel_permittivity must be > 0");
    require(positive(reference_temperature), "materials: reference_temperature must be > 0");
}

void OperatingRange::validate() const {
    require(positive(t_min) && positive(t_max) && positive(t_amb), "range: temperatures must be > 0");
    require(t_min <= t_amb && t_amb < t_max, "range: need t_min <= t_amb < t_max");
}

double interlayer_resistance(const InterlayerModel& model, const MeshSpec& geometry, double temperature) {
    require(positive(geometry.interlayer_area) && positive(geometry.interlayer_thickness),
            "interlayer geometry must be positive");
    const double shape = geometry.interlayer_thickness / geometry.interlayer_area;
    struct Visitor {
        double shape;
        double t;
        double operator()(const NoInterlayer&) const { return 0.0; }
        double operator()(const ConstantR& c) const { return c.resistance; }
        double operator()(const Ntc& n) const { return n.resistivity(t) * shape; }
        double operator()(const Vo2Piecewise& p) const { return p.resistivity(t) * shape; }
        double operator()(const IdealSwitch& s) const { return t >= s.t_threshold ? s.r_closed : s.r_open; }
    };
    return std::visit(Visitor{shape, temperature}, model.variant());
}

double interlayer_resistivity(const InterlayerModel& model, const MeshSpec& geometry, double temperature) {
    const double r = interlayer_resistance(model, geometry, temperature);
    return r * geometry.interlayer_area / geometry.interlayer_thickness;
}

double rc_time_constant(double resistivity, double rel_permittivity) {
    return resistivity * kVacuumPermittivity * rel_permittivity;
}

double rc_time_constant(const MaterialSet& materials, const MeshSpec& geometry, double temperature) {
    return rc_time_constant(interlayer_resistivity(materials.interlayer, geometry, temperature),
                            materials.interlayer_rel_permittivity);
}

}  // namespace thermomesh
