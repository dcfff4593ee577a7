#include "thermomesh/sensitivity.hpp"

#include "thermomesh/errors.hpp"
#include "thermomesh/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace thermomesh {

double swing(const Eigen::Ref<const Eigen::VectorXd>& column) {
    if (column.size() == 0) {
        throw ValidationError("swing of an empty response");
    }
    return column.maxCoeff() - column.minCoeff();
}

namespace {

SensitivityMap map_from_columns(const Eigen::MatrixXd& cols, const MeshSpec& mesh, std::string tag,
                                std::string label) {
    SensitivityMap out;
    out.rows = mesh.rows;
    out.cols = mesh.cols;
    out.interlayer_tag = std::move(tag);
    out.state_label = std::move(label);
    out.sigma.resize(static_cast<std::size_t>(cols.cols()));
    for (Eigen::Index j = 0; j < cols.cols(); ++j) {
        out.sigma[static_cast<std::size_t>(j)] = swing(cols.col(j));
    }
    const auto it = std::min_element(out.sigma.begin(), out.sigma.end());
    out.sigma_min = *it;
    out.argmin = static_cast<std::size_t>(it - out.sigma.begin());
    return out;
}

MeshSpec resized(const MeshSpec& geometry, std::size_t rows, std::size_t cols) {
    MeshSpec m = geometry;
    m.rows = rows;
    m.cols = cols;
    return m;
}

// Single-hot-junction columns at a fixed mesh, reusable across temperatures.
class EventSource {
public:
    EventSource(const MeshSpec& mesh, const MaterialSet& materials) : mesh_(mesh), materials_(materials) {
        const auto& v = materials.interlayer.variant();
        rank_one_ = materials.interlayer.temperature_dependent() && !std::holds_alternative<IdealSwitch>(v);
    }

    Eigen::MatrixXd columns(double t_hot, const std::vector<std::size_t>& pixels) {
        std::vector<std::size_t> list = pixels;
        if (list.empty()) {
            list.resize(mesh_.pixel_count());
            for (std::size_t p = 0; p < list.size(); ++p) {
                list[p] = p;
            }
        }
        const double dt = t_hot - materials_.reference_temperature;
        Eigen::MatrixXd out(static_cast<Eigen::Index>(mesh_.channel_count()), static_cast<Eigen::Index>(list.size()));

        if (!materials_.interlayer.temperature_dependent()) {
            const NetworkSystem sys = assemble(mesh_, materials_);
            parallel_for(list.size(), [&](std::size_t k) {
                out.col(static_cast<Eigen::Index>(k)) = sensitivity_column(sys, list[k]);
            });
            return out;
        }
        // A handful of pixels is cheaper by direct assembly than by precomputing every pixel.
        if (rank_one_ && (list.size() > 8 || response_)) {
            if (!response_) {
                response_ = std::make_unique<EventResponse>(mesh_, materials_);
            }
            for (std::size_t k = 0; k < list.size(); ++k) {
                out.col(static_cast<Eigen::Index>(k)) = response_->column(list[k], dt);
            }
            return out;
        }
        parallel_for(list.size(), [&](std::size_t k) {
            const TemperatureField state = TemperatureField::single(mesh_.pixel_count(), list[k], dt);
            const NetworkSystem sys = assemble(mesh_, materials_, state);
            out.col(static_cast<Eigen::Index>(k)) = sensitivity_column(sys, list[k]);
        });
        return out;
    }

private:
    MeshSpec mesh_;
    MaterialSet materials_;
    bool rank_one_ = false;
    std::unique_ptr<EventResponse> response_;
};

void require_ascending(const std::vector<double>& grid, const char* what) {
    if (grid.empty()) {
        throw ValidationError(std::string(what) + ": grid is empty");
    }
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!(grid[k] > 0.0) || !std::isfinite(grid[k])) {
            throw ValidationError(std::string(what) + ": grid values must be positive");
        }
        if (k > 0 && !(grid[k] > grid[k - 1])) {
            throw ValidationError(std::string(what) + ": grid must be strictly ascending");
        }
    }
}

}  // namespace

SensitivityMap sensitivity_map(const SensitivityMatrix& a) {
    if (a.entries.cols() == 0 || a.entries.rows() == 0 ||
        static_cast<std::size_t>(a.entries.cols()) != a.rows * a.cols) {
        throw ValidationError("sensitivity matrix is malformed");
    }
    MeshSpec mesh;
    mesh.rows = a.rows;
    mesh.cols = a.cols;
    const bool zero_state = !a.state || std::all_of(a.state->begin(), a.state->end(), [](double v) { return v == 0.0; });
    const std::string label = !a.state ? "linear" : (zero_state ? "ambient" : "state");
    return map_from_columns(a.entries, mesh, a.interlayer_tag, label);
}

TemperatureField ambient_state(const MeshSpec& mesh) { return TemperatureField::zeros(mesh.pixel_count()); }

std::size_t center_pixel(const MeshSpec& mesh) { return mesh.pixel(mesh.rows / 2, mesh.cols / 2); }

TemperatureField center_event_state(const MeshSpec& mesh, const MaterialSet& materials, double t_hot) {
    return TemperatureField::single(mesh.pixel_count(), center_pixel(mesh), t_hot - materials.reference_temperature);
}

SensitivityMap nonlinear_sensitivity_map(const MeshSpec& mesh, const MaterialSet& materials,
                                         const TemperatureField& base) {
    if (!materials.interlayer.temperature_dependent()) {
        throw ValidationError("nonlinear_sensitivity_map requires a temperature-dependent interlayer");
    }
    return sensitivity_map(sensitivity_matrix(assemble(mesh, materials, base)));
}

Eigen::MatrixXd event_columns(const MeshSpec& mesh, const MaterialSet& materials, double t_hot,
                              const std::vector<std::size_t>& pixels) {
    EventSource source(mesh, materials);
    return source.columns(t_hot, pixels);
}

SensitivityMap event_sensitivity_map(const MeshSpec& mesh, const MaterialSet& materials, double t_hot) {
    SensitivityMap out =
        map_from_columns(event_columns(mesh, materials, t_hot), mesh, materials.interlayer.tag(), "event");
    out.t_hot = t_hot;
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

std::optional<double> per_decade_change(const SweepResult& sweep, std::size_t i) {
    const auto& s = sweep.samples;
    if (i >= s.size()) {
        return std::nullopt;
    }
    for (std::size_t k = i + 1; k < s.size(); ++k) {
        const double decades = std::log10(s[k].x / s[i].x);
        if (decades >= 1.0 - 1e-12) {
            return std::abs(s[k].value - s[i].value) / std::abs(s[i].value) / decades;
        }
    }
    return std::nullopt;
}

std::optional<std::size_t> plateau_onset(const SweepResult& sweep, double max_change) {
    for (std::size_t i = 0; i < sweep.samples.size(); ++i) {
        const auto c = per_decade_change(sweep, i);
        if (c && *c <= max_change) {
            return i;
        }
    }
    return std::nullopt;
}

SweepResult sweep_interlayer_R(const MeshSpec& mesh, const MaterialSet& materials, const std::vector<double>& r_grid) {
    require_ascending(r_grid, "sweep_interlayer_R");
    SweepResult out;
    out.variant = "constant_r";
    out.label = "sigma_min";
    out.samples.resize(r_grid.size());
    parallel_for(r_grid.size(), [&](std::size_t k) {
        MaterialSet m = materials;
        m.interlayer = InterlayerModel{ConstantR{r_grid[k]}};
        out.samples[k] = {r_grid[k], sensitivity_map(sensitivity_matrix(assemble(mesh, m))).sigma_min};
    });
    MaterialSet base = materials;
    base.interlayer = InterlayerModel{NoInterlayer{}};
    out.reference = sensitivity_map(sensitivity_matrix(assemble(mesh, base))).sigma_min;
    return out;
}

MeshSizePoint evaluate_mesh(const MeshSpec& mesh, const MaterialSet& materials, const MeshSizeOptions& options) {
    mesh.validate();
    MeshSizePoint pt;
    pt.rows = mesh.rows;
    pt.cols = mesh.cols;
    const std::size_t pixels = mesh.pixel_count();
    const std::vector<std::size_t> center{center_pixel(mesh)};

    auto linear_sigma = [&](const MaterialSet& m, bool& full) {
        full = pixels <= options.full_linear_max_pixels;
        const NetworkSystem sys = assemble(mesh, m);
        if (full) {
            return sensitivity_map(sensitivity_matrix(sys)).sigma_min;
        }
        return swing(sensitivity_column(sys, center.front()));
    };

    if (materials.interlayer.temperature_dependent()) {
        pt.full_map = pixels <= options.full_event_max_pixels;
        EventSource source(mesh, materials);
        const Eigen::MatrixXd cols = source.columns(options.t_hot, pt.full_map ? std::vector<std::size_t>{} : center);
        double s = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < cols.cols(); ++j) {
            s = std::min(s, swing(cols.col(j)));
        }
        pt.sigma_min = s;
    } else {
        bool full = true;
        pt.sigma_min = linear_sigma(materials, full);
        pt.full_map = full;
        if (const auto* c = std::get_if<ConstantR>(&materials.interlayer.variant())) {
            pt.resistance = c->resistance;
        }
    }
    MaterialSet base = materials;
    base.interlayer = InterlayerModel{NoInterlayer{}};
    bool full = true;
    pt.baseline_sigma_min = linear_sigma(base, full);
    pt.improvement = pt.sigma_min / pt.baseline_sigma_min;
    return pt;
}

MeshSizeSweep sweep_mesh_size(const std::vector<std::pair<std::size_t, std::size_t>>& sizes, const MeshSpec& geometry,
                              const MaterialSet& materials, const MeshSizeOptions& options) {
    if (sizes.empty()) {
        throw ValidationError("sweep_mesh_size: no sizes given");
    }
    for (std::size_t k = 1; k < sizes.size(); ++k) {
        if (sizes[k].first * sizes[k].second <= sizes[k - 1].first * sizes[k - 1].second) {
            throw ValidationError("sweep_mesh_size: sizes must be strictly ascending in pixel count");
        }
    }
    MeshSizeSweep out;
    out.variant = materials.interlayer.tag();
    const bool plateau = std::holds_alternative<ConstantR>(materials.interlayer.variant()) &&
                         options.linear_mode == MeshSizeOptions::LinearMode::plateau;

    for (const auto& [rows, cols] : sizes) {
        const MeshSpec mesh = resized(geometry, rows, cols);
        if (!plateau) {
            out.points.push_back(evaluate_mesh(mesh, materials, options));
            continue;
        }
        // Smallest decade-spaced R whose next decade changes sigma_min by <= plateau_change.
        auto at = [&](double r) {
            MaterialSet m = materials;
            m.interlayer = InterlayerModel{ConstantR{r}};
            return evaluate_mesh(mesh, m, options);
        };
        double r = 1.0;
        MeshSizePoint cur = at(r);
        while (r < options.plateau_r_max) {
            MeshSizePoint next = at(10.0 * r);
            if (std::abs(next.sigma_min - cur.sigma_min) <= options.plateau_change * cur.sigma_min) {
                break;
            }
            r *= 10.0;
            cur = next;
        }
        out.points.push_back(cur);
    }
    return out;
}

namespace {

SweepResult size_series(const MeshSizeSweep& s, const char* label, double MeshSizePoint::*field) {
    SweepResult r;
    r.variant = s.variant;
    r.label = label;
    for (const auto& p : s.points) {
        r.samples.push_back({static_cast<double>(p.rows * p.cols), p.*field});
    }
    return r;
}

}  // namespace

SweepResult MeshSizeSweep::sigma() const { return size_series(*this, "sigma_min", &MeshSizePoint::sigma_min); }
SweepResult MeshSizeSweep::baseline() const {
    return size_series(*this, "baseline_sigma_min", &MeshSizePoint::baseline_sigma_min);
}
SweepResult MeshSizeSweep::improvement() const {
    return size_series(*this, "improvement", &MeshSizePoint::improvement);
}

SweepResult sweep_event_temperature(const MeshSpec& mesh, const MaterialSet& materials,
                                    const std::vector<double>& t_hot_grid) {
    require_ascending(t_hot_grid, "sweep_event_temperature");
    SweepResult out;
    out.variant = materials.interlayer.tag();
    out.label = "sigma_min_event";
    EventSource source(mesh, materials);
    for (double t : t_hot_grid) {
        const Eigen::MatrixXd cols = source.columns(t, {});
        double s = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < cols.cols(); ++j) {
            s = std::min(s, swing(cols.col(j)));
        }
        out.samples.push_back({t, s});
    }
    if (materials.interlayer.temperature_dependent()) {
        out.reference = nonlinear_sensitivity_map(mesh, materials, ambient_state(mesh)).sigma_min;
    }
    return out;
}

std::vector<double> log_grid(double lo, double hi, std::size_t per_decade) {
    if (!(lo > 0.0) || !(hi > lo) || per_decade == 0) {
        throw ValidationError("log_grid: need 0 < lo < hi and per_decade >= 1");
    }
    const double decades = std::log10(hi / lo);
    const auto steps = static_cast<std::size_t>(std::ceil(decades * static_cast<double>(per_decade) - 1e-9));
    std::vector<double> g(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        g[k] = lo * std::pow(hi / lo, static_cast<double>(k) / static_cast<double>(steps));
    }
    g.back() = hi;
    return g;
}

std::vector<double> log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) {
        throw ValidationError("log_log_slope: need matching x and y with at least two points");
    }
    std::vector<double> u(n), f(n), d(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (!(x[k] > 0.0) || !(y[k] > 0.0)) {
            throw DegenerateError("log_log_slope: values must be positive");
        }
        u[k] = std::log(x[k]);
        f[k] = std::log(y[k]);
    }
    if (n == 2) {
        d[0] = d[1] = (f[1] - f[0]) / (u[1] - u[0]);
        return d;
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const double h1 = u[k] - u[k - 1];
        const double h2 = u[k + 1] - u[k];
        d[k] = -h2 / (h1 * (h1 + h2)) * f[k - 1] + (h2 - h1) / (h1 * h2) * f[k] + h1 / (h2 * (h1 + h2)) * f[k + 1];
    }
    {
        const double h1 = u[1] - u[0];
        const double h2 = u[2] - u[1];
        d[0] = -(2 * h1 + h2) / (h1 * (h1 + h2)) * f[0] + (h1 + h2) / (h1 * h2) * f[1] - h1 / (h2 * (h1 + h2)) * f[2];
    }
    {
        const double h1 = u[n - 2] - u[n - 3];
        const double h2 = u[n - 1] - u[n - 2];
        d[n - 1] = h2 / (h1 * (h1 + h2)) * f[n - 3] - (h1 + h2) / (h1 * h2) * f[n - 2] +
                   (h1 + 2 * h2) / (h2 * (h1 + h2)) * f[n - 1];
    }
    return d;
}

KappaResult superlinearity_kappa(const MeshSpec& mesh, const MaterialSet& materials, double t_amb,
                                 const std::vector<double>& dt_grid) {
    require_ascending(dt_grid, "superlinearity_kappa");
    const std::size_t pixels = mesh.pixel_count();
    const std::size_t c = center_pixel(mesh);
    const double bg = t_amb - materials.reference_temperature;

    const TemperatureField background{std::vector<double>(pixels, bg)};
    const Eigen::VectorXd v_bg = [&] {
        const auto r = boundary_voltages(assemble(mesh, materials, background), background);
        return Eigen::Map<const Eigen::VectorXd>(r.voltages.data(), static_cast<Eigen::Index>(r.voltages.size()))
            .eval();
    }();

    std::vector<double> dv(dt_grid.size());
    parallel_for(dt_grid.size(), [&](std::size_t k) {
        TemperatureField state = background;
        state.values[c] += dt_grid[k];
        const auto r = boundary_voltages(assemble(mesh, materials, state), state);
        const Eigen::Map<const Eigen::VectorXd> v(r.voltages.data(), static_cast<Eigen::Index>(r.voltages.size()));
        dv[k] = swing(v - v_bg);
    });
    for (std::size_t k = 0; k < dv.size(); ++k) {
        if (!(dv[k] > 0.0)) {
            throw DegenerateError("center response swing is not positive at dT = " + std::to_string(dt_grid[k]));
        }
    }
    const std::vector<double> kappa = log_log_slope(dt_grid, dv);

    KappaResult out;
    out.kappa.variant = out.response.variant = materials.interlayer.tag();
    out.kappa.label = "kappa";
    out.response.label = "center_swing_v";
    for (std::size_t k = 0; k < dt_grid.size(); ++k) {
        out.kappa.samples.push_back({dt_grid[k], kappa[k]});
        out.response.samples.push_back({dt_grid[k], dv[k]});
    }
    return out;
}

ChannelEfficiency channel_efficiency(const MeshSpec& mesh) {
    mesh.validate();
    return {mesh.channel_count(),
            static_cast<double>(mesh.pixel_count()) / static_cast<double>(mesh.channel_count())};
}

NetReport net(const Eigen::MatrixXd& columns, double noise_std) {
    if (!(noise_std > 0.0) || !std::isfinite(noise_std)) {
        throw ValidationError("net: noise_std must be > 0");
    }
    if (columns.cols() == 0) {
        throw ValidationError("net: no columns");
    }
    NetReport out;
    const auto np = static_cast<std::size_t>(columns.cols());
    out.per_pixel.resize(np);
    out.infinite.assign(np, false);
    for (std::size_t j = 0; j < np; ++j) {
        const auto col = columns.col(static_cast<Eigen::Index>(j));
        const double norm = (col.array() - col.mean()).matrix().norm();
        if (norm > 0.0) {
            out.per_pixel[j] = noise_std / norm;
        } else {
            out.per_pixel[j] = std::numeric_limits<double>::infinity();
            out.infinite[j] = true;
        }
    }
    const auto lo = std::min_element(out.per_pixel.begin(), out.per_pixel.end());
    out.net_min = *lo;
    out.argmin = static_cast<std::size_t>(lo - out.per_pixel.begin());
    out.net_max = *std::max_element(out.per_pixel.begin(), out.per_pixel.end());
    return out;
}

double reference_noise_std(const Eigen::MatrixXd& columns, double delta_t, double snr_db) {
    if (columns.size() == 0) {
        throw ValidationError("reference_noise_std: no columns");
    }
    const double ps = (delta_t * delta_t) * columns.squaredNorm() / static_cast<double>(columns.size());
    if (!(ps > 0.0)) {
        throw DegenerateError("reference signal is identically zero");
    }
    return std::sqrt(ps / std::pow(10.0, snr_db / 10.0));
}

}  // namespace thermomesh
