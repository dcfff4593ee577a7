#include "commands.hpp"

#include "thermomesh/errors.hpp"
#include "thermomesh/io.hpp"
#include "thermomesh/network.hpp"
#include "thermomesh/parallel.hpp"
#include "thermomesh/rare_event.hpp"
#include "thermomesh/recovery.hpp"
#include "thermomesh/sensitivity.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace thermomesh::cli {

namespace {

std::string out_path(const Context& ctx, const std::string& name) { return (fs::path(ctx.out_dir) / name).string(); }

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw ValidationError("cannot write " + path);
    }
    out << j.dump(2) << '\n';
}

// JSON has no infinity; emit null instead.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

bool temperature_dependent(const RunConfig& c) { return c.materials.interlayer.temperature_dependent(); }

SensitivityMatrix base_matrix(const RunConfig& c) {
    if (temperature_dependent(c)) {
        return sensitivity_matrix(assemble(c.mesh, c.materials, TemperatureField::zeros(c.mesh.pixel_count())));
    }
    return sensitivity_matrix(assemble(c.mesh, c.materials));
}

std::string snr_tag(std::optional<double> snr) {
    if (!snr) {
        return "inf";
    }
    std::ostringstream os;
    os << *snr;
    return os.str();
}

std::vector<std::string> glob(const std::string& dir, const std::string& prefix) {
    std::vector<std::string> out;
    if (!fs::is_directory(dir)) {
        return out;
    }
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (e.is_regular_file() && name.rfind(prefix, 0) == 0 && e.path().extension() == ".csv") {
            out.push_back(e.path().string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

double max_rc(const RunConfig& c) {
    double worst = 0.0;
    constexpr int kPoints = 200;
    for (int k = 0; k <= kPoints; ++k) {
        const double t = c.range.t_min + (c.range.t_max - c.range.t_min) * k / kPoints;
        worst = std::max(worst, rc_time_constant(c.materials, c.mesh, t));
    }
    return worst;
}

}  // namespace

void cmd_matrix(const Context& ctx) {
    const auto& c = ctx.config;
    const SensitivityMatrix a = base_matrix(c);
    write_matrix_csv(out_path(ctx, "A.csv"), a, c.hash);
    write_matrix_triplets(out_path(ctx, "A_triplets.csv"), a, c.hash);
    const SensitivityMap map = sensitivity_map(a);
    write_sensitivity_map(out_path(ctx, "sensitivity_map.csv"), map, c.hash);

    json summary;
    summary["config_hash"] = c.hash;
    summary["interlayer"] = c.materials.interlayer.tag();
    summary["rows"] = c.mesh.rows;
    summary["cols"] = c.mesh.cols;
    summary["channels"] = a.channel_count();
    summary["sigma_min"] = map.sigma_min;
    summary["sigma_min_pixel"] = map.argmin;
    summary["state"] = map.state_label;

    Eigen::MatrixXd columns = a.entries;
    if (temperature_dependent(c)) {
        const double t_hot = c.t_hot();
        columns = event_columns(c.mesh, c.materials, t_hot);
        SensitivityMap em;
        em.rows = c.mesh.rows;
        em.cols = c.mesh.cols;
        em.interlayer_tag = c.materials.interlayer.tag();
        em.state_label = "event";
        em.t_hot = t_hot;
        em.sigma.resize(c.mesh.pixel_count());
        for (Eigen::Index j = 0; j < columns.cols(); ++j) {
            em.sigma[static_cast<std::size_t>(j)] = swing(columns.col(j));
        }
        const auto it = std::min_element(em.sigma.begin(), em.sigma.end());
        em.sigma_min = *it;
        em.argmin = static_cast<std::size_t>(it - em.sigma.begin());
        write_sensitivity_map(out_path(ctx, "event_sensitivity_map.csv"), em, c.hash);
        summary["event_t_hot_k"] = t_hot;
        summary["event_sigma_min"] = em.sigma_min;
        summary["event_sigma_min_pixel"] = em.argmin;
        summary["rc_time_constant_max_s"] = max_rc(c);
    } else if (!c.materials.interlayer.merged()) {
        summary["rc_time_constant_max_s"] = max_rc(c);
    }

    const double delta_t = c.net.delta_t.value_or(c.t_hot() - c.range.t_amb);
    const double noise = reference_noise_std(columns, delta_t, c.net.snr_db);
    const NetReport n = net(columns, noise);
    write_net(out_path(ctx, "net.csv"), n, c.hash);
    summary["net"] = {{"snr_db", c.net.snr_db}, {"delta_t_k", delta_t}, {"noise_std_v", noise},
                      {"net_min_k", number(n.net_min)}, {"net_max_k", number(n.net_max)}, {"net_min_pixel", n.argmin}};

    const ChannelEfficiency eff = channel_efficiency(c.mesh);
    summary["channel_efficiency"] = {{"n_read", eff.n_read}, {"eta", eff.eta}};
    if (c.readout_energy) {
        summary["channel_efficiency"]["frame_energy_j"] = static_cast<double>(eff.n_read) * *c.readout_energy;
    }
    write_json(out_path(ctx, "matrix_summary.json"), summary);
    spdlog::info("A is {}x{}; sigma_min {:.6e} V/K at pixel {}", a.channel_count(), a.pixel_count(), map.sigma_min,
                 map.argmin);
    std::cout << summary.dump(2) << '\n';
}

void cmd_sweep(const Context& ctx, const std::string& kind) {
    const auto& c = ctx.config;
    std::vector<SweepResult> out;
    if (kind == "r") {
        out.push_back(sweep_interlayer_R(c.mesh, c.materials, c.sweeps.r_grid));
        const auto onset = plateau_onset(out.back());
        if (onset) {
            spdlog::info("plateau from R = {:.4g} ohm", out.back().samples[*onset].x);
        }
    } else if (kind == "size") {
        MeshSizeOptions opts;
        opts.linear_mode = c.sweeps.size_plateau ? MeshSizeOptions::LinearMode::plateau
                                                 : MeshSizeOptions::LinearMode::configured;
        opts.t_hot = c.t_hot();
        opts.full_linear_max_pixels = c.sweeps.full_map_max_pixels;
        opts.full_event_max_pixels = c.sweeps.full_map_max_pixels;
        auto sizes = c.sweeps.sizes;
        std::sort(sizes.begin(), sizes.end(),
                  [](const auto& x, const auto& y) { return x.first * x.second < y.first * y.second; });
        const MeshSizeSweep s = sweep_mesh_size(sizes, c.mesh, c.materials, opts);
        out = {s.sigma(), s.baseline(), s.improvement()};
        for (const auto& p : s.points) {
            spdlog::info("{}x{}: sigma_min {:.4e}, baseline {:.4e}, improvement {:.4g}{}", p.rows, p.cols,
                         p.sigma_min, p.baseline_sigma_min, p.improvement, p.full_map ? "" : " (center pixel)");
        }
    } else if (kind == "kappa") {
        std::vector<double> dt = c.sweeps.kappa_dt;
        if (dt.empty()) {
            dt = log_grid(1.0, c.range.t_max - c.sweeps.kappa_t_amb, 8);
        }
        const KappaResult k = superlinearity_kappa(c.mesh, c.materials, c.sweeps.kappa_t_amb, dt);
        out = {k.kappa, k.response};
    } else if (kind == "temp") {
        std::vector<double> grid = c.sweeps.temp_grid;
        if (grid.empty()) {
            constexpr int kPoints = 20;
            for (int i = 1; i <= kPoints; ++i) {
                grid.push_back(c.range.t_amb + (c.range.t_max - c.range.t_amb) * i / kPoints);
            }
        }
        out.push_back(sweep_event_temperature(c.mesh, c.materials, grid));
    } else {
        throw ValidationError("sweep: unknown kind '" + kind + "' (expected r, size, kappa or temp)");
    }
    const std::string path = out_path(ctx, "sweep_" + kind + ".csv");
    write_sweeps(path, out, c.hash);
    spdlog::info("wrote {}", path);
}

void cmd_dataset(const Context& ctx) {
    const auto& c = ctx.config;
    const ForwardModel model(c.mesh, c.materials);
    for (const auto& snr : c.dataset.snr_db) {
        DatasetOptions o;
        o.n_samples = c.dataset.n_samples;
        o.snr_db = snr;
        o.seed = c.dataset.seed;
        const auto samples = generate_dataset(model, c.range, o);
        const std::string path = out_path(ctx, "dataset_snr_" + snr_tag(snr) + ".csv");
        write_dataset(path, c.mesh, samples, snr, c.hash);
        spdlog::info("wrote {} ({} samples)", path, samples.size());
    }
}

void cmd_recover(const Context& ctx, const std::string& method, std::vector<std::string> inputs) {
    const auto& c = ctx.config;
    if (method != "omp" && method != "matched") {
        throw ValidationError("recover: unknown method '" + method + "'");
    }
    if (inputs.empty()) {
        inputs = glob(ctx.out_dir, "dataset_");
    }
    if (inputs.empty()) {
        throw ValidationError("recover: no dataset files given and none found in " + ctx.out_dir);
    }
    auto model = std::make_shared<const ForwardModel>(c.mesh, c.materials);
    std::unique_ptr<AtomDictionary> dictionary;
    if (method == "omp" && !model->linear()) {
        dictionary = std::make_unique<AtomDictionary>(model, c.range.t_max - c.range.t_amb,
                                                      c.recovery.dictionary_points);
    }
    for (const auto& in : inputs) {
        if (!fs::exists(in)) {
            throw ValidationError("recover: dataset file not found: " + in);
        }
        const DatasetFile ds = read_dataset(in);
        if (ds.rows != c.mesh.rows || ds.cols != c.mesh.cols) {
            throw ValidationError("recover: " + in + " was generated for a different mesh size");
        }
        const std::string hash = ds.meta.count("config_hash") ? ds.meta.at("config_hash") : "";
        if (hash != c.hash) {
            spdlog::warn("{}: config_hash differs from the current configuration", in);
        }
        std::vector<ResultRow> rows(ds.samples.size());
        parallel_for(ds.samples.size(), [&](std::size_t i) {
            const auto& s = ds.samples[i];
            const Eigen::Map<const Eigen::VectorXd> v(s.voltages.data(), static_cast<Eigen::Index>(s.voltages.size()));
            RecoveryResult r;
            if (method == "matched") {
                r = recover_matched_filter(model->ambient(), v);
            } else if (dictionary) {
                r = dictionary->recover(v);
            } else {
                r = recover_omp(model->ambient(), v);
            }
            ResultRow& row = rows[i];
            row.sample = s.sample;
            row.true_pixel = s.pixel;
            row.true_t = s.delta_t;
            if (r.detected) {
                row.pred_pixel = r.pixel;
                row.pred_t = r.delta_t;
                row.d_norm = normalized_distance(c.mesh, r.pixel, s.pixel);
            } else {
                row.d_norm = 1.0;
            }
        });
        CsvMeta meta;
        meta["rows"] = std::to_string(c.mesh.rows);
        meta["cols"] = std::to_string(c.mesh.cols);
        meta["method"] = method == "omp" && dictionary ? "omp_dictionary" : (method == "omp" ? "omp" : "matched_filter");
        meta["snr_db"] = ds.meta.count("snr_db") ? ds.meta.at("snr_db") : "inf";
        meta["dataset"] = fs::path(in).filename().string();
        std::string stem = fs::path(in).stem().string();
        if (stem.rfind("dataset_", 0) == 0) {
            stem = stem.substr(8);
        }
        const std::string path = out_path(ctx, "results_" + stem + "_" + method + ".csv");
        write_results(path, rows, meta, hash);
        spdlog::info("wrote {}", path);
    }
}

void cmd_eval(const Context& ctx, std::vector<std::string> inputs) {
    const auto& c = ctx.config;
    if (inputs.empty()) {
        inputs = glob(ctx.out_dir, "results_");
    }
    if (inputs.empty()) {
        throw ValidationError("eval: no results files given and none found in " + ctx.out_dir);
    }
    std::vector<ResultsFile> files;
    std::vector<CsvMeta> metas;
    for (const auto& in : inputs) {
        if (!fs::exists(in)) {
            throw ValidationError("eval: results file not found: " + in);
        }
        files.push_back(read_results(in));
        metas.push_back(files.back().meta);
    }
    CsvMeta current;
    current["config_hash"] = c.hash;
    metas.push_back(current);
    auto names = inputs;
    names.push_back("current configuration");
    common_hash(metas, names);

    json reports = json::array();
    for (std::size_t f = 0; f < files.size(); ++f) {
        const auto& file = files[f];
        if (file.rows.empty()) {
            throw ValidationError("eval: " + inputs[f] + " has no rows");
        }
        std::vector<RecoveryResult> results;
        std::vector<Truth> truths;
        for (const auto& r : file.rows) {
            if (r.true_pixel >= c.mesh.pixel_count() || (r.pred_pixel && *r.pred_pixel >= c.mesh.pixel_count())) {
                throw ValidationError("eval: " + inputs[f] + " has pixel indices outside the mesh");
            }
            RecoveryResult rr;
            rr.detected = r.pred_pixel.has_value();
            rr.pixel = r.pred_pixel.value_or(0);
            rr.delta_t = r.pred_t;
            results.push_back(rr);
            truths.push_back({r.true_pixel, r.true_t});
        }
        std::optional<double> snr;
        const auto it = file.meta.find("snr_db");
        if (it != file.meta.end() && it->second != "inf") {
            snr = std::stod(it->second);
        }
        const EvalReport rep = evaluate(c.mesh, results, truths, snr, c.recovery.amplitude_tolerance);
        const auto near = static_cast<std::size_t>(
            std::count_if(rep.d_norm.begin(), rep.d_norm.end(), [](double d) { return d <= 0.2; }));
        json j;
        j["file"] = fs::path(inputs[f]).filename().string();
        j["method"] = file.meta.count("method") ? file.meta.at("method") : "";
        j["snr_db"] = snr ? json(*snr) : json("inf");
        j["trials"] = rep.trials;
        j["accuracy"] = rep.accuracy;
        j["success_rate"] = rep.success_rate;
        j["amplitude_tolerance"] = rep.amplitude_tolerance;
        j["mae_k"] = rep.mae;
        j["misclassified"] = rep.d_norm.size();
        j["misclassified_d_norm_le_0_2"] = near;
        reports.push_back(j);
        std::cout << j["file"].get<std::string>() << ": accuracy " << rep.accuracy << ", success " << rep.success_rate
                  << ", MAE " << rep.mae << " K over " << rep.trials << " trials\n";
    }
    json summary;
    summary["config_hash"] = c.hash;
    summary["reports"] = reports;
    write_json(out_path(ctx, "eval_summary.json"), summary);
}

void cmd_rare_event(const Context& ctx) {
    const auto& c = ctx.config;
    if (!c.rare_event) {
        throw ConfigError("config: rare_event section required for this command");
    }
    const auto& re = *c.rare_event;
    const auto& st = re.stats;
    json summary;
    summary["config_hash"] = c.hash;
    summary["model"] = "independent-snapshot approximation";
    summary["sensing_area_m2"] = st.sensing_area;
    summary["pixel_area_m2"] = st.pixel_area;
    summary["k"] = st.k();
    summary["q_t_max"] = st.q_t_max;
    summary["fill_factor"] = fill_factor(st.pixel_area, st.sensing_area, c.mesh.rows, c.mesh.cols);
    summary["capture_probability"] = capture_probability(summary["fill_factor"].get<double>());

    {
        const std::string path = out_path(ctx, "rare_event_rates.csv");
        std::ofstream out(path, std::ios::trunc);
        if (!out) {
            throw ValidationError("cannot write " + path);
        }
        out << "# config_hash=" << c.hash << '\n';
        out << "delta,p_e_max,s\n";
        json rates = json::array();
        for (double d : re.tolerances) {
            const double pe = max_admissible_rate(st, d);
            out << format_double(d) << ',' << format_double(pe) << ','
                << format_double(pe * st.sensing_area * st.event_duration) << '\n';
            rates.push_back({{"delta", d}, {"p_e_max", pe}});
            std::cout << "delta " << d << ": P_e_max " << pe << " 1/(m^2 s)\n";
        }
        summary["admissible_rates"] = rates;
    }
    if (st.areal_rate > 0.0) {
        summary["configured_rate"] = {{"s", st.s()},
                                      {"violation_probability", window_violation_probability(st.s(), st.k(), st.q_t_max)}};
    }
    write_rare_event_curves(out_path(ctx, "rare_event_curves.csv"), re.curve_k, re.curve_s, c.hash);

    json mc = json::array();
    for (auto mode : {MonteCarloOptions::Mode::snapshot, MonteCarloOptions::Mode::continuous}) {
        MonteCarloOptions o;
        o.mode = mode;
        o.windows = re.mc_windows;
        o.seed = re.mc_seed;
        const auto r = simulate_window_violation(re.mc_s, re.mc_k, st.q_t_max, o);
        const double analytic = window_violation_probability(re.mc_s, static_cast<double>(re.mc_k), st.q_t_max);
        mc.push_back({{"mode", mode == MonteCarloOptions::Mode::snapshot ? "snapshot" : "continuous"},
                      {"s", re.mc_s},
                      {"k", re.mc_k},
                      {"windows", r.windows},
                      {"probability", r.probability},
                      {"standard_error", r.standard_error},
                      {"analytic", analytic},
                      {"z", (r.probability - analytic) / r.standard_error}});
    }
    summary["monte_carlo"] = mc;

    json regime = json::array();
    for (const auto& cond : regime_check(st, c.mesh.rows, c.mesh.cols, re.ratio_min).conditions) {
        regime.push_back({{"name", cond.name}, {"status", to_string(cond.status)}, {"message", cond.message}});
    }
    summary["regime"] = regime;
    write_json(out_path(ctx, "rare_event_summary.json"), summary);
}

void cmd_check(const Context& ctx) {
    const auto& c = ctx.config;
    json summary;
    summary["config_hash"] = c.hash;
    bool all = true;
    auto report = [&](const std::string& name, bool ok, const std::string& detail) {
        all = all && ok;
        std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
        summary["checks"].push_back({{"name", name}, {"passed", ok}, {"detail", detail}});
    };
    const bool exact = c.mesh.pixel_count() <= 256;
    auto uniqueness = [&](const std::string& name, const Eigen::MatrixXd& a) {
        const UniquenessReport u = verify_one_sparse_uniqueness(a, 1e-8, exact);
        std::ostringstream os;
        os << "coherence " << u.worst_coherence << " (pixels " << u.worst_pair_a << ", " << u.worst_pair_b
           << "), normalized NSP bound " << u.normalized_nsp_bound;
        if (u.nsp) {
            os << ", exact NSP certificate " << u.nsp->worst_certificate << " at pixel " << u.nsp->worst_pixel
               << (u.nsp->refuted ? " (refuted)" : "");
        }
        report(name, u.passed && u.normalized_nsp_bound < 0.5, os.str());
    };
    const SensitivityMatrix a = base_matrix(c);
    uniqueness(temperature_dependent(c) ? "uniqueness_ambient" : "uniqueness", a.entries);
    if (temperature_dependent(c)) {
        uniqueness("uniqueness_event", event_columns(c.mesh, c.materials, c.t_hot()));
        if (std::holds_alternative<IdealSwitch>(c.materials.interlayer.variant())) {
            std::cout << "SKIP rc_time_constant: the ideal switch has no material law\n";
        } else {
            const double rc = max_rc(c);
            std::ostringstream os;
            os << "max rc_time_constant " << rc << " s over [" << c.range.t_min << ", " << c.range.t_max << "] K";
            report("rc_time_constant", rc < 1e-6, os.str());
        }
    }
    if (c.rare_event) {
        const auto& re = *c.rare_event;
        for (const auto& cond : regime_check(re.stats, c.mesh.rows, c.mesh.cols, re.ratio_min).conditions) {
            if (cond.status == RegimeCondition::Status::skipped) {
                std::cout << "SKIP " << cond.message << '\n';
                continue;
            }
            report("regime " + cond.name, cond.status == RegimeCondition::Status::pass, cond.message);
        }
    }
    summary["passed"] = all;
    write_json(out_path(ctx, "check_summary.json"), summary);
}

}  // namespace thermomesh::cli
