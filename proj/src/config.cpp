#include "thermomesh/config.hpp"

#include "thermomesh/sensitivity.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace thermomesh {

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw InternalError("sha256 failed");
    }
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) {
        os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return os.str();
}

std::string config_hash(const std::string& bytes, const std::vector<std::string>& overrides) {
    std::string text = bytes;
    for (const auto& o : overrides) {
        text += "\n# override " + o;
    }
    return sha256_hex(text);
}

namespace {

// A YAML map with its key path; every key must be consumed or it is an error.
class Section {
public:
    Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
        if (node_ && !node_.IsNull() && !node_.IsMap()) {
            fail(path_, "expected a mapping");
        }
    }

    [[noreturn]] static void fail(const std::string& path, const std::string& what) {
        throw ConfigError("config: " + (path.empty() ? std::string("<root>") : path) + ": " + what);
    }

    std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
    bool has(const std::string& k) const { return node_ && node_.IsMap() && node_[k]; }

    YAML::Node raw(const std::string& k) {
        used_.insert(k);
        return node_ && node_.IsMap() ? node_[k] : YAML::Node(YAML::NodeType::Undefined);
    }

    Section child(const std::string& k) { return Section(raw(k), key(k)); }

    double number(const std::string& k, std::optional<double> fallback = std::nullopt) {
        const auto n = raw(k);
        if (!n) {
            if (!fallback) {
                fail(key(k), "required");
            }
            return *fallback;
        }
        return to_number(n, key(k));
    }

    std::optional<double> optional_number(const std::string& k) {
        const auto n = raw(k);
        if (!n || n.IsNull()) {
            return std::nullopt;
        }
        return to_number(n, key(k));
    }

    std::size_t count(const std::string& k, std::optional<std::size_t> fallback = std::nullopt) {
        const auto n = raw(k);
        if (!n) {
            if (!fallback) {
                fail(key(k), "required");
            }
            return *fallback;
        }
        return to_count(n, key(k));
    }

    std::string text(const std::string& k, std::optional<std::string> fallback = std::nullopt) {
        const auto n = raw(k);
        if (!n) {
            if (!fallback) {
                fail(key(k), "required");
            }
            return *fallback;
        }
        if (!n.IsScalar()) {
            fail(key(k), "expected a string");
        }
        return n.Scalar();
    }

    void finish() const {
        if (!node_ || !node_.IsMap()) {
            return;
        }
        for (const auto& kv : node_) {
            const auto k = kv.first.as<std::string>();
            if (!used_.count(k)) {
                fail(key(k), "unknown key");
            }
        }
    }

    static double to_number(const YAML::Node& n, const std::string& path) {
        if (!n.IsScalar()) {
            fail(path, "expected a number");
        }
        const std::string s = n.Scalar();
        if (s == ".inf" || s == "inf" || s == "+.inf") {
            return std::numeric_limits<double>::infinity();
        }
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &pos);
        } catch (const std::exception&) {
            fail(path, "expected a number, got '" + s + "'");
        }
        if (pos != s.size()) {
            fail(path, "expected a number, got '" + s + "'");
        }
        return v;
    }

    static std::size_t to_count(const YAML::Node& n, const std::string& path) {
        const double v = to_number(n, path);
        if (!(v >= 0.0) || v != std::floor(v) || v > 9.0e15) {
            fail(path, "expected a non-negative integer");
        }
        return static_cast<std::size_t>(v);
    }

private:
    YAML::Node node_;
    std::string path_;
    std::set<std::string> used_;
};

// A grid is an explicit list, {min, max, per_decade} (log) or {min, max, points} (linear).
std::vector<double> grid(const YAML::Node& n, const std::string& path) {
    std::vector<double> g;
    if (n.IsSequence()) {
        for (std::size_t i = 0; i < n.size(); ++i) {
            g.push_back(Section::to_number(n[i], path + "[" + std::to_string(i) + "]"));
        }
    } else {
        Section s(n, path);
        const double lo = s.number("min");
        const double hi = s.number("max");
        if (s.has("per_decade")) {
            const std::size_t per = s.count("per_decade");
            try {
                g = log_grid(lo, hi, per);
            } catch (const ValidationError& e) {
                Section::fail(path, e.what());
            }
        } else {
            const std::size_t points = s.count("points");
            if (points < 2 || !(hi > lo)) {
                Section::fail(path, "linear grid needs points >= 2 and max > min");
            }
            for (std::size_t k = 0; k < points; ++k) {
                g.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1));
            }
        }
        s.finish();
    }
    if (g.empty()) {
        Section::fail(path, "empty grid");
    }
    for (std::size_t i = 1; i < g.size(); ++i) {
        if (!(g[i] > g[i - 1])) {
            Section::fail(path, "grid must be strictly increasing");
        }
    }
    return g;
}

NtcSegment segment(Section s, const std::optional<NtcSegment>& previous) {
    NtcSegment seg;
    seg.t_low = s.number("t_low");
    seg.t_high = s.number("t_high");
    seg.law.beta = s.number("beta");
    const bool continuous = s.has("continuous") && s.raw("continuous").as<bool>();
    if (continuous) {
        if (!previous) {
            Section::fail(s.key("continuous"), "first segment cannot be continuous");
        }
        if (s.has("rho0") || s.has("t0")) {
            Section::fail(s.key("continuous"), "continuous segments take rho0 and t0 from the previous one");
        }
        seg.law.t0 = seg.t_low;
        try {
            seg.law.rho0 = previous->law.resistivity(seg.t_low);
        } catch (const DomainError& e) {
            Section::fail(s.key("continuous"), e.what());
        }
    } else {
        seg.law.rho0 = s.number("rho0");
        seg.law.t0 = s.number("t0");
    }
    s.finish();
    return seg;
}

InterlayerModel interlayer(Section s) {
    const std::string model = s.text("model", "none");
    InterlayerModel::Variant v;
    if (model == "none") {
        v = NoInterlayer{};
    } else if (model == "constant_r") {
        v = ConstantR{s.number("resistance")};
    } else if (model == "ntc") {
        Ntc n;
        n.rho0 = s.number("rho0", n.rho0);
        n.beta = s.number("beta", n.beta);
        n.t0 = s.number("t0", n.t0);
        v = n;
    } else if (model == "vo2") {
        const auto segs = s.raw("segments");
        if (!segs || !segs.IsSequence() || segs.size() == 0) {
            Section::fail(s.key("segments"), "expected a non-empty list");
        }
        Vo2Piecewise p;
        std::optional<NtcSegment> prev;
        for (std::size_t i = 0; i < segs.size(); ++i) {
            prev = segment(Section(segs[i], s.key("segments") + "[" + std::to_string(i) + "]"), prev);
            p.segments.push_back(*prev);
        }
        v = p;
    } else if (model == "ideal_switch") {
        IdealSwitch sw;
        sw.t_threshold = s.number("t_threshold", sw.t_threshold);
        sw.r_closed = s.number("r_closed", sw.r_closed);
        sw.r_open = s.number("r_open", sw.r_open);
        v = sw;
    } else {
        Section::fail(s.key("model"), "unknown interlayer model '" + model + "'");
    }
    s.finish();
    try {
        return InterlayerModel(std::move(v));
    } catch (const ValidationError& e) {
        Section::fail(s.key("model"), e.what());
    }
}

std::vector<std::optional<double>> snr_list(const YAML::Node& n, const std::string& path) {
    std::vector<std::optional<double>> out;
    if (!n) {
        return {std::nullopt};
    }
    if (!n.IsSequence()) {
        Section::fail(path, "expected a list");
    }
    for (std::size_t i = 0; i < n.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        if (n[i].IsNull()) {
            out.emplace_back(std::nullopt);
            continue;
        }
        const double v = Section::to_number(n[i], p);
        if (std::isinf(v) && v > 0) {
            out.emplace_back(std::nullopt);
        } else if (std::isfinite(v)) {
            out.emplace_back(v);
        } else {
            Section::fail(p, "snr must be finite or .inf");
        }
    }
    return out;
}

std::uint64_t parse_seed(const std::string& s, const std::string& path) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &pos);
    } catch (const std::exception&) {
        Section::fail(path, "expected an unsigned integer seed");
    }
    if (pos != s.size() || s.empty() || s[0] == '-') {
        Section::fail(path, "expected an unsigned integer seed");
    }
    return static_cast<std::uint64_t>(v);
}

RareEventConfig rare_event(Section s, const MeshSpec& mesh) {
    RareEventConfig c;
    auto& st = c.stats;
    st.event_duration = s.number("event_duration");
    const auto window = s.optional_number("window_duration");
    const auto k = s.optional_number("k");
    if (window.has_value() == k.has_value()) {
        Section::fail(s.key("window_duration"), "give exactly one of window_duration and k");
    }
    st.window_duration = window ? *window : *k * st.event_duration;
    st.pixel_area = s.number("pixel_area", mesh.pixel_area());
    const auto area = s.optional_number("sensing_area");
    const auto fill = s.optional_number("fill_factor");
    if (area && fill) {
        Section::fail(s.key("sensing_area"), "give at most one of sensing_area and fill_factor");
    }
    if (fill) {
        st.sensing_area = sensing_area_from_fill(st.pixel_area, *fill, mesh.rows, mesh.cols);
    } else {
        st.sensing_area = area.value_or(mesh.sensing_area());
    }
    st.areal_rate = s.number("areal_rate", 0.0);
    st.event_footprint = s.optional_number("event_footprint");
    st.pixel_time_constant = s.optional_number("pixel_time_constant");
    st.q_t_max = static_cast<unsigned>(s.count("q_t_max", 1));
    const auto tol = s.raw("tolerances");
    if (tol) {
        c.tolerances = grid(tol, s.key("tolerances"));
    } else {
        c.tolerances = {1e-4, 0.01, 0.5};
    }
    st.tolerance = c.tolerances.front();
    c.ratio_min = s.number("ratio_min", c.ratio_min);

    Section curves = s.child("curves");
    const auto ck = curves.raw("k");
    c.curve_k = ck ? grid(ck, curves.key("k")) : std::vector<double>{1.0, 1e3, 1e6};
    const auto cs = curves.raw("s");
    c.curve_s = cs ? grid(cs, curves.key("s")) : log_grid(1e-8, 10.0, 8);
    curves.finish();

    Section mc = s.child("monte_carlo");
    c.mc_s = mc.number("s", c.mc_s);
    c.mc_k = mc.count("k", c.mc_k);
    c.mc_windows = mc.count("windows", c.mc_windows);
    if (mc.has("seed")) {
        c.mc_seed = parse_seed(mc.text("seed"), mc.key("seed"));
    }
    mc.finish();
    s.finish();

    for (double d : c.tolerances) {
        if (!(d > 0.0 && d < 1.0)) {
            Section::fail(s.key("tolerances"), "tolerances must lie in (0, 1)");
        }
    }
    if (!(c.mc_s > 0.0) || c.mc_k == 0 || c.mc_windows == 0) {
        Section::fail(s.key("monte_carlo"), "s, k and windows must be positive");
    }
    for (double kk : c.curve_k) {
        if (!(kk >= 1.0)) {
            Section::fail("rare_event.curves.k", "K must be >= 1");
        }
    }
    try {
        st.validate();
    } catch (const ValidationError& e) {
        Section::fail("rare_event", e.what());
    }
    return c;
}

}  // namespace

RunConfig parse_config(const std::string& yaml_text, const std::vector<std::string>& overrides) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config: YAML parse error: ") + e.what());
    }
    RunConfig cfg;
    cfg.hash = config_hash(yaml_text, overrides);
    try {
        Section top(root, "");
        cfg.name = top.text("name", "");

        Section m = top.child("mesh");
        auto& mesh = cfg.mesh;
        mesh.rows = m.count("rows", mesh.rows);
        mesh.cols = m.count("cols", mesh.cols);
        mesh.pitch = m.number("pitch", mesh.pitch);
        mesh.wire_cross_section = m.number("wire_cross_section", mesh.wire_cross_section);
        mesh.interlayer_area = m.number("interlayer_area", mesh.interlayer_area);
        mesh.interlayer_thickness = m.number("interlayer_thickness", mesh.interlayer_thickness);
        mesh.lead_length_fraction = m.number("lead_length_fraction", mesh.lead_length_fraction);
        m.finish();

        Section mat = top.child("materials");
        auto& ms = cfg.materials;
        ms.seebeck_leg_a = mat.number("seebeck_leg_a", ms.seebeck_leg_a);
        ms.seebeck_leg_b = mat.number("seebeck_leg_b", ms.seebeck_leg_b);
        ms.resistivity_leg_a = mat.number("resistivity_leg_a", ms.resistivity_leg_a);
        ms.resistivity_leg_b = mat.number("resistivity_leg_b", ms.resistivity_leg_b);
        ms.interlayer_rel_permittivity = mat.number("interlayer_rel_permittivity", ms.interlayer_rel_permittivity);
        ms.reference_temperature = mat.number("reference_temperature", ms.reference_temperature);
        ms.interlayer = interlayer(mat.child("interlayer"));
        mat.finish();

        Section r = top.child("range");
        cfg.range.t_min = r.number("t_min", cfg.range.t_min);
        cfg.range.t_max = r.number("t_max", cfg.range.t_max);
        cfg.range.t_amb = r.number("t_amb", cfg.range.t_amb);
        r.finish();

        Section sw = top.child("sweeps");
        auto& sc = cfg.sweeps;
        const auto rg = sw.raw("r");
        sc.r_grid = rg ? grid(rg, sw.key("r")) : log_grid(1e-2, 1e6, 4);
        const auto sizes = sw.raw("sizes");
        if (sizes) {
            if (!sizes.IsSequence()) {
                Section::fail(sw.key("sizes"), "expected a list of [rows, cols]");
            }
            for (std::size_t i = 0; i < sizes.size(); ++i) {
                const std::string p = sw.key("sizes") + "[" + std::to_string(i) + "]";
                if (!sizes[i].IsSequence() || sizes[i].size() != 2) {
                    Section::fail(p, "expected [rows, cols]");
                }
                sc.sizes.emplace_back(Section::to_count(sizes[i][0], p), Section::to_count(sizes[i][1], p));
            }
        } else {
            sc.sizes = {{3, 3}, {8, 8}, {16, 16}, {32, 32}};
        }
        const std::string mode = sw.text("size_linear_mode", "plateau");
        if (mode != "plateau" && mode != "configured") {
            Section::fail(sw.key("size_linear_mode"), "expected plateau or configured");
        }
        sc.size_plateau = mode == "plateau";
        sc.full_map_max_pixels = sw.count("full_map_max_pixels", sc.full_map_max_pixels);
        sc.t_hot = sw.optional_number("t_hot");
        sc.kappa_t_amb = sw.number("kappa_t_amb", cfg.range.t_amb);
        const auto kd = sw.raw("kappa_dt");
        if (kd) {
            sc.kappa_dt = grid(kd, sw.key("kappa_dt"));
        }
        const auto tg = sw.raw("temp");
        if (tg) {
            sc.temp_grid = grid(tg, sw.key("temp"));
        }
        sw.finish();

        Section ds = top.child("dataset");
        cfg.dataset.n_samples = ds.count("n_samples", cfg.dataset.n_samples);
        cfg.dataset.snr_db = snr_list(ds.raw("snr_db"), ds.key("snr_db"));
        if (ds.has("seed")) {
            cfg.dataset.seed = parse_seed(ds.text("seed"), ds.key("seed"));
        }
        ds.finish();

        Section rc = top.child("recovery");
        cfg.recovery.method = rc.text("method", cfg.recovery.method);
        if (cfg.recovery.method != "omp" && cfg.recovery.method != "matched") {
            Section::fail(rc.key("method"), "expected omp or matched");
        }
        cfg.recovery.amplitude_tolerance = rc.number("amplitude_tolerance", cfg.recovery.amplitude_tolerance);
        cfg.recovery.dictionary_points = rc.count("dictionary_points", cfg.recovery.dictionary_points);
        rc.finish();

        Section nt = top.child("net");
        cfg.net.snr_db = nt.number("snr_db", cfg.net.snr_db);
        cfg.net.delta_t = nt.optional_number("delta_t");
        nt.finish();

        if (top.has("rare_event")) {
            cfg.rare_event = rare_event(top.child("rare_event"), cfg.mesh);
        }
        cfg.readout_energy = top.optional_number("readout_energy");
        top.finish();

        for (const auto& o : overrides) {
            const auto eq = o.find('=');
            const std::string k = o.substr(0, eq);
            if (eq == std::string::npos) {
                Section::fail("override", "expected key=value, got '" + o + "'");
            }
            if (k == "seed") {
                cfg.dataset.seed = parse_seed(o.substr(eq + 1), "override seed");
                if (cfg.rare_event) {
                    cfg.rare_event->mc_seed = cfg.dataset.seed;
                }
            } else {
                Section::fail("override", "unknown override '" + k + "'");
            }
        }

        cfg.mesh.validate();
        cfg.materials.validate();
        cfg.range.validate();
        if (cfg.range.t_amb != cfg.materials.reference_temperature) {
            Section::fail("range.t_amb", "must equal materials.reference_temperature");
        }
        if (!(cfg.t_hot() > cfg.range.t_amb)) {
            Section::fail("sweeps.t_hot", "must exceed range.t_amb");
        }
        if (cfg.dataset.n_samples == 0) {
            Section::fail("dataset.n_samples", "must be positive");
        }
        if (!(cfg.recovery.amplitude_tolerance > 0.0) || cfg.recovery.dictionary_points < 2) {
            Section::fail("recovery", "amplitude_tolerance must be > 0 and dictionary_points >= 2");
        }
        if (cfg.net.delta_t && !(*cfg.net.delta_t > 0.0)) {
            Section::fail("net.delta_t", "must be positive");
        }
        for (const auto& [rows, cols] : cfg.sweeps.sizes) {
            if (rows < 2 || cols < 2) {
                Section::fail("sweeps.sizes", "each size must be at least 2x2");
            }
        }
        for (double rr : cfg.sweeps.r_grid) {
            if (!(rr > 0.0)) {
                Section::fail("sweeps.r", "resistances must be positive");
            }
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("config: cannot read " + path);
    }
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config(os.str(), overrides);
}

}  // namespace thermomesh
