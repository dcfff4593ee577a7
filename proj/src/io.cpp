#include "thermomesh/io.hpp"

#include "thermomesh/errors.hpp"

#include <charconv>
#include <limits>
#include <cmath>
#include <fstream>
#include <sstream>

namespace thermomesh {

std::string format_double(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, 16);
    return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const std::string& path, const std::string& hash) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ValidationError("cannot write " + path);
    }
    out << "# config_hash=" << hash << '\n';
    return out;
}

void close_out(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) {
        throw ValidationError("write failed: " + path);
    }
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) {
        out.push_back(cur);
    }
    if (!line.empty() && line.back() == sep) {
        out.emplace_back();
    }
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    if (s == "inf") {
        return std::numeric_limits<double>::infinity();
    }
    if (s == "-inf") {
        return -std::numeric_limits<double>::infinity();
    }
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ValidationError(where + ": bad number '" + s + "'");
    }
    return v;
}

long long parse_int(const std::string& s, const std::string& where) {
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ValidationError(where + ": bad integer '" + s + "'");
    }
    return v;
}

std::size_t parse_index(const std::string& s, const std::string& where) {
    const long long v = parse_int(s, where);
    if (v < 0) {
        throw ValidationError(where + ": negative index");
    }
    return static_cast<std::size_t>(v);
}

// Comment lines "# a=1,b=2" become meta entries; returns the header line.
struct Table {
    CsvMeta meta;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

void parse_comment(const std::string& line, CsvMeta& meta) {
    for (const auto& item : split(line.substr(1), ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            continue;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(' ');
            const auto e = s.find_last_not_of(' ');
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        meta.emplace(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
    }
}

Table read_table(const std::string& path, bool header_only = false) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot read " + path);
    }
    Table t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            if (!have_header) {
                parse_comment(line, t.meta);
            }
            continue;
        }
        if (!have_header) {
            t.header = split(line, ',');
            have_header = true;
            if (header_only) {
                break;
            }
            continue;
        }
        auto fields = split(line, ',');
        if (fields.size() != t.header.size()) {
            throw ValidationError(path + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                                  std::to_string(fields.size()) + " fields, header has " +
                                  std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    if (!have_header && !header_only) {
        throw ValidationError(path + ": no header row");
    }
    return t;
}

void expect_header(const Table& t, const std::vector<std::string>& prefix, const std::string& path) {
    if (t.header.size() < prefix.size()) {
        throw ValidationError(path + ": unexpected header");
    }
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (t.header[i] != prefix[i]) {
            throw ValidationError(path + ": expected column '" + prefix[i] + "', found '" + t.header[i] + "'");
        }
    }
}

std::size_t meta_count(const CsvMeta& meta, const std::string& key, const std::string& path) {
    const auto it = meta.find(key);
    if (it == meta.end()) {
        throw ValidationError(path + ": missing '# " + key + "=' line");
    }
    return parse_index(it->second, path);
}

}  // namespace

void write_matrix_csv(const std::string& path, const SensitivityMatrix& a, const std::string& config_hash) {
    auto out = open_out(path, config_hash);
    out << "# rows=" << a.rows << ",cols=" << a.cols << ",interlayer=" << a.interlayer_tag
        << ",datum_channel=" << a.datum_channel << '\n';
    const auto& m = a.entries;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        out << (j ? "," : "") << "pixel_" << j;
    }
    out << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out << (j ? "," : "") << format_double(m(i, j));
        }
        out << '\n';
    }
    close_out(out, path);
}

void write_matrix_triplets(const std::string& path, const SensitivityMatrix& a, const std::string& config_hash) {
    auto out = open_out(path, config_hash);
    const auto& m = a.entries;
    out << "# rows=" << m.rows() << ",cols=" << m.cols() << '\n';
    out << "row,col,value\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (m(i, j) != 0.0) {
                out << i << ',' << j << ',' << format_double(m(i, j)) << '\n';
            }
        }
    }
    close_out(out, path);
}

MatrixFile read_matrix_csv(const std::string& path) {
    const Table t = read_table(path);
    MatrixFile f;
    f.meta = t.meta;
    for (std::size_t j = 0; j < t.header.size(); ++j) {
        if (t.header[j] != "pixel_" + std::to_string(j)) {
            throw ValidationError(path + ": bad header column " + t.header[j]);
        }
    }
    f.entries.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        for (std::size_t j = 0; j < t.header.size(); ++j) {
            f.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parse_double(t.rows[i][j], path);
        }
    }
    return f;
}

void write_sensitivity_map(const std::string& path, const SensitivityMap& map, const std::string& config_hash) {
    auto out = open_out(path, config_hash);
    out << "# rows=" << map.rows << ",cols=" << map.cols << ",interlayer=" << map.interlayer_tag
        << ",state=" << map.state_label;
    if (map.t_hot) {
        out << ",t_hot_k=" << format_double(*map.t_hot);
    }
    out << ",sigma_min=" << format_double(map.sigma_min) << ",argmin=" << map.argmin << '\n';
    out << "pixel_index,row,col,sigma_v_per_k\n";
    for (std::size_t p = 0; p < map.sigma.size(); ++p) {
        out << p << ',' << p / map.cols << ',' << p % map.cols << ',' << format_double(map.sigma[p]) << '\n';
    }
    close_out(out, path);
}

void write_sweeps(const std::string& path, const std::vector<SweepResult>& sweeps, const std::string& config_hash) {
    auto out = open_out(path, config_hash);
    for (const auto& s : sweeps) {
        if (s.reference) {
            out << "# reference." << s.label << '=' << format_double(*s.reference) << '\n';
        }
    }
    out << "x,value,variant,label\n";
    for (const auto& s : sweeps) {
        for (const auto& p : s.samples) {
            out << format_double(p.x) << ',' << format_double(p.value) << ',' << s.variant << ',' << s.label << '\n';
        }
    }
    close_out(out, path);
}

void write_net(const std::string& path, const NetReport& net, const std::string& config_hash) {
    auto out = open_out(path, config_hash);
    out << "# net_min=" << format_double(net.net_min) << ",net_max=" << format_double(net.net_max)
        << ",argmin=" << net.argmin << '\n';
    out << "pixel_index,net_k\n";
    for (std::size_t p = 0; p < net.per_pixel.size(); ++p) {
        out << p << ',' << format_double(net.per_pixel[p]) << '\n';
    }
    close_out(out, path);
}

void write_dataset(const std::string& path, const MeshSpec& mesh, const std::vector<Sample>& samples,
                   std::optional<double> snr_db, const std::string& config_hash) {
    auto out = open_out(path, config_hash);
    out << "# rows=" << mesh.rows << ",cols=" << mesh.cols << ",snr_db=" << (snr_db ? format_double(*snr_db) : "inf")
        << '\n';
    out << "sample,pixel_index,delta_t_k,snr_db";
    for (std::size_t c = 0; c < mesh.channel_count(); ++c) {
        out << ",v_" << c;
    }
    out << '\n';
    const std::string snr = snr_db ? format_double(*snr_db) : "inf";
    for (const auto& s : samples) {
        out << s.index << ',' << s.pixel << ',' << format_double(s.delta_t) << ',' << snr;
        for (double v : s.reading.voltages) {
            out << ',' << format_double(v);
        }
        out << '\n';
    }
    close_out(out, path);
}

DatasetFile read_dataset(const std::string& path) {
    const Table t = read_table(path);
    expect_header(t, {"sample", "pixel_index", "delta_t_k", "snr_db"}, path);
    DatasetFile f;
    f.meta = t.meta;
    f.rows = meta_count(t.meta, "rows", path);
    f.cols = meta_count(t.meta, "cols", path);
    const std::size_t channels = t.header.size() - 4;
    if (channels != 2 * f.rows + 2 * f.cols) {
        throw ValidationError(path + ": channel count does not match the mesh size");
    }
    for (std::size_t c = 0; c < channels; ++c) {
        if (t.header[4 + c] != "v_" + std::to_string(c)) {
            throw ValidationError(path + ": bad header column " + t.header[4 + c]);
        }
    }
    for (const auto& r : t.rows) {
        DatasetRow d;
        d.sample = parse_index(r[0], path);
        d.pixel = parse_index(r[1], path);
        if (d.pixel >= f.rows * f.cols) {
            throw ValidationError(path + ": pixel index out of range");
        }
        d.delta_t = parse_double(r[2], path);
        const double snr = parse_double(r[3], path);
        if (std::isfinite(snr)) {
            d.snr_db = snr;
        }
        d.voltages.reserve(channels);
        for (std::size_t c = 0; c < channels; ++c) {
            d.voltages.push_back(parse_double(r[4 + c], path));
        }
        f.samples.push_back(std::move(d));
    }
    return f;
}

void write_results(const std::string& path, const std::vector<ResultRow>& rows, const CsvMeta& meta,
                   const std::string& config_hash) {
    auto out = open_out(path, config_hash);
    for (const auto& [k, v] : meta) {
        if (k != "config_hash") {
            out << "# " << k << '=' << v << '\n';
        }
    }
    out << "sample,true_pixel,pred_pixel,true_t,pred_t,d_norm\n";
    for (const auto& r : rows) {
        out << r.sample << ',' << r.true_pixel << ',';
        if (r.pred_pixel) {
            out << *r.pred_pixel;
        } else {
            out << -1;
        }
        out << ',' << format_double(r.true_t) << ',' << format_double(r.pred_t) << ',' << format_double(r.d_norm)
            << '\n';
    }
    close_out(out, path);
}

ResultsFile read_results(const std::string& path) {
    const Table t = read_table(path);
    expect_header(t, {"sample", "true_pixel", "pred_pixel", "true_t", "pred_t", "d_norm"}, path);
    ResultsFile f;
    f.meta = t.meta;
    for (const auto& r : t.rows) {
        ResultRow row;
        row.sample = parse_index(r[0], path);
        row.true_pixel = parse_index(r[1], path);
        const long long pred = parse_int(r[2], path);
        if (pred >= 0) {
            row.pred_pixel = static_cast<std::size_t>(pred);
        }
        row.true_t = parse_double(r[3], path);
        row.pred_t = parse_double(r[4], path);
        row.d_norm = parse_double(r[5], path);
        f.rows.push_back(row);
    }
    return f;
}

void write_rare_event_curves(const std::string& path, const std::vector<double>& k_values,
                             const std::vector<double>& s_values, const std::string& config_hash) {
    auto out = open_out(path, config_hash);
    out << "# model=independent-snapshot approximation,q_t_max=1\n";
    out << "k,s,p0,p1,p_ge2\n";
    for (double k : k_values) {
        for (double s : s_values) {
            const auto d = window_decomposition(s, k);
            out << format_double(k) << ',' << format_double(s) << ',' << format_double(d.p0) << ','
                << format_double(d.p1) << ',' << format_double(d.p_ge2) << '\n';
        }
    }
    close_out(out, path);
}

CsvMeta read_meta(const std::string& path) { return read_table(path, true).meta; }

std::string common_hash(const std::vector<CsvMeta>& metas, const std::vector<std::string>& names) {
    std::string hash;
    for (std::size_t i = 0; i < metas.size(); ++i) {
        const auto it = metas[i].find("config_hash");
        const std::string name = i < names.size() ? names[i] : "input " + std::to_string(i);
        if (it == metas[i].end()) {
            throw ValidationError(name + ": no config_hash line");
        }
        if (hash.empty()) {
            hash = it->second;
        } else if (it->second != hash) {
            throw ValidationError("mixed config hashes: " + name + " has " + it->second + ", expected " + hash);
        }
    }
    return hash;
}

}  // namespace thermomesh
