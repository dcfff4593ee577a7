#include "dense_oracle.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <stdexcept>
#include <variant>

namespace oracle {

namespace {

double beta_rho(double rho0, double beta, double t0, double t) {
    return rho0 * std::exp(beta * (1.0 / t - 1.0 / t0));
}

}  // namespace

double interlayer_ohms(const thermomesh::MaterialSet& m, const thermomesh::MeshSpec& g, double t) {
    const double shape = g.interlayer_thickness / g.interlayer_area;
    const auto& v = m.interlayer.variant();
    if (const auto* c = std::get_if<thermomesh::ConstantR>(&v)) {
        return c->resistance;
    }
    if (const auto* n = std::get_if<thermomesh::Ntc>(&v)) {
        return beta_rho(n->rho0, n->beta, n->t0, t) * shape;
    }
    if (const auto* p = std::get_if<thermomesh::Vo2Piecewise>(&v)) {
        for (const auto& s : p->segments) {
            if (t >= s.t_low && t <= s.t_high) {
                return beta_rho(s.law.rho0, s.law.beta, s.law.t0, t) * shape;
            }
        }
        throw std::domain_error("oracle: vo2 temperature outside segments");
    }
    if (const auto* s = std::get_if<thermomesh::IdealSwitch>(&v)) {
        return t >= s->t_threshold ? s->r_closed : s->r_open;
    }
    throw std::logic_error("oracle: merged interlayer has no resistance");
}

Circuit build(const thermomesh::MeshSpec& mesh, const thermomesh::MaterialSet& mat, const std::vector<double>& state) {
    const std::size_t M = mesh.rows;
    const std::size_t N = mesh.cols;
    const bool merged = mat.interlayer.merged();
    auto pix = [&](std::size_t i, std::size_t j) { return i * N + j; };
    // Layer 1 nodes first, then layer 2; merged meshes alias both onto one.
    auto n1 = [&](std::size_t i, std::size_t j) { return pix(i, j); };
    auto n2 = [&](std::size_t i, std::size_t j) { return merged ? pix(i, j) : M * N + pix(i, j); };

    Circuit c;
    c.nodes = merged ? M * N : 2 * M * N;
    const double ga = mesh.wire_cross_section / (mat.resistivity_leg_a * mesh.pitch);
    const double gb = mesh.wire_cross_section / (mat.resistivity_leg_b * mesh.pitch);
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t j = 0; j + 1 < N; ++j) {
            c.branches.push_back({n1(i, j), n1(i, j + 1), ga, mat.seebeck_leg_a, pix(i, j), pix(i, j + 1)});
        }
    }
    for (std::size_t i = 0; i + 1 < M; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
            c.branches.push_back({n2(i, j), n2(i + 1, j), gb, mat.seebeck_leg_b, pix(i, j), pix(i + 1, j)});
        }
    }
    if (!merged) {
        for (std::size_t i = 0; i < M; ++i) {
            for (std::size_t j = 0; j < N; ++j) {
                const double t = mat.reference_temperature + (state.empty() ? 0.0 : state[pix(i, j)]);
                c.branches.push_back({n1(i, j), n2(i, j), 1.0 / interlayer_ohms(mat, mesh, t), 0.0, pix(i, j),
                                      pix(i, j)});
            }
        }
    }
    auto lead = [&](std::size_t node, std::size_t p, double s) {
        c.channel_node.push_back(node);
        c.channel_pixel.push_back(p);
        c.channel_seebeck.push_back(s);
    };
    for (std::size_t j = 0; j < N; ++j) lead(n2(0, j), pix(0, j), mat.seebeck_leg_b);
    for (std::size_t i = 0; i < M; ++i) lead(n1(i, N - 1), pix(i, N - 1), mat.seebeck_leg_a);
    for (std::size_t j = N; j-- > 0;) lead(n2(M - 1, j), pix(M - 1, j), mat.seebeck_leg_b);
    for (std::size_t i = M; i-- > 0;) lead(n1(i, 0), pix(i, 0), mat.seebeck_leg_a);
    return c;
}

namespace {

// 50 significant digits: open switches sit eleven decades below the wires.
using Real = boost::multiprecision::cpp_bin_float_50;
using Dense = std::vector<std::vector<Real>>;

Dense stamp(const Circuit& c) {
    Dense g(c.nodes, std::vector<Real>(c.nodes, Real(0)));
    for (const auto& b : c.branches) {
        const Real x = b.g;
        g[b.p][b.p] += x;
        g[b.q][b.q] += x;
        g[b.p][b.q] -= x;
        g[b.q][b.p] -= x;
    }
    return g;
}

// Gauss-Jordan with partial pivoting on [a | b]; returns a^-1 b.
Dense solve(Dense a, Dense b) {
    const std::size_t n = a.size();
    const std::size_t m = b.empty() ? 0 : b[0].size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t r = k + 1; r < n; ++r) {
            if (abs(a[r][k]) > abs(a[piv][k])) piv = r;
        }
        if (a[piv][k] == 0) throw std::runtime_error("oracle: singular system");
        std::swap(a[k], a[piv]);
        std::swap(b[k], b[piv]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == k || a[r][k] == 0) continue;
            const Real f = a[r][k] / a[k][k];
            for (std::size_t j = k; j < n; ++j) a[r][j] -= f * a[k][j];
            for (std::size_t j = 0; j < m; ++j) b[r][j] -= f * b[k][j];
        }
    }
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < m; ++j) b[r][j] /= a[r][r];
    }
    return b;
}

}  // namespace

Eigen::MatrixXd conductance(const Circuit& c) {
    const Dense g = stamp(c);
    Eigen::MatrixXd out(c.nodes, c.nodes);
    for (std::size_t i = 0; i < c.nodes; ++i) {
        for (std::size_t j = 0; j < c.nodes; ++j) out(i, j) = static_cast<double>(g[i][j]);
    }
    return out;
}

Eigen::MatrixXd sensitivity(const thermomesh::MeshSpec& mesh, const thermomesh::MaterialSet& mat,
                            const std::vector<double>& state, std::size_t datum) {
    const Circuit c = build(mesh, mat, state);
    const std::size_t P = mesh.rows * mesh.cols;
    const std::size_t C = c.channel_node.size();
    const Dense g = stamp(c);

    // Branch current g (U_p - U_q - e) with e = s (T_q - T_p): KCL moves +g e
    // to node p's right-hand side and -g e to node q's.
    Dense s(c.nodes, std::vector<Real>(P, Real(0)));
    for (const auto& b : c.branches) {
        if (b.seebeck == 0.0 || b.pix_p == b.pix_q) continue;
        const Real k = Real(b.g) * Real(b.seebeck);
        s[b.p][b.pix_q] += k;
        s[b.p][b.pix_p] -= k;
        s[b.q][b.pix_p] += k;
        s[b.q][b.pix_q] -= k;
    }

    const std::size_t ground = c.channel_node[datum];
    std::vector<std::size_t> keep;
    for (std::size_t n = 0; n < c.nodes; ++n) {
        if (n != ground) keep.push_back(n);
    }
    Dense gr(keep.size(), std::vector<Real>(keep.size()));
    Dense sr(keep.size());
    for (std::size_t a = 0; a < keep.size(); ++a) {
        for (std::size_t b = 0; b < keep.size(); ++b) gr[a][b] = g[keep[a]][keep[b]];
        sr[a] = s[keep[a]];
    }
    const Dense ur = solve(std::move(gr), std::move(sr));
    Dense u(c.nodes, std::vector<Real>(P, Real(0)));
    for (std::size_t a = 0; a < keep.size(); ++a) u[keep[a]] = ur[a];

    Dense v(C, std::vector<Real>(P));
    for (std::size_t ch = 0; ch < C; ++ch) {
        v[ch] = u[c.channel_node[ch]];
        v[ch][c.channel_pixel[ch]] += c.channel_seebeck[ch];
    }
    Eigen::MatrixXd out(C, P);
    for (std::size_t ch = 0; ch < C; ++ch) {
        for (std::size_t j = 0; j < P; ++j) out(ch, j) = static_cast<double>(v[ch][j] - v[datum][j]);
    }
    return out;
}

}  // namespace oracle
