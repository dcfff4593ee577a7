#include "thermomesh/network.hpp"

#include "thermomesh/errors.hpp"
#include "thermomesh/parallel.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace thermomesh {

// ---------------------------------------------------------------------------
// Channels
// ---------------------------------------------------------------------------

std::size_t channel_index(const MeshSpec& mesh, ChannelLine line) {
    const std::size_t m = mesh.rows;
    const std::size_t n = mesh.cols;
    const std::size_t limit = (line.side == Side::top || line.side == Side::bottom) ? n : m;
    if (line.line >= limit) {
        throw ValidationError("channel line out of range");
    }
    switch (line.side) {
        case Side::top:
            return line.line;
        case Side::right:
            return n + line.line;
        case Side::bottom:
            return n + m + (n - 1 - line.line);
        case Side::left:
            return 2 * n + m + (m - 1 - line.line);
    }
    throw ValidationError("unknown side");
}

ChannelLine channel_line(const MeshSpec& mesh, std::size_t channel) {
    const std::size_t m = mesh.rows;
    const std::size_t n = mesh.cols;
    if (channel < n) {
        return {Side::top, channel};
    }
    if (channel < n + m) {
        return {Side::right, channel - n};
    }
    if (channel < 2 * n + m) {
        return {Side::bottom, n - 1 - (channel - n - m)};
    }
    if (channel < 2 * n + 2 * m) {
        return {Side::left, m - 1 - (channel - 2 * n - m)};
    }
    throw ValidationError("channel index out of range");
}

std::size_t mirror_channel(const MeshSpec& mesh, std::size_t channel) {
    ChannelLine line = channel_line(mesh, channel);
    switch (line.side) {
        case Side::top:
        case Side::bottom:
            line.line = mesh.cols - 1 - line.line;
            break;
        case Side::right:
            line.side = Side::left;
            break;
        case Side::left:
            line.side = Side::right;
            break;
    }
    return channel_index(mesh, line);
}

// ---------------------------------------------------------------------------
// NetworkSystem
// ---------------------------------------------------------------------------

namespace {

// LDL^T of a grounded Laplacian given its off-diagonal entries (<= 0) and
// its row sums (the conductance to ground, >= 0). Pivots are formed from
// those two rather than from the diagonal, so every update adds terms of one
// sign and small conductances survive next to large ones.
class GroundedLaplacianLdl {
public:
    GroundedLaplacianLdl() = default;
    GroundedLaplacianLdl(Eigen::MatrixXd a, Eigen::VectorXd excess) : l_(std::move(a)) {
        const Eigen::Index n = l_.rows();
        d_.resize(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            double dk = std::max(excess[k], 0.0);
            for (Eigen::Index j = k + 1; j < n; ++j) {
                dk -= l_(k, j);
            }
            if (!(dk > 0.0)) {
                throw InternalError("grounded Laplacian has a floating component");
            }
            d_[k] = dk;
            for (Eigen::Index i = k + 1; i < n; ++i) {
                l_(i, k) /= dk;
            }
            for (Eigen::Index i = k + 1; i < n; ++i) {
                const double lik = l_(i, k);
                if (lik == 0.0) {
                    continue;
                }
                excess[i] -= lik * std::max(excess[k], 0.0);
                for (Eigen::Index j = k + 1; j < n; ++j) {
                    if (j != i) {
                        l_(i, j) -= lik * l_(k, j);
                    }
                }
            }
        }
    }

    Eigen::VectorXd solve(Eigen::VectorXd b) const {
        const Eigen::Index n = d_.size();
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index k = 0; k < i; ++k) {
                b[i] -= l_(i, k) * b[k];
            }
        }
        b.array() /= d_.array();
        for (Eigen::Index i = n; i-- > 0;) {
            for (Eigen::Index k = i + 1; k < n; ++k) {
                b[i] -= l_(k, i) * b[k];
            }
        }
        return b;
    }

    const Eigen::VectorXd& pivots() const { return d_; }

private:
    Eigen::MatrixXd l_;   // strict lower part: multipliers; strict upper: working off-diagonals
    Eigen::VectorXd d_;
};

}  // namespace

// Each wire is a separate conductor joined to the others only through the
// junctions. The gauged system is solved in coordinates where every wire
// other than the gauge node's is a common offset plus potentials relative to
// its first node. Stamps inside a wire never touch its offset, so the offset
// rows collect only interlayer conductances, which a direct factorization of
// G would lose against the much larger wire terms when the junctions are
// resistive. The remaining block is well conditioned and factored as is. Its
// Schur complement onto the offsets is the network reduced to the wire
// reference nodes, a grounded Laplacian that is factored from its
// off-diagonals and ground conductances.
struct NetworkSystem::Factorization {
    static constexpr long kNone = -1;
    using Quad = __float128;

    struct Link {
        std::size_t p, q;
        double g;
    };
    struct Source {
        std::size_t p, q;
        double k;   // g * seebeck
        std::size_t pix_p, pix_q;
    };

    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
    std::size_t gauge = 0;
    std::size_t size = 0;        // full node count
    std::size_t potentials = 0;  // reduced potential unknowns
    std::size_t offsets = 0;     // floating wires
    std::vector<long> slot;      // node -> potential unknown, kNone for gauge and wire references
    std::vector<long> wire;      // node -> offset unknown, kNone on the gauge wire
    SparseMatrix sources;        // source matrix over the potential unknowns
    SparseMatrix border;         // potentials x offsets
    GroundedLaplacianLdl schur;
    // Mixed strong and weak junctions leave clusters of wires whose net
    // injection must cancel to far below double rounding; such systems get
    // iterative refinement with branch-form residuals in quad precision.
    bool refine = false;
    std::vector<Link> links;
    std::vector<Source> source_branches;
    static constexpr int kRefineSteps = 2;

    /// Image of sign * e_n; keys >= potentials are offsets.
    void image(std::size_t n, std::map<std::size_t, double>& w, double sign) const {
        if (slot[n] != kNone) {
            w[static_cast<std::size_t>(slot[n])] += sign;
        }
        if (wire[n] != kNone) {
            w[potentials + static_cast<std::size_t>(wire[n])] += sign;
        }
    }

    /// Solves [block, border; border^T, offset block] [x; a] = [x; r_offset]
    /// in place and returns a.
    Eigen::VectorXd solve_in_place(Eigen::VectorXd& x, const Eigen::VectorXd& r_offset) const {
        x = ldlt.solve(x);
        if (offsets == 0) {
            return {};
        }
        const Eigen::VectorXd a = schur.solve(r_offset - border.transpose() * x);
        x -= ldlt.solve(Eigen::VectorXd(border * a));
        return a;
    }

    Eigen::VectorXd expand(const Eigen::VectorXd& x, const Eigen::VectorXd& a) const {
        Eigen::VectorXd u(static_cast<Eigen::Index>(size));
        for (std::size_t n = 0; n < size; ++n) {
            double v = slot[n] == kNone ? 0.0 : x[slot[n]];
            if (wire[n] != kNone) {
                v += a[wire[n]];
            }
            u[static_cast<Eigen::Index>(n)] = v;
        }
        return u;
    }

    Eigen::VectorXd raw_solve(const Eigen::VectorXd& rhs) const {
        Eigen::VectorXd x(static_cast<Eigen::Index>(potentials));
        std::vector<long double> wires(offsets, 0.0L);
        for (std::size_t n = 0; n < size; ++n) {
            const double r = rhs[static_cast<Eigen::Index>(n)];
            if (slot[n] != kNone) {
                x[slot[n]] = r;
            }
            if (wire[n] != kNone) {
                wires[static_cast<std::size_t>(wire[n])] += r;
            }
        }
        Eigen::VectorXd r_offset(static_cast<Eigen::Index>(offsets));
        for (std::size_t k = 0; k < offsets; ++k) {
            r_offset[static_cast<Eigen::Index>(k)] = static_cast<double>(wires[k]);
        }
        const Eigen::VectorXd a = solve_in_place(x, r_offset);
        return expand(x, a);
    }

    /// Refines u0 toward G u = b (gauge row excluded) and returns it in quad.
    std::vector<Quad> refined(const std::vector<Quad>& b, const Eigen::VectorXd& u0) const {
        std::vector<Quad> u(size);
        for (std::size_t n = 0; n < size; ++n) {
            u[n] = u0[static_cast<Eigen::Index>(n)];
        }
        std::vector<Quad> r(size);
        Eigen::VectorXd rd(static_cast<Eigen::Index>(size));
        for (int step = 0; step < kRefineSteps; ++step) {
            r = b;
            for (const auto& l : links) {
                const Quad i = Quad(l.g) * (u[l.p] - u[l.q]);
                r[l.p] -= i;
                r[l.q] += i;
            }
            r[gauge] = 0;
            for (std::size_t n = 0; n < size; ++n) {
                rd[static_cast<Eigen::Index>(n)] = static_cast<double>(r[n]);
            }
            const Eigen::VectorXd d = raw_solve(rd);
            for (std::size_t n = 0; n < size; ++n) {
                u[n] += d[static_cast<Eigen::Index>(n)];
            }
        }
        return u;
    }

    std::vector<Quad> seebeck_rhs(const Eigen::VectorXd& t) const {
        std::vector<Quad> b(size, Quad(0));
        for (const auto& s : source_branches) {
            const Quad e = Quad(s.k) * (Quad(t[static_cast<Eigen::Index>(s.pix_q)]) -
                                        Quad(t[static_cast<Eigen::Index>(s.pix_p)]));
            b[s.p] += e;
            b[s.q] -= e;
        }
        return b;
    }
};

namespace {

Eigen::VectorXd to_double(const std::vector<__float128>& u) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(u.size()));
    for (std::size_t n = 0; n < u.size(); ++n) {
        out[static_cast<Eigen::Index>(n)] = static_cast<double>(u[n]);
    }
    return out;
}

}  // namespace

std::size_t NetworkSystem::node(const NodeIndex& index) const {
    const std::size_t p = mesh_.pixel(index.row, index.col);
    if (merged_ || index.layer == 1) {
        return p;
    }
    return mesh_.pixel_count() + p;
}

std::vector<double> NetworkSystem::boundary_coupling() const { return std::vector<double>(node_count(), 0.0); }

Eigen::VectorXd NetworkSystem::solve(const Eigen::VectorXd& rhs) const {
    const auto& f = *factor_;
    if (static_cast<std::size_t>(rhs.size()) != f.size) {
        throw ValidationError("solve: rhs size does not match node count");
    }
    const Eigen::VectorXd u = f.raw_solve(rhs);
    if (!f.refine) {
        return u;
    }
    return to_double(f.refined(std::vector<Factorization::Quad>(rhs.begin(), rhs.end()), u));
}

Eigen::VectorXd NetworkSystem::solve_seebeck(const Eigen::VectorXd& temperatures) const {
    const auto& f = *factor_;
    if (temperatures.size() != seebeck_.cols()) {
        throw ValidationError("solve_seebeck: temperature vector size does not match pixel count");
    }
    Eigen::VectorXd x = f.sources * temperatures;
    const Eigen::VectorXd a = f.solve_in_place(x, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.offsets)));
    const Eigen::VectorXd u = f.expand(x, a);
    if (!f.refine) {
        return u;
    }
    return to_double(f.refined(f.seebeck_rhs(temperatures), u));
}

Eigen::RowVectorXd NetworkSystem::node_sensitivity(std::size_t n) const {
    const auto& f = *factor_;
    if (n >= f.size) {
        throw ValidationError("node index out of range");
    }
    std::map<std::size_t, double> w;
    f.image(n, w, 1.0);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.potentials));
    Eigen::VectorXd r_offset = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.offsets));
    for (const auto& [k, v] : w) {
        if (k < f.potentials) {
            x[static_cast<Eigen::Index>(k)] = v;
        } else {
            r_offset[static_cast<Eigen::Index>(k - f.potentials)] = v;
        }
    }
    const Eigen::VectorXd a = f.solve_in_place(x, r_offset);
    if (!f.refine) {
        // The sources have no offset rows, so only the potential part is needed.
        return (f.sources.transpose() * x).transpose();
    }
    // G^-1 e_n carries the large common level of weakly held clusters; the
    // row needs in-wire differences, so they are taken in quad.
    std::vector<Factorization::Quad> e(f.size, 0);
    e[n] = 1;
    const auto u = f.refined(e, f.expand(x, a));
    std::vector<Factorization::Quad> row(static_cast<std::size_t>(seebeck_.cols()), 0);
    for (const auto& s : f.source_branches) {
        const Factorization::Quad c = Factorization::Quad(s.k) * (u[s.p] - u[s.q]);
        row[s.pix_q] += c;
        row[s.pix_p] -= c;
    }
    return to_double(row).transpose();
}

Eigen::VectorXd NetworkSystem::read_channels(const Eigen::VectorXd& potentials,
                                             const Eigen::VectorXd& temperatures) const {
    const std::size_t nch = channel_nodes_.size();
    Eigen::VectorXd v = boundary_seebeck_ * temperatures;
    for (std::size_t c = 0; c < nch; ++c) {
        v[c] += potentials[channel_nodes_[c]];
    }
    v.array() -= v[datum_];
    return v;
}

double NetworkSystem::pivot_ratio() const {
    const Eigen::VectorXd d = factor_->ldlt.vectorD().cwiseAbs();
    double hi = d.maxCoeff();
    double lo = d.minCoeff();
    if (factor_->offsets > 0) {
        const Eigen::VectorXd& s = factor_->schur.pivots();
        hi = std::max(hi, s.maxCoeff());
        lo = std::min(lo, s.minCoeff());
    }
    return hi / lo;
}

namespace {

using Triplet = Eigen::Triplet<double>;

struct Branch {
    std::size_t p, q;
    double cond, seebeck;
    std::size_t pix_p, pix_q;
    bool interlayer;
};

struct Stamps {
    std::vector<Triplet> g;
    std::vector<Triplet> s;
    std::vector<Branch> branches;

    // Branch p -> q carrying current g (U_p - U_q - seebeck (T_q - T_p)).
    void branch(std::size_t p, std::size_t q, double cond, double seebeck, std::size_t pix_p, std::size_t pix_q,
                bool interlayer = false) {
        branches.push_back({p, q, cond, seebeck, pix_p, pix_q, interlayer});
        g.emplace_back(p, p, cond);
        g.emplace_back(q, q, cond);
        g.emplace_back(p, q, -cond);
        g.emplace_back(q, p, -cond);
        if (seebeck != 0.0 && pix_p != pix_q) {
            const double k = cond * seebeck;
            s.emplace_back(p, pix_q, k);
            s.emplace_back(p, pix_p, -k);
            s.emplace_back(q, pix_p, k);
            s.emplace_back(q, pix_q, -k);
        }
    }
};

}  // namespace

NetworkSystem assemble(const MeshSpec& mesh, const MaterialSet& materials, const TemperatureField* state,
                       std::size_t datum_channel) {
    mesh.validate();
    materials.validate();
    const std::size_t m = mesh.rows;
    const std::size_t n = mesh.cols;
    const std::size_t pixels = mesh.pixel_count();
    const InterlayerModel& interlayer = materials.interlayer;

    NetworkSystem sys;
    sys.mesh_ = mesh;
    sys.tag_ = interlayer.tag();
    sys.merged_ = interlayer.merged();

    if (datum_channel >= mesh.channel_count()) {
        throw ValidationError("datum channel out of range");
    }
    if (interlayer.temperature_dependent()) {
        if (state == nullptr) {
            throw ValidationError("temperature-dependent interlayer requires a temperature state");
        }
        if (state->values.size() != pixels) {
            throw ValidationError("temperature state has " + std::to_string(state->values.size()) +
                                  " entries, mesh has " + std::to_string(pixels) + " pixels");
        }
        sys.state_ = state->values;
    }

    const std::size_t nodes = sys.merged_ ? pixels : 2 * pixels;
    const double g_a = mesh.wire_cross_section / (materials.resistivity_leg_a * mesh.pitch);
    const double g_b = mesh.wire_cross_section / (materials.resistivity_leg_b * mesh.pitch);
    auto node = [&](int layer, std::size_t i, std::size_t j) {
        return sys.node(NodeIndex{layer, i, j});
    };

    Stamps st;
    st.g.reserve(4 * (3 * pixels));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j + 1 < n; ++j) {
            st.branch(node(1, i, j), node(1, i, j + 1), g_a, materials.seebeck_leg_a, mesh.pixel(i, j),
                      mesh.pixel(i, j + 1));
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i + 1 < m; ++i) {
            st.branch(node(2, i, j), node(2, i + 1, j), g_b, materials.seebeck_leg_b, mesh.pixel(i, j),
                      mesh.pixel(i + 1, j));
        }
    }
    if (!sys.merged_) {
        for (std::size_t p = 0; p < pixels; ++p) {
            const double t_abs = materials.reference_temperature + (sys.state_ ? (*sys.state_)[p] : 0.0);
            const double r = interlayer_resistance(interlayer, mesh, t_abs);
            if (!(r > 0.0) || !std::isfinite(r)) {
                throw DomainError("interlayer resistance must be finite and positive");
            }
            st.branch(p, pixels + p, 1.0 / r, 0.0, p, p, true);
        }
    }

    sys.conductance_.resize(nodes, nodes);
    sys.conductance_.setFromTriplets(st.g.begin(), st.g.end());
    sys.seebeck_.resize(nodes, pixels);
    sys.seebeck_.setFromTriplets(st.s.begin(), st.s.end());

    // Leads: channel reads edge potential plus the lead EMF from the edge
    // junction down to the cold-junction terminal.
    const std::size_t nch = mesh.channel_count();
    sys.channel_nodes_.resize(nch);
    sys.lead_resistances_.resize(nch);
    std::vector<Triplet> is;
    is.reserve(nch);
    for (std::size_t c = 0; c < nch; ++c) {
        const ChannelLine line = channel_line(mesh, c);
        std::size_t i = 0;
        std::size_t j = 0;
        int layer = 1;
        switch (line.side) {
            case Side::top:
                i = 0, j = line.line, layer = 2;
                break;
            case Side::bottom:
                i = m - 1, j = line.line, layer = 2;
                break;
            case Side::right:
                i = line.line, j = n - 1, layer = 1;
                break;
            case Side::left:
                i = line.line, j = 0, layer = 1;
                break;
        }
        const double seebeck = layer == 1 ? materials.seebeck_leg_a : materials.seebeck_leg_b;
        const double rho = layer == 1 ? materials.resistivity_leg_a : materials.resistivity_leg_b;
        sys.channel_nodes_[c] = node(layer, i, j);
        sys.lead_resistances_[c] = rho * mesh.lead_length_fraction * mesh.pitch / mesh.wire_cross_section;
        is.emplace_back(c, mesh.pixel(i, j), seebeck);
    }
    sys.boundary_seebeck_.resize(nch, pixels);
    sys.boundary_seebeck_.setFromTriplets(is.begin(), is.end());
    sys.datum_ = datum_channel;

    // Gauge: ground the datum channel's edge node.
    auto factor = std::make_shared<NetworkSystem::Factorization>();
    auto& f = *factor;
    f.gauge = sys.channel_nodes_[datum_channel];
    f.size = nodes;
    // Rounding in a cluster's net injection grows with the spread of the
    // junction conductances; a uniform interlayer is exact without refinement.
    double c_min = std::numeric_limits<double>::infinity();
    double c_max = 0.0;
    for (const auto& br : st.branches) {
        f.links.push_back({br.p, br.q, br.cond});
        if (br.seebeck != 0.0 && br.pix_p != br.pix_q) {
            f.source_branches.push_back({br.p, br.q, br.cond * br.seebeck, br.pix_p, br.pix_q});
        }
        if (br.interlayer) {
            c_min = std::min(c_min, br.cond);
            c_max = std::max(c_max, br.cond);
        }
    }
    f.refine = c_max > 1e4 * c_min;

    // Wires are the components of the wire branches (the interlayer ones
    // carry no EMF); each is referenced to its lowest node, the gauge wire to
    // the gauge node.
    std::vector<std::size_t> parent(nodes);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            x = parent[x] = parent[parent[x]];
        }
        return x;
    };
    for (const auto& br : st.branches) {
        if (!br.interlayer) {
            parent[find(br.p)] = find(br.q);
        }
    }
    std::vector<long> ref_of(nodes, NetworkSystem::Factorization::kNone);   // root -> offset index
    std::vector<bool> reference(nodes, false);
    const std::size_t gauge_root = find(f.gauge);
    f.slot.assign(nodes, NetworkSystem::Factorization::kNone);
    f.wire.assign(nodes, NetworkSystem::Factorization::kNone);
    for (std::size_t n = 0; n < nodes; ++n) {
        const std::size_t root = find(n);
        if (root == gauge_root) {
            continue;
        }
        if (ref_of[root] == NetworkSystem::Factorization::kNone) {
            ref_of[root] = static_cast<long>(f.offsets++);
            reference[n] = true;
        }
        f.wire[n] = ref_of[root];
    }
    for (std::size_t n = 0; n < nodes; ++n) {
        if (n != f.gauge && !reference[n]) {
            f.slot[n] = static_cast<long>(f.potentials++);
        }
    }

    // Each branch stamps g w w^T with w the reduced image of e_p - e_q,
    // merged first so the offset terms of intra-wire stamps cancel exactly.
    const std::size_t np = f.potentials;
    const auto no = static_cast<Eigen::Index>(f.offsets);
    std::vector<Triplet> reduced;
    std::vector<Triplet> border;
    std::vector<Triplet> sources;
    reduced.reserve(st.g.size());
    Eigen::MatrixXd offset_block = Eigen::MatrixXd::Zero(no, no);
    // Row sums over the offset columns, from the branches whose offset terms
    // do not cancel (those reaching the gauge wire).
    Eigen::VectorXd border_ground = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(np));
    Eigen::VectorXd offset_ground = Eigen::VectorXd::Zero(no);
    std::map<std::size_t, double> w;
    for (const auto& br : st.branches) {
        w.clear();
        f.image(br.p, w, 1.0);
        f.image(br.q, w, -1.0);
        std::erase_if(w, [](const auto& kv) { return kv.second == 0.0; });
        double offset_sum = 0.0;
        for (const auto& [i, wi] : w) {
            if (i >= np) {
                offset_sum += wi;
            }
        }
        for (const auto& [i, wi] : w) {
            if (offset_sum != 0.0) {
                const double v = br.cond * wi * offset_sum;
                if (i < np) {
                    border_ground[static_cast<Eigen::Index>(i)] += v;
                } else {
                    offset_ground[static_cast<Eigen::Index>(i - np)] += v;
                }
            }
            for (const auto& [j, wj] : w) {
                const double v = br.cond * wi * wj;
                if (i < np && j < np) {
                    reduced.emplace_back(i, j, v);
                } else if (i < np) {
                    border.emplace_back(i, j - np, v);
                } else if (j >= np) {
                    offset_block(static_cast<Eigen::Index>(i - np), static_cast<Eigen::Index>(j - np)) += v;
                }
            }
            if (br.seebeck != 0.0 && br.pix_p != br.pix_q) {
                if (i >= np) {
                    throw InternalError("source branch touches a wire offset");
                }
                const double k = br.cond * br.seebeck * wi;
                sources.emplace_back(i, br.pix_q, k);
                sources.emplace_back(i, br.pix_p, -k);
            }
        }
    }
    NetworkSystem::SparseMatrix block(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(np));
    block.setFromTriplets(reduced.begin(), reduced.end());
    f.sources.resize(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(pixels));
    f.sources.setFromTriplets(sources.begin(), sources.end());
    f.border.resize(static_cast<Eigen::Index>(np), no);
    f.border.setFromTriplets(border.begin(), border.end());
    f.ldlt.compute(block);
    if (f.ldlt.info() != Eigen::Success) {
        throw InternalError("gauged conductance matrix factorization failed");
    }
    const Eigen::VectorXd d = f.ldlt.vectorD();
    if (d.minCoeff() <= 0.0) {
        std::ostringstream os;
        os << "gauged conductance matrix is not positive definite (pivot ratio "
           << d.cwiseAbs().maxCoeff() / d.cwiseAbs().minCoeff() << ")";
        throw InternalError(os.str());
    }
    if (no > 0) {
        // Schur complement column by column, in chunks to bound memory.
        constexpr Eigen::Index kChunk = 64;
        Eigen::MatrixXd schur = offset_block;
        for (Eigen::Index c0 = 0; c0 < no; c0 += kChunk) {
            const Eigen::Index nc = std::min(kChunk, no - c0);
            const Eigen::MatrixXd b = Eigen::MatrixXd(f.border.middleCols(c0, nc));
            const Eigen::MatrixXd y = f.ldlt.solve(b);
            schur.middleCols(c0, nc) -= f.border.transpose() * y;
        }
        const Eigen::VectorXd excess = offset_ground - f.border.transpose() * f.ldlt.solve(border_ground);
        for (Eigen::Index i = 0; i < no; ++i) {
            for (Eigen::Index j = 0; j < i; ++j) {
                const double v = std::min(0.5 * (schur(i, j) + schur(j, i)), 0.0);
                schur(i, j) = schur(j, i) = v;
            }
        }
        f.schur = GroundedLaplacianLdl(std::move(schur), excess);
    }
    sys.factor_ = std::move(factor);
    return sys;
}

// ---------------------------------------------------------------------------
// Sensitivity matrix
// ---------------------------------------------------------------------------

Eigen::VectorXd sensitivity_column(const NetworkSystem& system, std::size_t pixel) {
    const std::size_t pixels = system.mesh().pixel_count();
    if (pixel >= pixels) {
        throw ValidationError("pixel index out of range");
    }
    Eigen::VectorXd t = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pixels));
    t[static_cast<Eigen::Index>(pixel)] = 1.0;
    const Eigen::VectorXd u = system.solve_seebeck(t);
    return system.read_channels(u, t);
}

SensitivityMatrix sensitivity_matrix(const NetworkSystem& system, SolveStrategy strategy) {
    const MeshSpec& mesh = system.mesh();
    const auto nch = static_cast<Eigen::Index>(mesh.channel_count());
    const auto pixels = static_cast<Eigen::Index>(mesh.pixel_count());

    SensitivityMatrix out;
    out.rows = mesh.rows;
    out.cols = mesh.cols;
    out.interlayer_tag = system.interlayer_tag();
    out.state = system.state();
    out.datum_channel = system.datum_channel();
    out.entries.resize(nch, pixels);

    if (strategy == SolveStrategy::forward) {
        parallel_for(static_cast<std::size_t>(pixels), [&](std::size_t j) {
            out.entries.col(static_cast<Eigen::Index>(j)) = sensitivity_column(system, j);
        });
        return out;
    }

    // Adjoint: G is symmetric, so row c of I_U G^-1 S is (G^-1 e_node(c))^T S.
    const auto& nodes = system.channel_nodes();
    std::vector<std::size_t> unique(nodes.begin(), nodes.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    std::map<std::size_t, std::size_t> slot;
    for (std::size_t k = 0; k < unique.size(); ++k) {
        slot[unique[k]] = k;
    }

    Eigen::MatrixXd node_rows(static_cast<Eigen::Index>(unique.size()), pixels);
    parallel_for(unique.size(), [&](std::size_t k) {
        node_rows.row(static_cast<Eigen::Index>(k)) = system.node_sensitivity(unique[k]);
    });

    const Eigen::MatrixXd lead = Eigen::MatrixXd(system.boundary_seebeck());
    for (Eigen::Index c = 0; c < nch; ++c) {
        out.entries.row(c) = node_rows.row(static_cast<Eigen::Index>(slot[nodes[static_cast<std::size_t>(c)]])) +
                             lead.row(c);
    }
    const Eigen::RowVectorXd datum = out.entries.row(static_cast<Eigen::Index>(system.datum_channel()));
    out.entries.rowwise() -= datum;
    return out;
}

BoundaryReading boundary_voltages(const NetworkSystem& system, const TemperatureField& temperatures) {
    const std::size_t pixels = system.mesh().pixel_count();
    if (temperatures.values.size() != pixels) {
        throw ValidationError("temperature field size does not match mesh");
    }
    if (system.state() && *system.state() != temperatures.values) {
        throw StalenessError("system was assembled at a different temperature state");
    }
    const Eigen::Map<const Eigen::VectorXd> t(temperatures.values.data(), static_cast<Eigen::Index>(pixels));
    const Eigen::VectorXd u = system.solve_seebeck(t);
    const Eigen::VectorXd v = system.read_channels(u, t);
    BoundaryReading out;
    out.voltages.assign(v.data(), v.data() + v.size());
    return out;
}

// ---------------------------------------------------------------------------
// EventResponse
// ---------------------------------------------------------------------------

EventResponse::EventResponse(const MeshSpec& mesh, const MaterialSet& materials)
    : mesh_(mesh), materials_(materials) {
    const auto pixels = mesh.pixel_count();
    const TemperatureField zero = TemperatureField::zeros(pixels);
    const NetworkSystem base = assemble(mesh, materials, &zero);
    const bool merged = base.merged();
    if (!merged) {
        ambient_conductance_ =
            1.0 / interlayer_resistance(materials.interlayer, mesh, materials.reference_temperature);
    }

    const auto nch = static_cast<Eigen::Index>(mesh.channel_count());
    const auto np = static_cast<Eigen::Index>(pixels);
    ambient_.resize(nch, np);
    update_ = Eigen::MatrixXd::Zero(nch, np);
    drive_gap_ = Eigen::VectorXd::Zero(np);
    self_gap_ = Eigen::VectorXd::Zero(np);

    const Eigen::VectorXd no_temp = Eigen::VectorXd::Zero(np);
    const auto n = static_cast<Eigen::Index>(base.node_count());
    parallel_for(pixels, [&](std::size_t p) {
        const auto jp = static_cast<Eigen::Index>(p);
        Eigen::VectorXd t = no_temp;
        t[jp] = 1.0;
        const Eigen::VectorXd x = base.solve_seebeck(t);
        ambient_.col(jp) = base.read_channels(x, t);
        if (merged) {
            return;
        }
        const auto n1 = static_cast<Eigen::Index>(p);
        const auto n2 = static_cast<Eigen::Index>(pixels + p);
        Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
        d[n1] = 1.0;
        d[n2] = -1.0;
        const Eigen::VectorXd z = base.solve(d);
        update_.col(jp) = base.read_channels(z, no_temp);
        drive_gap_[jp] = x[n1] - x[n2];
        self_gap_[jp] = z[n1] - z[n2];
    });
}

double EventResponse::conductance_change(double delta_t) const {
    if (materials_.interlayer.merged() || !materials_.interlayer.temperature_dependent()) {
        return 0.0;
    }
    const double r = interlayer_resistance(materials_.interlayer, mesh_, materials_.reference_temperature + delta_t);
    return 1.0 / r - ambient_conductance_;
}

Eigen::VectorXd EventResponse::column(std::size_t pixel, double delta_t) const {
    if (pixel >= pixel_count()) {
        throw ValidationError("pixel index out of range");
    }
    const auto jp = static_cast<Eigen::Index>(pixel);
    const double dg = conductance_change(delta_t);
    if (dg == 0.0) {
        return ambient_.col(jp);
    }
    const double c = dg * drive_gap_[jp] / (1.0 + dg * self_gap_[jp]);
    return ambient_.col(jp) - c * update_.col(jp);
}

Eigen::VectorXd EventResponse::response(std::size_t pixel, double delta_t) const {
    return delta_t * column(pixel, delta_t);
}

}  // namespace thermomesh
