#include "thermomesh/recovery.hpp"

#include "thermomesh/errors.hpp"
#include "thermomesh/parallel.hpp"
#include "thermomesh/rng.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace thermomesh {

// ---------------------------------------------------------------------------
// ForwardModel
// ---------------------------------------------------------------------------

ForwardModel::ForwardModel(const MeshSpec& mesh, const MaterialSet& materials) : mesh_(mesh), materials_(materials) {
    const auto& interlayer = materials.interlayer;
    if (!interlayer.temperature_dependent()) {
        ambient_ = sensitivity_matrix(assemble(mesh, materials)).entries;
        return;
    }
    if (std::holds_alternative<IdealSwitch>(interlayer.variant())) {
        const TemperatureField zero = TemperatureField::zeros(mesh.pixel_count());
        ambient_ = sensitivity_matrix(assemble(mesh, materials, zero)).entries;
        return;
    }
    events_ = std::make_shared<EventResponse>(mesh, materials);
    ambient_ = events_->ambient();
}

Eigen::VectorXd ForwardModel::response(std::size_t pixel, double delta_t) const {
    if (pixel >= pixel_count()) {
        throw ValidationError("pixel index out of range");
    }
    if (linear()) {
        return delta_t * ambient_.col(static_cast<Eigen::Index>(pixel));
    }
    if (events_) {
        return events_->response(pixel, delta_t);
    }
    const TemperatureField state = TemperatureField::single(pixel_count(), pixel, delta_t);
    const BoundaryReading r = boundary_voltages(assemble(mesh_, materials_, state), state);
    return Eigen::Map<const Eigen::VectorXd>(r.voltages.data(), static_cast<Eigen::Index>(r.voltages.size()));
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

double snr_noise_std(const Eigen::VectorXd& clean, double snr_db) {
    if (clean.size() == 0) {
        throw ValidationError("snr_noise_std: empty signal");
    }
    const double ps = clean.squaredNorm() / static_cast<double>(clean.size());
    if (!(ps > 0.0)) {
        throw DegenerateError("clean boundary signal is identically zero; SNR is undefined");
    }
    return std::sqrt(ps / std::pow(10.0, snr_db / 10.0));
}

std::vector<Sample> generate_dataset(const ForwardModel& model, const OperatingRange& range,
                                     const DatasetOptions& options) {
    range.validate();
    if (options.n_samples == 0) {
        throw ValidationError("dataset: n_samples must be >= 1");
    }
    const double t_ref = model.materials().reference_temperature;
    if (std::abs(range.t_amb - t_ref) > 1e-9 * t_ref) {
        throw ValidationError("dataset: t_amb must equal the reference temperature for 1-sparse fields");
    }
    const std::size_t pixels = model.pixel_count();
    const double span = range.t_max - range.t_amb;

    std::vector<Sample> out(options.n_samples);
    parallel_for(options.n_samples, [&](std::size_t k) {
        SplitMix64 rng(options.seed ^ static_cast<std::uint64_t>(k));
        Sample& s = out[k];
        s.index = k;
        s.pixel = rng.index(pixels);
        const double t_hot = range.t_amb + (1.0 - rng.uniform()) * span;  // (t_amb, t_max]
        s.delta_t = t_hot - t_ref;
        s.field = TemperatureField::single(pixels, s.pixel, s.delta_t);

        Eigen::VectorXd v = model.response(s.pixel, s.delta_t);
        s.reading.seed = options.seed ^ static_cast<std::uint64_t>(k);
        if (options.snr_db) {
            const double sd = snr_noise_std(v, *options.snr_db);
            for (Eigen::Index c = 0; c < v.size(); ++c) {
                v[c] += sd * rng.normal();
            }
            s.reading.noise_std = sd;
            s.reading.snr_db = options.snr_db;
        }
        s.reading.voltages.assign(v.data(), v.data() + v.size());
    });
    return out;
}

// ---------------------------------------------------------------------------
// Uniqueness
// ---------------------------------------------------------------------------

namespace {

struct ChebyshevBounds {
    double upper = 0.0;   // ||b - Q z||_inf attained by an explicit z
    double lower = 0.0;   // b^T h / ||h||_1 for an explicit h orthogonal to range(Q)
};

// max c^T x  s.t.  A x = rhs, x >= 0, rhs >= 0: revised two-phase simplex
// with the basis refactored every iteration, which keeps long degenerate runs
// accurate. Dantzig pricing, Bland's rule after a run of degenerate pivots.
// Returns the final basis (columns >= n are artificials), empty on failure.
std::vector<Eigen::Index> simplex_basis(const Eigen::MatrixXd& a, const Eigen::VectorXd& rhs,
                                        const Eigen::VectorXd& c) {
    const Eigen::Index m = a.rows();
    const Eigen::Index n = a.cols();
    constexpr double tol = 1e-9;
    std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
        basis[static_cast<std::size_t>(i)] = n + i;
    }
    auto column = [&](Eigen::Index j) -> Eigen::VectorXd {
        return j < n ? Eigen::VectorXd(a.col(j)) : Eigen::VectorXd::Unit(m, j - n);
    };
    auto factor = [&] {
        Eigen::MatrixXd b(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            b.col(i) = column(basis[static_cast<std::size_t>(i)]);
        }
        return Eigen::PartialPivLU<Eigen::MatrixXd>(b);
    };

    // cost(j) for j < n + m; phase 1 maximizes -sum(artificials).
    auto run = [&](bool phase1) {
        auto cost = [&](Eigen::Index j) { return phase1 ? (j < n ? 0.0 : -1.0) : (j < n ? c[j] : 0.0); };
        std::vector<char> in_basis(static_cast<std::size_t>(n + m), 0);
        int stall = 0;
        for (int it = 0; it < 20000; ++it) {
            const auto lu = factor();
            const Eigen::VectorXd xb = lu.solve(rhs);
            Eigen::VectorXd cb(m);
            std::fill(in_basis.begin(), in_basis.end(), 0);
            double infeasibility = 0.0;
            for (Eigen::Index i = 0; i < m; ++i) {
                const Eigen::Index j = basis[static_cast<std::size_t>(i)];
                cb[i] = cost(j);
                in_basis[static_cast<std::size_t>(j)] = 1;
                if (j >= n) {
                    infeasibility += std::abs(xb[i]);
                }
            }
            if (phase1 && infeasibility <= 1e-12) {
                return true;
            }
            const Eigen::VectorXd y = lu.transpose().solve(cb);
            const Eigen::VectorXd d = -(a.transpose() * y);
            Eigen::Index enter = -1;
            double best = tol;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (in_basis[static_cast<std::size_t>(j)]) {
                    continue;
                }
                const double rc = cost(j) + d[j];
                if (stall < 50 ? rc > best : rc > tol) {
                    best = rc, enter = j;
                    if (stall >= 50) {
                        break;
                    }
                }
            }
            if (enter < 0) {
                return true;
            }
            const Eigen::VectorXd w = lu.solve(column(enter));
            Eigen::Index leave = -1;
            double ratio = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < m; ++i) {
                if (w[i] > tol) {
                    const double r = std::max(xb[i], 0.0) / w[i];
                    if (r < ratio - 1e-14 ||
                        (r <= ratio + 1e-14 && leave >= 0 &&
                         basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
                        ratio = r, leave = i;
                    }
                }
            }
            if (leave < 0) {
                return true;  // unbounded
            }
            if (stall < 50) {
                stall = ratio * best <= 1e-12 ? stall + 1 : 0;
            }
            basis[static_cast<std::size_t>(leave)] = enter;
        }
        return false;
    };

    if (!run(true)) {
        return {};
    }
    // Swap zero-level artificials for structural columns where a pivot exists.
    for (Eigen::Index i = 0; i < m; ++i) {
        if (basis[static_cast<std::size_t>(i)] < n) {
            continue;
        }
        const auto lu = factor();
        const Eigen::VectorXd ei = Eigen::VectorXd::Unit(m, i);
        const Eigen::VectorXd yi = lu.transpose().solve(ei);
        const Eigen::RowVectorXd row = yi.transpose() * a;
        Eigen::Index col = -1;
        double best = 1e-7;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (std::find(basis.begin(), basis.end(), j) == basis.end() && std::abs(row[j]) > best) {
                best = std::abs(row[j]), col = j;
            }
        }
        if (col >= 0) {
            basis[static_cast<std::size_t>(i)] = col;
        }
    }
    // At the iteration limit the basis is still feasible and yields valid, if loose, bounds.
    run(false);
    return basis;
}

// Bounds on min_z ||b - Q z||_inf for Q with orthonormal columns, through its
// LP dual  max b^T h  s.t.  Q^T h = 0, ||h||_1 <= 1.
ChebyshevBounds chebyshev_distance(const Eigen::MatrixXd& q, const Eigen::VectorXd& b) {
    const Eigen::Index n = q.rows();
    const Eigen::Index r = q.cols();
    // h = u - v with u, v >= 0;  rows: Q^T (u - v) = 0,  sum(u + v) = 1.
    Eigen::MatrixXd a(r + 1, 2 * n);
    a.topLeftCorner(r, n) = q.transpose();
    a.topRightCorner(r, n) = -q.transpose();
    a.row(r).setOnes();
    // The zero rows make the LP massively degenerate; a small irregular
    // perturbation of them stops cycling. Both bounds stay valid because h
    // is projected back and the multipliers are checked explicitly.
    Eigen::VectorXd rhs(r + 1);
    for (Eigen::Index i = 0; i < r; ++i) {
        rhs[i] = 1e-7 * std::fmod(0.6180339887498949 * static_cast<double>(i + 1), 1.0);
    }
    rhs[r] = 1.0;
    Eigen::VectorXd c(2 * n);
    c << b, -b;

    ChebyshevBounds out;
    out.upper = b.cwiseAbs().maxCoeff();
    const auto basis = simplex_basis(a, rhs, c);
    if (basis.empty()) {
        return out;
    }
    Eigen::MatrixXd bm(r + 1, r + 1);
    Eigen::VectorXd cb(r + 1);
    for (Eigen::Index i = 0; i <= r; ++i) {
        const Eigen::Index j = basis[static_cast<std::size_t>(i)];
        bm.col(i) = j < 2 * n ? Eigen::VectorXd(a.col(j)) : Eigen::VectorXd::Unit(r + 1, j - 2 * n);
        cb[i] = j < 2 * n ? c[j] : 0.0;
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(bm);
    // Primal point h, projected back onto the null space.
    const Eigen::VectorXd xb = lu.solve(rhs);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i <= r; ++i) {
        const Eigen::Index j = basis[static_cast<std::size_t>(i)];
        if (j < n) {
            h[j] += xb[i];
        } else if (j < 2 * n) {
            h[j - n] -= xb[i];
        }
    }
    h -= q * (q.transpose() * h);
    if (h.cwiseAbs().sum() > 0.0) {
        out.lower = b.dot(h) / h.cwiseAbs().sum();
    }
    // Simplex multipliers (z, t): z is an explicit primal certificate.
    const Eigen::VectorXd y = lu.transpose().solve(cb);
    out.upper = std::min(out.upper, (b - q * y.head(r)).cwiseAbs().maxCoeff());
    return out;
}

}  // namespace

UniquenessReport verify_one_sparse_uniqueness(const Eigen::MatrixXd& a, double tol, bool check_nsp) {
    if (a.rows() == 0 || a.cols() == 0) {
        throw ValidationError("uniqueness: empty matrix");
    }
    UniquenessReport rep;
    const Eigen::Index n = a.cols();
    const Eigen::VectorXd norms = a.colwise().norm().transpose();
    const double max_norm = norms.maxCoeff();
    rep.min_norm_ratio = max_norm > 0.0 ? norms.minCoeff() / max_norm : 0.0;
    rep.no_zero_columns = true;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (!(norms[j] > tol * max_norm)) {
            rep.no_zero_columns = false;
            rep.zero_column = static_cast<std::size_t>(j);
            break;
        }
    }

    // Worst coherence over all pairs, in column blocks to bound memory.
    Eigen::MatrixXd unit = a;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (norms[j] > 0.0) {
            unit.col(j) /= norms[j];
        }
    }
    constexpr Eigen::Index kBlock = 512;
    const Eigen::Index blocks = (n + kBlock - 1) / kBlock;
    std::vector<std::tuple<double, Eigen::Index, Eigen::Index>> worst(static_cast<std::size_t>(blocks));
    parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t bi) {
        const Eigen::Index j0 = static_cast<Eigen::Index>(bi) * kBlock;
        const Eigen::Index nj = std::min(kBlock, n - j0);
        const Eigen::MatrixXd g = unit.middleCols(j0, nj).transpose() * unit;
        double w = -1.0;
        Eigen::Index wa = 0, wb = 0;
        for (Eigen::Index r = 0; r < nj; ++r) {
            for (Eigen::Index c = j0 + r + 1; c < n; ++c) {
                const double v = std::abs(g(r, c));
                if (v > w) {
                    w = v, wa = j0 + r, wb = c;
                }
            }
        }
        worst[bi] = {w, wa, wb};
    });
    rep.worst_coherence = -1.0;
    for (const auto& [w, wa, wb] : worst) {
        if (w > rep.worst_coherence) {
            rep.worst_coherence = w;
            rep.worst_pair_a = static_cast<std::size_t>(wa);
            rep.worst_pair_b = static_cast<std::size_t>(wb);
        }
    }
    rep.worst_coherence = std::max(rep.worst_coherence, 0.0);
    rep.no_parallel_columns = n < 2 || (1.0 - rep.worst_coherence > tol);
    rep.normalized_nsp_bound = rep.worst_coherence / (1.0 + rep.worst_coherence);
    rep.passed = rep.no_zero_columns && rep.no_parallel_columns;

    if (check_nsp) {
        NspReport nsp;
        Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
        const Eigen::VectorXd sv = svd.singularValues();
        const double cutoff = sv.size() ? sv[0] * static_cast<double>(std::max(a.rows(), a.cols())) * 1e-13 : 0.0;
        Eigen::Index rank = 0;
        while (rank < sv.size() && sv[rank] > cutoff) {
            ++rank;
        }
        const Eigen::MatrixXd& v = svd.matrixV();
        nsp.nullity = static_cast<std::size_t>(n - rank);
        for (Eigen::Index k = rank; k < n; ++k) {
            const auto h = v.col(k);
            nsp.basis_worst_ratio = std::max(nsp.basis_worst_ratio, h.cwiseAbs().maxCoeff() / h.cwiseAbs().sum());
        }
        // sup over null h of |h_i| / ||h||_1 equals min_y ||e_i - A^T y||_inf.
        const Eigen::MatrixXd q = v.leftCols(rank);
        std::vector<ChebyshevBounds> cert(static_cast<std::size_t>(n));
        if (nsp.nullity > 0) {
            parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
                Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
                e[static_cast<Eigen::Index>(i)] = 1.0;
                cert[i] = chebyshev_distance(q, e);
            });
        }
        const auto it = std::max_element(cert.begin(), cert.end(),
                                         [](const auto& x, const auto& y) { return x.upper < y.upper; });
        nsp.worst_certificate = it->upper;
        nsp.worst_pixel = static_cast<std::size_t>(it - cert.begin());
        nsp.refuted = std::any_of(cert.begin(), cert.end(), [](const auto& c) { return c.lower >= 0.5 - 1e-5; });
        nsp.certified = nsp.worst_certificate < 0.5;
        nsp.passed = nsp.certified && nsp.basis_worst_ratio < 0.5;
        rep.nsp = nsp;
        rep.passed = rep.passed && nsp.passed;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Recovery
// ---------------------------------------------------------------------------

namespace {

RecoveryResult correlate(const Eigen::MatrixXd& a, const Eigen::VectorXd& v, const char* method) {
    if (v.size() != a.rows()) {
        throw ValidationError("recovery: reading length does not match the dictionary");
    }
    RecoveryResult out;
    out.method = method;
    if (v.cwiseAbs().maxCoeff() == 0.0) {
        return out;
    }
    const Eigen::VectorXd norms = a.colwise().norm().transpose();
    if (norms.minCoeff() <= 0.0) {
        throw ValidationError("recovery: dictionary has a zero column");
    }
    const Eigen::VectorXd corr = a.transpose() * v;
    Eigen::Index best = 0;
    (corr.cwiseAbs().cwiseQuotient(norms)).maxCoeff(&best);
    out.detected = true;
    out.pixel = static_cast<std::size_t>(best);
    out.delta_t = corr[best] / (norms[best] * norms[best]);
    out.residual = (v - out.delta_t * a.col(best)).norm();
    return out;
}

}  // namespace

RecoveryResult recover_omp(const Eigen::MatrixXd& a, const Eigen::VectorXd& v) { return correlate(a, v, "omp"); }

RecoveryResult recover_matched_filter(const Eigen::MatrixXd& a_ambient, const Eigen::VectorXd& v) {
    return correlate(a_ambient, v, "matched_filter");
}

AtomDictionary::AtomDictionary(std::shared_ptr<const ForwardModel> model, double max_delta_t, std::size_t points)
    : model_(std::move(model)) {
    if (!model_) {
        throw ValidationError("dictionary: no forward model");
    }
    if (!(max_delta_t > 0.0) || points < 2) {
        throw ValidationError("dictionary: need max_delta_t > 0 and at least two grid points");
    }
    grid_.resize(points);
    const double lo = max_delta_t * 1e-3;
    for (std::size_t k = 0; k < points; ++k) {
        grid_[k] = lo * std::pow(max_delta_t / lo, static_cast<double>(k) / static_cast<double>(points - 1));
    }
    grid_.back() = max_delta_t;
    atoms_.resize(points);
    const auto nch = static_cast<Eigen::Index>(model_->channel_count());
    const auto np = static_cast<Eigen::Index>(model_->pixel_count());
    for (auto& m : atoms_) {
        m.resize(nch, np);
    }
    parallel_for(points * model_->pixel_count(), [&](std::size_t idx) {
        const std::size_t k = idx / model_->pixel_count();
        const std::size_t j = idx % model_->pixel_count();
        atoms_[k].col(static_cast<Eigen::Index>(j)) = model_->response(j, grid_[k]);
    });
}

RecoveryResult AtomDictionary::recover(const Eigen::VectorXd& v) const {
    RecoveryResult out;
    out.method = "omp";
    if (v.size() != static_cast<Eigen::Index>(model_->channel_count())) {
        throw ValidationError("recovery: reading length does not match the dictionary");
    }
    if (v.cwiseAbs().maxCoeff() == 0.0) {
        return out;
    }
    double best = std::numeric_limits<double>::infinity();
    std::size_t bk = 0;
    Eigen::Index bj = 0;
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
        Eigen::Index j = 0;
        const double r = (atoms_[k].colwise() - v).colwise().squaredNorm().minCoeff(&j);
        if (r < best) {
            best = r, bk = k, bj = j;
        }
    }
    const auto pixel = static_cast<std::size_t>(bj);
    auto resid = [&](double dt) { return (v - model_->response(pixel, dt)).norm(); };
    double lo = bk > 0 ? grid_[bk - 1] : grid_.front() * 0.5;
    double hi = bk + 1 < grid_.size() ? grid_[bk + 1] : grid_.back();
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double m1 = hi - phi * (hi - lo);
    double m2 = lo + phi * (hi - lo);
    double f1 = resid(m1);
    double f2 = resid(m2);
    while (hi - lo > 1e-10 * hi) {
        if (f1 <= f2) {
            hi = m2, m2 = m1, f2 = f1;
            m1 = hi - phi * (hi - lo);
            f1 = resid(m1);
        } else {
            lo = m1, m1 = m2, f1 = f2;
            m2 = lo + phi * (hi - lo);
            f2 = resid(m2);
        }
    }
    out.detected = true;
    out.pixel = pixel;
    out.delta_t = 0.5 * (lo + hi);
    out.residual = resid(out.delta_t);
    const double grid_resid = std::sqrt(best);
    if (grid_resid < out.residual) {
        out.delta_t = grid_[bk];
        out.residual = grid_resid;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

double normalized_distance(const MeshSpec& mesh, std::size_t a, std::size_t b) {
    const auto ia = static_cast<double>(a / mesh.cols), ja = static_cast<double>(a % mesh.cols);
    const auto ib = static_cast<double>(b / mesh.cols), jb = static_cast<double>(b % mesh.cols);
    const double diag = std::hypot(static_cast<double>(mesh.rows - 1), static_cast<double>(mesh.cols - 1));
    return std::hypot(ia - ib, ja - jb) / diag;
}

EvalReport evaluate(const MeshSpec& mesh, const std::vector<RecoveryResult>& results, const std::vector<Truth>& truths,
                    std::optional<double> snr_db, double amplitude_tolerance) {
    if (results.empty()) {
        throw ValidationError("evaluate: no results");
    }
    if (results.size() != truths.size()) {
        throw ValidationError("evaluate: results and truths are not aligned");
    }
    EvalReport rep;
    rep.trials = results.size();
    rep.snr_db = snr_db;
    rep.amplitude_tolerance = amplitude_tolerance;
    std::size_t correct = 0;
    std::size_t success = 0;
    double abs_err = 0.0;
    for (std::size_t k = 0; k < results.size(); ++k) {
        const auto& r = results[k];
        const auto& t = truths[k];
        const double est = r.detected ? r.delta_t : 0.0;
        abs_err += std::abs(est - t.delta_t);
        if (r.detected && r.pixel == t.pixel) {
            ++correct;
            if (std::abs(est - t.delta_t) <= amplitude_tolerance * std::abs(t.delta_t)) {
                ++success;
            }
        } else {
            rep.d_norm.push_back(r.detected ? normalized_distance(mesh, r.pixel, t.pixel) : 1.0);
        }
    }
    const auto n = static_cast<double>(results.size());
    rep.accuracy = static_cast<double>(correct) / n;
    rep.success_rate = static_cast<double>(success) / n;
    rep.mae = abs_err / n;
    return rep;
}

}  // namespace thermomesh
