#include "support/dense_oracle.hpp"
#include "support/fixtures.hpp"

#include "thermomesh/errors.hpp"
#include "thermomesh/parallel.hpp"
#include "thermomesh/recovery.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

using namespace thermomesh;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

MeshSpec small_mesh(const RunConfig& c, std::size_t r = 4, std::size_t k = 4) { return fixtures::sized(c.mesh, r, k); }

Eigen::VectorXd as_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

TEST_CASE("snr noise std follows the mean-square signal") {
    Eigen::VectorXd v(4);
    v << 1.0, -1.0, 2.0, 0.0;
    CHECK_THAT(snr_noise_std(v, 0.0), WithinRel(std::sqrt(1.5), 1e-15));
    CHECK_THAT(snr_noise_std(v, 20.0), WithinRel(std::sqrt(1.5) / 10.0, 1e-15));
    CHECK_THROWS_AS(snr_noise_std(Eigen::VectorXd::Zero(4), 20.0), DegenerateError);
}

TEST_CASE("linear forward model is a column of A") {
    const auto lin = fixtures::shipped("linear_16x16");
    const ForwardModel fm(small_mesh(lin), lin.materials);
    REQUIRE(fm.linear());
    const Eigen::MatrixXd o = oracle::sensitivity(fm.mesh(), fm.materials(), {});
    CHECK((fm.ambient() - o).cwiseAbs().maxCoeff() <= 1e-9 * o.cwiseAbs().maxCoeff());
    CHECK((fm.response(5, 12.5) - 12.5 * o.col(5)).cwiseAbs().maxCoeff() <= 1e-9 * 12.5 * o.cwiseAbs().maxCoeff());
}

TEST_CASE("nonlinear forward model matches the oracle at the event state") {
    for (const auto& v : fixtures::all_variants()) {
        if (!v.materials.interlayer.temperature_dependent()) continue;
        CAPTURE(v.name);
        const MeshSpec mesh = fixtures::sized({}, 3, 3);
        const ForwardModel fm(mesh, v.materials);
        const double dt = 0.8 * (v.range.t_max - v.range.t_amb);
        const auto st = TemperatureField::single(9, 4, dt);
        const Eigen::MatrixXd o = oracle::sensitivity(mesh, v.materials, st.values);
        const Eigen::VectorXd want = dt * o.col(4);
        CHECK((fm.response(4, dt) - want).cwiseAbs().maxCoeff() <= 1e-9 * want.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("datasets are deterministic and independent of the thread count") {
    const auto lin = fixtures::shipped("linear_16x16");
    const ForwardModel fm(small_mesh(lin), lin.materials);
    DatasetOptions opt;
    opt.n_samples = 200;
    opt.snr_db = 20.0;
    opt.seed = 99;
    set_max_threads(1);
    const auto a = generate_dataset(fm, lin.range, opt);
    set_max_threads(4);
    const auto b = generate_dataset(fm, lin.range, opt);
    set_max_threads(0);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].pixel == b[k].pixel);
        CHECK(a[k].delta_t == b[k].delta_t);
        CHECK(a[k].reading.voltages == b[k].reading.voltages);
        CHECK(a[k].reading.seed == (99u ^ k));
    }
    opt.seed = 100;
    const auto c = generate_dataset(fm, lin.range, opt);
    std::size_t same = 0;
    for (std::size_t k = 0; k < a.size(); ++k) same += a[k].pixel == c[k].pixel;
    CHECK(same < a.size() / 2);
}

TEST_CASE("noise-free samples are exact responses and cover the range") {
    const auto lin = fixtures::shipped("linear_16x16");
    const ForwardModel fm(small_mesh(lin), lin.materials);
    DatasetOptions opt;
    opt.n_samples = 400;
    opt.seed = 1;
    const auto ds = generate_dataset(fm, lin.range, opt);
    std::vector<std::size_t> hits(fm.pixel_count(), 0);
    for (const auto& s : ds) {
        CHECK(s.delta_t > 0.0);
        CHECK(s.delta_t <= lin.range.t_max - lin.range.t_amb);
        CHECK(s.field.sparsity() == 1);
        CHECK(s.field.values[s.pixel] == s.delta_t);
        CHECK(s.reading.noise_std == 0.0);
        CHECK_FALSE(s.reading.snr_db.has_value());
        CHECK(as_vector(s.reading.voltages) == fm.response(s.pixel, s.delta_t));
        ++hits[s.pixel];
    }
    for (auto h : hits) CHECK(h > 0);
}

TEST_CASE("empirical SNR of noisy samples") {
    const auto lin = fixtures::shipped("linear_16x16");
    const ForwardModel fm(small_mesh(lin, 8, 8), lin.materials);
    DatasetOptions opt;
    opt.n_samples = 300;
    opt.snr_db = 10.0;
    opt.seed = 5;
    const auto ds = generate_dataset(fm, lin.range, opt);
    double ps = 0.0, pn = 0.0;
    for (const auto& s : ds) {
        const Eigen::VectorXd clean = fm.response(s.pixel, s.delta_t);
        const Eigen::VectorXd noise = as_vector(s.reading.voltages) - clean;
        CHECK_THAT(s.reading.noise_std, WithinRel(snr_noise_std(clean, 10.0), 1e-14));
        ps += clean.squaredNorm() / (s.reading.noise_std * s.reading.noise_std);
        pn += noise.squaredNorm() / (s.reading.noise_std * s.reading.noise_std);
    }
    // Normalized: each sample's noise has unit variance per channel.
    const double channels = static_cast<double>(fm.channel_count()) * static_cast<double>(ds.size());
    CHECK_THAT(pn / channels, WithinAbs(1.0, 0.03));
    CHECK_THAT(10.0 * std::log10(ps / pn), WithinAbs(10.0, 0.15));
}

TEST_CASE("dataset rejects a shifted ambient") {
    const auto lin = fixtures::shipped("linear_16x16");
    const ForwardModel fm(small_mesh(lin), lin.materials);
    OperatingRange r = lin.range;
    r.t_amb += 5.0;
    r.t_min += 5.0;
    CHECK_THROWS_AS(generate_dataset(fm, r, {}), ValidationError);
    DatasetOptions none;
    none.n_samples = 0;
    CHECK_THROWS_AS(generate_dataset(fm, lin.range, none), ValidationError);
}

TEST_CASE("OMP recovers every noise-free linear event exactly") {
    const auto lin = fixtures::shipped("linear_16x16");
    const ForwardModel fm(small_mesh(lin, 6, 7), lin.materials);
    for (std::size_t p = 0; p < fm.pixel_count(); ++p) {
        const double dt = 1.0 + 0.7 * static_cast<double>(p);
        const auto r = recover_omp(fm.ambient(), fm.response(p, dt));
        REQUIRE(r.detected);
        CHECK(r.pixel == p);
        CHECK_THAT(r.delta_t, WithinRel(dt, 1e-10));
        CHECK(r.method == "omp");
    }
    const auto z = recover_omp(fm.ambient(), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fm.channel_count())));
    CHECK_FALSE(z.detected);
}

TEST_CASE("matched filter shares the OMP selection rule") {
    const auto lin = fixtures::shipped("linear_16x16");
    const ForwardModel fm(small_mesh(lin), lin.materials);
    SplitMix64 rng(3);
    for (int k = 0; k < 30; ++k) {
        Eigen::VectorXd v = fm.response(rng.index(16), 30.0);
        for (Eigen::Index c = 0; c < v.size(); ++c) v[c] += 1e-5 * rng.normal();
        const auto a = recover_omp(fm.ambient(), v);
        const auto b = recover_matched_filter(fm.ambient(), v);
        CHECK(a.pixel == b.pixel);
        CHECK(b.method == "matched_filter");
    }
}

TEST_CASE("atom dictionary recovers VO2 events") {
    const auto vo2 = fixtures::shipped("vo2_16x16");
    const auto fm = std::make_shared<ForwardModel>(fixtures::sized(vo2.mesh, 4, 4), vo2.materials);
    const double span = vo2.range.t_max - vo2.range.t_amb;
    const AtomDictionary dict(fm, span, 32);
    CHECK(dict.grid().size() == 32);
    CHECK(dict.grid().back() == span);
    for (std::size_t p : {0u, 5u, 10u, 15u}) {
        for (double frac : {0.1, 0.47, 0.93}) {
            const double dt = frac * span;
            const auto r = dict.recover(fm->response(p, dt));
            REQUIRE(r.detected);
            CHECK(r.pixel == p);
            CHECK_THAT(r.delta_t, WithinRel(dt, 1e-3));
        }
    }
    CHECK_FALSE(dict.recover(Eigen::VectorXd::Zero(16)).detected);
}

TEST_CASE("uniqueness on hand-built matrices") {
    Eigen::MatrixXd good(3, 3);
    good << 1, 0, 0.2, 0, 1, 0.2, 0, 0, 1;
    const auto g = verify_one_sparse_uniqueness(good, 1e-8, true);
    CHECK(g.passed);
    CHECK(g.no_zero_columns);
    CHECK(g.no_parallel_columns);

    Eigen::MatrixXd zero = good;
    zero.col(1).setZero();
    const auto z = verify_one_sparse_uniqueness(zero);
    CHECK_FALSE(z.passed);
    REQUIRE(z.zero_column.has_value());
    CHECK(*z.zero_column == 1);

    Eigen::MatrixXd par = good;
    par.col(2) = -3.0 * par.col(0);
    const auto pp = verify_one_sparse_uniqueness(par);
    CHECK_FALSE(pp.passed);
    CHECK_FALSE(pp.no_parallel_columns);
    CHECK(((pp.worst_pair_a == 0 && pp.worst_pair_b == 2) || (pp.worst_pair_a == 2 && pp.worst_pair_b == 0)));
    CHECK_THAT(pp.worst_coherence, WithinAbs(1.0, 1e-15));
}

TEST_CASE("order-one NSP refuted on a short wide matrix") {
    // Null vector h = (0.3, 0.3, -1): |h_3| / ||h||_1 = 1/1.6 > 1/2.
    Eigen::MatrixXd a(2, 3);
    a << 1, 0, 0.3, 0, 1, 0.3;
    const auto r = verify_one_sparse_uniqueness(a, 1e-8, true);
    CHECK(r.no_zero_columns);
    CHECK(r.no_parallel_columns);
    REQUIRE(r.nsp.has_value());
    CHECK(r.nsp->nullity == 1);
    CHECK_THAT(r.nsp->basis_worst_ratio, WithinAbs(1.0 / 1.6, 1e-12));
    CHECK(r.nsp->refuted);
    CHECK_FALSE(r.nsp->passed);
    CHECK_FALSE(r.passed);
}

TEST_CASE("shipped linear matrix satisfies uniqueness and NSP") {
    const auto lin = fixtures::shipped("linear_3x3");
    const auto a = sensitivity_matrix(assemble(lin.mesh, lin.materials)).entries;
    const auto r = verify_one_sparse_uniqueness(a, 1e-8, true);
    CHECK(r.passed);
    REQUIRE(r.nsp.has_value());
    CHECK(r.nsp->passed);
    CHECK(r.nsp->certified);
    CHECK(r.nsp->worst_certificate < 0.5);
}

TEST_CASE("normalized distance") {
    const MeshSpec mesh = fixtures::sized({}, 5, 8);
    CHECK(normalized_distance(mesh, 0, 0) == 0.0);
    CHECK_THAT(normalized_distance(mesh, 0, mesh.pixel(4, 7)), WithinRel(1.0, 1e-15));
    CHECK_THAT(normalized_distance(mesh, mesh.pixel(0, 7), mesh.pixel(4, 0)), WithinRel(1.0, 1e-15));
    CHECK(normalized_distance(mesh, 3, 17) == normalized_distance(mesh, 17, 3));
}

TEST_CASE("evaluate scores pixel, amplitude and misses") {
    const MeshSpec mesh = fixtures::sized({}, 3, 3);
    std::vector<RecoveryResult> res(4);
    res[0] = {true, 4, 10.0, 0.0, "omp"};
    res[1] = {true, 4, 12.0, 0.0, "omp"};
    res[2] = {true, 8, 5.0, 0.0, "omp"};
    res[3] = {false, 0, 0.0, 0.0, "omp"};
    const std::vector<Truth> truth{{4, 10.2}, {4, 10.0}, {0, 5.0}, {2, 7.0}};
    const auto e = evaluate(mesh, res, truth, 20.0);
    CHECK(e.trials == 4);
    CHECK(e.accuracy == 0.5);
    CHECK(e.success_rate == 0.25);
    CHECK_THAT(e.mae, WithinRel((0.2 + 2.0 + 0.0 + 7.0) / 4.0, 1e-14));
    REQUIRE(e.d_norm.size() == 2);
    CHECK_THAT(e.d_norm[0], WithinRel(1.0, 1e-15));
    CHECK(e.d_norm[1] == 1.0);
    CHECK(e.snr_db == 20.0);
    CHECK_THROWS_AS(evaluate(mesh, res, {truth.begin(), truth.begin() + 2}), ValidationError);
}
