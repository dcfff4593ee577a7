#include "support/dense_oracle.hpp"
#include "support/fixtures.hpp"

#include "thermomesh/errors.hpp"
#include "thermomesh/sensitivity.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

using namespace thermomesh;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("swing is max minus min") {
    Eigen::VectorXd v(4);
    v << 1.0, -2.0, 0.5, 3.0;
    CHECK(swing(v) == 5.0);
    CHECK(swing(Eigen::VectorXd::Zero(3)) == 0.0);
}

TEST_CASE("sensitivity map of the linear matrix") {
    const auto lin = fixtures::shipped("linear_16x16");
    const MeshSpec mesh = fixtures::sized(lin.mesh, 5, 6);
    const auto a = sensitivity_matrix(assemble(mesh, lin.materials));
    const auto map = sensitivity_map(a);
    REQUIRE(map.sigma.size() == 30);
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < 30; ++j) {
        CHECK(map.sigma[j] == swing(a.entries.col(static_cast<Eigen::Index>(j))));
        lo = std::min(lo, map.sigma[j]);
    }
    CHECK(map.sigma_min == lo);
    CHECK(map.sigma[map.argmin] == lo);
    CHECK(map.state_label == "linear");
    CHECK_FALSE(map.t_hot.has_value());
}

TEST_CASE("event map columns match the oracle at each pixel's own event state") {
    const auto cer = fixtures::shipped("ceramic_16x16");
    const MeshSpec mesh = fixtures::sized(cer.mesh, 3, 4);
    const double t_hot = 1273.0;
    const auto map = event_sensitivity_map(mesh, cer.materials, t_hot);
    REQUIRE(map.t_hot == t_hot);
    CHECK(map.state_label == "event");
    for (std::size_t p = 0; p < mesh.pixel_count(); ++p) {
        const auto st = TemperatureField::single(mesh.pixel_count(), p, t_hot - cer.materials.reference_temperature);
        const Eigen::MatrixXd o = oracle::sensitivity(mesh, cer.materials, st.values);
        CHECK_THAT(map.sigma[p], WithinRel(swing(o.col(static_cast<Eigen::Index>(p))), 1e-9));
    }
}

TEST_CASE("nonlinear map at ambient equals the ambient matrix map") {
    const auto vo2 = fixtures::shipped("vo2_16x16");
    const MeshSpec mesh = fixtures::sized(vo2.mesh, 4, 4);
    const auto amb = nonlinear_sensitivity_map(mesh, vo2.materials, ambient_state(mesh));
    CHECK(amb.state_label == "ambient");
    const auto st = nonlinear_sensitivity_map(mesh, vo2.materials, center_event_state(mesh, vo2.materials, 383.0));
    CHECK(st.state_label == "state");
    CHECK_THROWS_AS(nonlinear_sensitivity_map(mesh, fixtures::shipped("linear_16x16").materials, ambient_state(mesh)),
                    ValidationError);
}

TEST_CASE("center pixel and event state") {
    const MeshSpec mesh = fixtures::sized({}, 4, 5);
    CHECK(center_pixel(mesh) == mesh.pixel(2, 2));
    MaterialSet m;
    const auto t = center_event_state(mesh, m, 350.0);
    CHECK(t.sparsity() == 1);
    CHECK(t.values[center_pixel(mesh)] == 350.0 - m.reference_temperature);
}

TEST_CASE("log grid") {
    const auto g = log_grid(1e-2, 1e2, 4);
    REQUIRE(g.size() == 17);
    CHECK(g.front() == 1e-2);
    CHECK(g.back() == 1e2);
    CHECK_THAT(g[4], WithinRel(1e-1, 1e-12));
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
}

TEST_CASE("log-log slope is exact on power laws over nonuniform grids") {
    SplitMix64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x{0.5 + rng.uniform()};
        for (int i = 1; i < 12; ++i) x.push_back(x.back() * (1.05 + 2.0 * rng.uniform()));
        const double p = -3.0 + 6.0 * rng.uniform();
        std::vector<double> y;
        for (double v : x) y.push_back(2.5 * std::pow(v, p));
        for (double k : log_log_slope(x, y)) CHECK_THAT(k, WithinAbs(p, 1e-9));
    }
    CHECK_THROWS_AS(log_log_slope({1.0, 2.0}, {1.0, -1.0}), DegenerateError);
    CHECK_THROWS_AS(log_log_slope({1.0}, {1.0}), ValidationError);
}

TEST_CASE("plateau detection on a synthetic saturating sweep") {
    SweepResult s;
    for (double x : log_grid(1e-2, 1e4, 4)) s.samples.push_back({x, x / (1.0 + x)});
    const auto onset = plateau_onset(s, 0.1);
    REQUIRE(onset.has_value());
    const double x0 = s.samples[*onset].x;
    CHECK(x0 > 1.0);
    CHECK(x0 < 100.0);
    CHECK(*per_decade_change(s, *onset) <= 0.1);
    CHECK_FALSE(per_decade_change(s, s.samples.size() - 1).has_value());
}

TEST_CASE("R sweep rises from the merged baseline") {
    const auto lin = fixtures::shipped("linear_16x16");
    const MeshSpec mesh = fixtures::sized(lin.mesh, 8, 8);
    const auto sw = sweep_interlayer_R(mesh, lin.materials, log_grid(1e-2, 1e6, 2));
    REQUIRE(sw.reference.has_value());
    for (std::size_t i = 1; i < sw.samples.size(); ++i) {
        CHECK(sw.samples[i].value >= sw.samples[i - 1].value * (1.0 - 1e-12));
    }
    CHECK_THAT(sw.samples.front().value, WithinRel(*sw.reference, 0.05));
    CHECK(sw.samples.back().value > 2.0 * *sw.reference);
}

TEST_CASE("super-linearity exponent is one for a linear interlayer") {
    const auto lin = fixtures::shipped("linear_16x16");
    const MeshSpec mesh = fixtures::sized(lin.mesh, 5, 5);
    const auto k = superlinearity_kappa(mesh, lin.materials, 298.0, log_grid(1.0, 75.0, 5));
    for (const auto& s : k.kappa.samples) CHECK_THAT(s.value, WithinAbs(1.0, 1e-9));
    for (std::size_t i = 1; i < k.response.samples.size(); ++i) {
        CHECK(k.response.samples[i].value > k.response.samples[i - 1].value);
    }
}

TEST_CASE("channel efficiency") {
    CHECK(channel_efficiency(fixtures::sized({}, 16, 16)).eta == 4.0);
    CHECK(channel_efficiency(fixtures::sized({}, 200, 200)).eta == 50.0);
    CHECK(channel_efficiency(fixtures::sized({}, 3, 5)).n_read == 16);
}

TEST_CASE("NET scales with noise and ignores column offsets") {
    Eigen::MatrixXd a(4, 3);
    a << 1, 0, 2, -1, 0, 2, 0, 0, 2, 0, 0, 2;
    const auto n1 = net(a, 1e-3);
    CHECK_THAT(n1.per_pixel[0], WithinRel(1e-3 / std::sqrt(2.0), 1e-15));
    CHECK(n1.infinite[1]);
    CHECK(n1.infinite[2]);
    CHECK(std::isinf(n1.net_max));
    CHECK(n1.argmin == 0);
    const auto n3 = net(a, 3e-3);
    CHECK(n3.per_pixel[0] == 3.0 * n1.per_pixel[0]);
    CHECK_THROWS_AS(net(a, 0.0), ValidationError);
}

TEST_CASE("reference noise from the mean square event signal") {
    Eigen::MatrixXd a(2, 2);
    a << 1, 2, 3, 4;
    const double ps = 100.0 * (1 + 4 + 9 + 16) / 4.0;
    CHECK_THAT(reference_noise_std(a, 10.0, 20.0), WithinRel(std::sqrt(ps / 100.0), 1e-15));
    CHECK_THROWS_AS(reference_noise_std(Eigen::MatrixXd::Zero(2, 2), 1.0, 40.0), DegenerateError);
}

TEST_CASE("evaluate_mesh uses the center pixel above the cap") {
    const auto lin = fixtures::shipped("linear_16x16");
    MeshSizeOptions opt;
    opt.full_linear_max_pixels = 16;
    const auto small = evaluate_mesh(fixtures::sized(lin.mesh, 4, 4), lin.materials, opt);
    const auto big = evaluate_mesh(fixtures::sized(lin.mesh, 5, 5), lin.materials, opt);
    CHECK(small.full_map);
    CHECK_FALSE(big.full_map);
    CHECK_THAT(small.improvement, WithinRel(small.sigma_min / small.baseline_sigma_min, 1e-12));
}

TEST_CASE("size sweep improvement grows with the mesh") {
    const auto lin = fixtures::shipped("linear_16x16");
    const auto sw = sweep_mesh_size({{4, 4}, {8, 8}}, lin.mesh, lin.materials);
    REQUIRE(sw.points.size() == 2);
    CHECK(sw.points[1].improvement > sw.points[0].improvement);
    CHECK(sw.points[0].resistance.has_value());
    CHECK(sw.improvement().samples.size() == 2);
}
