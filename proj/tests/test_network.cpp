#include "support/dense_oracle.hpp"
#include "support/fixtures.hpp"

#include "thermomesh/errors.hpp"
#include "thermomesh/network.hpp"
#include "thermomesh/sensitivity.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace thermomesh;

namespace {

double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

Eigen::VectorXd as_vector(const BoundaryReading& r) {
    return Eigen::Map<const Eigen::VectorXd>(r.voltages.data(), static_cast<Eigen::Index>(r.voltages.size()));
}

}  // namespace

TEST_CASE("channel order walks the perimeter") {
    MeshSpec mesh = fixtures::sized({}, 3, 4);
    REQUIRE(mesh.channel_count() == 14);
    CHECK(channel_line(mesh, 0) == ChannelLine{Side::top, 0});
    CHECK(channel_line(mesh, 3) == ChannelLine{Side::top, 3});
    CHECK(channel_line(mesh, 4) == ChannelLine{Side::right, 0});
    CHECK(channel_line(mesh, 6) == ChannelLine{Side::right, 2});
    CHECK(channel_line(mesh, 7) == ChannelLine{Side::bottom, 3});
    CHECK(channel_line(mesh, 10) == ChannelLine{Side::bottom, 0});
    CHECK(channel_line(mesh, 11) == ChannelLine{Side::left, 2});
    CHECK(channel_line(mesh, 13) == ChannelLine{Side::left, 0});
    for (std::size_t c = 0; c < mesh.channel_count(); ++c) {
        CHECK(channel_index(mesh, channel_line(mesh, c)) == c);
        CHECK(mirror_channel(mesh, mirror_channel(mesh, c)) == c);
    }
    CHECK(mirror_channel(mesh, 0) == 3);
    CHECK(mirror_channel(mesh, 4) == 13);
}

TEST_CASE("assembled A matches the dense oracle for every variant") {
    SplitMix64 rng(11);
    for (const auto& v : fixtures::all_variants()) {
        for (auto [m, n] : {std::pair<std::size_t, std::size_t>{2, 2}, {3, 3}, {4, 5}}) {
            const MeshSpec mesh = fixtures::sized({}, m, n);
            const std::size_t np = mesh.pixel_count();
            const double span = v.range.t_max - v.range.t_amb;
            std::vector<std::vector<double>> states = {std::vector<double>(np, 0.0)};
            if (v.materials.interlayer.temperature_dependent()) {
                states.push_back(TemperatureField::single(np, np / 2, span).values);
                states.push_back(fixtures::random_state(rng, np, span));
            }
            for (const auto& state : states) {
                INFO(v.name << " " << m << "x" << n);
                const TemperatureField t{state};
                const auto sys = assemble(mesh, v.materials, t);
                const Eigen::MatrixXd oracle = oracle::sensitivity(mesh, v.materials, state);
                CHECK(rel_diff(sensitivity_matrix(sys, SolveStrategy::adjoint).entries, oracle) <= 1e-9);
                CHECK(rel_diff(sensitivity_matrix(sys, SolveStrategy::forward).entries, oracle) <= 1e-9);
            }
        }
    }
}

TEST_CASE("event columns match direct assembly at the event state") {
    for (const auto& v : fixtures::all_variants()) {
        if (!v.materials.interlayer.temperature_dependent()) continue;
        const MeshSpec mesh = fixtures::sized({}, 4, 5);
        const EventResponse ev(mesh, v.materials);
        for (double dt : {1.0, 0.5 * (v.range.t_max - v.range.t_amb), v.range.t_max - v.range.t_amb}) {
            for (std::size_t p : {std::size_t{0}, std::size_t{7}, std::size_t{19}}) {
                INFO(v.name << " dT=" << dt << " pixel " << p);
                const auto state = TemperatureField::single(mesh.pixel_count(), p, dt);
                const Eigen::MatrixXd oracle = oracle::sensitivity(mesh, v.materials, state.values);
                const Eigen::VectorXd col = oracle.col(static_cast<Eigen::Index>(p));
                CHECK(rel_diff(ev.column(p, dt), col) <= 1e-9);
                const Eigen::MatrixXd direct = event_columns(mesh, v.materials, v.materials.reference_temperature + dt,
                                                             {p});
                CHECK(rel_diff(direct.col(0), col) <= 1e-9);
            }
        }
    }
}

TEST_CASE("voltage differences do not depend on the datum channel") {
    const auto v = fixtures::all_variants();
    const MeshSpec mesh = fixtures::sized({}, 5, 4);
    SplitMix64 rng(3);
    for (const auto& var : v) {
        const TemperatureField t{fixtures::random_state(rng, mesh.pixel_count(), var.range.t_max - var.range.t_amb)};
        const Eigen::VectorXd v0 = as_vector(boundary_voltages(assemble(mesh, var.materials, t, 0), t));
        for (std::size_t d : {std::size_t{5}, std::size_t{11}, mesh.channel_count() - 1}) {
            const Eigen::VectorXd vd = as_vector(boundary_voltages(assemble(mesh, var.materials, t, d), t));
            const Eigen::VectorXd shifted = v0.array() - v0[static_cast<Eigen::Index>(d)];
            INFO(var.name << " datum " << d);
            CHECK((vd - shifted).cwiseAbs().maxCoeff() <= 1e-12 * v0.cwiseAbs().maxCoeff());
            CHECK(vd[static_cast<Eigen::Index>(d)] == 0.0);
        }
    }
}

TEST_CASE("zero temperature gives exactly zero voltages") {
    for (const auto& var : fixtures::all_variants()) {
        const MeshSpec mesh = fixtures::sized({}, 4, 4);
        const auto t = TemperatureField::zeros(mesh.pixel_count());
        const auto r = boundary_voltages(assemble(mesh, var.materials, t), t);
        for (double x : r.voltages) CHECK(x == 0.0);
    }
}

TEST_CASE("ambient conductance has a one-dimensional null space") {
    const MeshSpec mesh = fixtures::sized({}, 16, 16);
    const auto lin = fixtures::shipped("linear_16x16");
    const auto sys = assemble(mesh, lin.materials);
    const Eigen::MatrixXd g(sys.conductance());
    CHECK((g - g.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g * Eigen::VectorXd::Ones(g.rows())).cwiseAbs().maxCoeff() <= 1e-12 * g.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double tol = 1e-10 * ev.cwiseAbs().maxCoeff();
    CHECK((ev.array().abs() <= tol).count() == 1);
    CHECK(ev.minCoeff() > -tol);
}

TEST_CASE("sign and datum row of A") {
    const MeshSpec mesh = fixtures::sized({}, 3, 3);
    const auto lin = fixtures::shipped("linear_16x16");
    const auto a = sensitivity_matrix(assemble(mesh, lin.materials, nullptr, 2));
    CHECK(a.entries.row(2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.datum_channel == 2);
    CHECK(a.interlayer_tag == "constant_r");
}

TEST_CASE("single-column and single-solve paths agree with the full matrix") {
    const MeshSpec mesh = fixtures::sized({}, 6, 7);
    const auto lin = fixtures::shipped("linear_16x16");
    const auto sys = assemble(mesh, lin.materials);
    const auto a = sensitivity_matrix(sys);
    for (std::size_t p = 0; p < mesh.pixel_count(); p += 5) {
        CHECK(rel_diff(sensitivity_column(sys, p), a.entries.col(static_cast<Eigen::Index>(p))) <= 1e-12);
    }
    SplitMix64 rng(5);
    const TemperatureField t{fixtures::random_state(rng, mesh.pixel_count(), 50.0)};
    const Eigen::VectorXd tv = Eigen::Map<const Eigen::VectorXd>(t.values.data(), 42);
    CHECK(rel_diff(as_vector(boundary_voltages(sys, t)), a.entries * tv) <= 1e-12);
}

TEST_CASE("NTC at a uniform state equals ConstantR at the same resistance") {
    const auto cer = fixtures::shipped("ceramic_16x16");
    const MeshSpec mesh = fixtures::sized(cer.mesh, 4, 4);
    for (double t_rel : {0.0, 300.0, 975.0}) {
        const TemperatureField t{std::vector<double>(mesh.pixel_count(), t_rel)};
        const double r = interlayer_resistance(cer.materials.interlayer, mesh, cer.materials.reference_temperature + t_rel);
        const auto a_ntc = sensitivity_matrix(assemble(mesh, cer.materials, t));
        const auto a_cr = sensitivity_matrix(assemble(mesh, fixtures::with(cer.materials, ConstantR{r})));
        CHECK(rel_diff(a_ntc.entries, a_cr.entries) <= 1e-12);
    }
}

TEST_CASE("temperature-dependent systems refuse other states") {
    const auto cer = fixtures::shipped("ceramic_16x16");
    const MeshSpec mesh = fixtures::sized(cer.mesh, 3, 3);
    const auto t = TemperatureField::single(9, 4, 100.0);
    const auto sys = assemble(mesh, cer.materials, t);
    CHECK_NOTHROW(boundary_voltages(sys, t));
    CHECK_THROWS_AS(boundary_voltages(sys, TemperatureField::single(9, 4, 101.0)), StalenessError);
    CHECK_THROWS_AS(assemble(mesh, cer.materials), ValidationError);
    CHECK_THROWS_AS(assemble(mesh, cer.materials, TemperatureField::zeros(8)), ValidationError);
    CHECK_THROWS_AS(assemble(mesh, cer.materials, t, 12), ValidationError);
}

TEST_CASE("VO2 state outside its segments is a domain error") {
    const auto vo2 = fixtures::shipped("vo2_16x16");
    const MeshSpec mesh = fixtures::sized(vo2.mesh, 3, 3);
    CHECK_THROWS_AS(assemble(mesh, vo2.materials, TemperatureField::single(9, 0, 200.0)), DomainError);
}

TEST_CASE("merged network has one node per junction") {
    const MeshSpec mesh = fixtures::sized({}, 3, 5);
    const auto lin = fixtures::shipped("linear_16x16");
    const auto merged = assemble(mesh, fixtures::with(lin.materials, NoInterlayer{}));
    const auto split = assemble(mesh, lin.materials);
    CHECK(merged.node_count() == 15);
    CHECK(split.node_count() == 30);
    CHECK(merged.node({1, 2, 3}) == merged.node({2, 2, 3}));
    CHECK(split.node({1, 2, 3}) != split.node({2, 2, 3}));
    for (double g : split.boundary_coupling()) CHECK(g == 0.0);
    for (double r : split.lead_resistances()) CHECK(r > 0.0);
    CHECK(split.pivot_ratio() >= 1.0);
}
