// Damped least-squares auto-calibration: single and joint misalignment
// recovery, null-direction reporting, bound projection, and determinism.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "haplo/bench.hpp"
#include "haplo/calibration.hpp"
#include "haplo/dof.hpp"

using namespace haplo;

namespace {

Bench nominal_inf() {
    return assemble_nominal(0.064, infinite_distance, infinite_distance);
}

double residual_norm(const Bench& bench, double user_ipd) {
    double s = 0.0;
    for (double r : residual_vector(bench, user_ipd)) s += r * r;
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("make_adjustable bounds each path around its current value") {
    BenchConfig cfg = nominal_inf().config;
    cfg.left.beamsplitter.yaw_deg = 0.3;
    const AdjustableSet set = make_adjustable(
        {"wings.left.beamsplitter.yaw_deg", "wings.right.collimating.axial_position_m",
         "wings.left.minimization.power_diopters"},
        cfg);
    REQUIRE(set.dofs.size() == 3);
    CHECK(set.dofs[0].lower == doctest::Approx(0.3 - 5.0));
    CHECK(set.dofs[0].upper == doctest::Approx(0.3 + 5.0));
    CHECK(set.dofs[1].lower == doctest::Approx(0.206 - 0.02));
    CHECK(set.dofs[1].upper == doctest::Approx(0.206 + 0.02));
    CHECK(set.dofs[2].lower == doctest::Approx(-10.0 - 2.0));
    CHECK(set.dofs[2].upper == doctest::Approx(-10.0 + 2.0));

    CHECK_THROWS_AS(make_adjustable({"wings.left.no_such_knob"}, cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_adjustable({"stimulus.focal_distance_m"}, cfg),
                    std::invalid_argument);
}

TEST_CASE("every DOF in the registry resolves into the configuration") {
    BenchConfig cfg = nominal_inf().config;
    const auto& registry = dof_registry();
    CHECK(registry.size() == 55);
    int observable = 0;
    for (const DofInfo& dof : registry) {
        CHECK(find_dof(dof.path) == &dof);
        CHECK(dof.max_deviation > 0.0);
        CHECK(dof.scale > 0.0);
        if (dof.observable) ++observable;
        // Writing through the accessor must land in the config.
        double& slot = dof_value(cfg, dof);
        const double before = slot;
        slot = before + 1.0;
        CHECK(dof_value(static_cast<const BenchConfig&>(cfg), dof) == before + 1.0);
        slot = before;
    }
    CHECK(observable == 49);
    CHECK(find_dof("") == nullptr);
}

TEST_CASE("single misalignments are recovered to the design value") {
    struct Case {
        const char* path;
        double planted;
        double design;
    };
    const Case cases[] = {
        {"wings.left.beamsplitter.yaw_deg", 0.5, 0.0},
        {"table.pitch_deg", 0.3, 0.0},
        {"wings.right.collimating.axial_position_m", 0.21, 0.206},
        {"wings.left.minimization.lateral_offset_m", 0.003, 0.0},
        {"wings.right.rail_azimuth_deg", 0.4, 0.0},
        {"wings.left.monitor.height_offset_m", -0.002, 0.0},
    };
    for (const Case& c : cases) {
        CAPTURE(c.path);
        BenchConfig cfg = nominal_inf().config;
        const DofInfo* dof = find_dof(c.path);
        REQUIRE(dof != nullptr);
        dof_value(cfg, *dof) = c.planted;
        const Bench misaligned = assemble_bench(cfg);
        CHECK(residual_norm(misaligned, 0.064) > 0.1);

        const AdjustableSet adjust = make_adjustable({c.path}, cfg);
        const SolveResult result = solve_calibration(misaligned, 0.064, adjust);
        CHECK(result.converged);
        CHECK(result.message == "converged");
        CHECK(result.iterations <= 50);
        REQUIRE(!result.residual_norms.empty());
        CHECK(result.residual_norms.front() > 0.1);
        CHECK(result.residual_norms.back() < 1e-10);
        CHECK(std::abs(dof_value(result.bench.config, *dof) - c.design) < 1e-6);
        // Accepted iterates never increase the norm.
        for (size_t i = 1; i < result.residual_norms.size(); ++i) {
            CHECK(result.residual_norms[i] <= result.residual_norms[i - 1]);
        }
    }
}

TEST_CASE("the ipd stage is driven to a new user's spacing") {
    const Bench b = nominal_inf();  // built for 0.064 m
    const AdjustableSet adjust = make_adjustable({"ipd_m"}, b.config);
    const SolveResult result = solve_calibration(b, 0.0655, adjust);
    CHECK(result.converged);
    CHECK(std::abs(result.bench.ipd - 0.0655) < 1e-9);
    CHECK(std::abs(result.bench.config.ipd_m - 0.0655) < 1e-9);
}

TEST_CASE("three joint misalignments are recovered together") {
    BenchConfig cfg = nominal_inf().config;
    cfg.left.beamsplitter.yaw_deg = 0.5;
    cfg.right.collimating.axial_position_m = 0.21;
    cfg.right.rail_azimuth_deg = 0.4;
    const Bench misaligned = assemble_bench(cfg);
    const AdjustableSet adjust = make_adjustable(
        {"wings.left.beamsplitter.yaw_deg", "wings.right.collimating.axial_position_m",
         "wings.right.rail_azimuth_deg"},
        cfg);
    SolveOptions options;
    options.max_iters = 200;
    const SolveResult result = solve_calibration(misaligned, 0.064, adjust, options);
    CHECK(result.converged);
    CHECK(result.residual_norms.back() < 1e-8);
    CHECK(result.iterations <= 200);
    CHECK(std::abs(result.bench.config.left.beamsplitter.yaw_deg) < 1e-6);
    CHECK(std::abs(result.bench.config.right.collimating.axial_position_m - 0.206) < 1e-6);
    CHECK(std::abs(result.bench.config.right.rail_azimuth_deg) < 1e-6);
    CHECK(result.null_dofs.empty());
}

TEST_CASE("unobservable directions are reported as null, not inverted") {
    BenchConfig cfg = nominal_inf().config;
    cfg.left.beamsplitter.yaw_deg = 0.5;
    cfg.left.beamsplitter.roll_deg = 2.0;  // spins the plate about its normal
    const Bench misaligned = assemble_bench(cfg);

    SUBCASE("a null DOF alongside a live one") {
        const AdjustableSet adjust = make_adjustable(
            {"wings.left.beamsplitter.yaw_deg", "wings.left.beamsplitter.roll_deg"}, cfg);
        const SolveResult result = solve_calibration(misaligned, 0.064, adjust);
        CHECK(result.converged);
        REQUIRE(result.null_dofs.size() == 1);
        CHECK(result.null_dofs[0] == "wings.left.beamsplitter.roll_deg");
        // The live DOF got fixed; the null one was left where it started.
        CHECK(std::abs(result.bench.config.left.beamsplitter.yaw_deg) < 1e-6);
        CHECK(result.bench.config.left.beamsplitter.roll_deg == 2.0);
    }

    SUBCASE("only null DOFs cannot make progress") {
        const AdjustableSet adjust =
            make_adjustable({"wings.left.beamsplitter.roll_deg"}, cfg);
        const SolveResult result = solve_calibration(misaligned, 0.064, adjust);
        CHECK_FALSE(result.converged);
        REQUIRE(result.null_dofs.size() == 1);
        CHECK(result.null_dofs[0] == "wings.left.beamsplitter.roll_deg");
        CHECK(result.message.find("rank deficient") != std::string::npos);
    }

    SUBCASE("accommodation settings are invisible to the checklist") {
        const AdjustableSet adjust = make_adjustable(
            {"wings.left.beamsplitter.yaw_deg", "wings.left.accommodation.power_diopters",
             "wings.left.accommodation.axial_position_m"},
            cfg);
        const SolveResult result = solve_calibration(misaligned, 0.064, adjust);
        CHECK(result.converged);
        CHECK(result.null_dofs.size() == 2);
    }
}

TEST_CASE("bounds confine the solve when the truth lies outside them") {
    BenchConfig cfg = nominal_inf().config;
    cfg.left.beamsplitter.yaw_deg = -7.0;  // recovery needs +7, bound allows +5
    const Bench misaligned = assemble_bench(cfg);
    const AdjustableSet adjust =
        make_adjustable({"wings.left.beamsplitter.yaw_deg"}, cfg);
    const SolveResult result = solve_calibration(misaligned, 0.064, adjust);
    CHECK_FALSE(result.converged);
    // Best admissible point is the upper bound itself.
    CHECK(result.bench.config.left.beamsplitter.yaw_deg ==
          doctest::Approx(-2.0).epsilon(1e-6));
    CHECK(result.residual_norms.back() < result.residual_norms.front());
    CHECK(result.residual_norms.back() > 1.0);
}

TEST_CASE("identical solves produce identical trajectories") {
    BenchConfig cfg = nominal_inf().config;
    cfg.left.beamsplitter.yaw_deg = 0.5;
    cfg.right.rail_azimuth_deg = 0.4;
    const Bench misaligned = assemble_bench(cfg);
    const AdjustableSet adjust = make_adjustable(
        {"wings.left.beamsplitter.yaw_deg", "wings.right.rail_azimuth_deg"}, cfg);
    const SolveResult a = solve_calibration(misaligned, 0.064, adjust);
    const SolveResult b = solve_calibration(misaligned, 0.064, adjust);
    CHECK(a.iterations == b.iterations);
    REQUIRE(a.residual_norms.size() == b.residual_norms.size());
    for (size_t i = 0; i < a.residual_norms.size(); ++i) {
        CHECK(a.residual_norms[i] == b.residual_norms[i]);
    }
    CHECK(a.bench.config.left.beamsplitter.yaw_deg ==
          b.bench.config.left.beamsplitter.yaw_deg);
}

TEST_CASE("an empty adjustable set is rejected") {
    const Bench b = nominal_inf();
    CHECK_THROWS_AS(solve_calibration(b, 0.064, AdjustableSet{}), std::invalid_argument);
}

TEST_CASE("a solve from an already calibrated bench converges immediately") {
    const Bench b = nominal_inf();
    const AdjustableSet adjust =
        make_adjustable({"wings.left.beamsplitter.yaw_deg"}, b.config);
    const SolveResult result = solve_calibration(b, 0.064, adjust);
    CHECK(result.converged);
    CHECK(result.iterations == 0);
    CHECK(result.bench.config.left.beamsplitter.yaw_deg == 0.0);
}
