// The five-step calibration checklist: per-step residuals against their
// tolerances, targeted fault detection (each planted misalignment must trip
// exactly its own step), and the weighted residual vector used by the
// solver. Dioptometer oracles are closed-form vergence chains computed here.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "haplo/bench.hpp"
#include "haplo/calibration.hpp"

using namespace haplo;

namespace {

Bench nominal_inf() {
    return assemble_nominal(0.064, infinite_distance, infinite_distance);
}

Bench with_config(const BenchConfig& config) { return assemble_bench(config); }

// Largest |residual| across the leading steps of a report.
double max_abs_residual_before(const CalibrationReport& report, int step) {
    double worst = 0.0;
    for (const CheckResult& check : report.checks) {
        if (check.step >= step) continue;
        for (double r : check.residuals) {
            worst = std::max(worst, std::abs(r));
        }
    }
    return worst;
}

const CheckResult& step_result(const CalibrationReport& report, int step) {
    return report.checks.at(static_cast<size_t>(step - 1));
}

}  // namespace

TEST_CASE("nominal bench passes all five steps with near-zero residuals") {
    const Bench b = nominal_inf();
    const Tolerances tol;
    const CalibrationReport report = run_checklist(b, 0.064, tol);
    CHECK(report.overall_pass);
    CHECK(report.user_ipd_m == 0.064);
    CHECK(report.fingerprint == config_fingerprint(b.config));
    REQUIRE(report.checks.size() == 5);
    for (int i = 0; i < 5; ++i) {
        const CheckResult& check = report.checks[static_cast<size_t>(i)];
        CHECK(check.step == i + 1);
        CHECK(check.pass);
        CHECK_FALSE(check.name.empty());
        REQUIRE(check.labels.size() == check.residuals.size());
        REQUIRE(check.labels.size() == check.tolerances.size());
        for (double r : check.residuals) {
            CHECK(std::abs(r) < 1e-9);
        }
        CHECK(check.notes.empty());
    }

    const std::vector<double> rv = residual_vector(b, 0.064);
    REQUIRE(rv.size() == residual_labels().size());
    for (double r : rv) {
        CHECK(std::abs(r) < 1e-6);  // weighted units: mm, mrad, deciD
    }
}

TEST_CASE("residual vector layout: 48 uniquely labeled entries over steps 1-5") {
    const std::vector<std::string>& labels = residual_labels();
    const std::vector<int>& steps = residual_steps();
    REQUIRE(labels.size() == 48);
    REQUIRE(steps.size() == 48);
    const std::set<std::string> unique(labels.begin(), labels.end());
    CHECK(unique.size() == labels.size());
    int counts[6] = {};
    for (size_t i = 0; i < steps.size(); ++i) {
        REQUIRE(steps[i] >= 1);
        REQUIRE(steps[i] <= 5);
        if (i > 0) CHECK(steps[i] >= steps[i - 1]);
        ++counts[steps[i]];
    }
    CHECK(counts[1] == 3);
    CHECK(counts[2] == 22);
    CHECK(counts[3] == 2);
    CHECK(counts[4] == 16);
    CHECK(counts[5] == 5);
}

TEST_CASE("step 1 flags a pitched table and leaves wings mutually level") {
    BenchConfig cfg = nominal_inf().config;
    cfg.table.pitch_deg = 0.2;
    const Bench b = with_config(cfg);
    const Tolerances tol;
    const CheckResult r = check_table_level(b, tol);
    CHECK_FALSE(r.pass);
    CHECK(r.residual("level_deg") == doctest::Approx(0.2).epsilon(1e-12));
    // Both wings ride the table, so their mutual angle stays zero.
    CHECK(std::abs(r.residual("parallelism_deg")) < 1e-12);

    const std::vector<double> rv = residual_vector(b, 0.064);
    CHECK(rv[0] == doctest::Approx(deg_to_rad(0.2) * 1e3).epsilon(1e-12));
    CHECK(std::abs(rv[1]) < 1e-9);

    // The planted fault touches nothing the wing-local steps measure.
    const CalibrationReport report = run_checklist(b, 0.064, tol);
    CHECK_FALSE(report.overall_pass);
    CHECK_FALSE(step_result(report, 1).pass);
    for (int step = 2; step <= 4; ++step) {
        CHECK(step_result(report, step).pass);
    }
}

TEST_CASE("a canted wing trips the parallelism reading") {
    BenchConfig cfg = nominal_inf().config;
    cfg.left.cant_deg = 0.2;
    const Bench b = with_config(cfg);
    const CheckResult r = check_table_level(b, Tolerances{});
    CHECK_FALSE(r.pass);
    CHECK(std::abs(r.residual("level_deg")) < 1e-12);
    CHECK(r.residual("parallelism_deg") == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("step 2 localizes a displaced and a tilted lens") {
    BenchConfig cfg = nominal_inf().config;
    cfg.left.collimating.lateral_offset_m = 0.002;
    cfg.right.minimization.tilt_deg = 0.5;
    cfg.right.monitor.height_offset_m = 0.001;
    const Bench b = with_config(cfg);
    const Tolerances tol;
    const CheckResult r = check_element_centering(b, tol);
    CHECK_FALSE(r.pass);
    CHECK(r.residual("left_collimating_lateral_m") ==
          doctest::Approx(0.002).epsilon(1e-12));
    CHECK(std::abs(r.residual("left_collimating_height_m")) < 1e-15);
    CHECK(std::abs(r.residual("right_minimization_tilt_deg")) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.residual("right_monitor_height_m") == doctest::Approx(0.001).epsilon(1e-12));
    CHECK(r.residual("right_crosshair_miss_m") == doctest::Approx(0.001).epsilon(1e-12));
    CHECK(std::abs(r.residual("left_monitor_lateral_m")) < 1e-15);

    const CalibrationReport report = run_checklist(b, 0.064, tol);
    CHECK(step_result(report, 1).pass);
    CHECK_FALSE(step_result(report, 2).pass);
    CHECK(max_abs_residual_before(report, 2) < 1e-12);
}

TEST_CASE("step 3 dioptometer readings match closed-form vergence chains") {
    const Tolerances tol;

    SUBCASE("collimating lens slid 1 cm toward the eye reads +10/11 D") {
        BenchConfig cfg = nominal_inf().config;
        cfg.left.collimating.axial_position_m = 0.196;
        const Bench b = with_config(cfg);
        const CheckResult r = check_collimation(b, tol);
        CHECK_FALSE(r.pass);
        // Panel light: -10 D at the minimization lens, -20 D after it,
        // relaxed over 0.06 m to -20/2.2, then +10 D.
        const double expected = -20.0 / (1.0 + 0.06 * 20.0) + 10.0;
        CHECK(r.residual("left_collimation_diopters") ==
              doctest::Approx(expected).epsilon(1e-12));
        CHECK(expected == doctest::Approx(10.0 / 11.0).epsilon(1e-12));
        CHECK(std::abs(r.residual("right_collimation_diopters")) < 1e-12);

        const CalibrationReport report = run_checklist(b, 0.064, tol);
        CHECK_FALSE(step_result(report, 3).pass);
        CHECK(max_abs_residual_before(report, 3) < 1e-12);
    }

    SUBCASE("monitor slid 1 cm toward the eye reads -10/37 D") {
        BenchConfig cfg = nominal_inf().config;
        cfg.right.monitor.axial_position_m = 0.346;
        const Bench b = with_config(cfg);
        const CheckResult r = check_collimation(b, tol);
        CHECK_FALSE(r.pass);
        const double after_min = -1.0 / 0.09 - 10.0;
        const double expected = after_min / (1.0 - 0.05 * after_min) + 10.0;
        CHECK(r.residual("right_collimation_diopters") ==
              doctest::Approx(expected).epsilon(1e-12));
        CHECK(expected == doctest::Approx(-10.0 / 37.0).epsilon(1e-12));

        // A 2 D bench tolerance accepts the same reading.
        Tolerances loose;
        loose.collimation_diopters = 2.0;
        CHECK(check_collimation(b, loose).pass);
    }

    SUBCASE("minimization power off by +0.5 D reads +10/79 D") {
        BenchConfig cfg = nominal_inf().config;
        cfg.left.minimization.power_diopters = -9.5;
        const Bench b = with_config(cfg);
        const CheckResult r = check_collimation(b, tol);
        const double after_min = -10.0 - 9.5;
        const double expected = after_min / (1.0 - 0.05 * after_min) + 10.0;
        CHECK(r.residual("left_collimation_diopters") ==
              doctest::Approx(expected).epsilon(1e-12));
        CHECK(expected == doctest::Approx(10.0 / 79.0).epsilon(1e-12));
        CHECK_FALSE(r.pass);

        const std::vector<double> rv = residual_vector(b, 0.064);
        const std::vector<std::string>& labels = residual_labels();
        for (size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == "left_collimation_deciD") {
                CHECK(rv[i] == doctest::Approx(expected * 10.0).epsilon(1e-12));
            }
        }
    }

    SUBCASE("image at the collimating focal plane reads as a sentinel") {
        BenchConfig cfg = nominal_inf().config;
        // Stations with exactly representable spacings: panel light reaches
        // the +6 D minimization lens at -2 D, leaves at +4 D, and converges
        // exactly on the collimating lens plane 0.25 m away.
        cfg.left.monitor.axial_position_m = 1.0;
        cfg.left.minimization.axial_position_m = 0.5;
        cfg.left.minimization.power_diopters = 6.0;
        cfg.left.collimating.axial_position_m = 0.25;
        const Bench b = with_config(cfg);
        const CheckResult r = check_collimation(b, tol);
        CHECK_FALSE(r.pass);
        CHECK(std::isinf(r.residual("left_collimation_diopters")));
        REQUIRE(!r.notes.empty());
        CHECK(r.notes[0].find("not finite") != std::string::npos);

        const std::vector<double> rv = residual_vector(b, 0.064);
        const std::vector<std::string>& labels = residual_labels();
        for (size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == "left_collimation_deciD") {
                CHECK(rv[i] == residual_penalty);
            }
        }
    }
}

TEST_CASE("step 4 doubles a beamsplitter yaw into the reflected beam") {
    BenchConfig cfg = nominal_inf().config;
    cfg.left.beamsplitter.yaw_deg = 0.5;
    const Bench b = with_config(cfg);
    const Tolerances tol;
    const CheckResult r = check_beamsplitter(b, tol);
    CHECK_FALSE(r.pass);
    CHECK(r.residual("left_reflection_angle_deg") == doctest::Approx(1.0).epsilon(1e-9));
    // The mirror pivots about a point on the gaze axis, so the reflected
    // line still meets the rail axis and the center stays put.
    CHECK(std::abs(r.residual("left_axis_offset_m")) < 1e-12);
    CHECK(std::abs(r.residual("left_center_offset_m")) < 1e-12);
    // A 1 degree beam deviation walks the return spot off the crosshair.
    CHECK(std::abs(r.residual("left_crosshair_miss_m")) > 0.003);
    CHECK(std::abs(r.residual("right_reflection_angle_deg")) < 1e-12);

    const CalibrationReport report = run_checklist(b, 0.064, tol);
    CHECK_FALSE(step_result(report, 4).pass);
    CHECK(max_abs_residual_before(report, 4) < 1e-12);
}

TEST_CASE("step 4 sees a raised beamsplitter only in its center offset") {
    BenchConfig cfg = nominal_inf().config;
    cfg.right.beamsplitter.height_offset_m = 0.002;
    const Bench b = with_config(cfg);
    const CheckResult r = check_beamsplitter(b, Tolerances{});
    CHECK_FALSE(r.pass);
    // The vertical shift moves the mirror within its own plane: the
    // reflection is unchanged and only the housing center reads offset.
    CHECK(std::abs(r.residual("right_reflection_angle_deg")) < 1e-12);
    CHECK(std::abs(r.residual("right_axis_offset_m")) < 1e-12);
    CHECK(std::abs(r.residual("right_crosshair_miss_m")) < 1e-12);
    CHECK(r.residual("right_center_offset_m") == doctest::Approx(0.002).epsilon(1e-12));
}

TEST_CASE("step 4 reports a laser that never returns") {
    BenchConfig cfg = nominal_inf().config;
    cfg.left.beamsplitter.lateral_offset_m = 0.05;  // slid off the gaze axis
    const Bench b = with_config(cfg);
    const CheckResult r = check_beamsplitter(b, Tolerances{});
    CHECK_FALSE(r.pass);
    CHECK(std::isinf(r.residual("left_reflection_angle_deg")));
    REQUIRE(!r.notes.empty());
    CHECK(r.notes[0].find("laser did not return") != std::string::npos);
    // The housing center measurement needs no reflection and stays finite.
    CHECK(r.residual("left_center_offset_m") == doctest::Approx(0.05).epsilon(1e-9));

    const std::vector<double> rv = residual_vector(b, 0.064);
    const std::vector<std::string>& labels = residual_labels();
    const std::vector<int>& steps = residual_steps();
    int penalized = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (steps[i] == 4 && labels[i].find("left_") == 0) {
            CHECK(rv[i] == residual_penalty);
            ++penalized;
        }
    }
    CHECK(penalized == 8);
}

TEST_CASE("step 5 flags a converged wing against a straight-ahead target") {
    BenchConfig cfg = nominal_inf().config;
    cfg.left.rail_azimuth_deg = 0.5;
    const Bench b = with_config(cfg);
    const Tolerances tol;
    const CheckResult r = check_ipd(b, 0.064, tol);
    CHECK_FALSE(r.pass);
    // At the 1 m projection plane a 0.5 degree axis error misses by tan(0.5).
    CHECK(r.residual("left_axis_distance_m") ==
          doctest::Approx(std::tan(deg_to_rad(0.5))).epsilon(1e-9));
    CHECK(std::abs(r.residual("right_axis_distance_m")) < 1e-12);
    CHECK(std::abs(r.residual("ipd_error_m")) < 1e-15);

    const CalibrationReport report = run_checklist(b, 0.064, tol);
    CHECK_FALSE(step_result(report, 5).pass);
    CHECK(max_abs_residual_before(report, 5) < 1e-12);
}

TEST_CASE("step 5 compares the bench spacing against the actual user") {
    const Bench b = nominal_inf();  // built for a 0.064 m user
    const CheckResult r = check_ipd(b, 0.066, Tolerances{});
    CHECK_FALSE(r.pass);
    CHECK(r.residual("ipd_error_m") == doctest::Approx(-0.002).epsilon(1e-12));
    // With parallel gaze the straight-ahead marks sit at the user's own
    // half-ipd, so each axis also reads 1 mm off.
    CHECK(r.residual("left_axis_distance_m") == doctest::Approx(0.001).epsilon(1e-9));

    CHECK_THROWS_AS(check_ipd(b, 0.0, Tolerances{}), std::invalid_argument);
    CHECK_THROWS_AS(check_ipd(b, -0.06, Tolerances{}),
                    std::invalid_argument);
}

TEST_CASE("step 5 follows a finite fixation mark") {
    // Converged for 1 m: the axes must cross on the midline mark, so the
    // nominal assembly passes even though nothing points straight ahead.
    const Bench b = assemble_nominal(0.064, infinite_distance, 1.0);
    const CheckResult r = check_ipd(b, 0.064, Tolerances{});
    CHECK(r.pass);
    CHECK(std::abs(r.residual("left_axis_distance_m")) < 1e-12);

    // Undo one wing's convergence: its axis now misses the mark by about
    // half the ipd.
    BenchConfig cfg = b.config;
    cfg.right.rail_azimuth_deg = 0.0;
    const CheckResult broken = check_ipd(with_config(cfg), 0.064, Tolerances{});
    CHECK_FALSE(broken.pass);
    CHECK(broken.residual("right_axis_distance_m") ==
          doctest::Approx(0.032).epsilon(1e-6));
}

TEST_CASE("later steps are annotated when an earlier one fails") {
    BenchConfig cfg = nominal_inf().config;
    cfg.table.pitch_deg = 0.2;
    const CalibrationReport report = run_checklist(with_config(cfg), 0.064, Tolerances{});
    CHECK_FALSE(report.overall_pass);
    for (int step = 2; step <= 5; ++step) {
        const CheckResult& check = step_result(report, step);
        REQUIRE(!check.notes.empty());
        CHECK(check.notes.back().find("step 1 failed upstream") != std::string::npos);
    }
    // The failing step itself carries no upstream note.
    CHECK(step_result(report, 1).notes.empty());
}

TEST_CASE("tolerance overrides change pass verdicts") {
    BenchConfig cfg = nominal_inf().config;
    cfg.left.collimating.lateral_offset_m = 0.0008;
    const Bench b = with_config(cfg);
    CHECK_FALSE(check_element_centering(b, Tolerances{}).pass);
    Tolerances loose;
    loose.centering_m = 0.001;
    CHECK(check_element_centering(b, loose).pass);
}

TEST_CASE("asking for an unknown residual label is an error") {
    const CheckResult r = check_table_level(nominal_inf(), Tolerances{});
    CHECK_THROWS_AS(r.residual("no_such_label"), std::out_of_range);
}
