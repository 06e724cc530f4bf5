// Assembled bench geometry, the folded chief-ray trace, stimulus
// simulation, and user refits. Scalar expectations are recomputed in-test
// from the design layout or from transfer-matrix algebra.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "haplo/bench.hpp"

using namespace haplo;

namespace {

Bench nominal_inf() {
    return assemble_nominal(0.064, infinite_distance, infinite_distance);
}

// Composed transfer matrix of the nominal monitor-to-eye path with the given
// accommodation power. Gaps are the design spacings; the last entry is the
// accommodation lens to the nodal point via the fold (0.05 + 0.10).
RayTransferMatrix nominal_matrix(double accommodation_power) {
    RayTransferMatrix m = RayTransferMatrix::identity();
    const struct {
        bool lens;
        double value;
    } steps[] = {{false, 0.10}, {true, -10.0}, {false, 0.05}, {true, 10.0},
                 {false, 0.05}, {true, accommodation_power}, {false, 0.15}};
    for (const auto& s : steps) {
        const RayTransferMatrix e = s.lens ? RayTransferMatrix::lens(s.value)
                                           : RayTransferMatrix::gap(s.value);
        m = e * m;
    }
    return m;
}

}  // namespace

TEST_CASE("nominal assembly places every station by design") {
    const Bench b = nominal_inf();
    CHECK((b.left.pivot - Vec3(-0.032, 0, 0)).norm() < 1e-15);
    CHECK((b.right.pivot - Vec3(0.032, 0, 0)).norm() < 1e-15);
    CHECK((b.table_normal - Vec3(0, 1, 0)).norm() < 1e-15);

    for (Side side : {Side::left, Side::right}) {
        const Wing& w = b.wing(side);
        const double out_sign = side == Side::left ? -1.0 : 1.0;
        CHECK((w.forward - Vec3(0, 0, 1)).norm() < 1e-15);
        CHECK((w.up - Vec3(0, 1, 0)).norm() < 1e-15);
        CHECK((w.outward - Vec3(out_sign, 0, 0)).norm() < 1e-15);
        CHECK((w.fold_point - (w.pivot + Vec3(0, 0, 0.106))).norm() < 1e-15);

        // Rail stations: lens centers sit on the rail at their axial stations.
        REQUIRE(w.lenses.size() == 3);
        const double stations[] = {0.156, 0.206, 0.256};
        for (int i = 0; i < 3; ++i) {
            const Vec3 expected = w.fold_point + w.outward * (stations[i] - 0.106);
            CHECK((w.lenses[i].center - expected).norm() < 1e-15);
            CHECK((w.lenses[i].axis - (-w.outward)).norm() < 1e-15);
            CHECK(w.lenses[i].aperture_radius == 0.035);
        }
        CHECK(w.lenses[0].power.diopters == 0.0);    // accommodation, unpowered
        CHECK(w.lenses[1].power.diopters == 10.0);   // collimating
        CHECK(w.lenses[2].power.diopters == -10.0);  // minimization
        const Vec3 panel = w.fold_point + w.outward * 0.25;
        CHECK((w.monitor.crosshair - panel).norm() < 1e-15);
        CHECK((w.monitor.normal - (-w.outward)).norm() < 1e-15);

        // The beamsplitter normal bisects the reversed gaze and the rail.
        CHECK(w.beamsplitter.normal.dot(w.forward) ==
              doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
        CHECK(w.beamsplitter.normal.dot(w.outward) ==
              doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-12));
        CHECK((w.beamsplitter.point - w.fold_point).norm() < 1e-15);
    }

    // Laser rig: a beam down each rail toward the fold, one along each gaze.
    REQUIRE(b.laser_rig.size() == 4);
    CHECK((b.laser_rig[0].direction - (-b.left.outward)).norm() < 1e-15);
    CHECK((b.laser_rig[1].direction - (-b.right.outward)).norm() < 1e-15);
    CHECK((b.laser_rig[2].origin - b.left.pivot).norm() < 1e-15);
    CHECK((b.laser_rig[3].direction - b.right.forward).norm() < 1e-15);
}

TEST_CASE("nominal bench round-trips through its own serialization") {
    const Bench b = nominal_inf();
    const Bench again = assemble_bench(parse_bench_config(serialize_bench_config(b.config)));
    CHECK(config_fingerprint(again.config) == config_fingerprint(b.config));
    CHECK((again.left.monitor.crosshair - b.left.monitor.crosshair).norm() == 0.0);
}

TEST_CASE("chief ray trace walks monitor, lenses, mirror, eye") {
    const Bench b = nominal_inf();
    const EyeModel eye = design_eye(b, Side::left);
    const FoldTrace tr = trace_fold(b.left, eye);
    REQUIRE(tr.completed);
    CHECK_FALSE(tr.vignetted);
    // Crosshair, three lens hits, mirror hit, nodal-plane hit.
    REQUIRE(tr.points.size() == 6);
    // Gaps run between optical surfaces; the fold hop merges into the last.
    REQUIRE(tr.gaps.size() == 4);
    REQUIRE(tr.powers.size() == 3);
    // Powers in encounter order from the monitor.
    CHECK(tr.powers[0] == -10.0);
    CHECK(tr.powers[1] == 10.0);
    CHECK(tr.powers[2] == 0.0);
    const double design_gaps[] = {0.10, 0.05, 0.05, 0.15};
    for (int i = 0; i < 4; ++i) {
        CHECK(tr.gaps[i] == doctest::Approx(design_gaps[i]).epsilon(1e-12));
    }
    // The folded exit runs back along the gaze axis into the eye.
    CHECK((tr.exit_direction - (-b.left.forward)).norm() < 1e-12);
    CHECK((tr.points.back() - eye.nodal_point()).norm() < 1e-12);

    const OpticalTrain train = unfolded_train(b.left, eye);
    CHECK(train.total_length() == doctest::Approx(0.35).epsilon(1e-12));
    CHECK(std::abs(collimation_error(train).diopters) < 1e-12);
}

TEST_CASE("collimated nominal stimulus: zero demand, 1.75x magnification") {
    const Bench b = nominal_inf();
    const PerceivedStimulus s =
        simulate_stimulus(b, design_eye(b, Side::left), design_eye(b, Side::right));
    for (Side side : {Side::left, Side::right}) {
        const EyeStimulus& e = s.eye(side);
        CHECK(std::abs(e.focal_demand_diopters) < 1e-12);
        CHECK(std::abs(e.image_center_offset_deg) < 1e-9);
        CHECK(std::abs(e.horizontal_offset_deg) < 1e-9);
        CHECK(std::abs(e.vertical_offset_deg) < 1e-9);
        CHECK_FALSE(e.vignetted);
        CHECK((e.gaze_direction - b.wing(side).forward).norm() < 1e-9);
        // Oracle: angular magnification of the monitor-to-eye path is the
        // path length over the composed matrix's B entry.
        const RayTransferMatrix m = nominal_matrix(0.0);
        CHECK(e.angular_magnification ==
              doctest::Approx(0.35 / m.b).epsilon(1e-12));
        CHECK(e.angular_magnification == doctest::Approx(1.75).epsilon(1e-12));
    }
    const MismatchMetrics mm = stimulus_mismatch(s, intended_stimulus(b));
    CHECK(std::abs(mm.focal_error_diopters) < 1e-12);
    CHECK(std::abs(mm.vergence_error_deg) < 1e-9);
    CHECK(mm.vertical_disparity_deg == 0.0);
}

TEST_CASE("2 m stimulus: -0.5 D demand and converged wings") {
    const Bench b = assemble_nominal(0.064, 2.0, 2.0);
    // The accommodation stage is powered per the closed form for the 0.15 m
    // lens-to-nodal-point path.
    const double p = accommodation_power_for(2.0, 0.15).diopters;
    CHECK(b.config.left.accommodation.power_diopters == p);
    CHECK(p == doctest::Approx(-0.5 / 0.925).epsilon(1e-12));
    // Wings rotate inward by the vergence geometry angle.
    const double inward = vergence_geometry(0.064, 2.0).inward_rotation_deg;
    CHECK(b.left.rail_azimuth_deg == inward);
    CHECK(b.right.rail_azimuth_deg == -inward);

    const PerceivedStimulus s =
        simulate_stimulus(b, design_eye(b, Side::left), design_eye(b, Side::right));
    CHECK(s.left.focal_demand_diopters == doctest::Approx(-0.5).epsilon(1e-9));
    CHECK(s.right.focal_demand_diopters == doctest::Approx(-0.5).epsilon(1e-9));
    const RayTransferMatrix m = nominal_matrix(p);
    CHECK(s.left.angular_magnification == doctest::Approx(0.35 / m.b).epsilon(1e-9));

    const MismatchMetrics mm = stimulus_mismatch(s, intended_stimulus(b));
    CHECK(std::abs(mm.focal_error_diopters) < 1e-9);
    CHECK(std::abs(mm.vergence_error_deg) < 1e-9);
    CHECK(std::abs(mm.lateral_image_shift_deg) < 1e-9);
}

TEST_CASE("mismatch metrics against constructed stimuli") {
    PerceivedStimulus s;
    const double a = deg_to_rad(1.0);
    s.left.gaze_direction = Vec3(std::sin(a), 0, std::cos(a));
    s.right.gaze_direction = Vec3(-std::sin(a), 0, std::cos(a));
    s.left.focal_demand_diopters = -0.4;
    s.right.focal_demand_diopters = -0.6;
    s.left.vertical_offset_deg = 0.02;
    s.right.vertical_offset_deg = -0.01;
    s.left.horizontal_offset_deg = 0.1;
    s.right.horizontal_offset_deg = 0.3;
    IntendedStimulus intended{2.0, 2.0, 0.064};
    const MismatchMetrics m = stimulus_mismatch(s, intended);
    CHECK(m.focal_error_diopters == doctest::Approx(-0.5 - (-0.5)).epsilon(1e-12));
    CHECK(m.vergence_error_deg ==
          doctest::Approx(2.0 - vergence_geometry(0.064, 2.0).full_vergence_deg)
              .epsilon(1e-9));
    CHECK(m.vertical_disparity_deg == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(m.lateral_image_shift_deg == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("configure_for_user moves pivots and keeps rails rigid") {
    const Bench base = nominal_inf();
    const Bench fitted = configure_for_user(base, 0.07, 1.0);
    CHECK(fitted.ipd == 0.07);
    CHECK((fitted.left.pivot - Vec3(-0.035, 0, 0)).norm() < 1e-15);
    const double inward = vergence_geometry(0.07, 1.0).inward_rotation_deg;
    CHECK(fitted.left.rail_azimuth_deg == inward);
    CHECK(fitted.right.rail_azimuth_deg == -inward);
    // Rail-relative placement is untouched: each element keeps its station.
    for (int i = 0; i < 3; ++i) {
        const Vec3 d = fitted.left.lenses[i].center - fitted.left.fold_point;
        CHECK(d.dot(fitted.left.outward) ==
              doctest::Approx(fitted.left.lenses[i].axial_position - 0.106)
                  .epsilon(1e-12));
        CHECK(std::abs(d.dot(fitted.left.forward)) < 1e-15);
    }
    // The refitted bench still presents its stimulus cleanly.
    const PerceivedStimulus s = simulate_stimulus(fitted, design_eye(fitted, Side::left),
                                                  design_eye(fitted, Side::right));
    const MismatchMetrics mm = stimulus_mismatch(s, intended_stimulus(fitted));
    CHECK(std::abs(mm.vergence_error_deg) < 1e-9);

    CHECK_THROWS_AS(configure_for_user(base, 0.03, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(configure_for_user(base, 0.09, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(configure_for_user(base, 0.064, -1.0), std::invalid_argument);
}

TEST_CASE("configure_focal_distance repowers the accommodation stage") {
    const Bench base = nominal_inf();
    const Bench focused = configure_focal_distance(base, 1.0);
    const double p = accommodation_power_for(1.0, 0.15).diopters;
    CHECK(focused.config.left.accommodation.power_diopters == p);
    CHECK(focused.config.right.accommodation.power_diopters == p);
    const PerceivedStimulus s = simulate_stimulus(focused, design_eye(focused, Side::left),
                                                  design_eye(focused, Side::right));
    CHECK(s.left.focal_demand_diopters == doctest::Approx(-1.0).epsilon(1e-9));
    // A focal target on the accommodation lens plane cannot be realized.
    CHECK_THROWS_AS(configure_focal_distance(base, 0.15), UnrealizableDistance);
}

TEST_CASE("stimulus is invariant under wing vergence rotation") {
    // Pivot coincidence: rotating a wing about the design eye's center of
    // rotation must not change any scalar stimulus property.
    const Bench parallel = nominal_inf();
    const PerceivedStimulus s0 = simulate_stimulus(
        parallel, design_eye(parallel, Side::left), design_eye(parallel, Side::right));
    for (double vergence_m : {3.0, 1.0, 0.5}) {
        const Bench turned = configure_for_user(parallel, 0.064, vergence_m);
        const PerceivedStimulus s = simulate_stimulus(
            turned, design_eye(turned, Side::left), design_eye(turned, Side::right));
        for (Side side : {Side::left, Side::right}) {
            const EyeStimulus& a = s.eye(side);
            const EyeStimulus& b = s0.eye(side);
            CHECK(std::abs(a.focal_demand_diopters - b.focal_demand_diopters) < 1e-9);
            CHECK(std::abs(a.image_center_offset_deg - b.image_center_offset_deg) < 1e-9);
            CHECK(std::abs(a.angular_magnification - b.angular_magnification) < 1e-9);
            // The gaze direction is the one field that does rotate.
            const double swing = rad_to_deg(
                angle_between(a.gaze_direction, b.gaze_direction));
            CHECK(std::abs(swing - std::abs(turned.wing(side).rail_azimuth_deg)) < 1e-8);
        }
    }
}

TEST_CASE("rigidly rotated wing reproduces the stimulus for a rotated eye") {
    const Bench b = nominal_inf();
    const EyeModel eye = design_eye(b, Side::left);
    const FoldTrace base = trace_fold(b.left, eye);
    REQUIRE(base.completed);
    const Mat3 r = Mat3::axis_angle(Vec3(0, 1, 0), deg_to_rad(7.5));
    const Wing turned = b.left.rotated(r);
    const EyeModel turned_eye(turned.pivot, eye.nodal_offset, eye.pupil_offset,
                              r.apply(eye.gaze), eye.pupil_radius);
    const FoldTrace moved = trace_fold(turned, turned_eye);
    REQUIRE(moved.completed);
    REQUIRE(moved.gaps.size() == base.gaps.size());
    for (size_t i = 0; i < base.gaps.size(); ++i) {
        CHECK(moved.gaps[i] == doctest::Approx(base.gaps[i]).epsilon(1e-12));
    }
}

TEST_CASE("fold failures carry the wing and the reason") {
    Bench b = nominal_inf();
    BenchConfig cfg = b.config;
    cfg.left.beamsplitter.yaw_deg = 30.0;  // reflected beam far from the pupil
    const Bench broken = assemble_bench(cfg);
    const FoldTrace tr = trace_fold(broken.left, design_eye(broken, Side::left));
    CHECK_FALSE(tr.completed);
    CHECK_FALSE(tr.failure.empty());
    CHECK(tr.points.size() >= 5);  // partial path still recorded
    try {
        simulate_stimulus(broken, design_eye(broken, Side::left),
                          design_eye(broken, Side::right));
        FAIL("expected FoldFailure");
    } catch (const FoldFailure& e) {
        CHECK(e.side == Side::left);
        CHECK(std::string(e.what()).find("left wing") != std::string::npos);
    }
}

TEST_CASE("undersized apertures set the vignette flag") {
    Bench b = nominal_inf();
    BenchConfig cfg = b.config;
    cfg.right.collimating.aperture_radius_m = 0.0001;
    const Bench tight = assemble_bench(cfg);
    // The chief ray runs through lens centers, so on-axis it stays clean;
    // a source off the crosshair exceeds the pinhole aperture.
    const EyeModel eye = design_eye(tight, Side::right);
    const Vec3 off_center =
        tight.right.monitor.crosshair + tight.right.monitor.lateral_dir * 0.002;
    const FoldTrace tr = trace_fold(tight.right, eye, off_center);
    CHECK(tr.vignetted);
}

TEST_CASE("marginal panel sources trace until they miss the pupil") {
    const Bench b = nominal_inf();
    const EyeModel eye = design_eye(b, Side::left);
    const Vec3 near_mark =
        b.left.monitor.crosshair + b.left.monitor.lateral_dir * 0.0025;
    CHECK(trace_fold(b.left, eye, near_mark).completed);
    const Vec3 far_mark =
        b.left.monitor.crosshair + b.left.monitor.lateral_dir * 0.005;
    const FoldTrace missed = trace_fold(b.left, eye, far_mark);
    CHECK_FALSE(missed.completed);
    CHECK(missed.failure.find("pupil") != std::string::npos);
}

TEST_CASE("design eyes sit on the pivots and follow the wing gaze") {
    const Bench b = assemble_nominal(0.058, 1.0, 1.0);
    for (Side side : {Side::left, Side::right}) {
        const EyeModel eye = design_eye(b, side);
        CHECK((eye.center_of_rotation - b.wing(side).pivot).norm() < 1e-15);
        CHECK((eye.gaze - b.wing(side).forward).norm() < 1e-15);
        CHECK(eye.nodal_offset == 0.006);
        CHECK(eye.pupil_offset == 0.003);
        CHECK(eye.pupil_radius == 0.004);
    }
}

TEST_CASE("intended stimulus echoes the configuration") {
    const Bench b = assemble_nominal(0.061, 1.5, 2.5);
    const IntendedStimulus i = intended_stimulus(b);
    CHECK(i.focal_distance_m == 1.5);
    CHECK(i.vergence_distance_m == 2.5);
    CHECK(i.ipd_m == 0.061);
}
