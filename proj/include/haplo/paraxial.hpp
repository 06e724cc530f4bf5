// First-order optics along an unfolded optical train: thin-lens imaging,
// 2x2 ray transfer matrices, reduced-vergence propagation, collimation and
// accommodation-power selection.
//
// Sign conventions, used consistently everywhere:
//   * Thin lens equation in the form 1/f = 1/u + 1/v. Object distance u > 0
//     for a real object; image distance v > 0 downstream (real image),
//     v < 0 on the object side (virtual image). Magnification is -v/u.
//   * Vergence at a plane is the reciprocal of the signed axial distance to
//     the point of convergence: negative diverging, 0 collimated, positive
//     converging. +/-infinity is the focal-coincidence sentinel.
//   * Distances in meters, powers/vergences in diopters (1/m).

#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace haplo {

inline constexpr double infinite_distance = std::numeric_limits<double>::infinity();

/// Lens power in diopters; positive converges. Magnitude capped at 1000 to
/// reject unit mistakes (millimeters fed as meters and the like).
struct OpticalPower {
    double diopters = 0.0;

    OpticalPower() = default;
    explicit OpticalPower(double diopters_) : diopters(diopters_) {
        if (!std::isfinite(diopters) || std::abs(diopters) > 1000.0) {
            throw std::invalid_argument("OpticalPower: |P| must be finite and <= 1000 D");
        }
    }
};

/// Transverse ray state: height above the axis (m) and paraxial slope (rad).
struct ParaxialRay {
    double height = 0.0;
    double angle = 0.0;

    ParaxialRay() = default;
    ParaxialRay(double height_, double angle_) : height(height_), angle(angle_) {
        if (!std::isfinite(height) || !std::isfinite(angle)) {
            throw std::invalid_argument("ParaxialRay: non-finite components");
        }
    }
};

/// ABCD matrix acting on (height, angle). Unit-determinant in air.
struct RayTransferMatrix {
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

    static RayTransferMatrix identity() { return {}; }
    static RayTransferMatrix gap(double length_m) { return {1.0, length_m, 0.0, 1.0}; }
    static RayTransferMatrix lens(double power_diopters) {
        return {1.0, 0.0, -power_diopters, 1.0};
    }

    double determinant() const { return a * d - b * c; }
    RayTransferMatrix operator*(const RayTransferMatrix& rhs) const {
        return {a * rhs.a + b * rhs.c, a * rhs.b + b * rhs.d,
                c * rhs.a + d * rhs.c, c * rhs.b + d * rhs.d};
    }
    ParaxialRay apply(const ParaxialRay& r) const {
        return {a * r.height + b * r.angle, c * r.height + d * r.angle};
    }
};

struct GapElement {
    double length = 0.0;  // m, >= 0
};

struct LensElement {
    OpticalPower power;
    double aperture_radius = 0.0;  // m, > 0
};

struct TrainElement {
    std::variant<GapElement, LensElement> kind;

    static TrainElement gap(double length_m);
    static TrainElement lens(OpticalPower power, double aperture_radius_m);
    static TrainElement lens(double power_diopters, double aperture_radius_m) {
        return lens(OpticalPower(power_diopters), aperture_radius_m);
    }

    bool is_gap() const { return std::holds_alternative<GapElement>(kind); }
    bool is_lens() const { return std::holds_alternative<LensElement>(kind); }
    const GapElement& as_gap() const { return std::get<GapElement>(kind); }
    const LensElement& as_lens() const { return std::get<LensElement>(kind); }
};

/// Unfolded source-to-exit light path: an initial source-to-first-element
/// gap followed by the element list. Adjacent gap elements are merged on
/// construction.
struct OpticalTrain {
    double source_offset = 0.0;  // m, source plane to first element
    std::vector<TrainElement> elements;

    static OpticalTrain make(double source_offset_m,
                             std::vector<TrainElement> elements_);

    bool empty() const { return elements.empty() && source_offset == 0.0; }
    bool has_lens() const;
    /// Geometric length of the full path, m.
    double total_length() const;
};

/// Reduced vergence in diopters. +/-infinity marks a focal coincidence
/// (light converging exactly at the current plane).
struct Vergence {
    double diopters = 0.0;

    Vergence() = default;
    explicit Vergence(double diopters_) : diopters(diopters_) {
        if (std::isnan(diopters)) {
            throw std::invalid_argument("Vergence: NaN");
        }
    }
    bool is_sentinel() const { return std::isinf(diopters); }
};

struct ThinLensImage {
    double image_distance = 0.0;     // v; +inf sentinel for collimated output
    double lateral_magnification = 0.0;  // -v/u; 0 for an object at infinity
};

struct TracedRay {
    ParaxialRay ray;
    bool vignetted = false;  // |height| exceeded some lens aperture
};

struct UnrealizableDistance : std::runtime_error {
    explicit UnrealizableDistance(const std::string& what) : std::runtime_error(what) {}
};
struct NonPhysicalStimulus : std::runtime_error {
    explicit NonPhysicalStimulus(const std::string& what) : std::runtime_error(what) {}
};

/// Thin-lens conjugate. u > 0 or +infinity (collimated input).
ThinLensImage thin_lens_image(OpticalPower power, double object_distance_m);

RayTransferMatrix element_matrix(const TrainElement& element);

/// Right-to-left product of element matrices in propagation order,
/// including the source-offset gap. Errors on an empty train.
RayTransferMatrix compose_train(const OpticalTrain& train);

/// Applies the composed train to a ray, flagging vignetting at each lens.
TracedRay trace_ray(const OpticalTrain& train, const ParaxialRay& ray);

/// Single-step vergence transfer.
Vergence vergence_after_gap(Vergence v, double length_m);
Vergence vergence_after_lens(Vergence v, OpticalPower power);

/// Propagates a vergence through the source gap and every element.
Vergence propagate_vergence(Vergence v, const OpticalTrain& train);

/// Vergence leaving the train for an on-axis point source at the source
/// plane: the virtual dioptometer reading. 0 diopters means collimated.
Vergence collimation_error(const OpticalTrain& train);

/// Power P such that collimated input through lens(P) then a gap of
/// path_to_eye_m meets the eye plane with vergence -1/target_focal_distance.
/// Closed form P = V / (1 + L V) with V = -1/d.
OpticalPower accommodation_power_for(double target_focal_distance_m,
                                     double path_to_eye_m);

/// Focal distance presented by a full source-to-eye train: -1/V at the eye
/// plane; +infinity sentinel when collimated. Throws NonPhysicalStimulus
/// when the light converges behind the eye (V > 0).
double perceived_focal_distance(const OpticalTrain& train);

}  // namespace haplo
