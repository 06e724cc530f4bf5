#include "haplo/paraxial.hpp"

#include <utility>

namespace haplo {

TrainElement TrainElement::gap(double length_m) {
    if (!(length_m >= 0.0) || !std::isfinite(length_m)) {
        throw std::invalid_argument("gap: length must be finite and >= 0");
    }
    return TrainElement{GapElement{length_m}};
}

TrainElement TrainElement::lens(OpticalPower power, double aperture_radius_m) {
    if (!(aperture_radius_m > 0.0) || !std::isfinite(aperture_radius_m)) {
        throw std::invalid_argument("lens: aperture radius must be finite and > 0");
    }
    return TrainElement{LensElement{power, aperture_radius_m}};
}

OpticalTrain OpticalTrain::make(double source_offset_m,
                                std::vector<TrainElement> elements_) {
    if (!(source_offset_m >= 0.0) || !std::isfinite(source_offset_m)) {
        throw std::invalid_argument("OpticalTrain: source_offset must be finite and >= 0");
    }
    OpticalTrain t;
    t.source_offset = source_offset_m;
    for (auto& e : elements_) {
        if (e.is_gap() && !t.elements.empty() && t.elements.back().is_gap()) {
            t.elements.back() = TrainElement::gap(t.elements.back().as_gap().length +
                                                  e.as_gap().length);
        } else {
            t.elements.push_back(std::move(e));
        }
    }
    return t;
}

bool OpticalTrain::has_lens() const {
    for (const auto& e : elements) {
        if (e.is_lens()) return true;
    }
    return false;
}

double OpticalTrain::total_length() const {
    double len = source_offset;
    for (const auto& e : elements) {
        if (e.is_gap()) len += e.as_gap().length;
    }
    return len;
}

ThinLensImage thin_lens_image(OpticalPower power, double object_distance_m) {
    const double u = object_distance_m;
    if (std::isnan(u) || u == -infinite_distance || !(u > 0.0)) {
        throw std::invalid_argument(
            "thin_lens_image: object distance must be > 0 or +infinity");
    }
    ThinLensImage out;
    if (std::isinf(u)) {
        if (power.diopters == 0.0) {
            out.image_distance = infinite_distance;  // collimated stays collimated
        } else {
            out.image_distance = 1.0 / power.diopters;
        }
        out.lateral_magnification = 0.0;
        return out;
    }
    const double inv_v = power.diopters - 1.0 / u;
    if (inv_v == 0.0) {
        out.image_distance = infinite_distance;  // object at the focal point
        out.lateral_magnification = 0.0;
        return out;
    }
    out.image_distance = 1.0 / inv_v;
    out.lateral_magnification = -out.image_distance / u;
    return out;
}

RayTransferMatrix element_matrix(const TrainElement& element) {
    if (element.is_gap()) {
        return RayTransferMatrix::gap(element.as_gap().length);
    }
    return RayTransferMatrix::lens(element.as_lens().power.diopters);
}

RayTransferMatrix compose_train(const OpticalTrain& train) {
    if (train.empty()) {
        throw std::invalid_argument("compose_train: empty train");
    }
    RayTransferMatrix m = RayTransferMatrix::gap(train.source_offset);
    for (const auto& e : train.elements) {
        m = element_matrix(e) * m;
    }
    return m;
}

TracedRay trace_ray(const OpticalTrain& train, const ParaxialRay& ray) {
    TracedRay out;
    out.ray = RayTransferMatrix::gap(train.source_offset).apply(ray);
    for (const auto& e : train.elements) {
        if (e.is_lens() && std::abs(out.ray.height) > e.as_lens().aperture_radius) {
            out.vignetted = true;
        }
        out.ray = element_matrix(e).apply(out.ray);
    }
    return out;
}

Vergence vergence_after_gap(Vergence v, double length_m) {
    if (!(length_m >= 0.0) || !std::isfinite(length_m)) {
        throw std::invalid_argument("vergence_after_gap: invalid length");
    }
    if (length_m == 0.0) return v;
    if (v.is_sentinel()) {
        // Light converging exactly at the previous plane diverges from it:
        // the limit of V/(1 - L V) as |V| -> infinity.
        return Vergence(-1.0 / length_m);
    }
    const double denom = 1.0 - length_m * v.diopters;
    if (denom == 0.0) {
        return Vergence(std::copysign(infinite_distance, v.diopters));
    }
    return Vergence(v.diopters / denom);
}

Vergence vergence_after_lens(Vergence v, OpticalPower power) {
    if (v.is_sentinel()) return v;  // power is irrelevant at a focus
    return Vergence(v.diopters + power.diopters);
}

Vergence propagate_vergence(Vergence v, const OpticalTrain& train) {
    Vergence cur = vergence_after_gap(v, train.source_offset);
    for (const auto& e : train.elements) {
        if (e.is_gap()) {
            cur = vergence_after_gap(cur, e.as_gap().length);
        } else {
            cur = vergence_after_lens(cur, e.as_lens().power);
        }
    }
    return cur;
}

Vergence collimation_error(const OpticalTrain& train) {
    if (!train.has_lens()) {
        throw std::invalid_argument("collimation_error: train has no lens");
    }
    // Point source at the source plane; the source-offset gap turns the
    // diverging sentinel into -1/source_offset at the first element.
    Vergence v(-infinite_distance);
    return propagate_vergence(v, train);
}

OpticalPower accommodation_power_for(double target_focal_distance_m,
                                     double path_to_eye_m) {
    const double d = target_focal_distance_m;
    const double path = path_to_eye_m;
    if (std::isnan(d) || !(d > 0.0)) {
        throw std::invalid_argument(
            "accommodation_power_for: target distance must be > 0 or +infinity");
    }
    if (!(path >= 0.0) || !std::isfinite(path)) {
        throw std::invalid_argument("accommodation_power_for: path must be finite and >= 0");
    }
    if (std::isinf(d)) return OpticalPower(0.0);
    const double v = -1.0 / d;
    const double denom = 1.0 + path * v;
    if (denom == 0.0 || std::abs(v / denom) > 1000.0) {
        throw UnrealizableDistance(
            "accommodation_power_for: target too close to the lens plane (P = " +
            (denom == 0.0 ? std::string("inf") : std::to_string(v / denom)) + " D)");
    }
    return OpticalPower(v / denom);
}

double perceived_focal_distance(const OpticalTrain& train) {
    if (!train.has_lens()) {
        throw std::invalid_argument("perceived_focal_distance: train has no lens");
    }
    const Vergence v_eye = collimation_error(train);
    if (v_eye.is_sentinel() || v_eye.diopters > 0.0) {
        throw NonPhysicalStimulus(
            "perceived_focal_distance: light converges at or behind the eye");
    }
    if (v_eye.diopters == 0.0) return infinite_distance;
    return -1.0 / v_eye.diopters;
}

}  // namespace haplo
