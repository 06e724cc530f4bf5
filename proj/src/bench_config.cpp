#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include "haplo/bench.hpp"

namespace haplo {

namespace {

std::string join_diagnostics(const std::vector<Diagnostic>& diags) {
    std::string out = "bench configuration invalid:";
    size_t shown = 0;
    for (const auto& d : diags) {
        out += "\n  " + d.format();
        if (++shown == 8 && diags.size() > 8) {
            out += "\n  ... (" + std::to_string(diags.size() - 8) + " more)";
            break;
        }
    }
    return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<Diagnostic> diags)
    : std::runtime_error(join_diagnostics(diags)), diagnostics(std::move(diags)) {}

const char* side_name(Side side) { return side == Side::left ? "left" : "right"; }

namespace {

constexpr const char* lens_keys_doc = "power/axial/lateral/height/tilt/aperture";

void read_units(const KvDocument& doc, std::vector<Diagnostic>& diags) {
    if (!doc.has_section("units")) return;
    SectionReader units(doc, "units", diags);
    struct { const char* key; const char* want; } canon[] = {
        {"length", "m"}, {"angle", "deg"}, {"power", "diopters"}};
    for (const auto& c : canon) {
        if (!units.has_key(c.key)) continue;
        std::string got = units.require_string(c.key);
        if (got != c.want) {
            diags.push_back({units.section_line(), std::string("units.") + c.key,
                             "unit violation: only '" + std::string(c.want) +
                                 "' is supported, got '" + got + "'"});
        }
    }
}

LensConfig read_lens(SectionReader& r, const std::string& name) {
    LensConfig lens;
    lens.name = name;
    lens.power_diopters = r.require_number("power_diopters");
    lens.axial_position_m = r.require_number("axial_position_m");
    lens.lateral_offset_m = r.optional_number("lateral_offset_m", 0.0);
    lens.height_offset_m = r.optional_number("height_offset_m", 0.0);
    lens.tilt_deg = r.optional_number("tilt_deg", 0.0);
    lens.aperture_radius_m = r.optional_number("aperture_radius_m", 0.035);
    return lens;
}

MonitorConfig read_monitor(SectionReader& r, const std::string& name) {
    MonitorConfig mon;
    mon.name = name;
    mon.axial_position_m = r.require_number("axial_position_m");
    mon.lateral_offset_m = r.optional_number("lateral_offset_m", 0.0);
    mon.height_offset_m = r.optional_number("height_offset_m", 0.0);
    mon.pixel_pitch_m = r.optional_number("pixel_pitch_m", 0.00025);
    return mon;
}

void read_wing(const KvDocument& doc, const std::string& side, WingConfig& wing,
               std::vector<Diagnostic>& diags) {
    const std::string base = "wings." + side;
    {
        SectionReader r(doc, base, diags);
        wing.rail_azimuth_deg = r.optional_number("rail_azimuth_deg", 0.0);
        wing.cant_deg = r.optional_number("cant_deg", 0.0);
        wing.fold_distance_m = r.optional_number("fold_distance_m", 0.106);
    }
    {
        SectionReader r(doc, base + ".beamsplitter", diags);
        auto& bs = wing.beamsplitter;
        bs.yaw_deg = r.optional_number("yaw_deg", 0.0);
        bs.tilt_deg = r.optional_number("tilt_deg", 0.0);
        bs.roll_deg = r.optional_number("roll_deg", 0.0);
        bs.axial_offset_m = r.optional_number("axial_offset_m", 0.0);
        bs.lateral_offset_m = r.optional_number("lateral_offset_m", 0.0);
        bs.height_offset_m = r.optional_number("height_offset_m", 0.0);
        bs.half_extent_m = r.optional_number("half_extent_m", 0.04);
        bs.reflectance = r.optional_number("reflectance", 0.5);
    }

    // Rail elements live in [wings.<side>.rail.<name>] sections; roles are
    // assigned by axial order after collection.
    const std::string rail_prefix = base + ".rail.";
    std::vector<LensConfig> lenses;
    std::vector<MonitorConfig> monitors;
    std::vector<std::string> rail_sections;
    for (const auto& [path, section] : doc.sections) {
        (void)section;
        if (path.rfind(rail_prefix, 0) == 0) rail_sections.push_back(path);
    }
    for (const auto& path : rail_sections) {
        SectionReader r(doc, path, diags);
        std::string name = path.substr(rail_prefix.size());
        std::string kind = r.require_string("kind");
        if (kind == "lens") {
            lenses.push_back(read_lens(r, name));
        } else if (kind == "monitor") {
            monitors.push_back(read_monitor(r, name));
        } else {
            diags.push_back({r.section_line(), path + ".kind",
                             "unknown element kind '" + kind + "' (lens or monitor)"});
        }
    }
    if (monitors.size() != 1) {
        diags.push_back({0, base,
                         "invariant violation: wing '" + side +
                             "' needs exactly one monitor, found " +
                             std::to_string(monitors.size())});
    }
    if (lenses.size() != 3) {
        diags.push_back({0, base,
                         "invariant violation: wing '" + side +
                             "' needs exactly three lenses (" + lens_keys_doc +
                             "), found " + std::to_string(lenses.size())});
    }
    if (monitors.size() == 1 && lenses.size() == 3) {
        std::sort(lenses.begin(), lenses.end(),
                  [](const LensConfig& a, const LensConfig& b) {
                      return a.axial_position_m < b.axial_position_m;
                  });
        wing.accommodation = lenses[0];
        wing.collimating = lenses[1];
        wing.minimization = lenses[2];
        wing.monitor = monitors[0];
    }
}

void check_finite(const std::string& path, double v, bool allow_inf,
                  std::vector<Diagnostic>& diags) {
    if (std::isnan(v) || (!allow_inf && std::isinf(v))) {
        diags.push_back({0, path, "value must be finite"});
    }
}

void validate_wing(const std::string& side, const WingConfig& w,
                   std::vector<Diagnostic>& diags) {
    const std::string base = "wings." + side;
    check_finite(base + ".rail_azimuth_deg", w.rail_azimuth_deg, false, diags);
    check_finite(base + ".cant_deg", w.cant_deg, false, diags);
    if (std::abs(w.rail_azimuth_deg) > 45.0) {
        diags.push_back({0, base + ".rail_azimuth_deg", "out of range [-45, 45] deg"});
    }
    if (std::abs(w.cant_deg) > 45.0) {
        diags.push_back({0, base + ".cant_deg", "out of range [-45, 45] deg"});
    }
    if (!(w.fold_distance_m > 0.0) || !std::isfinite(w.fold_distance_m)) {
        diags.push_back({0, base + ".fold_distance_m", "must be > 0"});
    }

    const auto& bs = w.beamsplitter;
    const std::pair<const char*, double> bs_angles[] = {
        {"yaw_deg", bs.yaw_deg}, {"tilt_deg", bs.tilt_deg}, {"roll_deg", bs.roll_deg}};
    for (const auto& [key, v] : bs_angles) {
        check_finite(base + ".beamsplitter." + key, v, false, diags);
        if (std::abs(v) > 45.0) {
            diags.push_back({0, base + ".beamsplitter." + key, "out of range [-45, 45] deg"});
        }
    }
    const std::pair<const char*, double> bs_offsets[] = {
        {"axial_offset_m", bs.axial_offset_m},
        {"lateral_offset_m", bs.lateral_offset_m},
        {"height_offset_m", bs.height_offset_m}};
    for (const auto& [key, v] : bs_offsets) {
        check_finite(base + ".beamsplitter." + key, v, false, diags);
    }
    if (!(bs.half_extent_m > 0.0) || !std::isfinite(bs.half_extent_m)) {
        diags.push_back({0, base + ".beamsplitter.half_extent_m", "must be > 0"});
    }
    if (!(bs.reflectance >= 0.0 && bs.reflectance <= 1.0)) {
        diags.push_back({0, base + ".beamsplitter.reflectance", "must be in [0, 1]"});
    }

    const LensConfig* lenses[3] = {&w.accommodation, &w.collimating, &w.minimization};
    for (const LensConfig* lens : lenses) {
        const std::string lp = base + ".rail." + lens->name;
        if (!std::isfinite(lens->power_diopters) ||
            std::abs(lens->power_diopters) > 1000.0) {
            diags.push_back({0, lp + ".power_diopters", "|P| must be finite and <= 1000 D"});
        }
        check_finite(lp + ".lateral_offset_m", lens->lateral_offset_m, false, diags);
        check_finite(lp + ".height_offset_m", lens->height_offset_m, false, diags);
        check_finite(lp + ".tilt_deg", lens->tilt_deg, false, diags);
        if (std::abs(lens->tilt_deg) > 45.0) {
            diags.push_back({0, lp + ".tilt_deg", "out of range [-45, 45] deg"});
        }
        if (!(lens->aperture_radius_m > 0.0)) {
            diags.push_back({0, lp + ".aperture_radius_m", "must be > 0"});
        }
    }
    check_finite(base + ".rail." + w.monitor.name + ".lateral_offset_m",
                 w.monitor.lateral_offset_m, false, diags);
    check_finite(base + ".rail." + w.monitor.name + ".height_offset_m",
                 w.monitor.height_offset_m, false, diags);
    if (!(w.monitor.pixel_pitch_m > 0.0)) {
        diags.push_back({0, base + ".rail." + w.monitor.name + ".pixel_pitch_m",
                         "must be > 0"});
    }

    // Strict outward ordering along the folded path.
    struct Station { const char* what; double a; };
    Station order[] = {{"fold point", w.fold_distance_m},
                       {"accommodation lens", w.accommodation.axial_position_m},
                       {"collimating lens", w.collimating.axial_position_m},
                       {"minimization lens", w.minimization.axial_position_m},
                       {"monitor", w.monitor.axial_position_m}};
    for (int i = 0; i < 4; ++i) {
        if (!(order[i].a < order[i + 1].a)) {
            diags.push_back(
                {0, base,
                 std::string("invariant violation: ") + order[i + 1].what +
                     " must sit strictly outward of the " + order[i].what + " (" +
                     format_number(order[i + 1].a) + " vs " + format_number(order[i].a) +
                     ")"});
        }
    }
}

}  // namespace

std::vector<Diagnostic> validate_bench_config(const BenchConfig& c) {
    std::vector<Diagnostic> diags;
    if (!(c.ipd_m >= min_ipd_m && c.ipd_m <= max_ipd_m)) {
        diags.push_back({0, "user.ipd_m",
                         "out of the supported human range [" + format_number(min_ipd_m) +
                             ", " + format_number(max_ipd_m) + "] m"});
    }
    const std::pair<const char*, double> distances[] = {
        {"stimulus.focal_distance_m", c.stimulus.focal_distance_m},
        {"stimulus.vergence_distance_m", c.stimulus.vergence_distance_m}};
    for (const auto& [key, v] : distances) {
        if (std::isnan(v) || v <= 0.0) {
            diags.push_back({0, key, "must be > 0 (inf allowed)"});
        }
    }
    if (!(c.eye.nodal_offset_m >= 0.0) || !std::isfinite(c.eye.nodal_offset_m)) {
        diags.push_back({0, "eye.nodal_offset_m", "must be >= 0"});
    }
    if (!(c.eye.pupil_offset_m >= 0.0) || !std::isfinite(c.eye.pupil_offset_m)) {
        diags.push_back({0, "eye.pupil_offset_m", "must be >= 0"});
    }
    if (!(c.eye.pupil_radius_m > 0.0)) {
        diags.push_back({0, "eye.pupil_radius_m", "must be > 0"});
    }
    check_finite("table.pitch_deg", c.table.pitch_deg, false, diags);
    check_finite("table.roll_deg", c.table.roll_deg, false, diags);
    if (std::abs(c.table.pitch_deg) > 45.0 || std::abs(c.table.roll_deg) > 45.0) {
        diags.push_back({0, "table", "pitch/roll out of range [-45, 45] deg"});
    }
    validate_wing("left", c.left, diags);
    validate_wing("right", c.right, diags);

    // The eye must sit inside the folded section of the path.
    for (const auto* w : {&c.left, &c.right}) {
        const std::string side = (w == &c.left) ? "left" : "right";
        if (!(c.eye.nodal_offset_m < w->fold_distance_m)) {
            diags.push_back({0, "eye.nodal_offset_m",
                             "must be smaller than wings." + side + ".fold_distance_m"});
        }
    }
    return diags;
}

BenchConfig parse_bench_config(const std::string& text) {
    KvParseResult parsed = parse_kv_document(text);
    std::vector<Diagnostic> diags = std::move(parsed.diagnostics);

    BenchConfig config;
    read_units(parsed.doc, diags);
    {
        SectionReader r(parsed.doc, "stimulus", diags);
        config.stimulus.focal_distance_m =
            r.optional_number("focal_distance_m", infinite_distance, true);
        config.stimulus.vergence_distance_m =
            r.optional_number("vergence_distance_m", infinite_distance, true);
    }
    {
        SectionReader r(parsed.doc, "user", diags);
        if (!r.section_exists()) {
            diags.push_back({0, "user", "missing required section"});
        } else {
            config.ipd_m = r.require_number("ipd_m");
        }
    }
    {
        SectionReader r(parsed.doc, "eye", diags);
        config.eye.nodal_offset_m = r.optional_number("nodal_offset_m", 0.006);
        config.eye.pupil_offset_m = r.optional_number("pupil_offset_m", 0.003);
        config.eye.pupil_radius_m = r.optional_number("pupil_radius_m", 0.004);
    }
    {
        SectionReader r(parsed.doc, "table", diags);
        config.table.pitch_deg = r.optional_number("pitch_deg", 0.0);
        config.table.roll_deg = r.optional_number("roll_deg", 0.0);
    }
    read_wing(parsed.doc, "left", config.left, diags);
    read_wing(parsed.doc, "right", config.right, diags);
    report_unknown_entries(parsed.doc, diags);

    if (diags.empty()) {
        auto post = validate_bench_config(config);
        diags.insert(diags.end(), post.begin(), post.end());
    }
    if (!diags.empty()) throw ConfigError(std::move(diags));
    return config;
}

namespace {

void emit(std::string& out, const char* key, double value) {
    out += key;
    out += " = ";
    out += format_number(value);
    out += "\n";
}

void emit_wing(std::string& out, const char* side, const WingConfig& w) {
    const std::string base = std::string("wings.") + side;
    out += "[" + base + "]\n";
    emit(out, "rail_azimuth_deg", w.rail_azimuth_deg);
    emit(out, "cant_deg", w.cant_deg);
    emit(out, "fold_distance_m", w.fold_distance_m);
    out += "\n[" + base + ".beamsplitter]\n";
    emit(out, "yaw_deg", w.beamsplitter.yaw_deg);
    emit(out, "tilt_deg", w.beamsplitter.tilt_deg);
    emit(out, "roll_deg", w.beamsplitter.roll_deg);
    emit(out, "axial_offset_m", w.beamsplitter.axial_offset_m);
    emit(out, "lateral_offset_m", w.beamsplitter.lateral_offset_m);
    emit(out, "height_offset_m", w.beamsplitter.height_offset_m);
    emit(out, "half_extent_m", w.beamsplitter.half_extent_m);
    emit(out, "reflectance", w.beamsplitter.reflectance);
    for (const LensConfig* lens : {&w.accommodation, &w.collimating, &w.minimization}) {
        out += "\n[" + base + ".rail." + lens->name + "]\n";
        out += "kind = lens\n";
        emit(out, "power_diopters", lens->power_diopters);
        emit(out, "axial_position_m", lens->axial_position_m);
        emit(out, "lateral_offset_m", lens->lateral_offset_m);
        emit(out, "height_offset_m", lens->height_offset_m);
        emit(out, "tilt_deg", lens->tilt_deg);
        emit(out, "aperture_radius_m", lens->aperture_radius_m);
    }
    out += "\n[" + base + ".rail." + w.monitor.name + "]\n";
    out += "kind = monitor\n";
    emit(out, "axial_position_m", w.monitor.axial_position_m);
    emit(out, "lateral_offset_m", w.monitor.lateral_offset_m);
    emit(out, "height_offset_m", w.monitor.height_offset_m);
    emit(out, "pixel_pitch_m", w.monitor.pixel_pitch_m);
    out += "\n";
}

}  // namespace

std::string serialize_bench_config(const BenchConfig& c) {
    std::string out;
    out.reserve(2048);
    out += "[units]\nlength = m\nangle = deg\npower = diopters\n\n";
    out += "[stimulus]\n";
    emit(out, "focal_distance_m", c.stimulus.focal_distance_m);
    emit(out, "vergence_distance_m", c.stimulus.vergence_distance_m);
    out += "\n[user]\n";
    emit(out, "ipd_m", c.ipd_m);
    out += "\n[eye]\n";
    emit(out, "nodal_offset_m", c.eye.nodal_offset_m);
    emit(out, "pupil_offset_m", c.eye.pupil_offset_m);
    emit(out, "pupil_radius_m", c.eye.pupil_radius_m);
    out += "\n[table]\n";
    emit(out, "pitch_deg", c.table.pitch_deg);
    emit(out, "roll_deg", c.table.roll_deg);
    out += "\n";
    emit_wing(out, "left", c.left);
    emit_wing(out, "right", c.right);
    if (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

std::string config_fingerprint(const BenchConfig& config) {
    const std::string text = serialize_bench_config(config);
    uint64_t hash = 14695981039346656037ull;
    for (unsigned char byte : text) {
        hash ^= byte;
        hash *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return std::string(buf);
}

}  // namespace haplo
