#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "haplo/svg.hpp"

namespace haplo {

namespace {

std::string f4(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string f9(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9f", v);
    return buf;
}

struct Mapper {
    double min_x = 0.0;
    double max_z = 0.0;
    double scale = 1200.0;  // pixels per meter, fixed
    double margin = 40.0;

    double px(const Vec3& p) const { return (p.x - min_x) * scale + margin; }
    double py(const Vec3& p) const { return (max_z - p.z) * scale + margin; }
};

struct Segment {
    Vec3 a;
    Vec3 b;
    const char* cls;
};

void line(std::string& out, const Mapper& map, const Vec3& a, const Vec3& b,
          const char* cls) {
    out += "<line x1=\"" + f4(map.px(a)) + "\" y1=\"" + f4(map.py(a)) + "\" x2=\"" +
           f4(map.px(b)) + "\" y2=\"" + f4(map.py(b)) + "\" class=\"" + cls + "\"/>\n";
}

void polyline(std::string& out, const Mapper& map, const std::vector<Vec3>& pts,
              const char* cls) {
    out += "<polyline points=\"";
    for (size_t i = 0; i < pts.size(); ++i) {
        if (i) out.push_back(' ');
        out += f4(map.px(pts[i])) + "," + f4(map.py(pts[i]));
    }
    out += "\" class=\"";
    out += cls;
    out += "\"/>\n";
}

// In-page (horizontal plane) direction perpendicular to an element axis.
Vec3 page_perp(const Vec3& up, const Vec3& axis) {
    const Vec3 d = up.cross(axis);
    const double n = d.norm();
    return n > 1e-12 ? d / n : Vec3{1.0, 0.0, 0.0};
}

}  // namespace

SvgScene render_svg(const Bench& bench, const RenderOptions& options) {
    SvgScene scene;

    struct WingDraw {
        const Wing* wing = nullptr;
        EyeModel eye{{0, 0, 0}, 0.0, 0.0, {0, 0, 1}};
        std::vector<FoldTrace> traces;  // chief, then two marginals
        double inward_deg = 0.0;
    };
    std::vector<WingDraw> wings;
    for (Side side : {Side::left, Side::right}) {
        WingDraw w;
        w.wing = &bench.wing(side);
        w.eye = design_eye(bench, side);
        const Vec3 lateral = w.wing->monitor.lateral_dir * options.marginal_offset_m;
        w.traces.push_back(trace_fold(*w.wing, w.eye));
        w.traces.push_back(trace_fold(*w.wing, w.eye, w.wing->monitor.crosshair + lateral));
        w.traces.push_back(trace_fold(*w.wing, w.eye, w.wing->monitor.crosshair - lateral));
        w.inward_deg = side == Side::left ? w.wing->rail_azimuth_deg
                                          : -w.wing->rail_azimuth_deg;
        wings.push_back(std::move(w));
    }

    // Everything drawn, for the viewport bounds.
    std::vector<Segment> segments;
    std::vector<Vec3> extents;
    for (const WingDraw& w : wings) {
        const Wing& wing = *w.wing;
        const Vec3 rail_end =
            wing.fold_point +
            wing.outward * (wing.monitor.axial_position - wing.fold_distance);
        segments.push_back({wing.fold_point, rail_end, "rail"});
        segments.push_back({wing.pivot, wing.fold_point, "gaze"});
        for (const WingLens& lens : wing.lenses) {
            const Vec3 d = page_perp(wing.up, lens.axis) * lens.aperture_radius;
            segments.push_back({lens.center - d, lens.center + d, "lens"});
        }
        const Vec3 bs = page_perp(wing.up, wing.beamsplitter.normal) *
                        wing.beamsplitter.half_extent;
        segments.push_back({wing.beamsplitter.point - bs, wing.beamsplitter.point + bs,
                            "beamsplitter"});
        const Vec3 panel = wing.monitor.lateral_dir * 0.04;
        segments.push_back({wing.monitor.crosshair - panel, wing.monitor.crosshair + panel,
                            "monitor"});
        for (const FoldTrace& t : w.traces) {
            for (const Vec3& p : t.points) extents.push_back(p);
        }
        // Marginal field rays are illustrative and may legitimately stop at
        // an aperture; only a failed chief ray is worth flagging.
        if (!w.traces[0].completed) scene.fold_warning = true;
        extents.push_back(w.eye.center_of_rotation);
    }
    for (const Segment& s : segments) {
        extents.push_back(s.a);
        extents.push_back(s.b);
    }

    Mapper map;
    double max_x = extents.front().x;
    double min_z = extents.front().z;
    map.min_x = extents.front().x;
    map.max_z = extents.front().z;
    for (const Vec3& p : extents) {
        map.min_x = std::min(map.min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_z = std::min(min_z, p.z);
        map.max_z = std::max(map.max_z, p.z);
    }
    const double width = (max_x - map.min_x) * map.scale + 2 * map.margin;
    const double height = (map.max_z - min_z) * map.scale + 2 * map.margin + 70.0;

    std::string& out = scene.xml;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f4(width) +
           "\" height=\"" + f4(height) + "\" viewBox=\"0 0 " + f4(width) + " " +
           f4(height) + "\">\n";
    out += "<style>\n"
           ".rail{stroke:#888;stroke-width:2;stroke-linecap:round;}\n"
           ".gaze{stroke:#bbb;stroke-width:1;stroke-dasharray:6 4;}\n"
           ".lens{stroke:#1f77b4;stroke-width:4;stroke-linecap:round;}\n"
           ".beamsplitter{stroke:#2ca02c;stroke-width:3;}\n"
           ".monitor{stroke:#111;stroke-width:5;}\n"
           ".ray{stroke:#d62728;stroke-width:1.2;fill:none;}\n"
           ".marginal{stroke:#ff9896;stroke-width:1;fill:none;}\n"
           ".eye{fill:none;stroke:#9467bd;stroke-width:2;}\n"
           ".warning{fill:#d62728;font:13px monospace;}\n"
           ".label{fill:#333;font:12px monospace;}\n"
           "</style>\n";

    for (const WingDraw& w : wings) {
        out += "<g id=\"wing-";
        out += side_name(w.wing->side);
        out += "\" class=\"wing\" data-inward-rotation-deg=\"" + f9(w.inward_deg) +
               "\">\n";
        const Wing& wing = *w.wing;
        const Vec3 rail_end =
            wing.fold_point +
            wing.outward * (wing.monitor.axial_position - wing.fold_distance);
        line(out, map, wing.fold_point, rail_end, "rail");
        line(out, map, wing.pivot, wing.fold_point, "gaze");
        for (const WingLens& lens : wing.lenses) {
            const Vec3 d = page_perp(wing.up, lens.axis) * lens.aperture_radius;
            line(out, map, lens.center - d, lens.center + d, "lens");
        }
        const Vec3 bs = page_perp(wing.up, wing.beamsplitter.normal) *
                        wing.beamsplitter.half_extent;
        line(out, map, wing.beamsplitter.point - bs, wing.beamsplitter.point + bs,
             "beamsplitter");
        const Vec3 panel = wing.monitor.lateral_dir * 0.04;
        line(out, map, wing.monitor.crosshair - panel, wing.monitor.crosshair + panel,
             "monitor");
        polyline(out, map, w.traces[0].points, "ray");
        polyline(out, map, w.traces[1].points, "marginal");
        polyline(out, map, w.traces[2].points, "marginal");
        out += "<circle cx=\"" + f4(map.px(w.eye.center_of_rotation)) + "\" cy=\"" +
               f4(map.py(w.eye.center_of_rotation)) + "\" r=\"" + f4(0.012 * map.scale) +
               "\" class=\"eye\"/>\n";
        out += "</g>\n";
    }

    double warning_y = height - 52.0;
    for (const WingDraw& w : wings) {
        const FoldTrace& chief = w.traces[0];
        if (chief.completed) continue;
        out += "<text x=\"" + f4(map.margin) + "\" y=\"" + f4(warning_y) +
               "\" class=\"warning\">";
        out += side_name(w.wing->side);
        out += " wing chief ray truncated: " + chief.failure + "</text>\n";
        warning_y += 16.0;
    }

    out += "<g id=\"legend\">\n";
    const struct {
        const char* color;
        const char* text;
    } legend[] = {{"#1f77b4", "lens"},
                  {"#2ca02c", "beamsplitter"},
                  {"#111111", "monitor"},
                  {"#d62728", "chief ray"},
                  {"#9467bd", "eye"}};
    double lx = map.margin;
    const double ly = height - 18.0;
    for (const auto& item : legend) {
        out += "<line x1=\"" + f4(lx) + "\" y1=\"" + f4(ly - 4.0) + "\" x2=\"" +
               f4(lx + 22.0) + "\" y2=\"" + f4(ly - 4.0) + "\" style=\"stroke:" +
               item.color + ";stroke-width:3\"/>\n";
        out += "<text x=\"" + f4(lx + 28.0) + "\" y=\"" + f4(ly) + "\" class=\"label\">" +
               item.text + "</text>\n";
        lx += 28.0 + 9.0 * static_cast<double>(std::string(item.text).size()) + 26.0;
    }
    out += "</g>\n";
    out += "</svg>\n";
    return scene;
}

}  // namespace haplo
