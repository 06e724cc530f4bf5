#include "haplo/dof.hpp"

namespace haplo {

const char* dof_unit_name(DofUnit unit) {
    switch (unit) {
        case DofUnit::meters: return "m";
        case DofUnit::degrees: return "deg";
        case DofUnit::diopters: return "D";
    }
    return "?";
}

namespace {

constexpr double meter_deviation = 0.02;
constexpr double degree_deviation = 5.0;
constexpr double diopter_deviation = 2.0;

double unit_scale(DofUnit unit) {
    switch (unit) {
        case DofUnit::meters: return 1e-3;
        case DofUnit::degrees: return 1.0;
        case DofUnit::diopters: return 0.1;
    }
    return 1.0;
}

double unit_deviation(DofUnit unit) {
    switch (unit) {
        case DofUnit::meters: return meter_deviation;
        case DofUnit::degrees: return degree_deviation;
        case DofUnit::diopters: return diopter_deviation;
    }
    return 1.0;
}

DofInfo make_dof(std::string path, DofUnit unit, int step, bool observable,
                 std::function<double&(BenchConfig&)> resolve) {
    DofInfo info;
    info.path = std::move(path);
    info.unit = unit;
    info.check_step = step;
    info.observable = observable;
    info.max_deviation = unit_deviation(unit);
    info.scale = unit_scale(unit);
    info.resolve = std::move(resolve);
    return info;
}

void add_wing_dofs(std::vector<DofInfo>& out, const std::string& side,
                   WingConfig BenchConfig::*wing) {
    auto path = [&side](const char* tail) { return "wings." + side + "." + tail; };
    auto field = [wing](double WingConfig::*member) {
        return [wing, member](BenchConfig& c) -> double& { return c.*wing.*member; };
    };
    auto bs = [wing](double BeamsplitterConfig::*member) {
        return [wing, member](BenchConfig& c) -> double& {
            return (c.*wing).beamsplitter.*member;
        };
    };
    auto lens = [wing](LensConfig WingConfig::*element, double LensConfig::*member) {
        return [wing, element, member](BenchConfig& c) -> double& {
            return c.*wing.*element.*member;
        };
    };
    auto mon = [wing](double MonitorConfig::*member) {
        return [wing, member](BenchConfig& c) -> double& {
            return (c.*wing).monitor.*member;
        };
    };
    const auto deg = DofUnit::degrees;
    const auto m = DofUnit::meters;
    const auto dpt = DofUnit::diopters;

    out.push_back(make_dof(path("rail_azimuth_deg"), deg, 5, true,
                           field(&WingConfig::rail_azimuth_deg)));
    out.push_back(make_dof(path("cant_deg"), deg, 1, true,
                           field(&WingConfig::cant_deg)));

    out.push_back(make_dof(path("beamsplitter.yaw_deg"), deg, 4, true,
                           bs(&BeamsplitterConfig::yaw_deg)));
    out.push_back(make_dof(path("beamsplitter.tilt_deg"), deg, 4, true,
                           bs(&BeamsplitterConfig::tilt_deg)));
    out.push_back(make_dof(path("beamsplitter.roll_deg"), deg, 4, false,
                           bs(&BeamsplitterConfig::roll_deg)));
    out.push_back(make_dof(path("beamsplitter.axial_offset_m"), m, 4, true,
                           bs(&BeamsplitterConfig::axial_offset_m)));
    out.push_back(make_dof(path("beamsplitter.lateral_offset_m"), m, 4, true,
                           bs(&BeamsplitterConfig::lateral_offset_m)));
    out.push_back(make_dof(path("beamsplitter.height_offset_m"), m, 4, true,
                           bs(&BeamsplitterConfig::height_offset_m)));

    struct LensRow {
        const char* name;
        LensConfig WingConfig::*element;
        int power_step;  // 0 for the accommodation lens (set per trial)
    };
    const LensRow rows[] = {
        {"accommodation", &WingConfig::accommodation, 0},
        {"collimating", &WingConfig::collimating, 3},
        {"minimization", &WingConfig::minimization, 3},
    };
    for (const auto& row : rows) {
        const std::string base = path(row.name) + ".";
        const bool powered = row.power_step != 0;
        out.push_back(make_dof(base + "power_diopters", dpt, row.power_step,
                               powered, lens(row.element, &LensConfig::power_diopters)));
        out.push_back(make_dof(base + "axial_position_m", m, row.power_step,
                               powered, lens(row.element, &LensConfig::axial_position_m)));
        out.push_back(make_dof(base + "lateral_offset_m", m, 2, true,
                               lens(row.element, &LensConfig::lateral_offset_m)));
        out.push_back(make_dof(base + "height_offset_m", m, 2, true,
                               lens(row.element, &LensConfig::height_offset_m)));
        out.push_back(make_dof(base + "tilt_deg", deg, 2, true,
                               lens(row.element, &LensConfig::tilt_deg)));
    }

    out.push_back(make_dof(path("monitor.axial_position_m"), m, 3, true,
                           mon(&MonitorConfig::axial_position_m)));
    out.push_back(make_dof(path("monitor.lateral_offset_m"), m, 2, true,
                           mon(&MonitorConfig::lateral_offset_m)));
    out.push_back(make_dof(path("monitor.height_offset_m"), m, 2, true,
                           mon(&MonitorConfig::height_offset_m)));
}

std::vector<DofInfo> build_registry() {
    std::vector<DofInfo> out;
    out.push_back(make_dof("table.pitch_deg", DofUnit::degrees, 1, true,
                           [](BenchConfig& c) -> double& { return c.table.pitch_deg; }));
    out.push_back(make_dof("table.roll_deg", DofUnit::degrees, 1, true,
                           [](BenchConfig& c) -> double& { return c.table.roll_deg; }));
    out.push_back(make_dof("ipd_m", DofUnit::meters, 5, true,
                           [](BenchConfig& c) -> double& { return c.ipd_m; }));
    add_wing_dofs(out, "left", &BenchConfig::left);
    add_wing_dofs(out, "right", &BenchConfig::right);
    return out;
}

}  // namespace

const std::vector<DofInfo>& dof_registry() {
    static const std::vector<DofInfo> registry = build_registry();
    return registry;
}

const DofInfo* find_dof(const std::string& path) {
    for (const DofInfo& dof : dof_registry()) {
        if (dof.path == path) return &dof;
    }
    return nullptr;
}

}  // namespace haplo
