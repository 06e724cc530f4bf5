#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "haplo/calibration.hpp"
#include "haplo/cli.hpp"
#include "haplo/report.hpp"
#include "haplo/svg.hpp"

namespace haplo {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read file " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file " + path);
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("failed writing output file " + path);
}

std::string fmt(double v) { return format_number(v); }

struct Flags {
    std::string config;
    double ipd = 0.0;
    std::string focal;
    std::string vergence;
    int trials = 1000;
    unsigned long long seed = 0;
    int threads = 1;
    std::string adjust;
    std::string spec_path;
    std::string tolerances_path;
    std::string report_path;
    std::string out_path;
};

/// Carries an exit code up through command handlers.
struct CommandExit {
    int code;
    std::string message;
};

Bench load_bench(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception& e) {
        throw CommandExit{2, e.what()};
    }
    try {
        return assemble_bench(parse_bench_config(text));
    } catch (const ConfigError& e) {
        throw CommandExit{2, std::string("invalid configuration: ") + e.what()};
    }
}

double parse_distance_flag(const std::string& text, const char* flag) {
    const auto v = parse_number_token(text, true);
    if (!v.has_value() || std::isnan(*v) || *v <= 0.0) {
        throw CommandExit{2, std::string(flag) + " must be a positive distance in "
                                                 "meters or inf, got '" + text + "'"};
    }
    return *v;
}

JsonValue stats_json(const MetricStats& s) {
    JsonValue v = JsonValue::object();
    v.field("mean") = JsonValue::number(s.mean);
    v.field("stddev") = JsonValue::number(s.stddev);
    v.field("p5") = JsonValue::number(s.p5);
    v.field("p50") = JsonValue::number(s.p50);
    v.field("p95") = JsonValue::number(s.p95);
    return v;
}

JsonValue eye_json(const EyeStimulus& e) {
    JsonValue v = JsonValue::object();
    v.field("focal_demand_diopters") = JsonValue::number(e.focal_demand_diopters);
    JsonValue gaze = JsonValue::array();
    gaze.push_back(JsonValue::number(e.gaze_direction.x));
    gaze.push_back(JsonValue::number(e.gaze_direction.y));
    gaze.push_back(JsonValue::number(e.gaze_direction.z));
    v.field("gaze_direction") = gaze;
    v.field("image_center_offset_deg") = JsonValue::number(e.image_center_offset_deg);
    v.field("horizontal_offset_deg") = JsonValue::number(e.horizontal_offset_deg);
    v.field("vertical_offset_deg") = JsonValue::number(e.vertical_offset_deg);
    v.field("angular_magnification") = JsonValue::number(e.angular_magnification);
    v.field("vignetted") = JsonValue::boolean(e.vignetted);
    return v;
}

JsonValue mismatch_json(const MismatchMetrics& m) {
    JsonValue v = JsonValue::object();
    v.field("focal_error_diopters") = JsonValue::number(m.focal_error_diopters);
    v.field("vergence_error_deg") = JsonValue::number(m.vergence_error_deg);
    v.field("vertical_disparity_deg") = JsonValue::number(m.vertical_disparity_deg);
    v.field("lateral_image_shift_deg") = JsonValue::number(m.lateral_image_shift_deg);
    return v;
}

JsonValue check_json(const CheckResult& c) {
    JsonValue v = JsonValue::object();
    v.field("step") = JsonValue::integer(c.step);
    v.field("name") = JsonValue::string(c.name);
    v.field("pass") = JsonValue::boolean(c.pass);
    JsonValue residuals = JsonValue::object();
    JsonValue tolerances = JsonValue::object();
    for (size_t i = 0; i < c.labels.size(); ++i) {
        residuals.field(c.labels[i]) = JsonValue::number(c.residuals[i]);
        tolerances.field(c.labels[i]) = JsonValue::number(c.tolerances[i]);
    }
    v.field("residuals") = residuals;
    v.field("tolerances") = tolerances;
    JsonValue notes = JsonValue::array();
    for (const std::string& note : c.notes) notes.push_back(JsonValue::string(note));
    v.field("notes") = notes;
    return v;
}

int finish(const Flags& flags, ReportDocument& doc, int code) {
    doc.exit_code = code;
    doc.timestamp_utc = utc_timestamp();
    if (!flags.report_path.empty()) {
        try {
            write_report(doc, flags.report_path);
        } catch (const std::exception& e) {
            std::cout << "error: " << e.what() << "\n";
            return 4;
        }
    }
    return code;
}

Tolerances load_tolerances(const Flags& flags) {
    if (flags.tolerances_path.empty()) return {};
    try {
        return parse_tolerances(read_file(flags.tolerances_path));
    } catch (const std::exception& e) {
        throw CommandExit{2, std::string("invalid tolerances: ") + e.what()};
    }
}

int cmd_validate(const Flags& flags) {
    const Bench bench = load_bench(flags.config);
    std::cout << "configuration valid\n";
    std::cout << "fingerprint " << config_fingerprint(bench.config) << "\n";
    std::cout << "ipd " << fmt(bench.ipd) << " m, focal "
              << fmt(bench.config.stimulus.focal_distance_m) << " m, vergence "
              << fmt(bench.config.stimulus.vergence_distance_m) << " m\n";
    ReportDocument doc;
    doc.command = "validate";
    doc.config_fingerprint = config_fingerprint(bench.config);
    doc.results = JsonValue::object();
    doc.results.field("valid") = JsonValue::boolean(true);
    return finish(flags, doc, 0);
}

int cmd_simulate(const Flags& flags, const CLI::App* sub) {
    Bench bench = load_bench(flags.config);
    try {
        if (sub->count("--ipd") > 0 || sub->count("--vergence") > 0) {
            const double ipd = sub->count("--ipd") > 0 ? flags.ipd : bench.config.ipd_m;
            const double vergence =
                sub->count("--vergence") > 0
                    ? parse_distance_flag(flags.vergence, "--vergence")
                    : bench.config.stimulus.vergence_distance_m;
            try {
                bench = configure_for_user(bench, ipd, vergence);
            } catch (const std::invalid_argument& e) {
                throw CommandExit{2, e.what()};
            }
        }
        if (sub->count("--focal") > 0) {
            try {
                bench = configure_focal_distance(
                    bench, parse_distance_flag(flags.focal, "--focal"));
            } catch (const UnrealizableDistance& e) {
                throw CommandExit{2, std::string("--focal: ") + e.what()};
            }
        }
    } catch (const ConfigError& e) {
        throw CommandExit{2, std::string("invalid configuration: ") + e.what()};
    }

    ReportDocument doc;
    doc.command = "simulate";
    doc.config_fingerprint = config_fingerprint(bench.config);
    doc.results = JsonValue::object();

    const EyeModel left = design_eye(bench, Side::left);
    const EyeModel right = design_eye(bench, Side::right);
    try {
        const PerceivedStimulus perceived = simulate_stimulus(bench, left, right);
        const IntendedStimulus intended = intended_stimulus(bench);
        const MismatchMetrics mismatch = stimulus_mismatch(perceived, intended);
        for (Side side : {Side::left, Side::right}) {
            const EyeStimulus& eye = perceived.eye(side);
            std::cout << side_name(side) << " eye: focal demand "
                      << fmt(eye.focal_demand_diopters) << " D, image offset "
                      << fmt(eye.image_center_offset_deg) << " deg, magnification "
                      << fmt(eye.angular_magnification)
                      << (eye.vignetted ? ", vignetted" : "") << "\n";
        }
        std::cout << "mismatch: focal " << fmt(mismatch.focal_error_diopters)
                  << " D, vergence " << fmt(mismatch.vergence_error_deg)
                  << " deg, vertical " << fmt(mismatch.vertical_disparity_deg)
                  << " deg, lateral " << fmt(mismatch.lateral_image_shift_deg)
                  << " deg\n";
        doc.results.field("left") = eye_json(perceived.left);
        doc.results.field("right") = eye_json(perceived.right);
        doc.results.field("mismatch") = mismatch_json(mismatch);
        JsonValue intent = JsonValue::object();
        intent.field("focal_distance_m") = JsonValue::number(intended.focal_distance_m);
        intent.field("vergence_distance_m") =
            JsonValue::number(intended.vergence_distance_m);
        intent.field("ipd_m") = JsonValue::number(intended.ipd_m);
        doc.results.field("intended") = intent;
    } catch (const FoldFailure& e) {
        std::cout << "stimulus not presentable: " << e.what() << "\n";
        doc.results.field("fold_failure") = JsonValue::string(e.what());
        return finish(flags, doc, 1);
    }
    return finish(flags, doc, 0);
}

int cmd_verify(const Flags& flags, const CLI::App* sub) {
    const Bench bench = load_bench(flags.config);
    const Tolerances tol = load_tolerances(flags);
    const double user_ipd = sub->count("--ipd") > 0 ? flags.ipd : bench.config.ipd_m;
    CalibrationReport report;
    try {
        report = run_checklist(bench, user_ipd, tol);
    } catch (const std::invalid_argument& e) {
        throw CommandExit{2, e.what()};
    }
    for (const CheckResult& check : report.checks) {
        std::cout << "step " << check.step << " " << check.name << ": "
                  << (check.pass ? "PASS" : "FAIL") << "\n";
        if (!check.pass) {
            for (size_t i = 0; i < check.labels.size(); ++i) {
                if (std::abs(check.residuals[i]) <= check.tolerances[i]) continue;
                std::cout << "    " << check.labels[i] << " = " << fmt(check.residuals[i])
                          << " (tolerance " << fmt(check.tolerances[i]) << ")\n";
            }
        }
        for (const std::string& note : check.notes) {
            std::cout << "    note: " << note << "\n";
        }
    }
    std::cout << (report.overall_pass ? "calibration PASS" : "calibration FAIL") << "\n";

    ReportDocument doc;
    doc.command = "verify";
    doc.config_fingerprint = report.fingerprint;
    doc.results = JsonValue::object();
    doc.results.field("overall_pass") = JsonValue::boolean(report.overall_pass);
    doc.results.field("user_ipd_m") = JsonValue::number(report.user_ipd_m);
    JsonValue checks = JsonValue::array();
    for (const CheckResult& check : report.checks) checks.push_back(check_json(check));
    doc.results.field("checks") = checks;
    return finish(flags, doc, report.overall_pass ? 0 : 1);
}

int cmd_solve(const Flags& flags, const CLI::App* sub) {
    const Bench bench = load_bench(flags.config);
    const double user_ipd = sub->count("--ipd") > 0 ? flags.ipd : bench.config.ipd_m;
    std::vector<std::string> paths;
    std::stringstream ss(flags.adjust);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) paths.push_back(item);
    }
    SolveResult result;
    try {
        const AdjustableSet adjust = make_adjustable(paths, bench.config);
        result = solve_calibration(bench, user_ipd, adjust);
    } catch (const std::invalid_argument& e) {
        throw CommandExit{2, e.what()};
    }
    std::cout << (result.converged ? "converged" : "did not converge") << " after "
              << result.iterations << " iterations\n";
    std::cout << "residual norm " << fmt(result.residual_norms.front()) << " -> "
              << fmt(result.residual_norms.back()) << "\n";
    for (const std::string& dof : result.null_dofs) {
        std::cout << "null direction: " << dof << "\n";
    }
    for (const std::string& path : paths) {
        const DofInfo* dof = find_dof(path);
        std::cout << path << " = " << fmt(dof_value(result.bench.config, *dof)) << " "
                  << dof_unit_name(dof->unit) << "\n";
    }
    if (!flags.out_path.empty()) {
        try {
            write_file(flags.out_path, serialize_bench_config(result.bench.config) + "\n");
        } catch (const std::exception& e) {
            throw CommandExit{4, e.what()};
        }
    }

    ReportDocument doc;
    doc.command = "solve";
    doc.config_fingerprint = config_fingerprint(bench.config);
    doc.results = JsonValue::object();
    doc.results.field("converged") = JsonValue::boolean(result.converged);
    doc.results.field("iterations") = JsonValue::integer(result.iterations);
    doc.results.field("message") = JsonValue::string(result.message);
    doc.results.field("solved_fingerprint") =
        JsonValue::string(config_fingerprint(result.bench.config));
    JsonValue norms = JsonValue::array();
    for (double n : result.residual_norms) norms.push_back(JsonValue::number(n));
    doc.results.field("residual_norms") = norms;
    JsonValue nulls = JsonValue::array();
    for (const std::string& dof : result.null_dofs) {
        nulls.push_back(JsonValue::string(dof));
    }
    doc.results.field("null_dofs") = nulls;
    JsonValue adjusted = JsonValue::object();
    for (const std::string& path : paths) {
        adjusted.field(path) =
            JsonValue::number(dof_value(result.bench.config, *find_dof(path)));
    }
    doc.results.field("adjusted") = adjusted;
    return finish(flags, doc, result.converged ? 0 : 3);
}

int cmd_tolerance(const Flags& flags) {
    const Bench bench = load_bench(flags.config);
    PerturbationSpec spec;
    try {
        spec = parse_perturbation_spec(read_file(flags.spec_path));
    } catch (const std::exception& e) {
        throw CommandExit{2, std::string("invalid perturbation spec: ") + e.what()};
    }
    if (flags.trials < 1) throw CommandExit{2, "--trials must be at least 1"};
    if (flags.threads < 1) throw CommandExit{2, "--threads must be at least 1"};

    ReportDocument doc;
    doc.command = "tolerance";
    doc.config_fingerprint = config_fingerprint(bench.config);
    doc.results = JsonValue::object();
    ToleranceStats stats;
    try {
        stats = monte_carlo_tolerance(bench, spec, flags.trials,
                                      static_cast<std::uint64_t>(flags.seed),
                                      flags.threads);
    } catch (const EmptyStats& e) {
        std::cout << "error: " << e.what() << "\n";
        doc.results.field("empty_stats") = JsonValue::string(e.what());
        return finish(flags, doc, 4);
    }
    const struct {
        const char* name;
        const MetricStats* s;
    } rows[] = {{"focal_error_diopters", &stats.focal_error_diopters},
                {"vergence_error_deg", &stats.vergence_error_deg},
                {"vertical_disparity_deg", &stats.vertical_disparity_deg},
                {"lateral_image_shift_deg", &stats.lateral_image_shift_deg}};
    std::cout << "trials " << stats.trial_count << "/" << stats.requested_trials
              << " (fold failures " << stats.fold_failures << ", rejected draws "
              << stats.rejected_draws << "), seed " << stats.seed << "\n";
    for (const auto& row : rows) {
        std::cout << row.name << ": mean " << fmt(row.s->mean) << ", sd "
                  << fmt(row.s->stddev) << ", p5 " << fmt(row.s->p5) << ", p50 "
                  << fmt(row.s->p50) << ", p95 " << fmt(row.s->p95) << "\n";
        doc.results.field(row.name) = stats_json(*row.s);
    }
    doc.results.field("requested_trials") = JsonValue::integer(stats.requested_trials);
    doc.results.field("trial_count") = JsonValue::integer(stats.trial_count);
    doc.results.field("fold_failures") = JsonValue::integer(stats.fold_failures);
    doc.results.field("rejected_draws") = JsonValue::integer(stats.rejected_draws);
    doc.results.field("seed") = JsonValue::integer(static_cast<long long>(stats.seed));
    return finish(flags, doc, 0);
}

int cmd_render(const Flags& flags) {
    const Bench bench = load_bench(flags.config);
    const SvgScene scene = render_svg(bench);
    if (scene.fold_warning) {
        std::cout << "warning: a chief ray did not reach its eye; drawn truncated\n";
    }
    if (flags.out_path.empty()) {
        std::cout << scene.xml;
    } else {
        try {
            write_file(flags.out_path, scene.xml);
        } catch (const std::exception& e) {
            throw CommandExit{4, e.what()};
        }
        std::cout << "wrote " << flags.out_path << "\n";
    }
    ReportDocument doc;
    doc.command = "render";
    doc.config_fingerprint = config_fingerprint(bench.config);
    doc.results = JsonValue::object();
    doc.results.field("fold_warning") = JsonValue::boolean(scene.fold_warning);
    return finish(flags, doc, 0);
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"virtual two-wing haploscope bench: first-order optics, "
                 "calibration checks, tolerance analysis"};
    app.name("haplobench");
    app.require_subcommand(1);

    Flags flags;
    auto add_config = [&flags](CLI::App* sub) {
        sub->add_option("config", flags.config, "bench configuration file")->required();
    };

    CLI::App* validate = app.add_subcommand("validate", "parse and check a configuration");
    add_config(validate);
    validate->add_option("--report", flags.report_path, "write a JSON report");

    CLI::App* simulate = app.add_subcommand("simulate", "trace the perceived stimulus");
    add_config(simulate);
    simulate->add_option("--ipd", flags.ipd, "user interpupillary distance, m");
    simulate->add_option("--focal", flags.focal, "focal distance, m or inf");
    simulate->add_option("--vergence", flags.vergence, "vergence distance, m or inf");
    simulate->add_option("--report", flags.report_path, "write a JSON report");

    CLI::App* verify = app.add_subcommand("verify", "run the five calibration checks");
    add_config(verify);
    verify->add_option("--ipd", flags.ipd, "user interpupillary distance, m");
    verify->add_option("--tolerances", flags.tolerances_path, "tolerance override file");
    verify->add_option("--report", flags.report_path, "write a JSON report");

    CLI::App* solve = app.add_subcommand("solve", "auto-adjust selected degrees of freedom");
    add_config(solve);
    solve->add_option("--adjust", flags.adjust, "comma-separated DOF paths")->required();
    solve->add_option("--ipd", flags.ipd, "user interpupillary distance, m");
    solve->add_option("--report", flags.report_path, "write a JSON report");
    solve->add_option("--out", flags.out_path, "write the solved configuration");

    CLI::App* tolerance = app.add_subcommand("tolerance", "Monte Carlo tolerance study");
    add_config(tolerance);
    tolerance->add_option("--spec", flags.spec_path, "perturbation spec file")->required();
    tolerance->add_option("--trials", flags.trials, "number of trials");
    tolerance->add_option("--seed", flags.seed, "random seed");
    tolerance->add_option("--threads", flags.threads, "worker threads");
    tolerance->add_option("--report", flags.report_path, "write a JSON report");

    CLI::App* render = app.add_subcommand("render", "draw the bench as SVG");
    add_config(render);
    render->add_option("--out", flags.out_path, "output SVG file (default stdout)");
    render->add_option("--report", flags.report_path, "write a JSON report");

    std::vector<const char*> argv;
    argv.push_back("haplobench");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (validate->parsed()) return cmd_validate(flags);
        if (simulate->parsed()) return cmd_simulate(flags, simulate);
        if (verify->parsed()) return cmd_verify(flags, verify);
        if (solve->parsed()) return cmd_solve(flags, solve);
        if (tolerance->parsed()) return cmd_tolerance(flags);
        if (render->parsed()) return cmd_render(flags);
    } catch (const CommandExit& e) {
        std::cout << "error: " << e.message << "\n";
        return e.code;
    } catch (const std::exception& e) {
        std::cout << "internal error: " << e.what() << "\n";
        return 4;
    }
    return 4;
}

}  // namespace haplo
