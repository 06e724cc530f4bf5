#include <algorithm>
#include <cmath>
#include <thread>

#include "haplo/calibration.hpp"

namespace haplo {

namespace {

// splitmix64 finalizer; the counter chain below hashes (seed, trial, dof,
// draw) into one well-mixed 64-bit word per draw.
std::uint64_t fmix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double unit_open(std::uint64_t word) {
    // 53-bit mantissa, offset half a step: strictly inside (0, 1).
    return (static_cast<double>(word >> 11) + 0.5) * 0x1p-53;
}

}  // namespace

std::uint64_t RandomStream::word(std::uint64_t dof_index, std::uint64_t draw) const {
    std::uint64_t h = fmix(seed_ + 0x9e3779b97f4a7c15ULL);
    h = fmix(h ^ (trial_ + 0xbf58476d1ce4e5b9ULL));
    h = fmix(h ^ (dof_index + 0x94d049bb133111ebULL));
    h = fmix(h ^ (draw + 0x2545f4914f6cdd1dULL));
    return h;
}

double RandomStream::uniform_symmetric(std::uint64_t dof_index) const {
    return 2.0 * unit_open(word(dof_index, 0)) - 1.0;
}

double RandomStream::gaussian(std::uint64_t dof_index) const {
    const double u1 = unit_open(word(dof_index, 0));
    const double u2 = unit_open(word(dof_index, 1));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
}

PerturbationSpec parse_perturbation_spec(const std::string& text) {
    KvParseResult parsed = parse_kv_document(text);
    std::vector<Diagnostic> diags = std::move(parsed.diagnostics);
    PerturbationSpec spec;
    const KvSection* section = parsed.doc.find_section("perturbations");
    if (section != nullptr) {
        section->consumed = true;
        for (const auto& [key, value] : section->keys) {
            value.consumed = true;
            const std::string path = "perturbations." + key;
            if (find_dof(key) == nullptr) {
                diags.push_back({value.line, path, "unknown degree of freedom"});
                continue;
            }
            const std::string& token = value.text;
            const size_t open = token.find('(');
            const bool closed = !token.empty() && token.back() == ')';
            if (open == std::string::npos || !closed) {
                diags.push_back({value.line, path,
                                 "expected gaussian(sigma) or uniform(half_width)"});
                continue;
            }
            const std::string kind = token.substr(0, open);
            const auto magnitude = parse_number_token(
                token.substr(open + 1, token.size() - open - 2), false);
            if (kind != "gaussian" && kind != "uniform") {
                diags.push_back({value.line, path,
                                 "unknown distribution '" + kind + "'"});
                continue;
            }
            if (!magnitude.has_value()) {
                diags.push_back({value.line, path, "magnitude is not a number"});
                continue;
            }
            if (*magnitude < 0.0) {
                diags.push_back({value.line, path,
                                 "invariant violation: magnitude must be >= 0"});
                continue;
            }
            spec.entries.push_back({key, kind == "gaussian", *magnitude});
        }
    }
    report_unknown_entries(parsed.doc, diags);
    if (!diags.empty()) throw ConfigError(std::move(diags));
    return spec;
}

Bench apply_perturbation(const Bench& bench, const PerturbationSpec& spec,
                         const RandomStream& stream) {
    BenchConfig config = bench.config;
    const std::vector<DofInfo>& registry = dof_registry();
    for (const PerturbationEntry& entry : spec.entries) {
        const DofInfo* dof = find_dof(entry.dof_path);
        if (dof == nullptr) {
            throw std::invalid_argument("apply_perturbation: unknown degree of freedom " +
                                        entry.dof_path);
        }
        const auto index = static_cast<std::uint64_t>(dof - registry.data());
        const double draw = entry.gaussian
                                ? stream.gaussian(index) * entry.magnitude
                                : stream.uniform_symmetric(index) * entry.magnitude;
        dof_value(config, *dof) += draw;
    }
    try {
        return assemble_bench(config);
    } catch (const ConfigError& e) {
        throw PerturbationRejected(std::string("perturbation rejected: ") + e.what());
    }
}

namespace {

MetricStats stats_of(std::vector<double> values) {
    MetricStats out;
    const size_t k = values.size();
    if (k == 0) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(k);
    if (k > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.stddev = std::sqrt(ss / static_cast<double>(k - 1));
    }
    std::sort(values.begin(), values.end());
    auto percentile = [&values, k](double p) {
        const double h = p * static_cast<double>(k - 1);
        const size_t lo = static_cast<size_t>(h);
        const size_t hi = std::min(lo + 1, k - 1);
        const double frac = h - static_cast<double>(lo);
        return values[lo] + frac * (values[hi] - values[lo]);
    };
    out.p5 = percentile(0.05);
    out.p50 = percentile(0.50);
    out.p95 = percentile(0.95);
    return out;
}

}  // namespace

ToleranceStats monte_carlo_tolerance(const Bench& bench, const PerturbationSpec& spec,
                                     int n, std::uint64_t seed, int threads) {
    if (n < 1) throw std::invalid_argument("monte_carlo_tolerance: need n >= 1");
    const IntendedStimulus intended = intended_stimulus(bench);
    const EyeModel eye_left = design_eye(bench, Side::left);
    const EyeModel eye_right = design_eye(bench, Side::right);

    // Reported errors are deviations from the unperturbed bench's own
    // mismatch, so they measure only what the perturbations caused; an
    // all-zero-magnitude spec therefore yields exactly zero statistics,
    // free of the model's own last-ulp roundoff.
    MismatchMetrics baseline;
    try {
        baseline = stimulus_mismatch(simulate_stimulus(bench, eye_left, eye_right),
                                     intended);
    } catch (const FoldFailure& e) {
        throw EmptyStats(
            std::string("monte_carlo_tolerance: the unperturbed bench cannot "
                        "present its stimulus: ") + e.what());
    }

    enum class Outcome : char { ok, fold_failure, rejected };
    struct Trial {
        Outcome outcome = Outcome::ok;
        MismatchMetrics metrics;
    };
    std::vector<Trial> trials(static_cast<size_t>(n));

    auto run_range = [&](int begin, int end) {
        for (int t = begin; t < end; ++t) {
            Trial& trial = trials[static_cast<size_t>(t)];
            const RandomStream stream(seed, static_cast<std::uint64_t>(t));
            try {
                const Bench perturbed = apply_perturbation(bench, spec, stream);
                const PerceivedStimulus perceived =
                    simulate_stimulus(perturbed, eye_left, eye_right);
                const MismatchMetrics m = stimulus_mismatch(perceived, intended);
                trial.metrics.focal_error_diopters =
                    m.focal_error_diopters - baseline.focal_error_diopters;
                trial.metrics.vergence_error_deg =
                    m.vergence_error_deg - baseline.vergence_error_deg;
                trial.metrics.vertical_disparity_deg =
                    m.vertical_disparity_deg - baseline.vertical_disparity_deg;
                trial.metrics.lateral_image_shift_deg =
                    m.lateral_image_shift_deg - baseline.lateral_image_shift_deg;
            } catch (const PerturbationRejected&) {
                trial.outcome = Outcome::rejected;
            } catch (const FoldFailure&) {
                trial.outcome = Outcome::fold_failure;
            }
        }
    };

    const int worker_count = std::max(1, std::min(threads, n));
    if (worker_count == 1) {
        run_range(0, n);
    } else {
        std::vector<std::thread> workers;
        const int chunk = (n + worker_count - 1) / worker_count;
        for (int w = 0; w < worker_count; ++w) {
            const int begin = w * chunk;
            const int end = std::min(n, begin + chunk);
            if (begin >= end) break;
            workers.emplace_back(run_range, begin, end);
        }
        for (std::thread& worker : workers) worker.join();
    }

    ToleranceStats out;
    out.requested_trials = n;
    out.seed = seed;
    std::vector<double> focal, vergence, vertical, lateral;
    for (const Trial& trial : trials) {
        switch (trial.outcome) {
            case Outcome::rejected:
                ++out.rejected_draws;
                break;
            case Outcome::fold_failure:
                ++out.fold_failures;
                break;
            case Outcome::ok:
                focal.push_back(trial.metrics.focal_error_diopters);
                vergence.push_back(trial.metrics.vergence_error_deg);
                vertical.push_back(trial.metrics.vertical_disparity_deg);
                lateral.push_back(trial.metrics.lateral_image_shift_deg);
                break;
        }
    }
    out.trial_count = static_cast<int>(focal.size());
    if (out.trial_count == 0) {
        throw EmptyStats("monte_carlo_tolerance: no trial produced a viewable stimulus (" +
                         std::to_string(out.fold_failures) + " fold failures, " +
                         std::to_string(out.rejected_draws) + " rejected draws)");
    }
    out.focal_error_diopters = stats_of(std::move(focal));
    out.vergence_error_deg = stats_of(std::move(vergence));
    out.vertical_disparity_deg = stats_of(std::move(vertical));
    out.lateral_image_shift_deg = stats_of(std::move(lateral));
    return out;
}

}  // namespace haplo
