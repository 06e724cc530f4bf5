#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "haplo/calibration.hpp"

namespace haplo {

namespace {

struct Problem {
    BenchConfig base;
    double user_ipd = 0.0;
    std::vector<const DofInfo*> dofs;
    std::vector<double> lower;  // normalized units
    std::vector<double> upper;

    std::optional<std::vector<double>> eval(const Eigen::VectorXd& x) const {
        BenchConfig config = base;
        for (size_t i = 0; i < dofs.size(); ++i) {
            dof_value(config, *dofs[i]) = x[static_cast<Eigen::Index>(i)] * dofs[i]->scale;
        }
        try {
            const Bench bench = assemble_bench(config);
            return residual_vector(bench, user_ipd);
        } catch (const ConfigError&) {
            return std::nullopt;
        }
    }

    void project(Eigen::VectorXd& x) const {
        for (size_t i = 0; i < dofs.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            x[k] = std::clamp(x[k], lower[i], upper[i]);
        }
    }
};

double norm_of(const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return std::sqrt(s);
}

}  // namespace

AdjustableSet make_adjustable(const std::vector<std::string>& paths,
                              const BenchConfig& around) {
    AdjustableSet set;
    for (const std::string& path : paths) {
        const DofInfo* dof = find_dof(path);
        if (dof == nullptr) {
            throw std::invalid_argument("make_adjustable: unknown degree of freedom " + path);
        }
        const double value = dof_value(around, *dof);
        set.dofs.push_back({path, value - dof->max_deviation, value + dof->max_deviation});
    }
    return set;
}

SolveResult solve_calibration(const Bench& bench, double user_ipd_m,
                              const AdjustableSet& adjust,
                              const SolveOptions& options) {
    if (adjust.dofs.empty()) {
        throw std::invalid_argument("solve_calibration: adjustable set is empty");
    }
    Problem problem;
    problem.base = bench.config;
    problem.user_ipd = user_ipd_m;
    const auto n = static_cast<Eigen::Index>(adjust.dofs.size());
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const AdjustableDof& a = adjust.dofs[static_cast<size_t>(i)];
        const DofInfo* dof = find_dof(a.path);
        if (dof == nullptr) {
            throw std::invalid_argument("solve_calibration: unknown degree of freedom " +
                                        a.path);
        }
        if (!std::isfinite(a.lower) || !std::isfinite(a.upper) || !(a.lower < a.upper)) {
            throw std::invalid_argument("solve_calibration: bounds for " + a.path +
                                        " must be finite with lower < upper");
        }
        problem.dofs.push_back(dof);
        problem.lower.push_back(a.lower / dof->scale);
        problem.upper.push_back(a.upper / dof->scale);
        x[i] = dof_value(bench.config, *dof) / dof->scale;
    }
    problem.project(x);

    SolveResult result;
    auto current = problem.eval(x);
    if (!current) {
        throw std::invalid_argument(
            "solve_calibration: starting configuration does not assemble");
    }
    double norm = norm_of(*current);
    if (!std::isfinite(norm)) {
        throw std::invalid_argument("solve_calibration: starting residual is not finite");
    }
    result.residual_norms.push_back(norm);

    const double fd_step = 1e-6;  // normalized units, central differences
    double lambda = 1e-3;
    Eigen::VectorXd best_x = x;
    std::vector<std::string> null_seen;

    while (norm >= options.tol && result.iterations < options.max_iters) {
        ++result.iterations;
        const auto m = static_cast<Eigen::Index>(current->size());
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, n);
        Eigen::VectorXd r0(m);
        for (Eigen::Index k = 0; k < m; ++k) r0[k] = (*current)[static_cast<size_t>(k)];
        for (Eigen::Index i = 0; i < n; ++i) {
            // DOFs the checklist cannot observe keep an exactly zero column;
            // differencing them would only measure roundoff noise and let
            // that noise masquerade as a usable gradient.
            if (!problem.dofs[static_cast<size_t>(i)]->observable) continue;
            Eigen::VectorXd xp = x, xm = x;
            xp[i] += fd_step;
            xm[i] -= fd_step;
            const auto rp = problem.eval(xp);
            const auto rm = problem.eval(xm);
            if (rp && rm) {
                for (Eigen::Index k = 0; k < m; ++k) {
                    jac(k, i) = ((*rp)[static_cast<size_t>(k)] -
                                 (*rm)[static_cast<size_t>(k)]) /
                                (2.0 * fd_step);
                }
            } else if (rp || rm) {
                const std::vector<double>& r1 = rp ? *rp : *rm;
                const double sign = rp ? 1.0 : -1.0;
                for (Eigen::Index k = 0; k < m; ++k) {
                    jac(k, i) = sign *
                                ((r1[static_cast<size_t>(k)]) -
                                 r0[k]) /
                                fd_step;
                }
            }  // both sides invalid: column stays zero and is reported below
        }

        double max_col = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) max_col = std::max(max_col, jac.col(i).norm());
        std::vector<Eigen::Index> active;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (jac.col(i).norm() <= 1e-12 * std::max(max_col, 1.0)) {
                const std::string& path = problem.dofs[static_cast<size_t>(i)]->path;
                if (std::find(null_seen.begin(), null_seen.end(), path) == null_seen.end()) {
                    null_seen.push_back(path);
                }
            } else {
                active.push_back(i);
            }
        }
        if (active.empty()) {
            result.message = "local Jacobian is rank deficient in every direction";
            break;
        }

        Eigen::MatrixXd ja(m, static_cast<Eigen::Index>(active.size()));
        for (size_t i = 0; i < active.size(); ++i) ja.col(static_cast<Eigen::Index>(i)) = jac.col(active[i]);
        const Eigen::MatrixXd jtj = ja.transpose() * ja;
        const Eigen::VectorXd jtr = ja.transpose() * r0;

        bool accepted = false;
        while (!accepted && lambda < 1e14) {
            Eigen::MatrixXd damped = jtj;
            for (Eigen::Index i = 0; i < damped.rows(); ++i) damped(i, i) += lambda;
            const Eigen::VectorXd delta = damped.ldlt().solve(-jtr);
            Eigen::VectorXd trial = x;
            for (size_t i = 0; i < active.size(); ++i) {
                trial[active[i]] += delta[static_cast<Eigen::Index>(i)];
            }
            problem.project(trial);
            const auto rt = problem.eval(trial);
            if (rt) {
                const double trial_norm = norm_of(*rt);
                if (trial_norm <= norm) {
                    x = trial;
                    current = rt;
                    norm = trial_norm;
                    best_x = x;
                    lambda = std::max(lambda / 3.0, 1e-12);
                    accepted = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        result.residual_norms.push_back(norm);
        if (!accepted) {
            result.message = "no norm-decreasing step found";
            break;
        }
    }

    result.converged = norm < options.tol;
    result.null_dofs = std::move(null_seen);
    if (result.converged && result.message.empty()) result.message = "converged";
    if (!result.converged && result.message.empty()) {
        result.message = "iteration limit reached";
    }
    BenchConfig final_config = problem.base;
    for (size_t i = 0; i < problem.dofs.size(); ++i) {
        dof_value(final_config, *problem.dofs[i]) =
            best_x[static_cast<Eigen::Index>(i)] * problem.dofs[i]->scale;
    }
    result.bench = assemble_bench(final_config);
    return result;
}

}  // namespace haplo
