#include "coreg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "coreg/error.hpp"

namespace coreg {

namespace {

double evaluate(const ScalarFn& loss, std::span<const Matrix> params) {
    const double v = loss(params);
    if (!std::isfinite(v)) fail(ErrorKind::Numerical, "grad_check: loss is not finite");
    return v;
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& loss, std::vector<Matrix> params, std::span<const Matrix> analytic,
                           const GradCheckOptions& options, std::span<const std::string> names) {
    if (!(options.eps > 0.0)) fail(ErrorKind::Config, "grad_check: eps must be positive");
    if (analytic.size() != params.size()) fail(ErrorKind::Contract, "grad_check: one gradient per parameter");
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!analytic[p].same_shape(params[p])) {
            fail(ErrorKind::Dimension, "grad_check: gradient " + analytic[p].shape() + " vs parameter " +
                                           params[p].shape());
        }
    }
    evaluate(loss, params);

    std::mt19937_64 rng(options.seed);
    GradCheckReport report;
    for (std::size_t p = 0; p < params.size(); ++p) {
        std::vector<std::size_t> coords(params[p].size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (options.max_coords_per_param != 0 && coords.size() > options.max_coords_per_param) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(options.max_coords_per_param);
            std::sort(coords.begin(), coords.end());
        }
        for (std::size_t idx : coords) {
            double& x = params[p].data()[idx];
            const double saved = x;
            x = saved + options.eps;
            const double up = evaluate(loss, params);
            x = saved - options.eps;
            const double down = evaluate(loss, params);
            x = saved;

            const double numeric = (up - down) / (2.0 * options.eps);
            const double exact = analytic[p].data()[idx];
            const double denom = std::max({std::abs(numeric), std::abs(exact), options.abs_floor});
            const double rel = std::abs(numeric - exact) / denom;
            ++report.coords_checked;
            if (report.worst.empty() || rel > report.max_rel_error) {
                report.max_rel_error = rel;
                const std::string name = p < names.size() ? names[p] : "param" + std::to_string(p);
                const std::size_t cols = params[p].cols();
                report.worst = name + "[" + std::to_string(idx / cols) + "," + std::to_string(idx % cols) + "]";
            }
        }
    }
    report.passed = report.max_rel_error < options.tol;
    return report;
}

}  // namespace coreg
