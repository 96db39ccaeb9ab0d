#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "coreg/matrix.hpp"

namespace coreg {

struct GradCheckOptions {
    double eps = 1e-5;
    double tol = 1e-4;
    /// Upper bound on coordinates probed per parameter; 0 probes all of them.
    std::size_t max_coords_per_param = 0;
    std::uint64_t seed = 1;
    /// Denominator floor for the relative error, so coordinates whose true
    /// gradient is ~0 are judged on absolute error instead.
    double abs_floor = 1e-6;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t coords_checked = 0;
    bool passed = true;
    /// "param[r,c]" of the worst coordinate, empty if nothing was probed.
    std::string worst;
};

using ScalarFn = std::function<double(std::span<const Matrix>)>;

/// Compares `analytic` against central finite differences of `loss` at `params`.
/// Throws ErrorKind::Numerical if the loss is non-finite at any probed point.
GradCheckReport grad_check(const ScalarFn& loss, std::vector<Matrix> params,
                           std::span<const Matrix> analytic, const GradCheckOptions& options = {},
                           std::span<const std::string> names = {});

}  // namespace coreg
