#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coreg/gradcheck.hpp"

namespace coreg {

/// Sizes and tolerances of the finite-difference suite over every loss term.
struct GradSuiteConfig {
    std::size_t samples = 8;
    std::size_t labels = 4;
    std::size_t input_dim = 6;
    std::size_t hidden = 5;
    std::size_t feature_dim = 6;
    double eps = 1e-5;
    double tol = 1e-4;
    std::uint64_t seed = 1;
    /// Test hook: perturbs the analytic gradient of the named term.
    std::string corrupt;
};

struct GradTermResult {
    std::string term;
    GradCheckReport report;
};

/// Term names accepted by GradSuiteConfig::corrupt, in suite order.
const std::vector<std::string>& gradient_terms();

/// Checks selective_bce, multiview, coreg, combined and gcn_path on a random
/// instance. Throws ErrorKind::Config for zero sizes or an unknown corrupt term.
std::vector<GradTermResult> run_gradient_suite(const GradSuiteConfig& config);

}  // namespace coreg
