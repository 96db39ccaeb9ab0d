#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "coreg/data.hpp"
#include "coreg/matrix.hpp"

namespace coreg {

/// Entry (i, j) = 0.5 [P(L_i = 1 | L_j = 1) + P(L_i = -1 | L_j = -1)] over the
/// labeled samples. Off the diagonal, a conditional whose condition never occurs
/// counts as 0.5; the diagonal is 1.
/// Unlabeled samples are ignored. Throws ErrorKind::Contract when there are no
/// labeled samples.
Matrix dependency_matrix(const Dataset& dataset);
Matrix dependency_matrix(const LabelMatrix& labels);

/// Elementwise |2 (P_dep - 0.5)|. Diagonal is 1 and entries lie in [0, 1].
Matrix adjacency_from_dependency(const Matrix& dependency);

/// Label-by-label table: header row and first column hold label names,
/// entries printed with six decimals.
void write_correlation_map(std::ostream& out, const Matrix& adjacency, const std::vector<std::string>& label_names);
void export_correlation_map(const std::filesystem::path& path, const Matrix& adjacency,
                            const std::vector<std::string>& label_names);

}  // namespace coreg
