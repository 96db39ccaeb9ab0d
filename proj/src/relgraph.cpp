#include "coreg/relgraph.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "coreg/error.hpp"

namespace coreg {

Matrix dependency_matrix(const LabelMatrix& labels) {
    const std::size_t c = labels.cols();
    // pos(i, j): samples with L_i = 1 and L_j = 1; neg likewise for -1.
    Matrix pos(c, c);
    Matrix neg(c, c);
    std::vector<double> pos_count(c, 0.0);
    std::vector<double> neg_count(c, 0.0);
    std::size_t used = 0;
    for (std::size_t r = 0; r < labels.rows(); ++r) {
        if (!labels.row_known(r)) continue;
        ++used;
        for (std::size_t j = 0; j < c; ++j) {
            const bool pj = labels(r, j) == Label::Present;
            (pj ? pos_count : neg_count)[j] += 1.0;
            for (std::size_t i = 0; i < c; ++i) {
                const bool pi = labels(r, i) == Label::Present;
                if (pi && pj) pos(i, j) += 1.0;
                if (!pi && !pj) neg(i, j) += 1.0;
            }
        }
    }
    if (used == 0) fail(ErrorKind::Contract, "dependency_matrix: no labeled samples");

    Matrix dep(c, c);
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            // A label always agrees with itself, including when one state never occurs.
            if (i == j) {
                dep(i, j) = 1.0;
                continue;
            }
            const double p1 = pos_count[j] > 0.0 ? pos(i, j) / pos_count[j] : 0.5;
            const double p0 = neg_count[j] > 0.0 ? neg(i, j) / neg_count[j] : 0.5;
            dep(i, j) = 0.5 * (p1 + p0);
        }
    }
    return dep;
}

Matrix dependency_matrix(const Dataset& dataset) { return dependency_matrix(dataset.all_labels()); }

Matrix adjacency_from_dependency(const Matrix& dependency) {
    if (dependency.rows() != dependency.cols()) {
        fail(ErrorKind::Dimension, "adjacency: dependency matrix must be square, got " + dependency.shape());
    }
    Matrix a(dependency.rows(), dependency.cols());
    for (std::size_t k = 0; k < a.size(); ++k) a.data()[k] = std::abs((dependency.data()[k] - 0.5) * 2.0);
    return a;
}

void write_correlation_map(std::ostream& out, const Matrix& adjacency, const std::vector<std::string>& label_names) {
    if (adjacency.rows() != label_names.size() || adjacency.cols() != label_names.size()) {
        fail(ErrorKind::Dimension, "correlation map: " + std::to_string(label_names.size()) + " names for a " +
                                       adjacency.shape() + " matrix");
    }
    // Top-left cell is empty so the rest of the header is exactly the label names.
    for (const auto& n : label_names) out << ',' << n;
    out << '\n';
    char buf[32];
    for (std::size_t i = 0; i < adjacency.rows(); ++i) {
        out << label_names[i];
        for (std::size_t j = 0; j < adjacency.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.6f", adjacency(i, j));
            out << ',' << buf;
        }
        out << '\n';
    }
}

void export_correlation_map(const std::filesystem::path& path, const Matrix& adjacency,
                            const std::vector<std::string>& label_names) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    write_correlation_map(out, adjacency, label_names);
    if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace coreg
