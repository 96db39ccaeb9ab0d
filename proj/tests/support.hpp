#pragma once

#include <random>
#include <string>
#include <vector>

#include "coreg/data.hpp"
#include "coreg/error.hpp"
#include "coreg/matrix.hpp"

namespace testing {

inline coreg::Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0,
                                   double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    coreg::Matrix m(r, c);
    for (double& v : m.data()) v = u(rng);
    return m;
}

inline coreg::LabelMatrix labels_from(const std::vector<std::vector<int>>& rows) {
    coreg::LabelMatrix l(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            l(i, j) = rows[i][j] < 0 ? coreg::Label::Unknown : (rows[i][j] ? coreg::Label::Present : coreg::Label::Absent);
    return l;
}

/// n_labeled fully labeled rows followed by n_unlabeled unknown rows.
inline coreg::Dataset random_dataset(std::size_t n_labeled, std::size_t n_unlabeled, std::size_t d, std::size_t c,
                                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::bernoulli_distribution coin(0.5);
    std::vector<std::string> names;
    for (std::size_t j = 0; j < c; ++j) names.push_back("L" + std::to_string(j));
    coreg::Dataset ds(d, names);
    for (std::size_t i = 0; i < n_labeled + n_unlabeled; ++i) {
        coreg::Sample s;
        s.id = "s" + std::to_string(i);
        for (std::size_t k = 0; k < d; ++k) s.features.push_back(g(rng));
        for (std::size_t j = 0; j < c; ++j) {
            s.labels.push_back(i >= n_labeled ? coreg::Label::Unknown
                                              : (coin(rng) ? coreg::Label::Present : coreg::Label::Absent));
        }
        ds.add(std::move(s));
    }
    return ds;
}

template <class F>
coreg::ErrorKind error_kind_of(F&& f) {
    try {
        f();
    } catch (const coreg::Error& e) {
        return e.kind();
    }
    throw std::logic_error("expected coreg::Error");
}

}  // namespace testing
