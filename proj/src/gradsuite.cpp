#include "coreg/gradsuite.hpp"

#include <algorithm>
#include <random>

#include "coreg/error.hpp"
#include "coreg/losses.hpp"
#include "coreg/model.hpp"

namespace coreg {

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, double lo, double hi, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(r, c);
    for (double& v : m.data()) v = u(rng);
    return m;
}

// Every label column gets both classes among the known rows so the balancing
// weights are non-trivial; the last quarter of rows is unlabeled.
LabelMatrix random_labels(std::size_t n, std::size_t c, std::mt19937_64& rng, bool with_unknown) {
    LabelMatrix l(n, c);
    const std::size_t known = with_unknown ? std::max<std::size_t>(2, n - n / 4) : n;
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            if (i >= known) {
                l(i, j) = Label::Unknown;
            } else if (i < 2) {
                l(i, j) = (i + j) % 2 == 0 ? Label::Present : Label::Absent;
            } else {
                l(i, j) = coin(rng) ? Label::Present : Label::Absent;
            }
        }
    }
    return l;
}

void corrupt_if(const GradSuiteConfig& config, const std::string& term, std::vector<Matrix>& grads) {
    if (config.corrupt != term) return;
    for (Matrix& g : grads) {
        if (g.empty()) continue;
        g.data()[0] = g.data()[0] * 1.5 + 0.1;
        return;
    }
}

std::vector<std::string> names_of(std::initializer_list<const char*> names) { return {names.begin(), names.end()}; }

std::vector<std::string> names_of(const std::vector<ParamRef>& refs) {
    std::vector<std::string> out;
    for (const auto& r : refs) out.push_back(r.name);
    return out;
}

GradCheckReport check_model_loss(TwoViewModel model, const Matrix& x, const LabelMatrix& labels,
                                 const LossOptions& options, const GradSuiteConfig& config, const std::string& term) {
    auto refs = parameters(model, options.single_view);
    std::vector<Matrix> values;
    for (const auto& r : refs) values.push_back(*r.value);
    std::vector<Matrix> grads = combined_loss_with_gradients(x, labels, model, options).gradients;
    corrupt_if(config, term, grads);

    auto loss = [&](std::span<const Matrix> params) {
        for (std::size_t p = 0; p < refs.size(); ++p) *refs[p].value = params[p];
        return combined_loss_with_gradients(x, labels, model, options).breakdown.total;
    };
    const auto names = names_of(refs);
    return grad_check(loss, values, grads, GradCheckOptions{config.eps, config.tol, 0, config.seed, 1e-6}, names);
}

}  // namespace

const std::vector<std::string>& gradient_terms() {
    static const std::vector<std::string> terms = {"selective_bce", "multiview", "coreg", "combined", "gcn_path"};
    return terms;
}

std::vector<GradTermResult> run_gradient_suite(const GradSuiteConfig& config) {
    if (config.samples == 0 || config.labels == 0 || config.input_dim == 0 || config.feature_dim == 0) {
        fail(ErrorKind::Config, "gradcheck: sizes must be positive");
    }
    const auto& terms = gradient_terms();
    if (!config.corrupt.empty() && std::find(terms.begin(), terms.end(), config.corrupt) == terms.end()) {
        fail(ErrorKind::Config, "gradcheck: unknown term '" + config.corrupt + "'");
    }
    std::mt19937_64 rng(config.seed);
    const std::size_t n = config.samples;
    const std::size_t c = config.labels;
    const GradCheckOptions opts{config.eps, config.tol, 0, config.seed, 1e-6};
    std::vector<GradTermResult> out;

    {
        const Matrix probs = random_matrix(n, c, 0.05, 0.95, rng);
        const LabelMatrix labels = random_labels(n, c, rng, false);
        const BalanceWeights w = balancing_weights(labels);
        std::vector<Matrix> g{selective_bce_gradient(probs, labels, w)};
        corrupt_if(config, "selective_bce", g);
        auto loss = [&](std::span<const Matrix> p) { return selective_bce(p[0], labels, w); };
        out.push_back({"selective_bce", grad_check(loss, {probs}, g, opts, names_of({"probs"}))});
    }
    {
        const std::size_t width = config.feature_dim + 1;
        const Matrix h1 = random_matrix(c, width, -1.0, 1.0, rng);
        const Matrix h2 = random_matrix(c, width, -1.0, 1.0, rng);
        auto [g1, g2] = multiview_loss_gradient(h1, h2);
        std::vector<Matrix> g{g1, g2};
        corrupt_if(config, "multiview", g);
        auto loss = [](std::span<const Matrix> p) { return multiview_loss(p[0], p[1]); };
        out.push_back({"multiview", grad_check(loss, {h1, h2}, g, opts, names_of({"head1", "head2"}))});
    }
    {
        const Matrix p1 = random_matrix(n, c, 0.05, 0.95, rng);
        const Matrix p2 = random_matrix(n, c, 0.05, 0.95, rng);
        auto [g1, g2] = coreg_loss_gradient(p1, p2);
        std::vector<Matrix> g{g1, g2};
        corrupt_if(config, "coreg", g);
        auto loss = [](std::span<const Matrix> p) { return coreg_loss(p[0], p[1]); };
        out.push_back({"coreg", grad_check(loss, {p1, p2}, g, opts, names_of({"probs1", "probs2"}))});
    }

    ModelSpec spec;
    spec.layer_sizes = {config.input_dim};
    if (config.hidden > 0) spec.layer_sizes.push_back(config.hidden);
    spec.layer_sizes.push_back(config.feature_dim);
    spec.label_count = c;
    TwoViewModel model = init_two_view(spec, config.seed * 2 + 1, config.seed * 2 + 2);
    // Nonzero biases so every parameter carries gradient signal.
    for (auto& head : model.heads) {
        for (std::size_t j = 0; j < c; ++j) head.weights(j, config.feature_dim) = random_matrix(1, 1, -0.5, 0.5, rng)(0, 0);
    }
    const Matrix x = random_matrix(n, config.input_dim, -1.5, 1.5, rng);
    const LabelMatrix labels = random_labels(n, c, rng, true);

    LossOptions combined;
    combined.lambda_mv = 4.0;
    combined.lambda_cr = 1.0;
    out.push_back({"combined", check_model_loss(model, x, labels, combined, config, "combined")});

    std::vector<std::string> names;
    for (std::size_t j = 0; j < c; ++j) names.push_back("l" + std::to_string(j));
    Matrix adjacency = random_matrix(c, c, 0.0, 1.0, rng);
    for (std::size_t i = 0; i < c; ++i) {
        adjacency(i, i) = 1.0;
        for (std::size_t j = 0; j < i; ++j) adjacency(i, j) = adjacency(j, i);
    }
    attach_gcn(model, adjacency, GcnInit::Glorot, 0, config.seed + 17);
    LossOptions refined = combined;
    refined.use_gcn = true;
    out.push_back({"gcn_path", check_model_loss(model, x, labels, refined, config, "gcn_path")});
    return out;
}

}  // namespace coreg
