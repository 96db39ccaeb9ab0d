#include "coreg/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "coreg/error.hpp"

namespace coreg {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), 0x9e3779b9u};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Encoder make_encoder(const ModelSpec& spec, std::uint64_t seed) {
    Encoder e;
    e.layer_sizes = spec.layer_sizes;
    e.leaky_slope = spec.leaky_slope;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const std::size_t in = spec.layer_sizes[l];
        const std::size_t out = spec.layer_sizes[l + 1];
        e.layers.push_back({glorot_uniform(in, out, in, out, mix_seed(seed, l)), Matrix(1, out)});
    }
    return e;
}

ClassifierHead make_head(std::size_t label_count, std::size_t feature_dim, std::uint64_t seed) {
    const Matrix w = glorot_uniform(label_count, feature_dim, feature_dim, label_count, mix_seed(seed, 1000));
    ClassifierHead head{Matrix(label_count, feature_dim + 1)};
    for (std::size_t j = 0; j < label_count; ++j)
        for (std::size_t k = 0; k < feature_dim; ++k) head.weights(j, k) = w(j, k);
    return head;
}

void check_view_input(const Encoder& e, const Matrix& x) {
    if (x.cols() != e.input_dim()) {
        fail(ErrorKind::Dimension, "encode: input is " + x.shape() + ", expected " +
                                       std::to_string(e.input_dim()) + " columns");
    }
}

}  // namespace

Matrix glorot_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
                      std::uint64_t seed) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = dist(rng);
    return m;
}

TwoViewModel init_two_view(const ModelSpec& spec, std::uint64_t seed1, std::uint64_t seed2) {
    if (seed1 == seed2) fail(ErrorKind::Config, "init_two_view: the two views need different seeds");
    if (spec.layer_sizes.empty()) fail(ErrorKind::Config, "init_two_view: layer_sizes is empty");
    for (std::size_t s : spec.layer_sizes)
        if (s == 0) fail(ErrorKind::Config, "init_two_view: layer sizes must be positive");
    if (spec.label_count == 0) fail(ErrorKind::Config, "init_two_view: label_count must be positive");
    if (!(spec.leaky_slope >= 0.0)) fail(ErrorKind::Config, "init_two_view: leaky slope must be nonnegative");

    TwoViewModel m;
    m.encoders = {make_encoder(spec, seed1), make_encoder(spec, seed2)};
    const std::size_t d_feat = spec.layer_sizes.back();
    m.heads = {make_head(spec.label_count, d_feat, seed1), make_head(spec.label_count, d_feat, seed2)};
    for (std::size_t j = 0; j < spec.label_count; ++j) m.label_names.push_back("L" + std::to_string(j));
    return m;
}

Matrix encode(const Encoder& encoder, const Matrix& x) {
    check_view_input(encoder, x);
    Matrix h = x;
    for (std::size_t l = 0; l < encoder.layers.size(); ++l) {
        h = add_row_broadcast(matmul(h, encoder.layers[l].weight), encoder.layers[l].bias);
        if (l + 1 < encoder.layers.size()) h = leaky_relu(h, encoder.leaky_slope);
    }
    return h;
}

Matrix encode(const TwoViewModel& model, View view, const Matrix& x) {
    return encode(model.encoders[index(view)], x);
}

ClassifierHead refine_weights(const ClassifierHead& head, const GcnParams& gcn, const Matrix& adjacency) {
    const Matrix hidden = leaky_relu(matmul(matmul(adjacency, head.weights), gcn.h0), gcn.leaky_slope);
    return ClassifierHead{matmul(matmul(adjacency, hidden), gcn.h1)};
}

Matrix predict_probs(const ClassifierHead& head, const Matrix& features) {
    if (features.cols() + 1 != head.weights.cols()) {
        fail(ErrorKind::Dimension, "predict_probs: features " + features.shape() + " do not fit classifier " +
                                       head.weights.shape());
    }
    return sigmoid(matmul_nt(append_ones_column(features), head.weights));
}

Matrix predict_probs(const TwoViewModel& model, View view, const Matrix& features, bool use_gcn) {
    const ClassifierHead& head = model.heads[index(view)];
    if (!use_gcn) return predict_probs(head, features);
    if (!model.gcn_active || !model.gcn || !model.adjacency) {
        fail(ErrorKind::State, "predict_probs: GCN requested but the model has no active GCN");
    }
    return predict_probs(refine_weights(head, *model.gcn, *model.adjacency), features);
}

Matrix predict_from_inputs(const TwoViewModel& model, View view, const Matrix& x, bool use_gcn) {
    return predict_probs(model, view, encode(model, view, x), use_gcn);
}

GcnParams make_gcn(std::size_t width, GcnInit init, std::size_t hidden, double leaky_slope, std::uint64_t seed) {
    if (!(leaky_slope >= 0.0)) fail(ErrorKind::Config, "gcn: leaky slope must be nonnegative");
    GcnParams g;
    g.leaky_slope = leaky_slope;
    switch (init) {
        case GcnInit::Glorot: {
            const std::size_t h = hidden == 0 ? width : hidden;
            g.h0 = glorot_uniform(width, h, width, h, mix_seed(seed, 1));
            g.h1 = glorot_uniform(h, width, h, width, mix_seed(seed, 2));
            break;
        }
        case GcnInit::Identity:
            if (hidden != 0 && hidden != width) fail(ErrorKind::Config, "gcn: identity init needs hidden = d_feat + 1");
            g.h0 = Matrix::identity(width);
            g.h1 = Matrix::identity(width);
            break;
        case GcnInit::SignSplit: {
            if (hidden != 0 && hidden != 2 * width) {
                fail(ErrorKind::Config, "gcn: sign-split init needs hidden = 2 (d_feat + 1)");
            }
            g.h0 = Matrix(width, 2 * width);
            g.h1 = Matrix(2 * width, width);
            const double back = 1.0 / (1.0 + leaky_slope);
            for (std::size_t i = 0; i < width; ++i) {
                g.h0(i, i) = 1.0;
                g.h0(i, width + i) = -1.0;
                g.h1(i, i) = back;
                g.h1(width + i, i) = -back;
            }
            break;
        }
    }
    return g;
}

void attach_gcn(TwoViewModel& model, Matrix adjacency, GcnInit init, std::size_t hidden, std::uint64_t seed) {
    const std::size_t c = model.label_count();
    if (adjacency.rows() != c || adjacency.cols() != c) {
        fail(ErrorKind::Dimension, "attach_gcn: adjacency is " + adjacency.shape() + ", expected " +
                                       std::to_string(c) + "x" + std::to_string(c));
    }
    model.gcn = make_gcn(model.feature_dim() + 1, init, hidden, model.encoders[0].leaky_slope, seed);
    model.adjacency = std::move(adjacency);
    model.gcn_active = true;
}

// ---------------------------------------------------------------------------

std::vector<ParamRef> parameters(TwoViewModel& model, bool single_view) {
    std::vector<ParamRef> out;
    const std::size_t views = single_view ? 1 : 2;
    for (std::size_t v = 0; v < views; ++v) {
        const std::string prefix = "encoder" + std::to_string(v + 1);
        auto& layers = model.encoders[v].layers;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            out.push_back({prefix + ".w" + std::to_string(l), ParamGroup::Encoder, &layers[l].weight});
            out.push_back({prefix + ".b" + std::to_string(l), ParamGroup::Encoder, &layers[l].bias});
        }
    }
    for (std::size_t v = 0; v < views; ++v) {
        out.push_back({"head" + std::to_string(v + 1), ParamGroup::Classifier, &model.heads[v].weights});
    }
    if (model.gcn_active && model.gcn) {
        out.push_back({"gcn.h0", ParamGroup::Gcn, &model.gcn->h0});
        out.push_back({"gcn.h1", ParamGroup::Gcn, &model.gcn->h1});
    }
    return out;
}

ModelGraph::ModelGraph(Tape& tape, const TwoViewModel& model, bool single_view)
    : tape_(tape), model_(model), single_view_(single_view) {
    const std::size_t views = single_view ? 1 : 2;
    for (std::size_t v = 0; v < views; ++v) {
        for (const auto& layer : model.encoders[v].layers) {
            encoders_[v].weights.push_back(tape.parameter(layer.weight));
            params_.push_back(encoders_[v].weights.back());
            encoders_[v].biases.push_back(tape.parameter(layer.bias));
            params_.push_back(encoders_[v].biases.back());
        }
    }
    for (std::size_t v = 0; v < views; ++v) {
        heads_[v] = tape.parameter(model.heads[v].weights);
        params_.push_back(heads_[v]);
    }
    if (model.gcn_active && model.gcn && model.adjacency) {
        h0_ = tape.parameter(model.gcn->h0);
        h1_ = tape.parameter(model.gcn->h1);
        params_.push_back(h0_);
        params_.push_back(h1_);
        adjacency_ = tape.constant(*model.adjacency);
    }
}

Var ModelGraph::encode(View view, Var x) {
    const std::size_t v = index(view);
    if (single_view_ && v != 0) fail(ErrorKind::State, "single-view graph has no second view");
    const Encoder& e = model_.encoders[v];
    check_view_input(e, tape_.value(x));
    Var h = x;
    for (std::size_t l = 0; l < e.layers.size(); ++l) {
        h = tape_.add_row_broadcast(tape_.matmul(h, encoders_[v].weights[l]), encoders_[v].biases[l]);
        if (l + 1 < e.layers.size()) h = tape_.leaky_relu(h, e.leaky_slope);
    }
    return h;
}

Var ModelGraph::classifier(View view, bool use_gcn) {
    const std::size_t v = index(view);
    if (single_view_ && v != 0) fail(ErrorKind::State, "single-view graph has no second view");
    if (!use_gcn) return heads_[v];
    if (!model_.gcn_active || !model_.gcn || !model_.adjacency) {
        fail(ErrorKind::State, "classifier: GCN requested but the model has no active GCN");
    }
    if (!refined_[v]) {
        Var hidden = tape_.leaky_relu(tape_.matmul(tape_.matmul(adjacency_, heads_[v]), h0_), model_.gcn->leaky_slope);
        refined_[v] = tape_.matmul(tape_.matmul(adjacency_, hidden), h1_);
    }
    return *refined_[v];
}

Var ModelGraph::probs(View view, Var features, bool use_gcn) {
    Var w = classifier(view, use_gcn);
    return tape_.sigmoid(tape_.matmul_nt(tape_.append_ones_column(features), w));
}

std::vector<Matrix> ModelGraph::gradients() const {
    std::vector<Matrix> out;
    out.reserve(params_.size());
    for (Var p : params_) out.push_back(tape_.gradient(p));
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kMagic = "coreg-checkpoint";
constexpr int kVersion = 1;

void write_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
    out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    char buf[40];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
            if (j) out << ' ';
            out << buf;
        }
        out << '\n';
    }
}

[[noreturn]] void bad_checkpoint(const std::string& msg) { fail(ErrorKind::Data, "checkpoint: " + msg); }

template <typename T>
T read_value(std::istream& in, const std::string& key) {
    std::string k;
    T v{};
    if (!(in >> k) || k != key) bad_checkpoint("expected '" + key + "'");
    if (!(in >> v)) bad_checkpoint("bad value for '" + key + "'");
    return v;
}

double read_real(std::istream& in) {
    std::string tok;
    if (!(in >> tok)) bad_checkpoint("truncated matrix data");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || !std::isfinite(v)) bad_checkpoint("bad number '" + tok + "'");
    return v;
}

Matrix take(std::map<std::string, Matrix>& mats, const std::string& name, std::size_t rows, std::size_t cols) {
    auto it = mats.find(name);
    if (it == mats.end()) bad_checkpoint("missing matrix " + name);
    if (it->second.rows() != rows || it->second.cols() != cols) {
        bad_checkpoint("matrix " + name + " is " + it->second.shape() + ", expected " + std::to_string(rows) + "x" +
                       std::to_string(cols));
    }
    Matrix m = std::move(it->second);
    mats.erase(it);
    return m;
}

}  // namespace

void write_checkpoint(std::ostream& out, const TwoViewModel& model) {
    char buf[40];
    out << kMagic << ' ' << kVersion << '\n';
    out << "layer_sizes " << model.encoders[0].layer_sizes.size();
    for (std::size_t s : model.encoders[0].layer_sizes) out << ' ' << s;
    out << '\n';
    std::snprintf(buf, sizeof(buf), "%.17g", model.encoders[0].leaky_slope);
    out << "leaky_slope " << buf << '\n';
    out << "label_count " << model.label_count() << '\n';
    for (std::size_t j = 0; j < model.label_count(); ++j) {
        const std::string name = j < model.label_names.size() ? model.label_names[j] : "L" + std::to_string(j);
        out << "label " << name << '\n';
    }
    out << "gcn_active " << (model.gcn_active ? 1 : 0) << '\n';
    out << "has_gcn " << (model.gcn ? 1 : 0) << '\n';
    if (model.gcn) {
        std::snprintf(buf, sizeof(buf), "%.17g", model.gcn->leaky_slope);
        out << "gcn_leaky_slope " << buf << '\n';
    }
    out << "has_adjacency " << (model.adjacency ? 1 : 0) << '\n';
    for (std::size_t v = 0; v < 2; ++v) {
        const auto& layers = model.encoders[v].layers;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            write_matrix(out, "encoder" + std::to_string(v + 1) + ".w" + std::to_string(l), layers[l].weight);
            write_matrix(out, "encoder" + std::to_string(v + 1) + ".b" + std::to_string(l), layers[l].bias);
        }
    }
    write_matrix(out, "head1", model.heads[0].weights);
    write_matrix(out, "head2", model.heads[1].weights);
    if (model.gcn) {
        write_matrix(out, "gcn.h0", model.gcn->h0);
        write_matrix(out, "gcn.h1", model.gcn->h1);
    }
    if (model.adjacency) write_matrix(out, "adjacency", *model.adjacency);
    out << "end\n";
}

TwoViewModel read_checkpoint(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kMagic) bad_checkpoint("not a checkpoint file");
    if (version != kVersion) bad_checkpoint("unsupported version " + std::to_string(version));

    const auto n_layers = read_value<std::size_t>(in, "layer_sizes");
    if (n_layers == 0 || n_layers > 64) bad_checkpoint("bad layer count");
    std::vector<std::size_t> sizes(n_layers);
    for (auto& s : sizes)
        if (!(in >> s) || s == 0) bad_checkpoint("bad layer size");
    const double slope = read_value<double>(in, "leaky_slope");
    const auto c = read_value<std::size_t>(in, "label_count");
    std::vector<std::string> names;
    for (std::size_t j = 0; j < c; ++j) {
        std::string key;
        if (!(in >> key) || key != "label") bad_checkpoint("expected label name");
        std::string name;
        std::getline(in, name);
        if (!name.empty() && name.front() == ' ') name.erase(0, 1);
        names.push_back(name);
    }
    const bool gcn_active = read_value<int>(in, "gcn_active") != 0;
    const bool has_gcn = read_value<int>(in, "has_gcn") != 0;
    double gcn_slope = slope;
    if (has_gcn) gcn_slope = read_value<double>(in, "gcn_leaky_slope");
    const bool has_adj = read_value<int>(in, "has_adjacency") != 0;

    std::map<std::string, Matrix> mats;
    std::string key;
    while (in >> key && key != "end") {
        if (key != "matrix") bad_checkpoint("unexpected token '" + key + "'");
        std::string name;
        std::size_t rows = 0, cols = 0;
        if (!(in >> name >> rows >> cols)) bad_checkpoint("bad matrix header");
        if (rows * cols > (std::size_t{1} << 28)) bad_checkpoint("matrix " + name + " too large");
        Matrix m(rows, cols);
        for (double& v : m.data()) v = read_real(in);
        if (!mats.emplace(name, std::move(m)).second) bad_checkpoint("duplicate matrix " + name);
    }
    if (key != "end") bad_checkpoint("missing end marker");

    TwoViewModel model;
    model.label_names = names;
    const std::size_t d_feat = sizes.back();
    for (std::size_t v = 0; v < 2; ++v) {
        Encoder e;
        e.layer_sizes = sizes;
        e.leaky_slope = slope;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            const std::string p = "encoder" + std::to_string(v + 1);
            DenseLayer layer;
            layer.weight = take(mats, p + ".w" + std::to_string(l), sizes[l], sizes[l + 1]);
            layer.bias = take(mats, p + ".b" + std::to_string(l), 1, sizes[l + 1]);
            e.layers.push_back(std::move(layer));
        }
        model.encoders[v] = std::move(e);
    }
    model.heads[0].weights = take(mats, "head1", c, d_feat + 1);
    model.heads[1].weights = take(mats, "head2", c, d_feat + 1);
    if (has_gcn) {
        auto it = mats.find("gcn.h0");
        if (it == mats.end()) bad_checkpoint("missing matrix gcn.h0");
        const std::size_t hidden = it->second.cols();
        GcnParams g;
        g.h0 = take(mats, "gcn.h0", d_feat + 1, hidden);
        g.h1 = take(mats, "gcn.h1", hidden, d_feat + 1);
        g.leaky_slope = gcn_slope;
        model.gcn = std::move(g);
    }
    if (has_adj) model.adjacency = take(mats, "adjacency", c, c);
    if (!mats.empty()) bad_checkpoint("unexpected matrix " + mats.begin()->first);
    model.gcn_active = gcn_active;
    if (gcn_active && (!model.gcn || !model.adjacency)) bad_checkpoint("gcn_active without GCN parameters");
    return model;
}

void save_checkpoint(const std::filesystem::path& path, const TwoViewModel& model) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) fail(ErrorKind::Io, "cannot write " + tmp.string());
        write_checkpoint(out, model);
        if (!out) fail(ErrorKind::Io, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

TwoViewModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Data, "cannot open " + path.string());
    return read_checkpoint(in);
}

}  // namespace coreg
