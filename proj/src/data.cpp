#include "coreg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "coreg/error.hpp"

namespace coreg {

bool Sample::labeled() const noexcept {
    return std::none_of(labels.begin(), labels.end(), [](Label l) { return l == Label::Unknown; });
}

Dataset::Dataset(std::size_t feature_dim, std::vector<std::string> label_names)
    : feature_dim_(feature_dim), label_names_(std::move(label_names)) {}

void Dataset::add(Sample sample) {
    if (sample.features.size() != feature_dim_) {
        fail(ErrorKind::Data, "sample '" + sample.id + "' has " + std::to_string(sample.features.size()) +
                                  " features, expected " + std::to_string(feature_dim_));
    }
    if (sample.labels.size() != label_count()) {
        fail(ErrorKind::Data, "sample '" + sample.id + "' has " + std::to_string(sample.labels.size()) +
                                  " labels, expected " + std::to_string(label_count()));
    }
    const auto unknown = std::count(sample.labels.begin(), sample.labels.end(), Label::Unknown);
    if (unknown != 0 && static_cast<std::size_t>(unknown) != sample.labels.size()) {
        fail(ErrorKind::Data, "sample '" + sample.id + "' is partially labeled");
    }
    for (double v : sample.features) {
        if (!std::isfinite(v)) fail(ErrorKind::Data, "sample '" + sample.id + "' has a non-finite feature");
    }
    samples_.push_back(std::move(sample));
}

std::vector<std::size_t> Dataset::labeled_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples_.size(); ++i)
        if (samples_[i].labeled()) out.push_back(i);
    return out;
}

std::vector<std::size_t> Dataset::unlabeled_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples_.size(); ++i)
        if (!samples_[i].labeled()) out.push_back(i);
    return out;
}

std::size_t Dataset::labeled_count() const {
    return static_cast<std::size_t>(
        std::count_if(samples_.begin(), samples_.end(), [](const Sample& s) { return s.labeled(); }));
}

Matrix Dataset::features(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), feature_dim_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto& f = samples_.at(indices[i]).features;
        std::copy(f.begin(), f.end(), out.row(i).begin());
    }
    return out;
}

Matrix Dataset::all_features() const {
    std::vector<std::size_t> idx(samples_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return features(idx);
}

LabelMatrix Dataset::labels(std::span<const std::size_t> indices) const {
    LabelMatrix out(indices.size(), label_count());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto& l = samples_.at(indices[i]).labels;
        for (std::size_t j = 0; j < l.size(); ++j) out(i, j) = l[j];
    }
    return out;
}

LabelMatrix Dataset::all_labels() const {
    std::vector<std::size_t> idx(samples_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return labels(idx);
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out(feature_dim_, label_names_);
    out.samples_.reserve(indices.size());
    for (std::size_t i : indices) out.samples_.push_back(samples_.at(i));
    return out;
}

Dataset Dataset::labeled_only() const {
    const auto idx = labeled_indices();
    return subset(idx);
}

bool Dataset::operator==(const Dataset& other) const {
    if (feature_dim_ != other.feature_dim_ || label_names_ != other.label_names_) return false;
    if (samples_.size() != other.samples_.size()) return false;
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const Sample& a = samples_[i];
        const Sample& b = other.samples_[i];
        if (a.id != b.id || a.features != b.features || a.labels != b.labels) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

constexpr std::string_view kLabelPrefix = "label:";

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    // getline drops a trailing empty cell
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string data_error_at(std::size_t line_no, const std::string& msg) {
    return "row " + std::to_string(line_no) + ": " + msg;
}

double parse_real(const std::string& cell, std::size_t line_no) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
        fail(ErrorKind::Data, data_error_at(line_no, "non-numeric feature '" + cell + "'"));
    }
    return v;
}

void append_real(std::string& out, double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

}  // namespace

Dataset read_csv(std::istream& in, const CsvSchema& schema) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::Data, "csv: missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_row(line);
    if (header.empty() || header[0] != "id") fail(ErrorKind::Data, "csv: header must start with 'id'");

    std::size_t d = 0;
    while (1 + d < header.size() && header[1 + d] == "f" + std::to_string(d)) ++d;
    std::vector<std::string> names;
    for (std::size_t c = 1 + d; c < header.size(); ++c) {
        if (header[c].rfind(kLabelPrefix, 0) != 0) {
            fail(ErrorKind::Data, "csv: unexpected header column '" + header[c] + "'");
        }
        names.push_back(header[c].substr(kLabelPrefix.size()));
    }
    if (schema.feature_dim && *schema.feature_dim != d) {
        fail(ErrorKind::Data, "csv: expected " + std::to_string(*schema.feature_dim) + " feature columns, found " +
                                  std::to_string(d));
    }
    if (schema.label_count && *schema.label_count != names.size()) {
        fail(ErrorKind::Data, "csv: expected " + std::to_string(*schema.label_count) + " label columns, found " +
                                  std::to_string(names.size()));
    }

    Dataset out(d, names);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_row(line);
        if (cells.size() != header.size()) {
            fail(ErrorKind::Data, data_error_at(line_no, "expected " + std::to_string(header.size()) +
                                                             " fields, found " + std::to_string(cells.size())));
        }
        Sample s;
        s.id = cells[0];
        s.features.reserve(d);
        for (std::size_t j = 0; j < d; ++j) s.features.push_back(parse_real(cells[1 + j], line_no));
        s.labels.reserve(names.size());
        for (std::size_t j = 0; j < names.size(); ++j) {
            const std::string& cell = cells[1 + d + j];
            if (cell.empty()) {
                s.labels.push_back(Label::Unknown);
            } else if (cell == "1") {
                s.labels.push_back(Label::Present);
            } else if (cell == "0") {
                s.labels.push_back(Label::Absent);
            } else {
                fail(ErrorKind::Data, data_error_at(line_no, "label value '" + cell + "' is not one of '', '0', '1'"));
            }
        }
        try {
            out.add(std::move(s));
        } catch (const Error& e) {
            fail(ErrorKind::Data, data_error_at(line_no, e.what()));
        }
    }
    return out;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Data, "cannot open " + path.string());
    try {
        return read_csv(in, schema);
    } catch (const Error& e) {
        fail(e.kind(), path.string() + ": " + e.what());
    }
}

void write_csv(std::ostream& out, const Dataset& dataset) {
    std::string line = "id";
    for (std::size_t j = 0; j < dataset.feature_dim(); ++j) line += ",f" + std::to_string(j);
    for (const auto& name : dataset.label_names()) line += "," + std::string(kLabelPrefix) + name;
    out << line << '\n';
    for (const Sample& s : dataset.samples()) {
        line = s.id;
        for (double v : s.features) {
            line += ',';
            append_real(line, v);
        }
        for (Label l : s.labels) {
            line += ',';
            if (l == Label::Present) line += '1';
            if (l == Label::Absent) line += '0';
        }
        out << line << '\n';
    }
}

void save_csv(const std::filesystem::path& path, const Dataset& dataset) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    write_csv(out, dataset);
    if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

std::vector<double> random_unit(std::size_t k, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> v(k);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (double& x : v) {
            x = normal(rng);
            norm += x * x;
        }
        norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (double& x : v) x /= norm;
    return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Distinct streams derived from one user seed.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

void validate(const SynthSpec& spec) {
    if (spec.latent_dim == 0) fail(ErrorKind::Config, "synth: latent_dim must be positive");
    if (spec.label_count == 0) fail(ErrorKind::Config, "synth: label_count must be positive");
    if (spec.feature_dim == 0) fail(ErrorKind::Config, "synth: feature_dim must be positive");
    if (!(spec.noise_std >= 0.0) || !std::isfinite(spec.noise_std)) {
        fail(ErrorKind::Config, "synth: noise_std must be finite and nonnegative");
    }
    if (spec.n_labeled == 0) fail(ErrorKind::Config, "synth: n_labeled must be positive");
    if (!(spec.max_angle >= 0.0 && spec.max_angle <= 3.141592653589793)) {
        fail(ErrorKind::Config, "synth: max_angle must lie in [0, pi]");
    }
    if (!spec.label_directions.empty()) {
        if (spec.label_directions.size() != spec.label_count) {
            fail(ErrorKind::Config, "synth: need one label direction per label");
        }
        for (std::size_t j = 0; j < spec.label_directions.size(); ++j) {
            const auto& u = spec.label_directions[j];
            if (u.size() != spec.latent_dim) {
                fail(ErrorKind::Config, "synth: label direction " + std::to_string(j) + " has wrong length");
            }
            if (std::abs(std::sqrt(dot(u, u)) - 1.0) > 1e-9) {
                fail(ErrorKind::Config, "synth: label direction " + std::to_string(j) + " is not unit norm");
            }
        }
    }
}

std::vector<std::vector<double>> label_directions(const SynthSpec& spec) {
    validate(spec);
    if (!spec.label_directions.empty()) return spec.label_directions;
    std::mt19937_64 rng(stream_seed(spec.mixing_seed, 1));
    std::vector<std::vector<double>> dirs;
    if (spec.direction_mode == DirectionMode::Random) {
        for (std::size_t j = 0; j < spec.label_count; ++j) dirs.push_back(random_unit(spec.latent_dim, rng));
        return dirs;
    }
    // Every direction sits at angle max_angle/2 from a shared center, so any
    // pair is at most max_angle apart.
    const auto center = random_unit(spec.latent_dim, rng);
    const double half = spec.max_angle / 2.0;
    for (std::size_t j = 0; j < spec.label_count; ++j) {
        std::vector<double> r;
        double norm = 0.0;
        do {
            r = random_unit(spec.latent_dim, rng);
            const double proj = dot(r, center);
            for (std::size_t i = 0; i < r.size(); ++i) r[i] -= proj * center[i];
            norm = std::sqrt(dot(r, r));
        } while (norm < 1e-6 && spec.latent_dim > 1);
        std::vector<double> u(spec.latent_dim);
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double ri = norm < 1e-6 ? 0.0 : r[i] / norm;
            u[i] = std::cos(half) * center[i] + std::sin(half) * ri;
        }
        const double un = std::sqrt(dot(u, u));
        for (double& x : u) x /= un;
        dirs.push_back(std::move(u));
    }
    return dirs;
}

Matrix mixing_matrix(const SynthSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(stream_seed(spec.mixing_seed, 2));
    Matrix a(spec.feature_dim, spec.latent_dim);
    for (std::size_t i = 0; i < spec.feature_dim; ++i) {
        const auto r = random_unit(spec.latent_dim, rng);
        std::copy(r.begin(), r.end(), a.row(i).begin());
    }
    return a;
}

SynthData generate_synthetic(const SynthSpec& spec) {
    validate(spec);
    const auto dirs = label_directions(spec);
    const Matrix a = mixing_matrix(spec);

    std::vector<std::string> names;
    for (std::size_t j = 0; j < spec.label_count; ++j) names.push_back("L" + std::to_string(j));

    std::mt19937_64 rng(stream_seed(spec.seed, 3));
    std::normal_distribution<double> normal(0.0, 1.0);

    auto draw = [&](const std::string& id, bool keep_labels) {
        std::vector<double> z(spec.latent_dim);
        for (double& v : z) v = normal(rng);
        Sample s;
        s.id = id;
        s.labels.resize(spec.label_count);
        for (std::size_t j = 0; j < spec.label_count; ++j) {
            s.labels[j] = !keep_labels ? Label::Unknown : dot(dirs[j], z) > 0.0 ? Label::Present : Label::Absent;
        }
        s.features.resize(spec.feature_dim);
        for (std::size_t i = 0; i < spec.feature_dim; ++i) {
            s.features[i] = std::tanh(dot(a.row(i), z));
        }
        for (std::size_t i = 0; i < spec.feature_dim; ++i) s.features[i] += spec.noise_std * normal(rng);
        return s;
    };

    auto make_id = [](const char* prefix, std::size_t i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s%06zu", prefix, i);
        return std::string(buf);
    };

    SynthData out{Dataset(spec.feature_dim, names), Dataset(spec.feature_dim, names)};
    std::size_t counter = 0;
    for (std::size_t i = 0; i < spec.n_labeled; ++i) out.train.add(draw(make_id("l", counter++), true));
    for (std::size_t i = 0; i < spec.n_unlabeled; ++i) out.train.add(draw(make_id("u", counter++), false));
    for (std::size_t i = 0; i < spec.n_test; ++i) out.test.add(draw(make_id("t", i), true));
    return out;
}

Dataset with_feature_shift(const Dataset& dataset, double offset, double gain) {
    Dataset out(dataset.feature_dim(), dataset.label_names());
    for (Sample s : dataset.samples()) {
        for (double& v : s.features) v = gain * v + offset;
        out.add(std::move(s));
    }
    return out;
}

double label_agreement(const Dataset& dataset, std::size_t a, std::size_t b) {
    if (a >= dataset.label_count() || b >= dataset.label_count()) {
        fail(ErrorKind::Contract, "label_agreement: label index out of range");
    }
    std::size_t agree = 0;
    std::size_t total = 0;
    for (const Sample& s : dataset.samples()) {
        if (!s.labeled()) continue;
        ++total;
        if (s.labels[a] == s.labels[b]) ++agree;
    }
    if (total == 0) fail(ErrorKind::Contract, "label_agreement: no labeled samples");
    return static_cast<double>(agree) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Batching

std::size_t Batch::labeled_count() const noexcept {
    return static_cast<std::size_t>(std::count(labeled_mask.begin(), labeled_mask.end(), true));
}

std::vector<Batch> epoch_batches(const Dataset& dataset, std::size_t batch_size, Phase phase, std::uint64_t seed,
                                 std::optional<std::size_t> unlabeled_cap) {
    if (batch_size == 0) fail(ErrorKind::Config, "batch_size must be positive");
    std::mt19937_64 rng(stream_seed(seed, 4));

    std::vector<std::size_t> pool = dataset.labeled_indices();
    if (phase == Phase::Mixed) {
        auto unlabeled = dataset.unlabeled_indices();
        if (unlabeled_cap && unlabeled.size() > *unlabeled_cap) {
            std::shuffle(unlabeled.begin(), unlabeled.end(), rng);
            unlabeled.resize(*unlabeled_cap);
        }
        pool.insert(pool.end(), unlabeled.begin(), unlabeled.end());
    }
    std::shuffle(pool.begin(), pool.end(), rng);

    std::vector<Batch> batches;
    for (std::size_t start = 0; start < pool.size(); start += batch_size) {
        Batch b;
        const std::size_t end = std::min(pool.size(), start + batch_size);
        b.indices.assign(pool.begin() + static_cast<std::ptrdiff_t>(start),
                         pool.begin() + static_cast<std::ptrdiff_t>(end));
        for (std::size_t i : b.indices) b.labeled_mask.push_back(dataset[i].labeled());
        batches.push_back(std::move(b));
    }
    return batches;
}

}  // namespace coreg
