#include "plat/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace plat {

std::string to_string(TaskKind kind) {
    return kind == TaskKind::homophilic ? "homophilic" : "heterophilic";
}

TaskKind task_kind_from_string(const std::string& name) {
    if (name == "homophilic") return TaskKind::homophilic;
    if (name == "heterophilic") return TaskKind::heterophilic;
    throw std::invalid_argument("unknown task kind '" + name + "'");
}

void SyntheticTask::validate() const {
    if (n_tokens < 2) throw std::invalid_argument("task: n_tokens must be >= 2");
    if (d_x < 2) throw std::invalid_argument("task: d_x must be >= 2");
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("task: noise_sigma must be >= 0");
    if (!(max_flip_probability >= 0.0 && max_flip_probability <= 1.0))
        throw std::invalid_argument("task: max_flip_probability must lie in [0, 1]");
    if (prototypes.rows() != 2 || prototypes.cols() != d_x)
        throw std::invalid_argument("task: prototypes must be 2 x d_x, got " + prototypes.shape_string());
    const double n0 = norm2(prototypes.row(0));
    const double n1 = norm2(prototypes.row(1));
    if (std::abs(n0 - 1.0) > 1e-9 || std::abs(n1 - 1.0) > 1e-9)
        throw std::invalid_argument("task: prototypes must be unit vectors");
    double dot = 0.0;
    for (std::size_t d = 0; d < d_x; ++d) dot += prototypes(0, d) * prototypes(1, d);
    if (std::abs(dot) > 1.0 - 1e-6) throw std::invalid_argument("task: prototypes are collinear");
}

Matrix make_prototypes(std::size_t d_x, std::uint64_t seed) {
    if (d_x < 2) throw std::invalid_argument("make_prototypes: d_x must be >= 2");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Matrix p(2, d_x);
    for (double& x : p.data()) x = normal(rng);
    const double n0 = norm2(p.row(0));
    for (double& x : p.row(0)) x /= n0;
    double dot = 0.0;
    for (std::size_t d = 0; d < d_x; ++d) dot += p(0, d) * p(1, d);
    for (std::size_t d = 0; d < d_x; ++d) p(1, d) -= dot * p(0, d);
    const double n1 = norm2(p.row(1));
    for (double& x : p.row(1)) x /= n1;
    return p;
}

namespace {

Example draw_example(const SyntheticTask& task, std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<int> proto(task.n_tokens);
    int label = 0;
    if (task.kind == TaskKind::homophilic) {
        label = uniform(rng) < 0.5 ? 0 : 1;
        std::fill(proto.begin(), proto.end(), label);
    } else {
        const double q = task.max_flip_probability * uniform(rng);
        proto[0] = uniform(rng) < 0.5 ? 0 : 1;
        std::size_t switches = 0;
        for (std::size_t i = 1; i < task.n_tokens; ++i) {
            const bool keep = uniform(rng) < q;
            proto[i] = keep ? proto[i - 1] : 1 - proto[i - 1];
            if (!keep) ++switches;
        }
        label = 2 * switches > task.n_tokens - 1 ? 1 : 0;
    }
    Example ex{TokenSequence(task.n_tokens, task.d_x), label};
    for (std::size_t i = 0; i < task.n_tokens; ++i) {
        for (std::size_t d = 0; d < task.d_x; ++d) {
            const double jitter = task.noise_sigma > 0.0 ? task.noise_sigma * noise(rng) : 0.0;
            ex.tokens(i, d) = task.prototypes(static_cast<std::size_t>(proto[i]), d) + jitter;
        }
    }
    return ex;
}

}  // namespace

Dataset generate_task(const SyntheticTask& task) {
    task.validate();
    std::mt19937_64 rng(task.seed);
    Dataset data;
    data.train.reserve(task.n_train);
    data.test.reserve(task.n_test);
    for (std::size_t i = 0; i < task.n_train; ++i) data.train.push_back(draw_example(task, rng));
    for (std::size_t i = 0; i < task.n_test; ++i) data.test.push_back(draw_example(task, rng));
    return data;
}

std::size_t count_dissimilar_neighbours(const TokenSequence& tokens, const Matrix& prototypes) {
    auto nearest = [&](std::size_t row) {
        double best = 0.0;
        int best_idx = 0;
        for (std::size_t k = 0; k < prototypes.rows(); ++k) {
            double dist = 0.0;
            for (std::size_t d = 0; d < tokens.cols(); ++d)
                dist += std::pow(tokens(row, d) - prototypes(k, d), 2);
            if (k == 0 || dist < best) {
                best = dist;
                best_idx = static_cast<int>(k);
            }
        }
        return best_idx;
    };
    std::size_t count = 0;
    for (std::size_t i = 1; i < tokens.rows(); ++i)
        if (nearest(i) != nearest(i - 1)) ++count;
    return count;
}

namespace {

nlohmann::json examples_to_json(const std::vector<Example>& examples) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& ex : examples)
        out.push_back({{"label", ex.label}, {"rows", ex.tokens.rows()}, {"cols", ex.tokens.cols()},
                       {"tokens", ex.tokens.data()}});
    return out;
}

std::vector<Example> examples_from_json(const nlohmann::json& arr) {
    std::vector<Example> out;
    for (const auto& e : arr) {
        out.push_back({Matrix(e.at("rows").get<std::size_t>(), e.at("cols").get<std::size_t>(),
                              e.at("tokens").get<std::vector<double>>()),
                       e.at("label").get<int>()});
    }
    return out;
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const SyntheticTask& task, const Dataset& data) {
    nlohmann::ordered_json doc;
    doc["format"] = kDatasetFormat;
    doc["version"] = kDatasetFormatVersion;
    doc["task"] = {{"kind", to_string(task.kind)},
                   {"n_tokens", task.n_tokens},
                   {"d_x", task.d_x},
                   {"noise_sigma", task.noise_sigma},
                   {"max_flip_probability", task.max_flip_probability},
                   {"n_train", task.n_train},
                   {"n_test", task.n_test},
                   {"seed", task.seed},
                   {"prototypes", task.prototypes.data()}};
    doc["train"] = examples_to_json(data.train);
    doc["test"] = examples_to_json(data.test);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << doc.dump() << '\n';
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const auto doc = nlohmann::json::parse(buf.str());
    if (doc.value("format", "") != kDatasetFormat || doc.value("version", 0) != kDatasetFormatVersion)
        throw std::runtime_error("dataset file: unsupported format or version");
    return {examples_from_json(doc.at("train")), examples_from_json(doc.at("test"))};
}

}  // namespace plat
