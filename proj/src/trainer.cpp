#include "plat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

#include "plat/csv.hpp"

namespace plat {

void OptimizerConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("optimizer: learning_rate must be finite and >= 0");
    if (batch_size < 1) throw std::invalid_argument("optimizer: batch_size must be >= 1");
    if (workers < 1) throw std::invalid_argument("optimizer: workers must be >= 1");
}

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads; fn writes to slot i only.
template <typename Fn>
void for_each_index(std::size_t n, std::size_t workers, Fn&& fn) {
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

bool all_finite_grads(const Gradients& g) {
    return std::all_of(g.begin(), g.end(), [](const Matrix& m) { return all_finite(m); });
}

}  // namespace

Evaluation evaluate(const ModelSpec& model, const std::vector<Example>& examples, std::size_t workers) {
    if (examples.empty()) return {};
    std::vector<double> losses(examples.size());
    std::vector<int> correct(examples.size());
    for_each_index(examples.size(), workers, [&](std::size_t i) {
        const LossAndGrad r = cross_entropy(forward(model, examples[i].tokens).logits, examples[i].label);
        losses[i] = r.loss;
        correct[i] = r.predicted == examples[i].label ? 1 : 0;
    });
    const double n = static_cast<double>(examples.size());
    return {std::accumulate(losses.begin(), losses.end(), 0.0) / n,
            static_cast<double>(std::accumulate(correct.begin(), correct.end(), 0)) / n};
}

TrainReport train(ModelSpec& model, const Dataset& data, const OptimizerConfig& opt,
                  const std::string& config_hash) {
    opt.validate();
    if (data.train.empty()) throw std::invalid_argument("train: empty training set");

    TrainReport report;
    report.seed = opt.seed;
    report.config_hash = config_hash;

    auto record = [&](std::size_t epoch) {
        const Evaluation tr = evaluate(model, data.train, opt.workers);
        const Evaluation te = evaluate(model, data.test, opt.workers);
        if (!std::isfinite(tr.loss) || !std::isfinite(te.loss)) {
            report.diverged = true;
            report.failure = "non-finite loss at epoch " + std::to_string(epoch);
            return false;
        }
        report.epochs.push_back({epoch, tr.loss, tr.accuracy, te.loss, te.accuracy});
        report.final_test_accuracy = te.accuracy;
        return true;
    };

    if (!record(0)) return report;

    std::mt19937_64 rng(opt.seed);
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
            const std::size_t count = std::min(opt.batch_size, order.size() - start);
            std::vector<Gradients> per_example(count);
            for_each_index(count, opt.workers, [&](std::size_t i) {
                const Example& ex = data.train[order[start + i]];
                const ForwardCache cache = forward(model, ex.tokens);
                per_example[i] = backward(model, cache, cross_entropy(cache.logits, ex.label).logit_grad);
            });
            Gradients total = std::move(per_example[0]);
            for (std::size_t i = 1; i < count; ++i)
                for (std::size_t t = 0; t < total.size(); ++t) total[t] = add(total[t], per_example[i][t]);
            if (!all_finite_grads(total)) {
                report.diverged = true;
                report.failure = "non-finite gradient in epoch " + std::to_string(epoch);
                return report;
            }
            const double step = opt.learning_rate / static_cast<double>(count);
            auto params = parameters(model);
            for (std::size_t t = 0; t < params.size(); ++t) {
                Matrix& w = *params[t].value;
                for (std::size_t k = 0; k < w.size(); ++k) w.data()[k] -= step * total[t].data()[k];
            }
            ++model.generation;
        }
        if (!record(epoch)) return report;
    }
    return report;
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_train_csv(std::ostream& out, const TrainReport& report) {
    out << "epoch,train_loss,train_acc,test_loss,test_acc\n";
    for (const auto& e : report.epochs) {
        out << e.epoch << ',' << format_real(e.train_loss) << ',' << format_real(e.train_accuracy) << ','
            << format_real(e.test_loss) << ',' << format_real(e.test_accuracy) << '\n';
    }
}

}  // namespace plat
