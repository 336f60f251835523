// Plain mini-batch SGD on the toy classifier.
//
// Determinism: the shuffle is drawn from `seed`; per-example gradients are
// computed (optionally on several threads) into fixed slots and summed in
// example order, so the result does not depend on `workers`.

#ifndef PLAT_TRAINER_HPP
#define PLAT_TRAINER_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "plat/dataset.hpp"
#include "plat/model.hpp"

namespace plat {

struct OptimizerConfig {
    double learning_rate = 1e-2;
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 0 = before the first update
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double test_loss = 0.0;
    double test_accuracy = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    double final_test_accuracy = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;
    bool diverged = false;
    std::string failure;  // set when diverged
};

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;
};

Evaluation evaluate(const ModelSpec& model, const std::vector<Example>& examples, std::size_t workers = 1);

/// Trains `model` in place. A non-finite loss or gradient stops training;
/// the report then holds every completed epoch and diverged == true.
TrainReport train(ModelSpec& model, const Dataset& data, const OptimizerConfig& opt,
                  const std::string& config_hash = "");

/// 64-bit FNV-1a of `text`, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& text);

/// Header: epoch,train_loss,train_acc,test_loss,test_acc
void write_train_csv(std::ostream& out, const TrainReport& report);

}  // namespace plat

#endif  // PLAT_TRAINER_HPP
