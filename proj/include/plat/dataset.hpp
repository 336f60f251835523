// Synthetic two-class sequence tasks.
//
// homophilic:   every token of a sequence is prototype[label] plus Gaussian
//               noise, so the label is readable from the mean token.
// heterophilic: the prototype index alternates along the sequence; each
//               position keeps the previous index instead of switching with
//               probability q (q drawn per sequence from
//               U(0, max_flip_probability)). label = 1 iff more than
//               (n_tokens - 1) / 2 adjacent pairs differ, so only neighbour
//               differences carry the label.

#ifndef PLAT_DATASET_HPP
#define PLAT_DATASET_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "plat/numerics.hpp"

namespace plat {

enum class TaskKind { homophilic, heterophilic };
std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

struct SyntheticTask {
    TaskKind kind = TaskKind::homophilic;
    std::size_t n_tokens = 16;
    std::size_t d_x = 8;
    Matrix prototypes;  // 2 x d_x, unit rows, not collinear
    double noise_sigma = 0.0;
    double max_flip_probability = 1.0;  // heterophilic only
    std::size_t n_train = 2000;
    std::size_t n_test = 500;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Two orthonormal prototypes drawn from `seed` (Gram-Schmidt on Gaussian draws).
Matrix make_prototypes(std::size_t d_x, std::uint64_t seed);

struct Example {
    TokenSequence tokens;
    int label = 0;
};

struct Dataset {
    std::vector<Example> train;
    std::vector<Example> test;
};

/// Deterministic in `task.seed`.
Dataset generate_task(const SyntheticTask& task);

/// Number of adjacent token pairs whose nearest prototype differs.
std::size_t count_dissimilar_neighbours(const TokenSequence& tokens, const Matrix& prototypes);

inline constexpr const char* kDatasetFormat = "plat-dataset";
inline constexpr int kDatasetFormatVersion = 1;

void save_dataset(const std::filesystem::path& path, const SyntheticTask& task, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace plat

#endif  // PLAT_DATASET_HPP
