// Config-driven experiment runner behind the `plat` command-line tool.
//
// A run is fully described by one JSON document. Every section has explicit
// defaults; unknown keys are rejected with their dotted path. The resolved
// config (all defaults filled in) is what gets echoed, hashed and stored in
// the manifest.

#ifndef PLAT_EXPERIMENT_HPP
#define PLAT_EXPERIMENT_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "plat/checks.hpp"
#include "plat/dataset.hpp"
#include "plat/model.hpp"
#include "plat/tensor_io.hpp"
#include "plat/trainer.hpp"

namespace plat {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kManifestSchema = "plat-run-manifest";
inline constexpr int kManifestSchemaVersion = 1;

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Command { equivcheck, gradcheck, flow, spectral, train, audit, plot };
std::string to_string(Command c);
Command command_from_string(const std::string& name);

struct EquivcheckSection {
    std::size_t trials = 100;
    std::size_t max_tokens = 16;
    std::size_t max_dim = 8;
    double attention_tolerance = 1e-12;
    double flow_tolerance = 1e-10;
};

struct GradcheckSection {
    GradcheckSweep sweep;
    double tolerance = 1e-4;
};

struct FlowSection {
    std::size_t n_tokens = 8;
    std::size_t dim = 4;
    std::size_t d_qk = 4;
    double p = 2.0;
    std::size_t steps = 1000;
    std::string step_mode = "fixed";  // fixed | paper_rowwise
    double dt = 1e-3;
    std::string kernel_mode = "symmetric_keys";
    std::string initial = "random";  // random | constant
    double tolerance = 1e-8;
    double epsilon_clamp = 1e-5;
};

struct SpectralSection {
    std::size_t n_tokens = 8;
    std::string operator_kind = "row_stochastic";  // row_stochastic | plat
    double logit_scale = 1.0;                      // entries of the random logits ~ U(-s, s)
    double p = 2.5;                                // plat operator only
    std::size_t d_qk = 4;
    std::size_t d_v = 2;
    double value_box = 4.0;                        // V rows ~ U(0, box)^d_v
    std::size_t t_max = 50;
    std::string probe = "ramp";                    // ramp | random
};

struct ModelSection {
    std::size_t n_layers = 1;
    std::size_t d_qk = 4;
    std::size_t d_v = 2;
    std::vector<double> heads{1.5, 1.5, 2.5, 2.5};  // or a preset name in the input JSON
    double epsilon_clamp = 1e-5;
    bool renormalize_rows = false;
    bool stop_gradient_modulation = false;
    bool use_layer_scaling = false;
    std::optional<bool> positional_encoding;  // unset: on for heterophilic tasks
    bool bare_attention = false;
    double init_scale = 1.0;
};

struct TaskSection {
    std::string kind = "heterophilic";
    std::size_t n_tokens = 16;
    std::size_t d_x = 8;
    double noise_sigma = 0.0;
    double max_flip_probability = 1.0;
    std::size_t n_train = 2000;
    std::size_t n_test = 500;
    std::uint64_t prototype_seed = 1234;
    bool save_dataset = false;
};

struct OptimizerSection {
    double learning_rate = 0.05;
    std::size_t epochs = 40;
    std::size_t batch_size = 16;
    std::size_t workers = 1;
};

struct AuditSection {
    std::size_t n_examples = 16;
    std::string checkpoint;  // empty: fresh model
};

struct PlotSection {
    std::vector<std::string> inputs;
};

struct ExperimentConfig {
    Command command = Command::equivcheck;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    EquivcheckSection equivcheck;
    GradcheckSection gradcheck;
    FlowSection flow;
    SpectralSection spectral;
    ModelSection model;
    TaskSection task;
    OptimizerSection optimizer;
    AuditSection audit;
    PlotSection plot;
};

/// Parses and validates; throws ConfigError naming the offending key.
ExperimentConfig parse_config(const nlohmann::json& doc, Command command);
ExperimentConfig parse_config_text(const std::string& text, Command command);

/// Fully resolved config in a fixed key order.
nlohmann::ordered_json config_echo(const ExperimentConfig& config);

SyntheticTask make_task(const ExperimentConfig& config);
ModelConfig make_model_config(const ExperimentConfig& config);

/// Named parameter tensors of a model, for checkpoints.
NamedTensors model_tensors(ModelSpec& model);
/// Loads checkpoint tensors by name into `model`; throws on missing names or shape mismatch.
void load_model_tensors(ModelSpec& model, const NamedTensors& tensors);

enum class RunStatus { ok = 0, check_failed = 1, invalid_config = 2, diverged = 3, runtime_error = 4 };

struct RunResult {
    RunStatus status = RunStatus::ok;
    std::string message;
    std::vector<std::string> files;  // relative to output_dir, in write order
};

/// Executes the command, writing artifacts and finally manifest.json under
/// config.output_dir. Expected failures (checks, divergence) are reported
/// in the result rather than thrown.
RunResult run_experiment(const ExperimentConfig& config);

/// {"status":"error","kind":...,"message":...}
std::string error_json(RunStatus status, const std::string& message);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Writes manifest.json via a temporary file and rename.
void write_manifest(const std::filesystem::path& output_dir, const ExperimentConfig& config,
                    const std::string& status, double duration_seconds, const std::vector<std::string>& files);

}  // namespace plat

#endif  // PLAT_EXPERIMENT_HPP
