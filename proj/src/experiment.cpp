#include "plat/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <concepts>
#include <cstdio>
#include <fstream>
#include <memory>
#include <random>
#include <set>
#include <sstream>

#include "plat/attention.hpp"
#include "plat/audit.hpp"
#include "plat/energy_flow.hpp"
#include "plat/spectral.hpp"
#include "plat/svg.hpp"

namespace plat {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(Command c) {
    switch (c) {
        case Command::equivcheck: return "equivcheck";
        case Command::gradcheck: return "gradcheck";
        case Command::flow: return "flow";
        case Command::spectral: return "spectral";
        case Command::train: return "train";
        case Command::audit: return "audit";
        case Command::plot: return "plot";
    }
    return "?";
}

Command command_from_string(const std::string& name) {
    for (Command c : {Command::equivcheck, Command::gradcheck, Command::flow, Command::spectral, Command::train,
                      Command::audit, Command::plot})
        if (to_string(c) == name) return c;
    throw ConfigError("unknown command '" + name + "'");
}

// ---------------------------------------------------------------- parsing

namespace {

class Reader {
public:
    Reader(const json* obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (obj_ != nullptr && !obj_->is_object()) throw ConfigError(where() + ": expected an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        const json* v = find(key);
        if (v == nullptr) return;
        convert(*v, out, name(key));
    }

    const json* section(const char* key) {
        const json* v = find(key);
        return v;
    }

    std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        if (obj_ == nullptr) return;
        for (const auto& [k, _] : obj_->items())
            if (!seen_.count(k)) throw ConfigError("unknown key '" + name(k.c_str()) + "'");
    }

private:
    const json* find(const char* key) {
        seen_.insert(key);
        if (obj_ == nullptr) return nullptr;
        const auto it = obj_->find(key);
        return it == obj_->end() ? nullptr : &*it;
    }

    std::string where() const { return path_.empty() ? "config" : path_; }

    template <std::unsigned_integral U>
    static void convert(const json& v, U& out, const std::string& key) {
        if (!v.is_number_unsigned()) throw ConfigError(key + ": expected a non-negative integer");
        out = v.get<U>();
    }
    static void convert(const json& v, double& out, const std::string& key) {
        if (!v.is_number()) throw ConfigError(key + ": expected a number");
        out = v.get<double>();
    }
    static void convert(const json& v, bool& out, const std::string& key) {
        if (!v.is_boolean()) throw ConfigError(key + ": expected true or false");
        out = v.get<bool>();
    }
    static void convert(const json& v, std::string& out, const std::string& key) {
        if (!v.is_string()) throw ConfigError(key + ": expected a string");
        out = v.get<std::string>();
    }
    static void convert(const json& v, std::optional<bool>& out, const std::string& key) {
        if (v.is_null()) {
            out.reset();
            return;
        }
        if (!v.is_boolean()) throw ConfigError(key + ": expected true, false or null");
        out = v.get<bool>();
    }
    static void convert(const json& v, std::vector<double>& out, const std::string& key) {
        if (!v.is_array()) throw ConfigError(key + ": expected an array of numbers");
        out.clear();
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigError(key + ": expected an array of numbers");
            out.push_back(e.get<double>());
        }
    }
    static void convert(const json& v, std::vector<std::string>& out, const std::string& key) {
        if (!v.is_array()) throw ConfigError(key + ": expected an array of strings");
        out.clear();
        for (const auto& e : v) {
            if (!e.is_string()) throw ConfigError(key + ": expected an array of strings");
            out.push_back(e.get<std::string>());
        }
    }

    const json* obj_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

void require_one_of(const std::string& value, std::initializer_list<const char*> allowed, const std::string& key) {
    for (const char* a : allowed)
        if (value == a) return;
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    throw ConfigError(key + ": '" + value + "' is not one of " + list);
}

}  // namespace

ExperimentConfig parse_config(const json& doc, Command command) {
    ExperimentConfig c;
    c.command = command;
    Reader top(&doc, "");
    std::string declared;
    top.get("command", declared);
    if (!declared.empty() && declared != to_string(command))
        throw ConfigError("command: config declares '" + declared + "' but '" + to_string(command) + "' was requested");
    top.get("seed", c.seed);
    top.get("output_dir", c.output_dir);

    {
        Reader r(top.section("equivcheck"), "equivcheck");
        auto& s = c.equivcheck;
        r.get("trials", s.trials);
        r.get("max_tokens", s.max_tokens);
        r.get("max_dim", s.max_dim);
        r.get("attention_tolerance", s.attention_tolerance);
        r.get("flow_tolerance", s.flow_tolerance);
        r.finish();
        require(s.max_tokens >= 1 && s.max_dim >= 1, "equivcheck.max_tokens and max_dim must be >= 1");
    }
    {
        Reader r(top.section("gradcheck"), "gradcheck");
        auto& s = c.gradcheck.sweep;
        r.get("configs", s.configs);
        r.get("n_tokens", s.n_tokens);
        r.get("d_x", s.d_x);
        r.get("d_qk", s.d_qk);
        r.get("d_v", s.d_v);
        r.get("n_layers", s.n_layers);
        r.get("p_values", s.p_values);
        r.get("h", s.h);
        r.get("init_scale", s.init_scale);
        r.get("tolerance", c.gradcheck.tolerance);
        r.finish();
        require(!s.p_values.empty(), "gradcheck.p_values must not be empty");
        for (double p : s.p_values) require(p > 1.0, "gradcheck.p_values: every p must be > 1");
        require(s.h > 0.0, "gradcheck.h must be > 0");
        require(s.n_layers >= 1 && s.n_tokens >= 1 && s.d_x >= 1 && s.d_qk >= 1 && s.d_v >= 1,
                "gradcheck: dimensions must be >= 1");
    }
    {
        Reader r(top.section("flow"), "flow");
        auto& s = c.flow;
        r.get("n_tokens", s.n_tokens);
        r.get("dim", s.dim);
        r.get("d_qk", s.d_qk);
        r.get("p", s.p);
        r.get("steps", s.steps);
        r.get("step_mode", s.step_mode);
        r.get("dt", s.dt);
        r.get("kernel_mode", s.kernel_mode);
        r.get("initial", s.initial);
        r.get("tolerance", s.tolerance);
        r.get("epsilon_clamp", s.epsilon_clamp);
        r.finish();
        require_one_of(s.step_mode, {"fixed", "paper_rowwise"}, "flow.step_mode");
        require_one_of(s.kernel_mode, {"symmetric_keys", "symmetric", "asymmetric"}, "flow.kernel_mode");
        require_one_of(s.initial, {"random", "constant"}, "flow.initial");
        require(s.p > 1.0, "flow.p must be > 1");
        require(s.dt > 0.0, "flow.dt must be > 0");
        require(s.steps >= 1, "flow.steps must be >= 1");
        require(s.n_tokens >= 1 && s.dim >= 1 && s.d_qk >= 1, "flow: dimensions must be >= 1");
        require(s.epsilon_clamp > 0.0, "flow.epsilon_clamp must be > 0");
    }
    {
        Reader r(top.section("spectral"), "spectral");
        auto& s = c.spectral;
        r.get("n_tokens", s.n_tokens);
        r.get("operator", s.operator_kind);
        r.get("logit_scale", s.logit_scale);
        r.get("p", s.p);
        r.get("d_qk", s.d_qk);
        r.get("d_v", s.d_v);
        r.get("value_box", s.value_box);
        r.get("t_max", s.t_max);
        r.get("probe", s.probe);
        r.finish();
        require_one_of(s.operator_kind, {"row_stochastic", "plat"}, "spectral.operator");
        require_one_of(s.probe, {"ramp", "random"}, "spectral.probe");
        require(s.n_tokens >= 2, "spectral.n_tokens must be >= 2");
        require(s.p > 1.0, "spectral.p must be > 1");
        require(s.d_qk >= 1 && s.d_v >= 1, "spectral: dimensions must be >= 1");
    }
    {
        Reader r(top.section("model"), "model");
        auto& s = c.model;
        r.get("n_layers", s.n_layers);
        r.get("d_qk", s.d_qk);
        r.get("d_v", s.d_v);
        if (const json* heads = r.section("heads"); heads != nullptr && heads->is_string()) {
            try {
                s.heads = head_preset(heads->get<std::string>());
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("model.heads: ") + e.what());
            }
        } else {
            r.get("heads", s.heads);
        }
        r.get("epsilon_clamp", s.epsilon_clamp);
        r.get("renormalize_rows", s.renormalize_rows);
        r.get("stop_gradient_modulation", s.stop_gradient_modulation);
        r.get("use_layer_scaling", s.use_layer_scaling);
        r.get("positional_encoding", s.positional_encoding);
        r.get("bare_attention", s.bare_attention);
        r.get("init_scale", s.init_scale);
        r.finish();
    }
    {
        Reader r(top.section("task"), "task");
        auto& s = c.task;
        r.get("kind", s.kind);
        r.get("n_tokens", s.n_tokens);
        r.get("d_x", s.d_x);
        r.get("noise_sigma", s.noise_sigma);
        r.get("max_flip_probability", s.max_flip_probability);
        r.get("n_train", s.n_train);
        r.get("n_test", s.n_test);
        r.get("prototype_seed", s.prototype_seed);
        r.get("save_dataset", s.save_dataset);
        r.finish();
        require_one_of(s.kind, {"homophilic", "heterophilic"}, "task.kind");
    }
    // Resolve the positional default from the task kind so the echo is explicit.
    if (!c.model.positional_encoding) c.model.positional_encoding = c.task.kind == "heterophilic";
    {
        Reader r(top.section("optimizer"), "optimizer");
        auto& s = c.optimizer;
        r.get("learning_rate", s.learning_rate);
        r.get("epochs", s.epochs);
        r.get("batch_size", s.batch_size);
        r.get("workers", s.workers);
        r.finish();
    }
    {
        Reader r(top.section("audit"), "audit");
        r.get("n_examples", c.audit.n_examples);
        r.get("checkpoint", c.audit.checkpoint);
        r.finish();
    }
    {
        Reader r(top.section("plot"), "plot");
        r.get("inputs", c.plot.inputs);
        r.finish();
    }
    top.finish();

    try {
        make_task(c).validate();
        make_model_config(c).validate();
        OptimizerConfig opt{c.optimizer.learning_rate, c.optimizer.epochs, c.optimizer.batch_size, c.seed,
                            c.optimizer.workers};
        opt.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

ExperimentConfig parse_config_text(const std::string& text, Command command) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc, command);
}

ordered_json config_echo(const ExperimentConfig& c) {
    ordered_json j;
    j["command"] = to_string(c.command);
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    const auto& e = c.equivcheck;
    j["equivcheck"] = {{"trials", e.trials},
                       {"max_tokens", e.max_tokens},
                       {"max_dim", e.max_dim},
                       {"attention_tolerance", e.attention_tolerance},
                       {"flow_tolerance", e.flow_tolerance}};
    const auto& g = c.gradcheck.sweep;
    j["gradcheck"] = {{"configs", g.configs},       {"n_tokens", g.n_tokens}, {"d_x", g.d_x},
                      {"d_qk", g.d_qk},             {"d_v", g.d_v},           {"n_layers", g.n_layers},
                      {"p_values", g.p_values},     {"h", g.h},               {"init_scale", g.init_scale},
                      {"tolerance", c.gradcheck.tolerance}};
    const auto& f = c.flow;
    j["flow"] = {{"n_tokens", f.n_tokens}, {"dim", f.dim},
                 {"d_qk", f.d_qk},         {"p", f.p},
                 {"steps", f.steps},       {"step_mode", f.step_mode},
                 {"dt", f.dt},             {"kernel_mode", f.kernel_mode},
                 {"initial", f.initial},   {"tolerance", f.tolerance},
                 {"epsilon_clamp", f.epsilon_clamp}};
    const auto& s = c.spectral;
    j["spectral"] = {{"n_tokens", s.n_tokens}, {"operator", s.operator_kind}, {"logit_scale", s.logit_scale},
                     {"p", s.p},               {"d_qk", s.d_qk},              {"d_v", s.d_v},
                     {"value_box", s.value_box}, {"t_max", s.t_max},          {"probe", s.probe}};
    const auto& m = c.model;
    j["model"] = {{"n_layers", m.n_layers},
                  {"d_qk", m.d_qk},
                  {"d_v", m.d_v},
                  {"heads", m.heads},
                  {"epsilon_clamp", m.epsilon_clamp},
                  {"renormalize_rows", m.renormalize_rows},
                  {"stop_gradient_modulation", m.stop_gradient_modulation},
                  {"use_layer_scaling", m.use_layer_scaling},
                  {"positional_encoding", m.positional_encoding.value_or(false)},
                  {"bare_attention", m.bare_attention},
                  {"init_scale", m.init_scale}};
    const auto& t = c.task;
    j["task"] = {{"kind", t.kind},
                 {"n_tokens", t.n_tokens},
                 {"d_x", t.d_x},
                 {"noise_sigma", t.noise_sigma},
                 {"max_flip_probability", t.max_flip_probability},
                 {"n_train", t.n_train},
                 {"n_test", t.n_test},
                 {"prototype_seed", t.prototype_seed},
                 {"save_dataset", t.save_dataset}};
    const auto& o = c.optimizer;
    j["optimizer"] = {{"learning_rate", o.learning_rate},
                      {"epochs", o.epochs},
                      {"batch_size", o.batch_size},
                      {"workers", o.workers}};
    j["audit"] = {{"n_examples", c.audit.n_examples}, {"checkpoint", c.audit.checkpoint}};
    j["plot"] = {{"inputs", c.plot.inputs}};
    return j;
}

SyntheticTask make_task(const ExperimentConfig& c) {
    SyntheticTask t;
    t.kind = task_kind_from_string(c.task.kind);
    t.n_tokens = c.task.n_tokens;
    t.d_x = c.task.d_x;
    t.prototypes = make_prototypes(std::max<std::size_t>(c.task.d_x, 2), c.task.prototype_seed);
    t.noise_sigma = c.task.noise_sigma;
    t.max_flip_probability = c.task.max_flip_probability;
    t.n_train = c.task.n_train;
    t.n_test = c.task.n_test;
    t.seed = c.seed;
    return t;
}

ModelConfig make_model_config(const ExperimentConfig& c) {
    ModelConfig m;
    m.n_tokens = c.task.n_tokens;
    m.d_x = c.task.d_x;
    m.d_qk = c.model.d_qk;
    m.d_v = c.model.d_v;
    m.n_layers = c.model.n_layers;
    m.head_p = c.model.heads;
    m.epsilon_clamp = c.model.epsilon_clamp;
    m.renormalize_rows = c.model.renormalize_rows;
    m.stop_gradient_modulation = c.model.stop_gradient_modulation;
    m.use_layer_scaling = c.model.use_layer_scaling;
    m.positional_encoding = c.model.positional_encoding.value_or(c.task.kind == "heterophilic");
    m.bare_attention = c.model.bare_attention;
    m.init_scale = c.model.init_scale;
    return m;
}

NamedTensors model_tensors(ModelSpec& model) {
    NamedTensors out;
    for (const auto& p : parameters(model)) out.emplace_back(p.name, *p.value);
    return out;
}

void load_model_tensors(ModelSpec& model, const NamedTensors& tensors) {
    for (const auto& p : parameters(model)) {
        const auto it = std::find_if(tensors.begin(), tensors.end(), [&](const auto& t) { return t.first == p.name; });
        if (it == tensors.end()) throw std::runtime_error("checkpoint: missing tensor '" + p.name + "'");
        if (it->second.rows() != p.value->rows() || it->second.cols() != p.value->cols())
            throw std::runtime_error("checkpoint: tensor '" + p.name + "' is " + it->second.shape_string() +
                                     ", model expects " + p.value->shape_string());
        *p.value = it->second;
    }
    ++model.generation;
}

// ---------------------------------------------------------------- artifacts

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest init failed");
    char buf[1 << 15];
    while (in) {
        in.read(buf, sizeof buf);
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest, &len);
    std::string hex;
    char byte[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(byte, sizeof byte, "%02x", digest[i]);
        hex += byte;
    }
    return hex;
}

void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& config, const std::string& status,
                    double duration_seconds, const std::vector<std::string>& files) {
    ordered_json m;
    m["schema"] = kManifestSchema;
    m["schema_version"] = kManifestSchemaVersion;
    m["tool"] = "plat";
    m["tool_version"] = kToolVersion;
    m["command"] = to_string(config.command);
    m["status"] = status;
    m["duration_seconds"] = duration_seconds;
    m["config"] = config_echo(config);
    ordered_json list = ordered_json::array();
    for (const auto& f : files) {
        const auto path = dir / f;
        list.push_back({{"path", f}, {"bytes", std::filesystem::file_size(path)}, {"sha256", sha256_file(path)}});
    }
    m["files"] = list;
    const auto tmp = dir / ".manifest.json.tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << m.dump(2) << '\n';
        if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, dir / "manifest.json");
}

std::string error_json(RunStatus status, const std::string& message) {
    const char* kind = "runtime_error";
    switch (status) {
        case RunStatus::ok: kind = "ok"; break;
        case RunStatus::check_failed: kind = "check_failed"; break;
        case RunStatus::invalid_config: kind = "invalid_config"; break;
        case RunStatus::diverged: kind = "diverged"; break;
        case RunStatus::runtime_error: kind = "runtime_error"; break;
    }
    ordered_json j;
    j["status"] = "error";
    j["kind"] = kind;
    j["exit_code"] = static_cast<int>(status);
    j["message"] = message;
    return j.dump();
}

// ---------------------------------------------------------------- commands

namespace {

class Artifacts {
public:
    explicit Artifacts(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
        out << content;
        add(name);
    }
    void add(const std::string& name) {
        if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
    }
    std::filesystem::path path(const std::string& name) const { return dir_ / name; }
    const std::vector<std::string>& files() const { return files_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> files_;
};

template <typename Fn>
std::string to_text(Fn&& fn) {
    std::ostringstream out;
    fn(out);
    return out.str();
}

Matrix uniform(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix m(rows, cols);
    for (double& x : m.data()) x = dist(rng);
    return m;
}

void plot(Artifacts& art, const std::string& csv, const std::string& svg) {
    render_plots({{art.path(csv), art.path(svg)}});
    art.add(svg);
}

RunResult run_equivcheck(const ExperimentConfig& c, Artifacts& art) {
    const auto& s = c.equivcheck;
    const auto records = equivalence_trials(s.trials, s.max_tokens, s.max_dim, c.seed);
    art.write("equivcheck.csv", to_text([&](std::ostream& o) { write_equivalence_csv(o, records); }));
    double att = 0.0, flow = 0.0;
    for (const auto& r : records) {
        att = std::max(att, r.attention_diff);
        flow = std::max(flow, r.flow_step_diff);
    }
    const bool pass = att < s.attention_tolerance && flow < s.flow_tolerance;
    ordered_json summary = {{"trials", records.size()},
                            {"max_attention_abs_diff", att},
                            {"attention_tolerance", s.attention_tolerance},
                            {"max_flow_step_abs_diff", flow},
                            {"flow_tolerance", s.flow_tolerance},
                            {"pass", pass}};
    art.write("equivcheck.json", summary.dump(2) + "\n");
    if (!pass) return {RunStatus::check_failed, "equivalence differences exceed tolerance", {}};
    return {};
}

RunResult run_gradcheck(const ExperimentConfig& c, Artifacts& art) {
    const auto records = gradcheck_sweep(c.gradcheck.sweep, c.seed);
    art.write("gradcheck.csv", to_text([&](std::ostream& o) { write_gradcheck_csv(o, records); }));
    double worst = 0.0;
    std::string worst_name;
    std::size_t failures = 0;
    for (const auto& r : records) {
        if (!(r.relative_error < c.gradcheck.tolerance)) ++failures;
        if (!(r.relative_error <= worst)) {
            worst = r.relative_error;
            worst_name = "config " + std::to_string(r.config) + " " + r.parameter;
        }
    }
    ordered_json summary = {{"configs", c.gradcheck.sweep.configs},
                            {"tensors_checked", records.size()},
                            {"max_relative_error", worst},
                            {"worst_tensor", worst_name},
                            {"tolerance", c.gradcheck.tolerance},
                            {"failures", failures},
                            {"pass", failures == 0}};
    art.write("gradcheck.json", summary.dump(2) + "\n");
    if (failures != 0) return {RunStatus::check_failed, std::to_string(failures) + " tensors exceed tolerance", {}};
    return {};
}

RunResult run_flow_command(const ExperimentConfig& c, Artifacts& art) {
    const auto& s = c.flow;
    std::mt19937_64 rng(c.seed);
    Matrix u0 = uniform(rng, s.n_tokens, s.dim, -1.0, 1.0);
    if (s.initial == "constant")
        for (std::size_t i = 1; i < u0.rows(); ++i)
            for (std::size_t j = 0; j < u0.cols(); ++j) u0(i, j) = u0(0, j);
    const Matrix q = uniform(rng, s.n_tokens, s.d_qk, -1.0, 1.0);
    const Matrix k = uniform(rng, s.n_tokens, s.d_qk, -1.0, 1.0);
    const EnergyKernel kernel = make_kernel(kernel_mode_from_string(s.kernel_mode), q, k);
    const StepMode mode = s.step_mode == "fixed" ? StepMode::fixed(s.dt) : StepMode::paper_rowwise();
    const EnergyReport report = run_flow(u0, kernel, s.p, s.steps, mode, {s.epsilon_clamp, s.tolerance});
    art.write("energy.csv", to_text([&](std::ostream& o) { write_energy_csv(o, report); }));
    plot(art, "energy.csv", "energy.svg");
    ordered_json summary = {{"steps_recorded", report.trajectory.size()},
                            {"initial_energy", report.trajectory.front().energy},
                            {"final_energy", report.trajectory.back().energy},
                            {"monotone_fraction", report.monotone_fraction},
                            {"converged", report.converged},
                            {"final_gradient_norm", report.final_gradient_norm}};
    art.write("flow.json", summary.dump(2) + "\n");
    return {};
}

RunResult run_spectral_command(const ExperimentConfig& c, Artifacts& art) {
    const auto& s = c.spectral;
    std::mt19937_64 rng(c.seed);
    Matrix a;
    std::optional<Matrix> values;
    if (s.operator_kind == "row_stochastic") {
        a = row_softmax(uniform(rng, s.n_tokens, s.n_tokens, -s.logit_scale, s.logit_scale));
    } else {
        const Matrix q = uniform(rng, s.n_tokens, s.d_qk, -s.logit_scale, s.logit_scale);
        const Matrix k = uniform(rng, s.n_tokens, s.d_qk, -s.logit_scale, s.logit_scale);
        values = uniform(rng, s.n_tokens, s.d_v, 0.0, s.value_box);
        AttentionHeadConfig cfg;
        cfg.d_model = s.d_v;
        cfg.d_qk = s.d_qk;
        cfg.d_v = s.d_v;
        cfg.p = s.p;
        a = plat_operator_matrix(q, k, *values, cfg);
    }
    std::vector<double> z(s.n_tokens);
    if (s.probe == "ramp") {
        for (std::size_t i = 0; i < z.size(); ++i) z[i] = static_cast<double>(i);
    } else {
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (double& v : z) v = dist(rng);
    }
    const SpectralReport report = build_spectral_report(a, z, s.t_max, values ? &*values : nullptr);
    art.write("ratio.csv", to_text([&](std::ostream& o) { write_ratio_csv(o, report); }));
    plot(art, "ratio.csv", "ratio.svg");
    art.write("spectral.json", spectral_summary_json(report) + "\n");
    return {};
}

RunResult run_train_command(const ExperimentConfig& c, Artifacts& art) {
    const SyntheticTask task = make_task(c);
    const Dataset data = generate_task(task);
    if (c.task.save_dataset) {
        save_dataset(art.path("dataset.json"), task, data);
        art.add("dataset.json");
    }
    ModelSpec model = init_model(make_model_config(c), c.seed + 1);
    const OptimizerConfig opt{c.optimizer.learning_rate, c.optimizer.epochs, c.optimizer.batch_size, c.seed + 2,
                              c.optimizer.workers};
    const std::string hash = fnv1a_hex(config_echo(c).dump());
    const TrainReport report = train(model, data, opt, hash);
    art.write("train.csv", to_text([&](std::ostream& o) { write_train_csv(o, report); }));
    plot(art, "train.csv", "accuracy.svg");
    if (!report.diverged) {
        save_tensors(art.path("checkpoint.json"), model_tensors(model));
        art.add("checkpoint.json");
    }
    ordered_json summary = {{"seed", report.seed},
                            {"config_hash", report.config_hash},
                            {"epochs_completed", report.epochs.empty() ? 0 : report.epochs.back().epoch},
                            {"final_test_accuracy", report.final_test_accuracy},
                            {"diverged", report.diverged},
                            {"failure", report.failure}};
    art.write("train.json", summary.dump(2) + "\n");
    if (report.diverged) return {RunStatus::diverged, report.failure, {}};
    return {};
}

RunResult run_audit_command(const ExperimentConfig& c, Artifacts& art) {
    SyntheticTask task = make_task(c);
    task.n_train = 0;
    task.n_test = c.audit.n_examples;
    const Dataset data = generate_task(task);
    ModelSpec model = init_model(make_model_config(c), c.seed + 1);
    if (!c.audit.checkpoint.empty()) load_model_tensors(model, load_tensors(c.audit.checkpoint));
    const auto audits = audit_hooks(model, data.test);
    art.write("audit.csv", to_text([&](std::ostream& o) { write_audit_csv(o, audits); }));
    double max_lambda = 0.0;
    std::size_t heads = 0, above_one = 0, energy_drops = 0;
    for (const auto& ex : audits) {
        for (const auto& h : ex.heads) {
            ++heads;
            max_lambda = std::max(max_lambda, h.spectral.lambda_max);
            if (h.spectral.lambda_max > 1.0) ++above_one;
            if (h.energy_out <= h.energy_in) ++energy_drops;
        }
    }
    ordered_json summary = {{"examples", audits.size()},
                            {"head_operators", heads},
                            {"max_lambda", max_lambda},
                            {"operators_with_lambda_above_one", above_one},
                            {"layers_with_energy_decrease", energy_drops},
                            {"checkpoint", c.audit.checkpoint}};
    art.write("audit.json", summary.dump(2) + "\n");
    return {};
}

RunResult run_plot_command(const ExperimentConfig& c, Artifacts& art) {
    if (c.plot.inputs.empty()) throw ConfigError("plot.inputs: at least one CSV path is required");
    for (const auto& input : c.plot.inputs) {
        const std::filesystem::path csv(input);
        const std::string svg = csv.stem().string() + ".svg";
        render_plots({{csv, art.path(svg)}});
        art.add(svg);
    }
    return {};
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    Artifacts art(config.output_dir);
    art.write("config.json", config_echo(config).dump(2) + "\n");
    RunResult result;
    try {
        switch (config.command) {
            case Command::equivcheck: result = run_equivcheck(config, art); break;
            case Command::gradcheck: result = run_gradcheck(config, art); break;
            case Command::flow: result = run_flow_command(config, art); break;
            case Command::spectral: result = run_spectral_command(config, art); break;
            case Command::train: result = run_train_command(config, art); break;
            case Command::audit: result = run_audit_command(config, art); break;
            case Command::plot: result = run_plot_command(config, art); break;
        }
    } catch (const ConfigError& e) {
        result = {RunStatus::invalid_config, e.what(), {}};
    } catch (const std::exception& e) {
        result = {RunStatus::runtime_error, e.what(), {}};
    }
    if (result.status != RunStatus::ok) art.write("error.json", error_json(result.status, result.message) + "\n");
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(config.output_dir, config, result.status == RunStatus::ok ? "ok" : "failed", seconds, art.files());
    result.files = art.files();
    result.files.push_back("manifest.json");
    return result;
}

}  // namespace plat
