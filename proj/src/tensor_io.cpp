#include "plat/tensor_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace plat {

using nlohmann::json;

std::string tensors_to_json(const NamedTensors& tensors) {
    json doc;
    doc["format"] = kTensorFormat;
    doc["version"] = kTensorFormatVersion;
    doc["tensors"] = json::array();
    for (const auto& [name, m] : tensors) {
        doc["tensors"].push_back(
            {{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}});
    }
    return doc.dump(1);
}

NamedTensors tensors_from_json(const std::string& text) {
    const json doc = json::parse(text);
    if (doc.value("format", "") != kTensorFormat)
        throw std::runtime_error("tensor file: format is not '" + std::string(kTensorFormat) + "'");
    const int version = doc.value("version", 0);
    if (version != kTensorFormatVersion)
        throw std::runtime_error("tensor file: unsupported version " + std::to_string(version));

    NamedTensors out;
    for (const auto& t : doc.at("tensors")) {
        const auto rows = t.at("rows").get<std::size_t>();
        const auto cols = t.at("cols").get<std::size_t>();
        auto data = t.at("data").get<std::vector<double>>();
        const auto name = t.at("name").get<std::string>();
        if (data.size() != rows * cols)
            throw std::runtime_error("tensor file: '" + name + "' has wrong element count");
        out.emplace_back(name, Matrix(rows, cols, std::move(data)));
    }
    return out;
}

void save_tensors(const std::filesystem::path& path, const NamedTensors& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << tensors_to_json(tensors) << '\n';
}

NamedTensors load_tensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return tensors_from_json(buf.str());
}

}  // namespace plat
