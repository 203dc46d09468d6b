#include "driveseg/nn/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "driveseg/errors.hpp"

namespace driveseg::nn {

using nlohmann::json;

void save_checkpoint(const ParameterSet& params, std::uint64_t seed, long step,
                     const std::string& path) {
    json doc;
    doc["format"] = "driveseg-checkpoint-v1";
    doc["seed"] = seed;
    doc["step"] = step;
    json tensors = json::object();
    for (const auto& [name, p] : params.items()) {
        json t;
        t["shape"] = {p->rows(), p->cols()};
        std::vector<double> values;
        values.reserve(static_cast<std::size_t>(p->value.size()));
        for (long r = 0; r < p->rows(); ++r)
            for (long c = 0; c < p->cols(); ++c) values.push_back(p->value(r, c));
        t["values"] = values;
        tensors[name] = std::move(t);
    }
    doc["params"] = std::move(tensors);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << doc.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError("malformed checkpoint " + path + ": " + e.what());
    }
    if (doc.value("format", "") != "driveseg-checkpoint-v1")
        throw DataError("not a driveseg checkpoint: " + path);
    Checkpoint ckpt;
    ckpt.seed = doc.at("seed").get<std::uint64_t>();
    ckpt.step = doc.at("step").get<long>();
    for (const auto& [name, t] : doc.at("params").items()) {
        const long rows = t.at("shape").at(0).get<long>();
        const long cols = t.at("shape").at(1).get<long>();
        const auto values = t.at("values").get<std::vector<double>>();
        if (static_cast<long>(values.size()) != rows * cols)
            throw DataError("checkpoint tensor '" + name + "' has wrong value count");
        Eigen::MatrixXd m(rows, cols);
        for (long r = 0; r < rows; ++r)
            for (long c = 0; c < cols; ++c) m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
        ckpt.params.add(parameter(std::move(m), name));
    }
    return ckpt;
}

}  // namespace driveseg::nn
