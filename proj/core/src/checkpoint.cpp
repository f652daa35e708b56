#include "socpinn/errors.hpp"
#include "socpinn/model.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

namespace socpinn::model {

namespace {

using Json = nlohmann::ordered_json;

Json range_to_json(const FeatureRange& r) { return Json{{"min", r.min}, {"max", r.max}}; }

Json mlp_to_json(const nn::Mlp& mlp) {
    Json layers = Json::array();
    for (const auto& layer : mlp.layers()) {
        Json rows = Json::array();
        for (std::size_t r = 0; r < layer.out_dim; ++r) {
            Json row = Json::array();
            for (std::size_t c = 0; c < layer.in_dim; ++c) row.push_back(layer.weight(r, c));
            rows.push_back(std::move(row));
        }
        layers.push_back(Json{{"weights", std::move(rows)}, {"bias", layer.bias}});
    }
    return layers;
}

const Json& member(const Json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) fail(ErrorKind::Parse, "field '" + path + "' must be an object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(ErrorKind::Parse, "missing field '" + path + "." + key + "'");
    return *it;
}

double number(const Json& value, const std::string& path) {
    if (!value.is_number()) fail(ErrorKind::Parse, "field '" + path + "' must be a number");
    return value.get<double>();
}

FeatureRange range_from_json(const Json& norm, const char* name) {
    const std::string path = std::string("norm.") + name;
    const Json& r = member(norm, name, "norm");
    return {number(member(r, "min", path), path + ".min"), number(member(r, "max", path), path + ".max")};
}

nn::Mlp mlp_from_json(const Json& arr, const std::string& path) {
    if (!arr.is_array() || arr.empty()) fail(ErrorKind::Parse, "field '" + path + "' must be a non-empty array");
    std::vector<nn::DenseLayer> layers;
    for (std::size_t l = 0; l < arr.size(); ++l) {
        const std::string lpath = path + "[" + std::to_string(l) + "]";
        const Json& rows = member(arr[l], "weights", lpath);
        const Json& bias = member(arr[l], "bias", lpath);
        if (!rows.is_array() || rows.empty() || !bias.is_array()) {
            fail(ErrorKind::Parse, "field '" + lpath + "' has malformed weights or bias");
        }
        nn::DenseLayer layer;
        layer.out_dim = rows.size();
        layer.in_dim = rows[0].is_array() ? rows[0].size() : 0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const std::string rpath = lpath + ".weights[" + std::to_string(r) + "]";
            if (!rows[r].is_array() || rows[r].size() != layer.in_dim) {
                fail(ErrorKind::Parse, "field '" + rpath + "' has the wrong row length");
            }
            for (std::size_t c = 0; c < rows[r].size(); ++c) {
                layer.weights.push_back(number(rows[r][c], rpath + "[" + std::to_string(c) + "]"));
            }
        }
        if (bias.size() != layer.out_dim) fail(ErrorKind::Parse, "field '" + lpath + ".bias' has the wrong length");
        for (std::size_t i = 0; i < bias.size(); ++i) {
            layer.bias.push_back(number(bias[i], lpath + ".bias[" + std::to_string(i) + "]"));
        }
        layer.activation = (l + 1 == arr.size()) ? nn::Activation::Identity : nn::Activation::Relu;
        layers.push_back(std::move(layer));
    }
    try {
        return nn::Mlp(std::move(layers));
    } catch (const Error& e) {
        fail(ErrorKind::Parse, "field '" + path + "': " + e.what());
    }
}

}  // namespace

std::string checkpoint_to_string(const TwoBranchModel& model) {
    Json doc;
    doc["schema_version"] = kCheckpointSchemaVersion;
    doc["c_rated_ah"] = model.c_rated_ah;
    doc["norm"] = Json{{"voltage", range_to_json(model.norm.voltage)},
                       {"current", range_to_json(model.norm.current)},
                       {"temperature", range_to_json(model.norm.temperature)},
                       {"horizon", range_to_json(model.norm.horizon)}};
    doc["branch1"] = mlp_to_json(model.branch1);
    doc["branch2"] = mlp_to_json(model.branch2);
    return doc.dump(1) + "\n";
}

TwoBranchModel checkpoint_from_string(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n');
        fail(ErrorKind::Parse, "checkpoint is not valid JSON near line " + std::to_string(line) + ": " + e.what());
    }
    if (!doc.is_object()) fail(ErrorKind::Parse, "checkpoint root must be an object");
    const Json& version = member(doc, "schema_version", "$");
    if (!version.is_number_integer()) fail(ErrorKind::Parse, "field 'schema_version' must be an integer");
    if (version.get<int>() != kCheckpointSchemaVersion) {
        fail(ErrorKind::Version, "checkpoint schema_version " + version.dump() + " is not supported (expected " +
                                     std::to_string(kCheckpointSchemaVersion) + ")");
    }

    TwoBranchModel model;
    model.c_rated_ah = number(member(doc, "c_rated_ah", "$"), "c_rated_ah");
    const Json& norm = member(doc, "norm", "$");
    model.norm.voltage = range_from_json(norm, "voltage");
    model.norm.current = range_from_json(norm, "current");
    model.norm.temperature = range_from_json(norm, "temperature");
    model.norm.horizon = range_from_json(norm, "horizon");
    model.branch1 = mlp_from_json(member(doc, "branch1", "$"), "branch1");
    model.branch2 = mlp_from_json(member(doc, "branch2", "$"), "branch2");

    try {
        model.norm.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Parse, e.what());
    }
    if (!(model.c_rated_ah > 0.0)) fail(ErrorKind::Parse, "field 'c_rated_ah' must be positive");
    if (model.branch1.input_dim() != 3 || model.branch2.input_dim() != 4) {
        fail(ErrorKind::Parse, "branch input sizes must be 3 and 4");
    }
    return model;
}

void save_checkpoint(const TwoBranchModel& model, const std::filesystem::path& path) {
    const std::string text = checkpoint_to_string(model);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Io, "cannot write " + tmp.string());
        out << text;
        if (!out) fail(ErrorKind::Io, "failed writing " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorKind::Io, "cannot move checkpoint into " + path.string() + ": " + ec.message());
}

TwoBranchModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot read checkpoint " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return checkpoint_from_string(buf.str());
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

}  // namespace socpinn::model
