#include "socpinn/csv.hpp"
#include "socpinn/errors.hpp"
#include "socpinn/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace socpinn::train {

namespace {

using Json = nlohmann::ordered_json;

std::string pool_kind_string(PoolSpec::Kind kind) {
    switch (kind) {
        case PoolSpec::Kind::Empirical: return "empirical";
        case PoolSpec::Kind::ObservedRange: return "observed-range";
        case PoolSpec::Kind::List: return "list";
        case PoolSpec::Kind::Uniform: return "uniform";
    }
    return "empirical";
}

PoolSpec::Kind pool_kind_from(const std::string& name) {
    if (name == "empirical") return PoolSpec::Kind::Empirical;
    if (name == "observed-range") return PoolSpec::Kind::ObservedRange;
    if (name == "list") return PoolSpec::Kind::List;
    if (name == "uniform") return PoolSpec::Kind::Uniform;
    fail(ErrorKind::Config, "unknown pool kind '" + name + "'");
}

Json pool_to_json(const PoolSpec& p) {
    Json j;
    j["kind"] = pool_kind_string(p.kind);
    j["values"] = p.values;
    j["lo"] = p.lo;
    j["hi"] = p.hi;
    return j;
}

PoolSpec pool_from_json(const nlohmann::json& j, const char* name) {
    PoolSpec p;
    if (j.is_string()) {
        p.kind = pool_kind_from(j.get<std::string>());
        return p;
    }
    if (!j.is_object()) fail(ErrorKind::Config, std::string(name) + " must be an object or a kind string");
    p.kind = pool_kind_from(j.value("kind", std::string("empirical")));
    p.values = j.value("values", std::vector<double>{});
    p.lo = j.value("lo", 0.0);
    p.hi = j.value("hi", 0.0);
    return p;
}

std::string algorithm_string(nn::Algorithm a) { return a == nn::Algorithm::Adam ? "adam" : "sgd"; }

}  // namespace

std::string physics_mode_string(const TrainConfig& config) {
    switch (config.physics_mode) {
        case PhysicsMode::Off: return "off";
        case PhysicsMode::All: return "all";
        case PhysicsMode::Single: return "single:" + csv::format_number(config.single_horizon_s);
    }
    return "off";
}

void set_physics_mode(TrainConfig& config, std::string_view text) {
    if (text == "off") {
        config.physics_mode = PhysicsMode::Off;
    } else if (text == "all") {
        config.physics_mode = PhysicsMode::All;
    } else if (text.rfind("single:", 0) == 0) {
        const auto h = csv::parse_number(text.substr(7));
        if (!h || !(*h > 0.0)) fail(ErrorKind::Config, "single:<h> needs a positive horizon in seconds");
        config.physics_mode = PhysicsMode::Single;
        config.single_horizon_s = *h;
    } else {
        fail(ErrorKind::Config, "physics mode must be off, all or single:<seconds>, got '" + std::string(text) + "'");
    }
}

std::string default_label(const TrainConfig& config) {
    switch (config.physics_mode) {
        case PhysicsMode::Off: return "no-pinn";
        case PhysicsMode::All: return "pinn-all";
        case PhysicsMode::Single: return "pinn-" + csv::format_number(config.single_horizon_s) + "s";
    }
    return "model";
}

Json config_to_json(const TrainConfig& c) {
    Json j;
    j["label"] = c.label;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["optimizer"] = {{"algorithm", algorithm_string(c.optimizer.algorithm)},
                      {"learning_rate", c.optimizer.learning_rate},
                      {"beta1", c.optimizer.beta1},
                      {"beta2", c.optimizer.beta2},
                      {"epsilon", c.optimizer.epsilon}};
    j["seed"] = c.seed;
    j["data_horizon_s"] = c.data_horizon_s ? Json(*c.data_horizon_s) : Json(nullptr);
    j["physics_horizons"] = c.physics_horizons;
    j["physics_mode"] = physics_mode_string(c);
    j["physics_weight"] = c.physics_weight;
    j["current_pool"] = pool_to_json(c.current_pool);
    j["temp_pool"] = pool_to_json(c.temp_pool);
    j["patience"] = c.patience;
    j["validation_fraction"] = c.validation_fraction;
    j["c_rated_ah"] = c.c_rated_ah ? Json(*c.c_rated_ah) : Json(nullptr);
    j["moving_average_s"] = c.moving_average_s;
    j["data_loss"] = c.data_loss;
    j["joint_training"] = c.joint_training;
    return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known{
        "label",      "epochs",         "batch_size",     "optimizer",  "seed",      "data_horizon_s",
        "physics_horizons", "physics_mode", "physics_weight", "current_pool", "temp_pool", "patience",
        "validation_fraction", "c_rated_ah", "moving_average_s", "data_loss", "joint_training"};
    if (!j.is_object()) fail(ErrorKind::Config, "training config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) fail(ErrorKind::Config, "unknown training config field '" + key + "'");
    }
    TrainConfig c;
    try {
        c.label = j.value("label", c.label);
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        if (j.contains("optimizer")) {
            const auto& o = j.at("optimizer");
            const auto algo = o.value("algorithm", std::string("adam"));
            if (algo != "adam" && algo != "sgd") fail(ErrorKind::Config, "optimizer.algorithm must be adam or sgd");
            c.optimizer.algorithm = algo == "adam" ? nn::Algorithm::Adam : nn::Algorithm::Sgd;
            c.optimizer.learning_rate = o.value("learning_rate", c.optimizer.learning_rate);
            c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
            c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
            c.optimizer.epsilon = o.value("epsilon", c.optimizer.epsilon);
        }
        c.seed = j.value("seed", c.seed);
        if (j.contains("data_horizon_s") && !j.at("data_horizon_s").is_null()) {
            c.data_horizon_s = j.at("data_horizon_s").get<double>();
        }
        c.physics_horizons = j.value("physics_horizons", c.physics_horizons);
        if (j.contains("physics_mode")) set_physics_mode(c, j.at("physics_mode").get<std::string>());
        c.physics_weight = j.value("physics_weight", c.physics_weight);
        if (j.contains("current_pool")) c.current_pool = pool_from_json(j.at("current_pool"), "current_pool");
        if (j.contains("temp_pool")) c.temp_pool = pool_from_json(j.at("temp_pool"), "temp_pool");
        c.patience = j.value("patience", c.patience);
        c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
        if (j.contains("c_rated_ah") && !j.at("c_rated_ah").is_null()) c.c_rated_ah = j.at("c_rated_ah").get<double>();
        c.moving_average_s = j.value("moving_average_s", c.moving_average_s);
        c.data_loss = j.value("data_loss", c.data_loss);
        c.joint_training = j.value("joint_training", c.joint_training);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, std::string("training config: ") + e.what());
    }
    return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Config, "cannot read training config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

TrainConfig resolve_config(const TrainConfig& config, const std::vector<data::Cycle>& train_cycles) {
    if (train_cycles.empty()) fail(ErrorKind::Config, "no training cycles");
    TrainConfig r = config;
    const double period = train_cycles.front().meta.sampling_period_s;
    for (const auto& c : train_cycles) {
        if (std::abs(c.meta.sampling_period_s - period) > 1e-9 * period) {
            fail(ErrorKind::Config, "training cycles have different sampling periods");
        }
    }
    if (!r.data_horizon_s) r.data_horizon_s = period;
    if (r.physics_horizons.empty()) {
        r.physics_horizons = {*r.data_horizon_s, 2.0 * *r.data_horizon_s, 3.0 * *r.data_horizon_s};
    }
    if (!r.c_rated_ah) r.c_rated_ah = train_cycles.front().meta.c_rated_ah;
    if (r.label.empty()) r.label = default_label(r);

    if (r.batch_size == 0) fail(ErrorKind::Config, "batch_size must be >= 1");
    if (!(*r.c_rated_ah > 0.0)) fail(ErrorKind::Config, "rated capacity is unknown; set c_rated_ah");
    const double ratio = *r.data_horizon_s / period;
    if (!(ratio >= 1.0) || std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
        fail(ErrorKind::Config, "data_horizon_s must be a multiple of the sampling period");
    }
    if (r.validation_fraction < 0.0 || r.validation_fraction >= 1.0) {
        fail(ErrorKind::Config, "validation_fraction must lie in [0, 1)");
    }
    if (r.physics_weight < 0.0) fail(ErrorKind::Config, "physics_weight must be >= 0");
    physics::HorizonSet check(r.physics_horizons);
    (void)check;
    if (r.moving_average_s != 0.0 && r.moving_average_s < period) {
        fail(ErrorKind::Config, "moving_average_s must be 0 or at least one sampling period");
    }
    return r;
}

physics::HorizonSet normalization_horizons(const TrainConfig& resolved) {
    std::vector<double> hs = resolved.physics_horizons;
    auto add = [&](double h) {
        if (h > 0.0 && std::find(hs.begin(), hs.end(), h) == hs.end()) hs.push_back(h);
    };
    if (resolved.data_horizon_s) add(*resolved.data_horizon_s);
    if (resolved.physics_mode == PhysicsMode::Single) add(resolved.single_horizon_s);
    return physics::HorizonSet(std::move(hs));
}

}  // namespace socpinn::train
