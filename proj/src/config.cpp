#include "rainfill/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rainfill/errors.hpp"

namespace rainfill {

using nlohmann::json;

std::string to_string(Method m) {
    switch (m) {
        case Method::Ddpm: return "ddpm";
        case Method::RectifiedFlow: return "rf";
        case Method::Supervised: return "supervised";
    }
    return "?";
}

Method method_from_string(const std::string& name) {
    if (name == "ddpm") return Method::Ddpm;
    if (name == "rf") return Method::RectifiedFlow;
    if (name == "supervised") return Method::Supervised;
    throw ConfigError("method: unknown value '" + name + "' (expected ddpm|rf|supervised)");
}

#define RAINFILL_CONFIG_FIELDS(X)                                                                          \
    X(frames) X(rows) X(cols) X(steps) X(schedule) X(beta_min) X(beta_max) X(cosine_s) X(sampler)          \
    X(ddim_steps) X(rf_steps) X(method) X(base_channels) X(p_drop) X(lr) X(weight_decay) X(epochs) X(batch) \
    X(ema_decay) X(lat_eps) X(augment) X(x_p) X(p_s) X(ir_low) X(ir_high) X(topo_low) X(topo_high)         \
    X(logistic_s_low) X(logistic_s_high) X(train_sequences) X(eval_sequences) X(blobs) X(swath_width)      \
    X(swath_bands) X(ensemble) X(seed) X(data_seed) X(sample_seed)

namespace {

json to_object(const RunConfig& c) {
    json j = json::object();
#define X(name) j[#name] = c.name;
    RAINFILL_CONFIG_FIELDS(X)
#undef X
    return j;
}

template <typename T>
void assign(T& field, const json& v, const char* name) {
    try {
        field = v.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(name) + ": " + e.what());
    }
}

void check(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

}  // namespace

std::vector<std::string> RunConfig::keys() {
    std::vector<std::string> out;
#define X(name) out.emplace_back(#name);
    RAINFILL_CONFIG_FIELDS(X)
#undef X
    return out;
}

std::string RunConfig::to_json() const { return to_object(*this).dump(2); }

RunConfig RunConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c;
    const auto known = keys();
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
#define X(name) \
    if (j.contains(#name)) assign(c.name, j.at(#name), #name);
    RAINFILL_CONFIG_FIELDS(X)
#undef X
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

void RunConfig::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config '" + path.string() + "'");
    out << to_json() << "\n";
}

void RunConfig::set(const std::string& key, const std::string& value) {
    json j = to_object(*this);
    if (!j.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    json parsed;
    if (j[key].is_string()) {
        parsed = value;
    } else {
        try {
            parsed = json::parse(value);
        } catch (const json::exception&) {
            throw ConfigError(key + ": cannot parse '" + value + "'");
        }
    }
    if (j[key].is_number_integer() && !parsed.is_number_integer()) {
        throw ConfigError(key + ": expected an integer, got '" + value + "'");
    }
    if (j[key].is_number_unsigned() && parsed.is_number_integer() && parsed.get<int64_t>() < 0) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
    }
    if (j[key].is_boolean() && !parsed.is_boolean()) throw ConfigError(key + ": expected true or false");
    if (j[key].is_number() && !parsed.is_number()) throw ConfigError(key + ": expected a number");
    j[key] = parsed;
    *this = from_json(j.dump());
}

std::string RunConfig::get(const std::string& key) const {
    const json j = to_object(*this);
    if (!j.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    return j[key].is_string() ? j[key].get<std::string>() : j[key].dump();
}

void RunConfig::validate() const {
    check(frames >= 1, "frames must be >= 1");
    check(rows >= 8 && rows % 8 == 0, "rows must be a positive multiple of 8");
    check(cols >= 8 && cols % 8 == 0, "cols must be a positive multiple of 8");
    check(steps >= 1, "steps must be >= 1");
    check(schedule == "linear" || schedule == "cosine", "schedule must be linear or cosine");
    check(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0, "need 0 < beta_min <= beta_max < 1");
    check(cosine_s > 0.0, "cosine_s must be > 0");
    check(sampler == "ancestral" || sampler == "ddim", "sampler must be ancestral or ddim");
    check(ddim_steps >= 1, "ddim_steps must be >= 1");
    check(rf_steps >= 1, "rf_steps must be >= 1");
    method_from_string(method);
    check(base_channels >= 4 && base_channels % 4 == 0, "base_channels must be a positive multiple of 4");
    check(p_drop >= 0.0 && p_drop <= 1.0, "p_drop must lie in [0, 1]");
    check(lr > 0.0, "lr must be > 0");
    check(weight_decay >= 0.0, "weight_decay must be >= 0");
    check(epochs >= 0, "epochs must be >= 0");
    check(batch >= 1, "batch must be >= 1");
    check(ema_decay > 0.0 && ema_decay < 1.0, "ema_decay must lie in (0, 1)");
    check(lat_eps >= 0.0 && lat_eps <= 1.0, "lat_eps must lie in [0, 1]");
    check(x_p > 0.0, "x_p must be > 0");
    check(p_s > 0.0 && p_s < 1.0, "p_s must lie in (0, 1)");
    check(ir_low != ir_high, "ir_low and ir_high must differ");
    check(topo_low != topo_high, "topo_low and topo_high must differ");
    check(logistic_s_low > 0.0 && logistic_s_low < 1.0 && logistic_s_high > 0.0 && logistic_s_high < 1.0 &&
              logistic_s_low != logistic_s_high,
          "logistic targets must lie in (0, 1) and differ");
    check(train_sequences >= 1, "train_sequences must be >= 1");
    check(eval_sequences >= 1, "eval_sequences must be >= 1");
    check(blobs >= 0, "blobs must be >= 0");
    check(swath_width >= 1, "swath_width must be >= 1");
    check(swath_bands >= 1, "swath_bands must be >= 1");
    check(ensemble >= 1, "ensemble must be >= 1");
}

NoiseSchedule RunConfig::noise_schedule() const {
    return schedule == "cosine" ? cosine_schedule(steps, cosine_s) : linear_schedule(steps, beta_min, beta_max);
}

UNetConfig RunConfig::unet() const {
    UNetConfig u;
    u.base_channels = base_channels;
    u.p_drop = p_drop;
    u.with_time = method_kind() != Method::Supervised;
    return u;
}

SamplerOptions RunConfig::sampler_options() const {
    SamplerOptions s;
    s.kind = sampler_kind_from_string(sampler);
    s.ddim_steps = ddim_steps;
    return s;
}

SynthConfig RunConfig::synth() const {
    SynthConfig s;
    s.grid = grid();
    s.blobs = blobs;
    s.swath_width = swath_width;
    s.swath_bands = swath_bands;
    s.seed = data_seed;
    s.transform = ExpTransform{x_p, p_s};
    s.infrared_tf = LogisticTransform{ir_low, ir_high, logistic_s_low, logistic_s_high};
    s.topography_tf = LogisticTransform{topo_low, topo_high, logistic_s_low, logistic_s_high};
    return s;
}

}  // namespace rainfill
