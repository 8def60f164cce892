#include "rainfill/checkpoint.hpp"

#include <charconv>
#include <cstring>

#include <json.hpp>

#include "rainfill/errors.hpp"
#include "rainfill/gridfile.hpp"

namespace rainfill {

Checkpoint Checkpoint::capture(const RunConfig& config, const UNet& net, const AdamState& adam, const EmaState& ema,
                               int epoch, std::vector<double> loss_history) {
    Checkpoint c;
    c.config = config;
    c.epoch = epoch;
    c.step = adam.step;
    for (const auto& [name, t] : net.store().named()) {
        c.names.push_back(name);
        c.live.emplace_back(t.data().begin(), t.data().end());
    }
    c.ema = ema.shadow;
    c.adam_m = adam.first_moment;
    c.adam_v = adam.second_moment;
    c.loss_history = std::move(loss_history);
    return c;
}

namespace {

void copy_into(const std::vector<std::vector<double>>& src, const std::vector<std::string>& names, UNet& net) {
    const auto& named = net.store().named();
    if (named.size() != names.size()) {
        throw DataError("checkpoint holds " + std::to_string(names.size()) + " arrays, model expects " +
                        std::to_string(named.size()));
    }
    for (size_t i = 0; i < named.size(); ++i) {
        Tensor t = named[i].second;
        if (named[i].first != names[i] || static_cast<int64_t>(src[i].size()) != t.numel()) {
            throw DataError("checkpoint array '" + names[i] + "' does not match model parameter '" + named[i].first +
                            "'");
        }
        std::ranges::copy(src[i], t.data_mut().begin());
    }
}

void check_sizes(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& ref,
                 const char* what) {
    bool ok = a.size() == ref.size();
    for (size_t i = 0; ok && i < a.size(); ++i) ok = a[i].size() == ref[i].size();
    if (!ok) throw DataError(std::string("checkpoint ") + what + " arrays do not match the model");
}

std::string format_double(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

}  // namespace

void Checkpoint::load_into(UNet& net, bool use_ema) const { copy_into(use_ema ? ema : live, names, net); }

void Checkpoint::restore(UNet& net, AdamState& adam, EmaState& ema_state) const {
    copy_into(live, names, net);
    check_sizes(adam_m, adam.first_moment, "adam_m");
    check_sizes(adam_v, adam.second_moment, "adam_v");
    check_sizes(ema, ema_state.shadow, "ema");
    adam.first_moment = adam_m;
    adam.second_moment = adam_v;
    adam.step = step;
    ema_state.shadow = ema;
}

void write_checkpoint(const std::filesystem::path& base, const Checkpoint& c) {
    Header h;
    h.add("format", "rainfill-checkpoint");
    h.add("version", std::to_string(kCheckpointVersion));
    h.add("dtype", "f64le");
    h.add("epoch", std::to_string(c.epoch));
    h.add("step", std::to_string(c.step));
    h.add("config", nlohmann::json::parse(c.config.to_json()).dump());
    std::string losses;
    for (size_t i = 0; i < c.loss_history.size(); ++i) losses += (i ? "," : "") + format_double(c.loss_history[i]);
    h.add("loss_history", losses);
    std::vector<uint8_t> payload;
    for (size_t i = 0; i < c.names.size(); ++i) {
        h.add("array", c.names[i] + " " + std::to_string(c.live[i].size()));
        append_f64le(payload, c.live[i]);
        append_f64le(payload, c.ema[i]);
        append_f64le(payload, c.adam_m[i]);
        append_f64le(payload, c.adam_v[i]);
    }
    write_container(base, h, payload);
}

Checkpoint read_checkpoint(const std::filesystem::path& base) {
    auto [h, payload] = read_container(base);
    if (h.get("format") != "rainfill-checkpoint") throw DataError("'" + base.string() + "' is not a checkpoint");
    if (h.get("version") != std::to_string(kCheckpointVersion)) {
        throw DataError("unsupported checkpoint version " + h.get("version"));
    }
    if (h.get("dtype") != "f64le") throw DataError("checkpoint dtype must be f64le");
    Checkpoint c;
    c.config = RunConfig::from_json(h.get("config"));
    try {
        c.epoch = std::stoi(h.get("epoch"));
        c.step = std::stoll(h.get("step"));
        std::string item;
        const auto& losses = h.get("loss_history");
        size_t pos = 0;
        while (pos < losses.size()) {
            const auto comma = losses.find(',', pos);
            item = losses.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            c.loss_history.push_back(std::stod(item));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    } catch (const std::logic_error&) {
        throw DataError("checkpoint header has a malformed number");
    }
    size_t offset = 0;
    auto take = [&](size_t count) {
        if (offset + count * 8 > payload.size()) throw DataError("checkpoint payload is truncated");
        auto v = decode_f64le(std::span(payload).subspan(offset, count * 8));
        offset += count * 8;
        return v;
    };
    for (const auto& entry : h.get_all("array")) {
        const auto space = entry.rfind(' ');
        if (space == std::string::npos) throw DataError("malformed array entry '" + entry + "'");
        c.names.push_back(entry.substr(0, space));
        size_t count = 0;
        try {
            count = std::stoull(entry.substr(space + 1));
        } catch (const std::logic_error&) {
            throw DataError("malformed array entry '" + entry + "'");
        }
        c.live.push_back(take(count));
        c.ema.push_back(take(count));
        c.adam_m.push_back(take(count));
        c.adam_v.push_back(take(count));
    }
    if (offset != payload.size()) throw DataError("checkpoint payload has trailing bytes");
    return c;
}

}  // namespace rainfill
