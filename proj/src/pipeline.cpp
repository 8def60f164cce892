#include "rainfill/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "rainfill/baselines.hpp"
#include "rainfill/errors.hpp"
#include "rainfill/rng.hpp"

namespace rainfill {

using nlohmann::json;

ConditionTensor Window::condition() const { return assemble_condition(masked, observed, aux, observed.grid); }

GridFile window_to_grid(const SynthSequence& s, uint64_t seed) {
    GridFile f;
    f.seed = seed;
    f.add_field("truth", s.target);
    FieldVolume obs(s.mask.grid);
    for (size_t i = 0; i < obs.values.size(); ++i) obs.values[i] = s.mask.values[i];
    f.add_field("observed", obs);
    f.add_field("masked", mask_apply(s.target, s.mask));
    f.add_field("infrared1", s.aux.infrared1);
    f.add_field("infrared2", s.aux.infrared2);
    f.add_field("time", s.aux.time);
    FieldVolume topo(s.target.grid);
    for (int64_t n = 0; n < topo.grid.frames; ++n) std::ranges::copy(s.aux.topography.frame(0), topo.frame(n).begin());
    f.add_field("topography", topo);
    return f;
}

Window window_from_grid(const GridFile& file, std::string name) {
    Window w;
    w.name = std::move(name);
    const auto obs = file.field("observed");
    w.observed = MaskVolume(file.grid, 0);
    for (size_t i = 0; i < obs.values.size(); ++i) {
        if (obs.values[i] != 0.0 && obs.values[i] != 1.0) throw DataError(w.name + ": observed channel is not binary");
        w.observed.values[i] = obs.values[i] == 1.0 ? 1 : 0;
    }
    w.masked = file.field("masked");
    w.aux.infrared1 = file.field("infrared1");
    w.aux.infrared2 = file.field("infrared2");
    w.aux.time = file.field("time");
    w.aux.topography = file.field("topography");
    try {
        check_observed_consistency(w.masked, w.observed);
    } catch (const std::invalid_argument& e) {
        throw DataError(w.name + ": " + e.what());
    }
    if (std::ranges::find(file.channels, "truth") != file.channels.end()) w.truth = file.field("truth");
    return w;
}

std::vector<fs::path> list_grid_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("'" + dir.string() + "' is not a directory");
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".hdr") out.push_back(entry.path().parent_path() / entry.path().stem());
    }
    std::ranges::sort(out);
    return out;
}

std::vector<Window> load_windows(const fs::path& dir) {
    std::vector<Window> out;
    for (const auto& base : list_grid_files(dir)) out.push_back(window_from_grid(read_grid(base), base.filename()));
    if (out.empty()) throw DataError("no grid files in '" + dir.string() + "'");
    return out;
}

namespace {

// Held-out windows draw from a disjoint block of sequence indices.
constexpr int64_t kEvalIndexOffset = 1'000'000;

std::string seq_name(int64_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "seq_%05lld", static_cast<long long>(i));
    return buf;
}

}  // namespace

void cmd_gen_data(const RunConfig& cfg, const fs::path& out) {
    cfg.validate();
    const auto synth = cfg.synth();
    const auto train = gen_corpus(synth, cfg.train_sequences, 0);
    for (size_t i = 0; i < train.size(); ++i) {
        write_grid(out / "train" / seq_name(static_cast<int64_t>(i)), window_to_grid(train[i], cfg.data_seed));
    }
    const auto eval = gen_corpus(synth, cfg.eval_sequences, kEvalIndexOffset);
    for (size_t i = 0; i < eval.size(); ++i) {
        write_grid(out / "eval" / seq_name(static_cast<int64_t>(i)), window_to_grid(eval[i], cfg.data_seed));
    }
}

namespace {

void check_compatible(const RunConfig& a, const RunConfig& b) {
    if (!(a.grid() == b.grid()) || a.base_channels != b.base_channels || a.method != b.method) {
        throw ConfigError("checkpoint config (grid, base_channels, method) differs from the runtime config");
    }
}

double run_step(const RunConfig& cfg, std::span<const TrainingExample> batch, UNet& net, const NoiseSchedule& sched,
                Optimization& opt, const LatWeight& lat, Rng& rng) {
    const TrainStepOptions o{cfg.augment};
    switch (cfg.method_kind()) {
        case Method::Ddpm: return train_step(batch, net, sched, opt, lat, rng, o);
        case Method::RectifiedFlow: return rf_train_step(batch, net, opt, lat, rng, o);
        case Method::Supervised: return supervised_train_step(batch, net, opt, lat, rng, o);
    }
    return 0.0;
}

}  // namespace

Checkpoint cmd_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& ckpt_path,
                     const TrainOptions& options) {
    cfg.validate();
    const auto windows = load_windows(data_dir);
    std::vector<TrainingExample> examples;
    for (const auto& w : windows) {
        if (!w.truth) throw DataError(w.name + ": training windows need a truth channel");
        if (!(w.observed.grid == cfg.grid())) throw DataError(w.name + ": grid differs from the config grid");
        examples.push_back({*w.truth, w.observed, w.aux});
    }

    UNet net(cfg.unet(), cfg.seed);
    auto params = net.parameters();
    AdamOptions ao;
    ao.lr = cfg.lr;
    ao.weight_decay = cfg.weight_decay;
    AdamState adam(params, ao);
    EmaState ema(params, cfg.ema_decay);
    int start = 0;
    std::vector<double> history;
    if (options.resume) {
        const auto prev = read_checkpoint(*options.resume);
        check_compatible(prev.config, cfg);
        prev.restore(net, adam, ema);
        start = prev.epoch;
        history = prev.loss_history;
    }

    const auto sched = cfg.noise_schedule();
    const auto lat = lat_weight(cfg.grid(), cfg.lat_eps);
    Optimization opt{params, &adam, &ema};
    auto ckpt = Checkpoint::capture(cfg, net, adam, ema, start, history);
    if (start >= cfg.epochs) write_checkpoint(ckpt_path, ckpt);

    std::vector<size_t> order(examples.size());
    std::vector<TrainingExample> batch;
    for (int epoch = start; epoch < cfg.epochs; ++epoch) {
        Rng rng(mix_seed(cfg.seed, static_cast<uint64_t>(epoch) + 1));
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
        }
        double total = 0.0;
        int batches = 0;
        for (size_t b = 0; b < order.size(); b += static_cast<size_t>(cfg.batch)) {
            batch.clear();
            for (size_t k = b; k < std::min(order.size(), b + static_cast<size_t>(cfg.batch)); ++k) {
                batch.push_back(examples[order[k]]);
            }
            total += run_step(cfg, batch, net, sched, opt, lat, rng);
            ++batches;
        }
        const double mean = total / batches;
        history.push_back(mean);
        ckpt = Checkpoint::capture(cfg, net, adam, ema, epoch + 1, history);
        write_checkpoint(ckpt_path, ckpt);
        if (options.on_epoch) options.on_epoch(epoch, mean);
    }
    return ckpt;
}

UNet model_from_checkpoint(const Checkpoint& ckpt) {
    UNet net(ckpt.config.unet(), ckpt.config.seed);
    ckpt.load_into(net, true);
    return net;
}

std::vector<FieldVolume> sample_members(const RunConfig& cfg, Denoiser& net, const Window& w,
                                        const ConditionTensor& cond, int members) {
    if (members < 1) throw ConfigError("ensemble size must be >= 1");
    const auto sched = cfg.noise_schedule();
    const auto opts = cfg.sampler_options();
    std::vector<FieldVolume> out;
    for (int k = 0; k < members; ++k) {
        Rng rng(mix_seed(cfg.sample_seed, static_cast<uint64_t>(k)));
        switch (cfg.method_kind()) {
            case Method::Ddpm: out.push_back(masked_sample(w.masked, w.observed, cond, net, sched, rng, opts)); break;
            case Method::RectifiedFlow:
                out.push_back(rf_sample(w.masked, w.observed, cond, net, cfg.rf_steps, rng));
                break;
            case Method::Supervised: out.push_back(supervised_predict(w.masked, w.observed, cond, net)); break;
        }
    }
    return out;
}

FieldVolume ensemble_mean(const std::vector<FieldVolume>& members) {
    if (members.empty()) throw std::invalid_argument("ensemble_mean: no members");
    if (members.size() == 1) return members[0];
    FieldVolume mean(members[0].grid);
    for (const auto& m : members)
        for (size_t i = 0; i < mean.values.size(); ++i) mean.values[i] += m.values[i];
    for (auto& v : mean.values) v /= static_cast<double>(members.size());
    return mean;
}

void cmd_sample(const RunConfig& cfg, const Checkpoint& ckpt, const fs::path& input, int members,
                const fs::path& out) {
    cfg.validate();
    check_compatible(ckpt.config, cfg);
    const auto w = window_from_grid(read_grid(input), input.filename());
    if (!(w.observed.grid == cfg.grid())) throw DataError(w.name + ": grid differs from the config grid");
    auto net = model_from_checkpoint(ckpt);
    const auto outs = sample_members(cfg, net, w, w.condition(), members);
    GridFile f;
    f.seed = cfg.sample_seed;
    for (size_t k = 0; k < outs.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "member_%02zu", k);
        f.add_field(name, outs[k]);
    }
    f.add_field("mean", ensemble_mean(outs));
    write_grid(out, f);
}

void cmd_baseline(const fs::path& input, const std::string& method, const fs::path& out) {
    const auto w = window_from_grid(read_grid(input), input.filename());
    FieldVolume pred;
    if (method == "tli") {
        pred = tli(w.masked);
    } else if (method == "tli-lf") {
        pred = tli_lf(w.masked);
    } else {
        throw ConfigError("baseline method must be tli or tli-lf, got '" + method + "'");
    }
    GridFile f;
    f.add_field("prediction", pred);
    write_grid(out, f);
}

MetricReport cmd_evaluate(const std::vector<fs::path>& preds, const std::vector<fs::path>& truths) {
    if (preds.size() != truths.size() || preds.empty()) {
        throw DataError("evaluate needs the same non-zero number of prediction and truth files (got " +
                        std::to_string(preds.size()) + " and " + std::to_string(truths.size()) + ")");
    }
    std::vector<WindowMetrics> windows;
    for (size_t i = 0; i < preds.size(); ++i) {
        const auto pf = read_grid(preds[i]);
        const auto channel = std::ranges::find(pf.channels, "mean") != pf.channels.end() ? "mean" : "prediction";
        const auto pred = pf.field(channel);
        const auto w = window_from_grid(read_grid(truths[i]), truths[i].filename());
        if (!w.truth) throw DataError(w.name + ": truth file lacks a truth channel");
        if (!(pred.grid == w.truth->grid)) throw DataError(preds[i].string() + ": grid differs from its truth window");
        windows.push_back(evaluate_window(pred, *w.truth, HoleDomain::from_observed(w.observed)));
    }
    return summarize(std::move(windows));
}

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

}  // namespace

void write_report(std::ostream& out, const MetricReport& report) {
    for (size_t i = 0; i < report.windows.size(); ++i) {
        json j{{"schema", "rainfill-metrics"}, {"version", kReportSchemaVersion}, {"record", "window"}, {"index", i}};
        for (auto m : kAllMetrics) j[to_string(m)] = number(report.windows[i].get(m));
        out << j.dump() << "\n";
    }
    json s{{"schema", "rainfill-metrics"},
           {"version", kReportSchemaVersion},
           {"record", "summary"},
           {"windows", report.windows.size()}};
    for (auto m : kAllMetrics) {
        const auto& r = report.of(m);
        s[to_string(m)] = {{"mean", number(r.mean)}, {"lo", number(r.ci.lo)}, {"hi", number(r.ci.hi)}};
    }
    out << s.dump() << "\n";
}

MetricReport parse_report(std::istream& in) {
    MetricReport r;
    bool summary = false;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
            if (j.at("schema") != "rainfill-metrics") throw DataError("not a metrics record");
            if (j.at("version").get<int>() != kReportSchemaVersion) throw DataError("unsupported report version");
            if (j.at("record") == "window") {
                WindowMetrics w;
                w.rmse = number_from(j.at("rmse"));
                w.tg_rmse = number_from(j.at("tg_rmse"));
                w.pearson = number_from(j.at("pearson"));
                w.ms_ssim = number_from(j.at("ms_ssim"));
                w.bdi = number_from(j.at("bdi"));
                r.windows.push_back(w);
            } else if (j.at("record") == "summary") {
                for (size_t k = 0; k < kAllMetrics.size(); ++k) {
                    const auto& m = j.at(to_string(kAllMetrics[k]));
                    r.summary[k] = {number_from(m.at("mean")), {number_from(m.at("lo")), number_from(m.at("hi"))}};
                }
                summary = true;
            }
        } catch (const json::exception& e) {
            throw DataError(std::string("malformed report line: ") + e.what());
        }
    }
    if (!summary) throw DataError("report has no summary record");
    return r;
}

namespace {

SensitivityMeans means_of(const std::vector<WindowMetrics>& ws) {
    SensitivityMeans m;
    for (const auto& w : ws) {
        m.rmse += w.rmse;
        m.ms_ssim += w.ms_ssim;
        m.tg_rmse += w.tg_rmse;
        m.bdi += w.bdi;
    }
    const auto n = static_cast<double>(ws.size());
    m.rmse /= n;
    m.ms_ssim /= n;
    m.tg_rmse /= n;
    m.bdi /= n;
    return m;
}

}  // namespace

AblationResult ablate_windows(const RunConfig& cfg, Denoiser& net, const std::vector<Window>& windows,
                              int members) {
    auto run = [&](std::optional<ConditionGroup> drop) {
        std::vector<WindowMetrics> ws;
        for (const auto& w : windows) {
            if (!w.truth) throw DataError(w.name + ": ablation windows need a truth channel");
            auto cond = w.condition();
            if (drop) cond.fill_group(*drop, kMissing);
            const auto pred = ensemble_mean(sample_members(cfg, net, w, cond, members));
            ws.push_back(evaluate_window(pred, *w.truth, HoleDomain::from_observed(w.observed)));
        }
        return means_of(ws);
    };
    AblationResult r;
    r.full = run(std::nullopt);
    for (auto g : kAllConditionGroups) r.ablated.emplace_back(g, run(g));
    r.table = sensitivity(r.full, r.ablated);
    return r;
}

AblationResult cmd_ablate(const RunConfig& cfg, const Checkpoint& ckpt, const fs::path& data_dir, int members) {
    cfg.validate();
    check_compatible(ckpt.config, cfg);
    auto net = model_from_checkpoint(ckpt);
    return ablate_windows(cfg, net, load_windows(data_dir), members);
}

void write_sensitivity(std::ostream& out, const AblationResult& r) {
    json full{{"schema", "rainfill-sensitivity"},
              {"version", kReportSchemaVersion},
              {"record", "full"},
              {"rmse", r.full.rmse},
              {"ms_ssim", r.full.ms_ssim},
              {"tg_rmse", r.full.tg_rmse},
              {"bdi", r.full.bdi}};
    out << full.dump() << "\n";
    for (const auto& row : r.table.rows) {
        json j{{"schema", "rainfill-sensitivity"},
               {"version", kReportSchemaVersion},
               {"record", "group"},
               {"group", to_string(row.group)},
               {"delta_rmse", row.delta_m[0]},
               {"delta_ms_ssim", row.delta_m[1]},
               {"delta_tg_rmse", row.delta_m[2]},
               {"delta_bdi", row.delta_m[3]},
               {"delta", row.delta},
               {"contribution", number(row.contribution)}};
        out << j.dump() << "\n";
    }
}

}  // namespace rainfill
