#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>

#include "rainfill/config.hpp"
#include "rainfill/errors.hpp"
#include "rainfill/pipeline.hpp"
#include "rainfill/render.hpp"

using namespace rainfill;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfigFailure = 2, kDataFailure = 3, kNumericFailure = 4 };

struct ConfigFlags {
    std::string file;
    std::map<std::string, std::string> overrides;

    RunConfig resolve(std::optional<RunConfig> base = std::nullopt) const {
        RunConfig cfg = file.empty() ? base.value_or(RunConfig{}) : RunConfig::load(file);
        for (const auto& [k, v] : overrides) cfg.set(k, v);
        cfg.validate();
        return cfg;
    }
};

void set_threads() {
    if (const char* env = std::getenv("RAINFILL_THREADS")) {
        const int n = std::atoi(env);
        if (n < 1) throw ConfigError("RAINFILL_THREADS must be a positive integer");
        omp_set_num_threads(n);
    }
}

int run(int argc, char** argv) {
    CLI::App app{"Diffusion inpainting of gridded precipitation sequences"};
    app.require_subcommand(1);
    app.fallthrough();

    ConfigFlags flags;
    app.add_option("--config", flags.file, "JSON run config")->check(CLI::ExistingFile);
    const RunConfig defaults;
    for (const auto& key : RunConfig::keys()) {
        std::string names = "--" + key;
        std::string dashed = key;
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        if (dashed != key) names += ",--" + dashed;
        app.add_option_function<std::string>(
               names, [&flags, key](const std::string& v) { flags.overrides[key] = v; },
               "config key (default " + defaults.get(key) + ")")
            ->group("Config overrides");
    }

    std::string out, data, checkpoint, input, method, channel, resume, log, report;
    std::vector<std::string> preds, truths;
    int members = 0;

    auto* gen = app.add_subcommand("gen-data", "write synthetic train/eval windows");
    gen->add_option("--out", out, "output directory")->required();

    auto* train = app.add_subcommand("train", "train a model, checkpointing every epoch");
    train->add_option("--data", data, "directory of training windows")->required();
    train->add_option("--checkpoint", checkpoint, "checkpoint base path")->required();
    train->add_option("--resume", resume, "checkpoint to continue from");
    train->add_option("--log", log, "loss log file (one line per epoch)");

    auto* sample = app.add_subcommand("sample", "fill one window with an ensemble");
    sample->add_option("--checkpoint", checkpoint)->required();
    sample->add_option("--input", input, "window base path")->required();
    sample->add_option("--out", out, "output base path")->required();
    sample->add_option("--members", members, "ensemble size (default: config ensemble)");

    auto* baseline = app.add_subcommand("baseline", "non-learned fill");
    baseline->add_option("--method", method, "tli or tli-lf")->required();
    baseline->add_option("--input", input)->required();
    baseline->add_option("--out", out)->required();

    auto* evaluate = app.add_subcommand("evaluate", "hole-domain metrics with bootstrap intervals");
    evaluate->add_option("--pred", preds, "prediction base paths")->required();
    evaluate->add_option("--truth", truths, "truth window base paths, same order")->required();
    evaluate->add_option("--report", report, "JSON-lines output (default stdout)");

    auto* ablate = app.add_subcommand("ablate", "condition-group sensitivity analysis");
    ablate->add_option("--checkpoint", checkpoint)->required();
    ablate->add_option("--data", data, "directory of evaluation windows")->required();
    ablate->add_option("--members", members, "ensemble size (default: config ensemble)");
    ablate->add_option("--report", report, "JSON-lines output (default stdout)");

    auto* render = app.add_subcommand("render", "write one PPM image per frame");
    render->add_option("--input", input)->required();
    render->add_option("--channel", channel, "channel name (default: first)");
    render->add_option("--out", out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigFailure;
    }
    set_threads();

    auto with_report = [&](auto&& write) {
        if (report.empty()) {
            write(std::cout);
        } else {
            std::ofstream f(report);
            if (!f) throw DataError("cannot write '" + report + "'");
            write(f);
        }
    };

    if (*gen) {
        cmd_gen_data(flags.resolve(), out);
    } else if (*train) {
        std::optional<RunConfig> base;
        if (!resume.empty()) base = read_checkpoint(resume).config;
        const auto cfg = flags.resolve(base);
        std::ofstream log_file;
        if (!log.empty()) log_file.open(log, std::ios::app);
        TrainOptions opts;
        if (!resume.empty()) opts.resume = resume;
        opts.on_epoch = [&](int epoch, double loss) {
            std::cout << "epoch " << epoch + 1 << "/" << cfg.epochs << " loss " << loss << std::endl;
            if (log_file) log_file << epoch + 1 << " " << loss << "\n" << std::flush;
        };
        cmd_train(cfg, data, checkpoint, opts);
    } else if (*sample) {
        const auto ckpt = read_checkpoint(checkpoint);
        const auto cfg = flags.resolve(ckpt.config);
        cmd_sample(cfg, ckpt, input, members > 0 ? members : cfg.ensemble, out);
    } else if (*baseline) {
        cmd_baseline(input, method, out);
    } else if (*evaluate) {
        std::vector<fs::path> p(preds.begin(), preds.end()), t(truths.begin(), truths.end());
        const auto r = cmd_evaluate(p, t);
        with_report([&](std::ostream& os) { write_report(os, r); });
    } else if (*ablate) {
        const auto ckpt = read_checkpoint(checkpoint);
        const auto cfg = flags.resolve(ckpt.config);
        const auto r = cmd_ablate(cfg, ckpt, data, members > 0 ? members : cfg.ensemble);
        with_report([&](std::ostream& os) { write_sensitivity(os, r); });
    } else if (*render) {
        const auto file = read_grid(input);
        const auto name = channel.empty() ? file.channels.at(0) : channel;
        for (const auto& p : render_frames(file.field(name), out, name)) std::cout << p.string() << "\n";
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigFailure;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataFailure;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kNumericFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
}
