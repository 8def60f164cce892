// Acceptance suite: one PASS/FAIL line per criterion.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "rainfill/baselines.hpp"
#include "rainfill/condition.hpp"
#include "rainfill/diffusion.hpp"
#include "rainfill/metrics.hpp"
#include "rainfill/ops.hpp"
#include "rainfill/pipeline.hpp"
#include "rainfill/schedule.hpp"
#include "rainfill/synthgen.hpp"
#include "rainfill/unet.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace rainfill;
using rainfill::testing::BruteMetrics;
using rainfill::testing::check_gradients;
using rainfill::testing::GradCheckOptions;
using rainfill::testing::random_tensor;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double max_abs(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Tensor project(const Tensor& y, const Tensor& r) { return ops::sum(ops::mul(y, r)); }

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("rainfill_accept_" + tag + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 1 ---------------------------------------------------------------------------

Outcome gradient_fidelity() {
    const auto t0 = Clock::now();
    Rng rng(101);
    std::vector<std::pair<std::string, double>> worst;
    auto op = [&](const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor> in) {
        worst.emplace_back(name, check_gradients(f, std::move(in)).max_rel);
    };

    auto a = random_tensor({2, 3, 2, 2, 2}, rng), b = random_tensor({2, 3, 2, 2, 2}, rng);
    auto r = random_tensor({2, 3, 2, 2, 2}, rng, false);
    auto s = random_tensor({1}, rng);
    op("add", [&] { return project(ops::add(a, b), r); }, {a, b});
    op("add (scalar operand)", [&] { return project(ops::add(a, s), r); }, {a, s});
    op("sub", [&] { return project(ops::sub(a, b), r); }, {a, b});
    op("mul", [&] { return project(ops::mul(a, b), r); }, {a, b});
    op("scale", [&] { return project(ops::scale(a, -1.7), r); }, {a});
    op("add_scalar", [&] { return project(ops::add_scalar(a, 0.3), r); }, {a});
    op("square", [&] { return project(ops::square(a), r); }, {a});
    op("silu", [&] { return project(ops::silu(a), r); }, {a});
    op("sigmoid", [&] { return project(ops::sigmoid(a), r); }, {a});
    op("sum", [&] { return ops::sum(ops::square(a)); }, {a});
    op("mean", [&] { return ops::mean(ops::square(a)); }, {a});
    auto r6 = random_tensor({6, 8}, rng, false);
    op("reshape", [&] { return project(ops::reshape(a, {6, 8}), r6); }, {a});

    auto x2 = random_tensor({3, 5}, rng), lw = random_tensor({4, 5}, rng), lb = random_tensor({4}, rng);
    auto r2 = random_tensor({3, 4}, rng, false);
    op("linear", [&] { return project(ops::linear(x2, lw, lb), r2); }, {x2, lw, lb});

    auto x = random_tensor({2, 2, 3, 4, 4}, rng);
    auto cw = random_tensor({3, 2, 3, 3, 3}, rng), cb = random_tensor({3}, rng);
    auto rc = random_tensor({2, 3, 3, 4, 4}, rng, false);
    op("conv3d", [&] { return project(ops::conv3d(x, cw, cb, {1, 1, 1}, {1, 1, 1}), rc); }, {x, cw, cb});
    auto tw = random_tensor({2, 3, 1, 2, 2}, rng), tb = random_tensor({3}, rng);
    auto rt = random_tensor({2, 3, 3, 8, 8}, rng, false);
    op("conv_transpose3d", [&] { return project(ops::conv_transpose3d(x, tw, tb, {1, 2, 2}), rt); }, {x, tw, tb});
    auto rp = random_tensor({2, 2, 3, 2, 2}, rng, false);
    op("maxpool3d", [&] { return project(ops::maxpool3d(x), rp); }, {x});
    auto xg = random_tensor({2, 8, 2, 3, 3}, rng), gm = random_tensor({8}, rng), bt = random_tensor({8}, rng);
    auto rg = random_tensor({2, 8, 2, 3, 3}, rng, false);
    op("group_norm", [&] { return project(ops::group_norm(xg, 4, gm, bt), rg); }, {xg, gm, bt});
    auto ra = random_tensor({2, 2, 1, 1, 1}, rng, false);
    op("adaptive_avg_pool3d", [&] { return project(ops::adaptive_avg_pool3d(x), ra); }, {x});
    auto y = random_tensor({2, 1, 3, 4, 4}, rng);
    auto rcat = random_tensor({2, 3, 3, 4, 4}, rng, false);
    op("concat", [&] { return project(ops::concat({x, y}, 1), rcat); }, {x, y});
    auto v = random_tensor({2, 2}, rng), sc = random_tensor({2, 2}, rng);
    auto rx = random_tensor(x.shape(), rng, false);
    op("add_channel_bias", [&] { return project(ops::add_channel_bias(x, v), rx); }, {x, v});
    op("scale_channels", [&] { return project(ops::scale_channels(x, sc), rx); }, {x, sc});
    auto tgt = random_tensor(x.shape(), rng, false);
    const std::vector<double> rw{0.2, 1.1, 1.5, 1.2};
    op("row_weighted_mse", [&] { return ops::row_weighted_mse(x, tgt, rw); }, {x});
    op("row_weighted_l1", [&] { return ops::row_weighted_l1(x, tgt, rw); }, {x});

    double op_max = 0.0;
    std::string op_name;
    for (const auto& [n, e] : worst)
        if (e >= op_max) op_max = e, op_name = n;

    UNetConfig toy;
    toy.base_channels = 4;
    UNet net(toy, 12);
    auto xin = random_tensor({1, 1, 2, 8, 8}, rng);
    std::vector<double> cv(static_cast<size_t>(10 * 2 * 8 * 8));
    for (auto& c : cv) c = rng.uniform();
    const auto cond = Tensor::from_data({1, 10, 2, 8, 8}, cv);
    const auto rn = random_tensor({1, 1, 2, 8, 8}, rng, false);
    const double times[] = {42.0};
    std::vector<Tensor> inputs{xin};
    for (const auto& t : net.parameters()) inputs.push_back(t);
    GradCheckOptions opt;
    opt.max_coords = 4;
    const auto full = check_gradients([&] { return project(net.forward(xin, times, cond, nullptr), rn); }, inputs, opt);

    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = op_max < 1e-4 && full.max_rel < 1e-3 && secs < 120.0;
    o.detail = std::to_string(worst.size()) + " ops, worst " + op_name + " rel " + fmt("%.2e", op_max) +
               " (< 1e-4); toy U-Net rel " + fmt("%.2e", full.max_rel) + " over " + std::to_string(full.checked) +
               " coords (< 1e-3); " + fmt("%.1f", secs) + " s (< 120 s)";
    return o;
}

// 2 ---------------------------------------------------------------------------

Outcome diffusion_algebra() {
    Rng rng(202);
    double worst_rt = 0.0, worst_step = 0.0;
    const std::vector<NoiseSchedule> scheds{linear_schedule(1000), linear_schedule(200, 5e-4, 0.1),
                                            cosine_schedule(1000)};
    for (int k = 0; k < 1000; ++k) {
        const auto& s = scheds[static_cast<size_t>(k) % scheds.size()];
        const size_t n = 16 + static_cast<size_t>(rng.uniform_int(0, 48));
        std::vector<double> x0(n), eps(n), z(n);
        for (auto& e : x0) e = rng.uniform();
        rng.fill_normal(eps);
        rng.fill_normal(z);
        const int t = static_cast<int>(rng.uniform_int(1, s.steps));

        const auto xt = noised(x0, eps, t, s);
        const auto v = v_target(x0, eps, t, s);
        const auto rec = reconstruct(xt, v, t, s);
        worst_rt = std::max({worst_rt, max_abs(rec.x0, x0), max_abs(rec.noise, eps)});

        const auto mine = ancestral_step(xt, v, t, s, z);
        const auto ref = rainfill::testing::eps_path_step(xt, rec.noise, t, s, z);
        worst_step = std::max(worst_step, max_abs(mine, ref));
    }
    Outcome o;
    o.pass = worst_rt < 1e-10 && worst_step < 1e-10;
    o.detail = "1000 instances; v<->(eps, x0) roundtrip max " + fmt("%.2e", worst_rt) +
               ", ancestral vs eps-path max " + fmt("%.2e", worst_step) + " (both < 1e-10)";
    return o;
}

// 3 ---------------------------------------------------------------------------

Outcome schedule_invariants() {
    bool ok = true;
    double worst = 0.0;
    auto check = [&](const NoiseSchedule& s, const std::vector<double>& betas) {
        ok = ok && s.alpha_bar[0] == 1.0;
        for (int t = 1; t <= s.steps; ++t) {
            ok = ok && s.beta[t] > 0.0 && s.beta[t] < 1.0 && s.alpha_bar[t] < s.alpha_bar[t - 1];
        }
        double prod = 1.0;
        for (int t = 1; t <= s.steps; ++t) {
            prod *= 1.0 - betas[static_cast<size_t>(t)];
            worst = std::max(worst, std::abs(prod - s.alpha_bar[t]));
        }
    };
    for (int T : {10, 200, 1000}) {
        for (auto [lo, hi] : {std::pair{1e-4, 0.02}, std::pair{5e-4, 0.1}}) {
            std::vector<double> b(static_cast<size_t>(T) + 1);
            for (int t = 1; t <= T; ++t) b[static_cast<size_t>(t)] = lo + (hi - lo) * (t - 1) / (T - 1);
            check(linear_schedule(T, lo, hi), b);
        }
        const double off = 0.008;
        auto f = [&](double u) {
            const double c = std::cos((u + off) / (1.0 + off) * M_PI / 2.0);
            return c * c;
        };
        std::vector<double> b(static_cast<size_t>(T) + 1);
        for (int t = 1; t <= T; ++t) {
            b[static_cast<size_t>(t)] = std::min(1.0 - f(static_cast<double>(t) / T) / f(static_cast<double>(t - 1) / T), 0.999);
        }
        check(cosine_schedule(T, off), b);
    }
    Outcome o;
    o.pass = ok && worst < 1e-12;
    o.detail = std::string("linear (two beta ranges) and cosine s=0.008 at T in {10, 200, 1000}: ") +
               (ok ? "abar_0 = 1, strictly decreasing, beta in (0, 1)" : "an invariant failed") +
               "; stored vs recomputed abar max " + fmt("%.2e", worst) + " (< 1e-12)";
    return o;
}

// 4 ---------------------------------------------------------------------------

Outcome mask_preservation() {
    Rng rng(404);
    const GridSpec g{2, 8, 16};
    SynthConfig sc;
    sc.grid = g;
    const auto aux_src = gen_corpus(sc, 1)[0].aux;
    const auto sched = linear_schedule(40, 5e-4, 0.1);
    rainfill::testing::ToyDenoiser toy;
    int pairs = 0, steps = 0, violations = 0;
    for (int k = 0; k < 100; ++k) {
        FieldVolume truth(g);
        for (auto& v : truth.values) v = rng.uniform();
        MaskVolume mask(g, 0);
        const double density = rng.uniform(0.1, 0.9);
        for (auto& m : mask.values) m = rng.bernoulli(density) ? 1 : 0;
        const auto observed = mask_apply(truth, mask);
        const auto cond = assemble_condition(observed, mask, aux_src, g);
        for (auto kind : {SamplerKind::Ancestral, SamplerKind::Ddim}) {
            SamplerOptions opt;
            opt.kind = kind;
            opt.ddim_steps = 10;
            opt.on_step = [&](int, std::span<const double> x) {
                ++steps;
                for (size_t i = 0; i < x.size(); ++i)
                    if (mask.values[i] && x[i] != observed.values[i]) ++violations;
            };
            Rng srng(mix_seed(404, static_cast<uint64_t>(k)));
            const auto out = masked_sample(observed, mask, cond, toy, sched, srng, opt);
            for (size_t i = 0; i < out.values.size(); ++i)
                if (mask.values[i] && out.values[i] != observed.values[i]) ++violations;
            ++pairs;
        }
    }
    Outcome o;
    o.pass = violations == 0 && pairs == 200;
    o.detail = "100 random mask/field pairs x {ancestral, DDIM}: " + std::to_string(steps) +
               " steps checked, " + std::to_string(violations) + " observed pixels changed (bit-exact required)";
    return o;
}

// 5 ---------------------------------------------------------------------------

Outcome oracle_convergence() {
    const auto t0 = Clock::now();
    RunConfig cfg;
    const GridSpec g = cfg.grid();
    auto sc = cfg.synth();
    double worst = 0.0;
    int windows = 0;
    for (const auto& sched : {cfg.noise_schedule(), linear_schedule(1000)}) {
        for (const auto& seq : gen_corpus(sc, 5)) {
            const auto observed = mask_apply(seq.target, seq.mask);
            const auto cond = assemble_condition(observed, seq.mask, seq.aux, g);
            rainfill::testing::VOracle oracle(seq.target.values, sched);
            Rng rng(505 + static_cast<uint64_t>(windows));
            SamplerOptions opt;
            opt.kind = SamplerKind::Ddim;
            opt.ddim_steps = 50;
            const auto out = masked_sample(observed, seq.mask, cond, oracle, sched, rng, opt);
            for (size_t i = 0; i < out.values.size(); ++i)
                if (!seq.mask.values[i]) worst = std::max(worst, std::abs(out.values[i] - seq.target.values[i]));
            ++windows;
        }
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = worst < 1e-3 && secs < 60.0;
    o.detail = std::to_string(windows) + " windows (T=200 and T=1000), DDIM(50) hole max-abs " + fmt("%.2e", worst) +
               " (< 1e-3); " + fmt("%.1f", secs) + " s (< 60 s)";
    return o;
}

// 6 ---------------------------------------------------------------------------

int smoke_epochs() {
    if (const char* e = std::getenv("RAINFILL_ACCEPT_EPOCHS")) return std::atoi(e);
    return 100;
}

Outcome training_smoke() {
    const auto t0 = Clock::now();
    TempDir dir("smoke");
    RunConfig cfg;  // 16 x 32, L = 3, T = 200, base 16, 64 training sequences
    cfg.epochs = smoke_epochs();
    cfg.ema_decay = 0.995;
    cfg.ensemble = 4;
    cmd_gen_data(cfg, dir.path / "data");
    const auto ck = cmd_train(cfg, dir.path / "data/train", dir.path / "ck");
    const auto& h = ck.loss_history;
    const size_t tail = std::min<size_t>(10, h.size());
    double last = 0.0;
    for (size_t i = h.size() - tail; i < h.size(); ++i) last += h[i];
    last /= static_cast<double>(tail);
    const double train_secs = seconds_since(t0);

    auto net = model_from_checkpoint(ck);
    double model = 0.0, base_tli = 0.0, base_lf = 0.0;
    const auto eval = load_windows(dir.path / "data/eval");
    for (const auto& w : eval) {
        const auto domain = HoleDomain::from_observed(w.observed);
        const auto pred = ensemble_mean(sample_members(cfg, net, w, w.condition(), cfg.ensemble));
        model += rmse_hole(pred, *w.truth, domain);
        base_tli += rmse_hole(tli(w.masked), *w.truth, domain);
        base_lf += rmse_hole(tli_lf(w.masked), *w.truth, domain);
    }
    const auto n = static_cast<double>(eval.size());
    model /= n;
    base_tli /= n;
    base_lf /= n;
    const double secs = seconds_since(t0);

    Outcome o;
    const bool loss_ok = last < 0.1 * h.front();
    o.pass = loss_ok && model < base_tli;
    o.detail = std::to_string(h.size()) + " epochs: first-epoch loss " + fmt("%.4f", h.front()) +
               ", mean of last 10 " + fmt("%.4f", last) + " (< " + fmt("%.4f", 0.1 * h.front()) +
               "); held-out hole RMSE model " + fmt("%.4f", model) + " vs TLI " + fmt("%.4f", base_tli) +
               " (TLI-LF " + fmt("%.4f", base_lf) + ") over " + std::to_string(eval.size()) + " windows, K=" +
               std::to_string(cfg.ensemble) + "; train " + fmt("%.0f", train_secs) + " s, total " +
               fmt("%.0f", secs) + " s";
    return o;
}

// 7 ---------------------------------------------------------------------------

Outcome metric_oracles() {
    Rng rng(707);
    double worst = 0.0;
    int instances = 0;
    SsimOptions one;
    one.scales = 1;
    for (int k = 0; k < 50; ++k) {
        const GridSpec g{1 + rng.uniform_int(1, 3), 4 * rng.uniform_int(2, 4), 4 * rng.uniform_int(2, 6)};
        FieldVolume p(g), x(g);
        for (auto& v : p.values) v = rng.uniform();
        for (auto& v : x.values) v = rng.uniform();
        MaskVolume hole(g, 0);
        // a rectangle in every frame plus scattered pixels
        const int64_t r0 = rng.uniform_int(1, g.rows / 2), c0 = rng.uniform_int(1, g.cols / 2);
        for (int64_t f = 0; f < g.frames; ++f)
            for (int64_t i = r0; i < r0 + g.rows / 3; ++i)
                for (int64_t j = c0; j < c0 + g.cols / 3; ++j) hole.at(f, i, j) = 1;
        for (auto& m : hole.values)
            if (rng.bernoulli(0.1)) m = 1;
        const auto d = HoleDomain::from_hole(hole);
        worst = std::max({worst, std::abs(rmse_hole(p, x, d) - BruteMetrics::rmse(p, x, hole)),
                          std::abs(tg_rmse(p, x, d) - BruteMetrics::tg_rmse(p, x, hole)),
                          std::abs(pearson_hole(p, x, d) - BruteMetrics::pearson(p, x, hole)),
                          std::abs(ms_ssim_hole(p, x, d, one) - BruteMetrics::ssim1(p, x, hole)),
                          std::abs(bdi(p, x, d) - BruteMetrics::bdi(p, x, hole))});
        ++instances;
    }

    // identity
    bool trivial = true;
    for (int k = 0; k < 10; ++k) {
        const GridSpec g{3, 16, 32};
        SynthConfig sc;
        sc.grid = g;
        sc.seed = 700 + static_cast<uint64_t>(k);
        const auto seq = gen_corpus(sc, 1)[0];
        const auto d = HoleDomain::from_observed(seq.mask);
        const auto& x = seq.target;
        trivial = trivial && rmse_hole(x, x, d) == 0.0 && tg_rmse(x, x, d) == 0.0 && pearson_hole(x, x, d) == 1.0 &&
                  ms_ssim_hole(x, x, d) == 1.0 && bdi(x, x, d) == 0.0;
    }
    Outcome o;
    o.pass = worst < 1e-10 && trivial;
    o.detail = std::to_string(instances) + " instances x 5 metrics vs brute force, max diff " + fmt("%.2e", worst) +
               " (< 1e-10); identity gives 0/0/1/1/0 exactly: " + (trivial ? "yes" : "no");
    return o;
}

// 8 ---------------------------------------------------------------------------

Outcome sensitivity_reproduction() {
    // full-model means and per-group differences (RMSE, MS-SSIM, TG-RMSE, BDI)
    const SensitivityMeans full{0.306, 0.938, 0.191, 0.081};
    const std::array<std::array<double, 4>, 7> diffs{{{0.032, -0.025, 0.020, 0.015},
                                                      {0.010, -0.012, 0.006, 0.019},
                                                      {0.018, -0.035, 0.003, 0.003},
                                                      {-0.001, 0.000, 0.000, 0.002},
                                                      {0.004, -0.004, 0.001, 0.001},
                                                      {0.002, -0.001, 0.001, 0.001},
                                                      {-0.000, -0.002, 0.000, 0.001}}};
    const std::array<double, 7> expected{0.415, 0.217, 0.273, 0.004, 0.050, 0.028, 0.013};
    std::vector<std::pair<ConditionGroup, SensitivityMeans>> ablated;
    for (size_t i = 0; i < 7; ++i) {
        const auto& d = diffs[i];
        ablated.push_back({kAllConditionGroups[i],
                           {full.rmse + d[0], full.ms_ssim + d[1], full.tg_rmse + d[2], full.bdi + d[3]}});
    }
    const auto tab = sensitivity(full, ablated);
    double worst = 0.0, sum = 0.0;
    std::string values;
    for (size_t i = 0; i < tab.rows.size(); ++i) {
        worst = std::max(worst, std::abs(tab.rows[i].contribution - expected[i]));
        sum += tab.rows[i].contribution;
        values += (i ? " " : "") + fmt("%.3f", tab.rows[i].contribution);
    }
    Outcome o;
    o.pass = tab.rows.size() == 7 && worst <= 0.02 && std::abs(sum - 1.0) <= 1e-3;
    o.detail = "r = [" + values + "], max |r - expected| " + fmt("%.4f", worst) + " (<= 0.02), sum " +
               fmt("%.6f", sum) + " (1 +/- 0.001)";
    return o;
}

// 9 ---------------------------------------------------------------------------

Outcome transform_exactness() {
    const ExpTransform tf{5.0, 0.99};
    const auto ir = LogisticTransform::infrared();
    const double e5 = std::abs(exp_forward(5.0, tf) - 0.99);
    const double s230 = std::abs(logistic_forward(230.0, ir) - 0.8);
    const double s270 = std::abs(logistic_forward(270.0, ir) - 0.2);
    const double s250 = std::abs(logistic_forward(250.0, ir) - 0.5);

    // y -> x -> y over [0, 1); x -> y -> x where y is resolvable from 1 in double
    double rt_y = 0.0, rt_x = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double y = i / 10000.0;
        rt_y = std::max(rt_y, std::abs(exp_forward(exp_inverse(y, tf), tf) - y));
        const double x = 14.0 * i / 9999.0;
        rt_x = std::max(rt_x, std::abs(exp_inverse(exp_forward(x, tf), tf) - x));
    }
    Outcome o;
    o.pass = e5 < 1e-10 && s230 < 1e-10 && s270 < 1e-10 && s250 < 1e-10 && rt_y < 1e-10 && rt_x < 1e-10;
    o.detail = "|T(5) - 0.99| " + fmt("%.1e", e5) + ", |S(230) - 0.8| " + fmt("%.1e", s230) + ", |S(270) - 0.2| " +
               fmt("%.1e", s270) + ", |S(250) - 0.5| " + fmt("%.1e", s250) + "; roundtrip y->x->y on [0, 1) " +
               fmt("%.1e", rt_y) + ", x->y->x on [0, 14] mm/h " + fmt("%.1e", rt_x) + " (all < 1e-10)";
    return o;
}

// 10 --------------------------------------------------------------------------

Outcome determinism() {
    const int threads = omp_get_max_threads();
    omp_set_num_threads(1);
    RunConfig cfg;
    cfg.train_sequences = 8;
    cfg.eval_sequences = 1;
    cfg.epochs = 2;
    cfg.ddim_steps = 10;
    std::array<std::string, 2> ckpt, sample;
    for (int run = 0; run < 2; ++run) {
        TempDir dir("det" + std::to_string(run));
        cmd_gen_data(cfg, dir.path / "data");
        const auto ck = cmd_train(cfg, dir.path / "data/train", dir.path / "ck");
        cmd_sample(cfg, ck, dir.path / "data/eval/seq_00000", 2, dir.path / "s");
        ckpt[run] = slurp(header_path(dir.path / "ck")) + slurp(payload_path(dir.path / "ck"));
        sample[run] = slurp(header_path(dir.path / "s")) + slurp(payload_path(dir.path / "s"));
    }
    omp_set_num_threads(threads);
    Outcome o;
    o.pass = !ckpt[0].empty() && ckpt[0] == ckpt[1] && !sample[0].empty() && sample[0] == sample[1];
    o.detail = std::string("two single-threaded runs: checkpoint bytes ") + (ckpt[0] == ckpt[1] ? "equal" : "differ") +
               " (" + std::to_string(ckpt[0].size()) + " B), sample bytes " +
               (sample[0] == sample[1] ? "equal" : "differ") + " (" + std::to_string(sample[0].size()) + " B)";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
        {"gradient fidelity", gradient_fidelity},
        {"diffusion algebra", diffusion_algebra},
        {"schedule invariants", schedule_invariants},
        {"mask preservation", mask_preservation},
        {"oracle convergence", oracle_convergence},
        {"training smoke", training_smoke},
        {"metric oracles", metric_oracles},
        {"sensitivity reproduction", sensitivity_reproduction},
        {"transform exactness", transform_exactness},
        {"determinism", determinism},
    };
    int failed = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
