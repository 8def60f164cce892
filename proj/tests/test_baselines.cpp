#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "rainfill/baselines.hpp"
#include "rainfill/rng.hpp"

using namespace rainfill;

namespace {

FieldVolume random_observed(const GridSpec& g, double p_missing, uint64_t seed) {
    Rng rng(seed);
    FieldVolume f(g);
    for (auto& v : f.values) v = rng.bernoulli(p_missing) ? kMissing : rng.uniform();
    return f;
}

}  // namespace

TEST_CASE("tli: interior midpoint, single observation, no observation") {
    FieldVolume x({3, 1, 3}, kMissing);
    x.at(0, 0, 0) = 0.0;
    x.at(2, 0, 0) = 1.0;
    x.at(1, 0, 1) = 0.3;
    const auto y = tli(x);
    CHECK(y.at(1, 0, 0) == doctest::Approx(0.5));
    for (int l = 0; l < 3; ++l) CHECK(y.at(l, 0, 1) == 0.3);
    for (int l = 0; l < 3; ++l) CHECK(y.at(l, 0, 2) == kMissing);
}

TEST_CASE("tli: edge gaps hold the nearest observation") {
    FieldVolume x({6, 1, 1}, kMissing);
    x.at(2, 0, 0) = 0.2;
    x.at(4, 0, 0) = 0.6;
    const auto y = tli(x);
    const std::vector<double> want{0.2, 0.2, 0.2, 0.4, 0.6, 0.6};
    for (int l = 0; l < 6; ++l) CHECK(y.at(l, 0, 0) == doctest::Approx(want[l]));
}

TEST_CASE("tli: observed pixels untouched, affine timelines reproduced exactly") {
    const GridSpec g{7, 4, 5};
    Rng rng(3);
    FieldVolume truth(g), x(g, kMissing);
    for (int64_t h = 0; h < g.rows; ++h)
        for (int64_t w = 0; w < g.cols; ++w) {
            const double a = rng.uniform(0.0, 0.5), b = rng.uniform(0.0, 0.07);
            for (int64_t l = 0; l < g.frames; ++l) truth.at(l, h, w) = a + b * l;
            // first and last frames always observed so every gap is interior
            for (int64_t l = 0; l < g.frames; ++l)
                if (l == 0 || l == g.frames - 1 || rng.bernoulli(0.4)) x.at(l, h, w) = truth.at(l, h, w);
        }
    const auto y = tli(x);
    for (size_t i = 0; i < y.values.size(); ++i) {
        if (x.values[i] != kMissing) CHECK(y.values[i] == x.values[i]);
        CHECK(y.values[i] == doctest::Approx(truth.values[i]).epsilon(1e-12));
    }
    const auto r = random_observed(g, 0.6, 4);
    const auto ry = tli(r);
    for (size_t i = 0; i < r.values.size(); ++i)
        if (r.values[i] != kMissing) CHECK(ry.values[i] == r.values[i]);
}

TEST_CASE("spatial fill: constant surround and the four-neighbour mean") {
    FieldVolume x({1, 5, 5}, 0.7);
    x.at(0, 2, 2) = kMissing;
    x.at(0, 2, 3) = kMissing;
    x.at(0, 1, 2) = kMissing;
    const auto r = spatial_fill(x);
    for (double v : r.field.values) CHECK(v == doctest::Approx(0.7).epsilon(1e-6));

    FieldVolume y({1, 3, 3}, 0.0);
    y.at(0, 1, 1) = kMissing;
    y.at(0, 0, 1) = 0.0;
    y.at(0, 1, 0) = 0.0;
    y.at(0, 1, 2) = 1.0;
    y.at(0, 2, 1) = 1.0;
    CHECK(spatial_fill(y).field.at(0, 1, 1) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("spatial fill: maximum principle, idempotence, observed pixels kept") {
    const GridSpec g{3, 8, 12};
    for (uint64_t seed = 0; seed < 10; ++seed) {
        const auto x = random_observed(g, 0.7, seed);
        const auto r = spatial_fill(x);
        CHECK(r.empty_frames.empty());
        for (int64_t l = 0; l < g.frames; ++l) {
            double lo = 1e9, hi = -1e9;
            for (int64_t i = 0; i < g.plane(); ++i) {
                const double v = x.frame(l)[i];
                if (v != kMissing) lo = std::min(lo, v), hi = std::max(hi, v);
            }
            for (int64_t i = 0; i < g.plane(); ++i) {
                const double v = r.field.frame(l)[i];
                CHECK(v >= lo - 1e-12);
                CHECK(v <= hi + 1e-12);
                if (x.frame(l)[i] != kMissing) CHECK(v == x.frame(l)[i]);
            }
        }
        CHECK(spatial_fill(r.field).field.values == r.field.values);
    }
}

TEST_CASE("spatial fill: the result is discrete-harmonic at every filled pixel") {
    const GridSpec g{1, 8, 8};
    const auto x = random_observed(g, 0.5, 21);
    const auto f = spatial_fill(x, {.tolerance = 1e-12, .max_iterations = 100000}).field;
    for (int64_t h = 0; h < 8; ++h)
        for (int64_t w = 0; w < 8; ++w) {
            if (x.at(0, h, w) != kMissing) continue;
            double s = 0;
            int n = 0;
            const int64_t dh[] = {-1, 1, 0, 0}, dw[] = {0, 0, -1, 1};
            for (int k = 0; k < 4; ++k) {
                const int64_t hh = h + dh[k], ww = w + dw[k];
                if (hh < 0 || hh >= 8 || ww < 0 || ww >= 8) continue;
                s += f.at(0, hh, ww);
                ++n;
            }
            CHECK(f.at(0, h, w) == doctest::Approx(s / n).epsilon(1e-9));
        }
}

TEST_CASE("spatial fill: empty frame filled with zero and flagged") {
    FieldVolume x({2, 4, 4}, 0.4);
    for (auto& v : x.frame(1)) v = kMissing;
    const auto r = spatial_fill(x);
    CHECK(r.empty_frames == std::vector<int64_t>{1});
    for (double v : r.field.frame(1)) CHECK(v == 0.0);
    for (double v : r.field.frame(0)) CHECK(v == 0.4);
}

TEST_CASE("tli then spatial fill leaves nothing missing") {
    const GridSpec g{3, 8, 16};
    for (uint64_t seed = 0; seed < 8; ++seed) {
        auto x = random_observed(g, 0.9, seed + 100);
        for (int64_t l = 0; l < g.frames; ++l) x.at(l, 0, 0) = 0.5;
        const auto y = tli_lf(x);
        for (double v : y.values) CHECK(v != kMissing);
    }
}
