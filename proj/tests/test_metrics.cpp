#include <cmath>
#include <random>

#include "doctest.h"
#include "domdepth/metrics.hpp"
#include "oracles.hpp"

using namespace domdepth;

namespace {

DepthMap random_depth(std::mt19937_64& rng, int h, int w, double lo = 1.0, double hi = 60.0) {
    std::uniform_real_distribution<double> dv(lo, hi);
    DepthMap d(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) d.set(y, x, dv(rng));
    return d;
}

}  // namespace

TEST_CASE("compute_metrics: perfect prediction") {
    std::mt19937_64 rng(1);
    DepthMap gt = random_depth(rng, 8, 8);
    MetricReport r = compute_metrics(gt, gt);
    CHECK(r.abs_rel == 0.0);
    CHECK(r.sq_rel == 0.0);
    CHECK(r.rmse == 0.0);
    CHECK(r.rmse_log == 0.0);
    CHECK(r.delta1 == 1.0);
    CHECK(r.delta2 == 1.0);
    CHECK(r.delta3 == 1.0);
    CHECK(r.n_pixels == 64);
}

TEST_CASE("compute_metrics: uniform 1.3x overestimate has the closed form") {
    std::mt19937_64 rng(2);
    DepthMap gt = random_depth(rng, 10, 10, 1.0, 20.0);
    DepthMap pred = gt;
    for (auto& v : pred.depth) v *= 1.3;
    MetricReport r = compute_metrics(pred, gt);
    CHECK(r.abs_rel == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(r.delta1 == 0.0);  // 1.3 > 1.25
    CHECK(r.delta2 == 1.0);  // 1.3 < 1.5625
    CHECK(r.delta3 == 1.0);
}

TEST_CASE("compute_metrics: scale-aware abs_rel equals |k-1| exactly") {
    std::mt19937_64 rng(3);
    DepthMap gt = random_depth(rng, 6, 9, 1.0, 30.0);
    for (double k : {0.9, 1.1, 1.2}) {
        DepthMap pred = gt;
        for (auto& v : pred.depth) v *= k;
        MetricReport r = compute_metrics(pred, gt);
        CHECK(r.abs_rel == doctest::Approx(std::abs(k - 1.0)).epsilon(1e-12));
    }
}

TEST_CASE("compute_metrics: matches the independent direct-loop oracle to 1e-12") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        DepthMap gt = random_depth(rng, 12, 7, 0.5, 100.0);  // beyond the 80 m clip
        DepthMap pred = random_depth(rng, 12, 7, 0.5, 100.0);
        std::bernoulli_distribution flag(0.7);
        Mask m(12, 7);
        for (auto& v : m.data) v = flag(rng) ? 1 : 0;
        MetricReport r = compute_metrics(pred, gt, &m);
        oracle::MetricsOracle o = oracle::metrics(pred, gt, &m, 80.0);
        CHECK(std::abs(r.abs_rel - o.abs_rel) < 1e-12);
        CHECK(std::abs(r.sq_rel - o.sq_rel) < 1e-12);
        CHECK(std::abs(r.rmse - o.rmse) < 1e-12);
        CHECK(std::abs(r.rmse_log - o.rmse_log) < 1e-12);
        CHECK(r.delta1 == o.d1);
        CHECK(r.delta2 == o.d2);
        CHECK(r.delta3 == o.d3);
        CHECK(r.n_pixels == static_cast<size_t>(o.n));
        CHECK(r.delta1 <= r.delta2);
        CHECK(r.delta2 <= r.delta3);
    }
}

TEST_CASE("compute_metrics: disjoint masks combine linearly for abs_rel and sq_rel") {
    std::mt19937_64 rng(5);
    DepthMap gt = random_depth(rng, 10, 10), pred = random_depth(rng, 10, 10);
    Mask a(10, 10), b(10, 10);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) (x < 5 ? a : b).set(y, x, true);
    MetricReport ra = compute_metrics(pred, gt, &a);
    MetricReport rb = compute_metrics(pred, gt, &b);
    Mask both(10, 10, true);
    MetricReport rc = compute_metrics(pred, gt, &both);
    double na = ra.n_pixels, nb = rb.n_pixels;
    CHECK(rc.abs_rel == doctest::Approx((na * ra.abs_rel + nb * rb.abs_rel) / (na + nb)).epsilon(1e-12));
    CHECK(rc.sq_rel == doctest::Approx((na * ra.sq_rel + nb * rb.sq_rel) / (na + nb)).epsilon(1e-12));
}

TEST_CASE("compute_metrics: clip caps predictions, median scaling behind the flag") {
    DepthMap gt(1, 2), pred(1, 2);
    gt.set(0, 0, 50.0);
    gt.set(0, 1, 50.0);
    pred.set(0, 0, 100.0);  // clipped to 80
    pred.set(0, 1, 50.0);
    MetricReport r = compute_metrics(pred, gt);
    CHECK(r.abs_rel == doctest::Approx((30.0 / 50.0 + 0.0) / 2).epsilon(1e-12));

    MetricOptions opts;
    opts.median_scale = true;
    DepthMap biased = gt;
    for (auto& v : biased.depth) v *= 2.0;
    MetricReport rs = compute_metrics(biased, gt, nullptr, opts);
    CHECK(rs.abs_rel == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("compute_metrics: empty support raises") {
    DepthMap gt(2, 2), pred(2, 2);  // all invalid
    CHECK_THROWS_AS(compute_metrics(pred, gt), ValidationError);
    gt.set(0, 0, 5.0);
    Mask off(2, 2, false);
    CHECK_THROWS_AS(compute_metrics(pred, gt, &off), ValidationError);
}

TEST_CASE("error_map: ramp endpoints and invalid pixels") {
    DepthMap gt(1, 3), pred(1, 3);
    gt.set(0, 0, 10.0);
    pred.set(0, 0, 10.0);  // zero error -> white
    gt.set(0, 1, 10.0);
    pred.set(0, 1, 16.0);  // abs rel 0.6 >= 0.5 -> saturated red
    // pixel 2 stays invalid -> gray
    ImageBuffer m = error_map(pred, gt);
    CHECK(m.at(0, 0, 0) == 1.0);
    CHECK(m.at(0, 0, 1) == 1.0);
    CHECK(m.at(0, 0, 2) == 1.0);
    CHECK(m.at(0, 1, 0) == 1.0);
    CHECK(m.at(0, 1, 1) == 0.0);
    CHECK(m.at(0, 1, 2) == 0.0);
    CHECK(m.at(0, 2, 0) == 0.5);
    CHECK(m.at(0, 2, 1) == 0.5);
}

TEST_CASE("metrics CSV: stable schema") {
    MetricReport r;
    r.abs_rel = 0.125;
    r.n_pixels = 42;
    CHECK(metrics_csv_header() ==
          "scene_id,variant,region,abs_rel,sq_rel,rmse,rmse_log,delta1,delta2,delta3,n_pixels");
    std::string row = metrics_csv_row("s1", "full", "dynamic", r);
    CHECK(row.substr(0, 16) == "s1,full,dynamic,");
    CHECK(row.find(",42") == row.size() - 3);
}
