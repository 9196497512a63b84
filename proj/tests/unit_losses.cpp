#include <cmath>
#include <vector>

#include "doctest.h"
#include "isac/losses.hpp"
#include "isac/rng.hpp"

using namespace isac;

TEST_CASE("mpo: examples") {
    std::vector<double> zero{0.0, 0.7, 0.0};
    std::vector<double> disj{0.5, 0.0, 0.9};
    CHECK(mpo(zero, disj) == 0.0);

    std::vector<double> peak{0.1, 0.9, 0.3};
    CHECK(mpo(peak, peak) == doctest::Approx(0.81));

    std::vector<double> a{0.5, 0.2};
    std::vector<double> b{0.4, 0.9};
    int px = -1;
    CHECK(mpo_argmax(a, b, &px) == doctest::Approx(0.20));
    CHECK(px == 0);

    std::vector<double> shorter{0.5};
    CHECK_THROWS_AS(mpo(a, shorter), ConfigError);
}

TEST_CASE("instance_loss: examples") {
    CHECK(instance_loss({{0.3, 0.4}}) == 0.0);  // one mask, no pairs
    CHECK(instance_loss({}) == 0.0);

    // three pairwise-disjoint masks
    std::vector<std::vector<double>> disjoint = {
        {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
    CHECK(instance_loss(disjoint) == 0.0);

    // pairwise MPOs {0.1, 0.3, 0.2}: masks on separate pixels per pair
    std::vector<std::vector<double>> masks = {
        {0.5, 0.6, 0.0},   // pairs (0,1) on p0, (0,2) on p1
        {0.2, 0.0, 0.5},   // mpo(0,1) = 0.5*0.2 = 0.1
        {0.0, 0.5, 0.4},   // mpo(0,2) = 0.6*0.5 = 0.3 ; mpo(1,2) = 0.5*0.4 = 0.2
    };
    // brute force over pairs
    double best = 0.0;
    for (size_t i = 0; i < masks.size(); ++i)
        for (size_t j = i + 1; j < masks.size(); ++j) best = std::max(best, mpo(masks[i], masks[j]));
    CHECK(best == doctest::Approx(0.3));
    PairProvenance prov;
    CHECK(instance_loss(masks, LossKind::Mpo, &prov) == doctest::Approx(0.3));
    CHECK(prov.first == 0);
    CHECK(prov.second == 2);
    CHECK(prov.pixel == 1);
}

TEST_CASE("class_loss: examples") {
    Mat one(3, 1);
    one.at(0, 0) = 0.9;
    CHECK(class_loss(one) == 0.0);

    Mat ortho(2, 2);
    ortho.at(0, 0) = 1.0;
    ortho.at(1, 1) = 1.0;
    CHECK(class_loss(ortho) == 0.0);

    Mat cols(2, 2);
    cols.at(0, 0) = 0.6;
    cols.at(1, 0) = 0.1;
    cols.at(0, 1) = 0.5;
    cols.at(1, 1) = 0.8;
    CHECK(class_loss(cols) == doctest::Approx(0.30));
}

TEST_CASE("alt_overlap: declared substitutes") {
    std::vector<double> a{0.5, 0.5};
    CHECK(alt_overlap(a, a, LossKind::Iou) == doctest::Approx(1.0));

    std::vector<double> l{0.8, 0.0};
    std::vector<double> r{0.0, 0.6};
    CHECK(alt_overlap(l, r, LossKind::Iou) == doctest::Approx(0.0));

    CHECK(alt_overlap(a, a, LossKind::Mae) == doctest::Approx(1.0));

    // KL of identical masks is 0, so the mapped value is maximal
    CHECK(alt_overlap(a, a, LossKind::Kl) == doctest::Approx(1.0).epsilon(1e-6));

    std::vector<double> zero{0.0, 0.0};
    CHECK_THROWS_AS(alt_overlap(zero, a, LossKind::Kl), ConfigError);
}

TEST_CASE("schedule_weights: table rows") {
    const int T = 50;
    auto e_start = schedule_weights(ScheduleId::E, T, T);
    CHECK(e_start.ins == doctest::Approx(1.0));
    CHECK(e_start.cls == doctest::Approx(0.0));

    auto c_any = schedule_weights(ScheduleId::C, 17, T);
    CHECK(c_any.ins == doctest::Approx(0.5));
    CHECK(c_any.cls == doctest::Approx(0.5));

    auto d_start = schedule_weights(ScheduleId::D, T, T);
    CHECK(d_start.ins == doctest::Approx(0.0));
    CHECK(d_start.cls == doctest::Approx(1.0));

    auto a = schedule_weights(ScheduleId::A, 3, T);
    CHECK(a.ins == 1.0);
    auto b = schedule_weights(ScheduleId::B, 3, T);
    CHECK(b.cls == 1.0);

    CHECK_THROWS_AS(schedule_weights(ScheduleId::E, 0, T), ConfigError);
    CHECK_THROWS_AS(parse_schedule("F"), ConfigError);
}

TEST_CASE("schedule_weights: lambda_ins + lambda_cls = 1 for every config and t") {
    const int T = 37;
    for (ScheduleId id : {ScheduleId::A, ScheduleId::B, ScheduleId::C, ScheduleId::D,
                          ScheduleId::E}) {
        for (int t = 1; t <= T; ++t) {
            const auto w = schedule_weights(id, t, T);
            CHECK(w.ins + w.cls == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(w.ins >= 0.0);
            CHECK(w.ins <= 1.0);
        }
    }
}

TEST_CASE("combined_loss: weighted sum and provenance") {
    // two instance masks with overlap 0.3 at pixel 1; two class columns 0.1
    std::vector<std::vector<double>> masks = {{0.0, 0.6}, {0.1, 0.5}};
    Mat cls(2, 2);
    cls.at(0, 0) = 0.5;
    cls.at(0, 1) = 0.2;  // product 0.1 at pixel 0
    LossWeights w{0.5, 0.5, ScheduleId::C};
    const LossReport r = combined_loss(masks, cls, w, LossKind::Mpo, 7);
    CHECK(r.loss_ins == doctest::Approx(0.3));
    CHECK(r.loss_cls == doctest::Approx(0.1));
    CHECK(r.loss_total == doctest::Approx(0.2));
    CHECK(std::abs(r.loss_total - (w.ins * r.loss_ins + w.cls * r.loss_cls)) < 1e-9);
    CHECK(r.ins_prov.pixel == 1);
    CHECK(r.cls_prov.pixel == 0);

    LossWeights only_ins{1.0, 0.0, ScheduleId::A};
    CHECK(combined_loss(masks, cls, only_ins, LossKind::Mpo, 7).loss_total ==
          doctest::Approx(0.3));
    LossWeights only_cls{0.0, 1.0, ScheduleId::B};
    CHECK(combined_loss(masks, cls, only_cls, LossKind::Mpo, 7).loss_total ==
          doctest::Approx(0.1));
}

TEST_CASE("property: mpo bounds, symmetry, monotonicity") {
    Rng rng(2024);
    for (int rep = 0; rep < 200; ++rep) {
        const int f = 1 + rng.uniform_int(32);
        std::vector<double> a(f), b(f);
        for (double& v : a) v = rng.u01();
        for (double& v : b) v = rng.u01();
        const double v = mpo(a, b);
        CHECK(v == mpo(b, a));
        CHECK(v >= 0.0);
        double max_a = 0.0, max_b = 0.0;
        for (double x : a) max_a = std::max(max_a, x);
        for (double x : b) max_b = std::max(max_b, x);
        CHECK(v <= std::min(max_a, max_b) + 1e-12);

        std::vector<double> bigger = a;
        for (double& x : bigger) x = std::min(1.0, x + rng.u01() * (1.0 - x));
        CHECK(mpo(bigger, b) >= v - 1e-12);
    }
}

TEST_CASE("property: overlap_backward matches finite differences for every kind") {
    Rng rng(31337);
    for (LossKind kind : {LossKind::Mpo, LossKind::Mae, LossKind::Kl, LossKind::Iou}) {
        for (int rep = 0; rep < 10; ++rep) {
            const int f = 6;
            std::vector<double> a(f), b(f);
            for (double& v : a) v = 0.05 + 0.9 * rng.u01();
            for (double& v : b) v = 0.05 + 0.9 * rng.u01();
            int px = -1;
            overlap_value(a, b, kind, &px);
            std::vector<double> ga(f, 0.0), gb(f, 0.0);
            overlap_backward(a, b, kind, px, 1.0, ga, gb);
            const double h = 1e-6;
            for (int i = 0; i < f; ++i) {
                std::vector<double> ap = a, am = a;
                ap[i] += h;
                am[i] -= h;
                const double fd =
                    (overlap_value(ap, b, kind, nullptr) - overlap_value(am, b, kind, nullptr)) /
                    (2 * h);
                CHECK(ga[i] == doctest::Approx(fd).epsilon(1e-4));
            }
        }
    }
}
