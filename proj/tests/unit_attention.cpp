#include <cmath>

#include "doctest.h"
#include "isac/attention.hpp"
#include "isac/rng.hpp"

using namespace isac;

namespace {

AttentionLayerConfig full_res_config(int h, int w, int d, int head_dim) {
    AttentionLayerConfig cfg;
    cfg.height = h;
    cfg.width = w;
    cfg.head_count = 1;
    cfg.head_dim = head_dim;
    return cfg;
}

Mat mat_from(std::initializer_list<std::initializer_list<double>> rows) {
    Mat m(static_cast<int>(rows.size()), static_cast<int>(rows.begin()->size()));
    int i = 0;
    for (const auto& r : rows) {
        int j = 0;
        for (double v : r) m.at(i, j++) = v;
        ++i;
    }
    return m;
}

}  // namespace

TEST_CASE("self-attention: single pixel gives the trivial map") {
    Grid latent(1, 1, 2);
    latent.at(0, 0) = 1.3;
    latent.at(0, 1) = -0.4;
    auto cfg = full_res_config(1, 1, 2, 1);
    cfg.wq_self = {mat_from({{0.7}, {0.2}})};
    cfg.wk_self = {mat_from({{-1.0}, {0.5}})};
    const auto maps = compute_self_attention(latent, cfg);
    REQUIRE(maps.size() == 1);
    CHECK(maps[0].rows == 1);
    CHECK(maps[0].at(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("self-attention: zero latent gives uniform rows") {
    Grid latent(2, 2, 3);
    auto cfg = full_res_config(2, 2, 3, 2);
    Rng rng(7);
    Mat wq(3, 2), wk(3, 2);
    for (double& v : wq.v) v = rng.normal();
    for (double& v : wk.v) v = rng.normal();
    cfg.wq_self = {wq};
    cfg.wk_self = {wk};
    const auto maps = compute_self_attention(latent, cfg);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(maps[0].at(i, j) == doctest::Approx(0.25));
}

TEST_CASE("self-attention: hand-set logits [[0,ln3],[0,0]]") {
    // latent = I2, wq = e0, wk = ln3*e1 (head_dim 1) gives q=[1,0], k=[0,ln3]
    Grid latent(2, 1, 2);
    latent.at(0, 0) = 1.0;
    latent.at(1, 1) = 1.0;
    auto cfg = full_res_config(2, 1, 2, 1);
    cfg.wq_self = {mat_from({{1.0}, {0.0}})};
    cfg.wk_self = {mat_from({{0.0}, {std::log(3.0)}})};
    const auto maps = compute_self_attention(latent, cfg);
    CHECK(maps[0].at(0, 0) == doctest::Approx(0.25));
    CHECK(maps[0].at(0, 1) == doctest::Approx(0.75));
    CHECK(maps[0].at(1, 0) == doctest::Approx(0.5));
    CHECK(maps[0].at(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("self-attention: latent dim mismatch is a configuration error") {
    Grid latent(2, 1, 3);
    auto cfg = full_res_config(2, 1, 3, 1);
    cfg.wq_self = {Mat(2, 1)};  // wrong row count
    cfg.wk_self = {Mat(3, 1)};
    CHECK_THROWS_AS(compute_self_attention(latent, cfg), ConfigError);
}

TEST_CASE("cross-attention: single token gets full attention") {
    Grid latent(2, 2, 2);
    Rng rng(3);
    for (double& v : latent.v) v = rng.normal();
    PromptSpec prompt;
    prompt.tokens = {"cat"};
    prompt.embeddings = Mat(1, 2);
    prompt.embeddings.at(0, 0) = 0.3;
    prompt.class_token_indices = {0};
    prompt.instance_counts = {1};
    auto cfg = full_res_config(2, 2, 2, 1);
    cfg.wq_cross = {mat_from({{1.0}, {0.0}})};
    cfg.wk_cross = {mat_from({{0.0}, {1.0}})};
    const auto maps = compute_cross_attention(latent, prompt, cfg);
    for (int i = 0; i < 4; ++i) CHECK(maps[0].at(i, 0) == doctest::Approx(1.0));
}

TEST_CASE("cross-attention: hand logits [0, ln(1/3)] give [0.75, 0.25]") {
    Grid latent(1, 1, 2);
    latent.at(0, 0) = 1.0;
    PromptSpec prompt;
    prompt.tokens = {"a", "b"};
    prompt.embeddings = mat_from({{1.0, 0.0}, {0.0, 1.0}});
    prompt.class_token_indices = {0};
    prompt.instance_counts = {1};
    auto cfg = full_res_config(1, 1, 2, 1);
    cfg.wq_cross = {mat_from({{1.0}, {0.0}})};
    cfg.wk_cross = {mat_from({{0.0}, {std::log(1.0 / 3.0)}})};
    // q = [1]; k = [0, ln(1/3)] -> logits [0, ln(1/3)]
    const auto maps = compute_cross_attention(latent, prompt, cfg);
    CHECK(maps[0].at(0, 0) == doctest::Approx(0.75));
    CHECK(maps[0].at(0, 1) == doctest::Approx(0.25));
}

TEST_CASE("cross-attention: empty prompt is a configuration error") {
    Grid latent(1, 1, 2);
    PromptSpec prompt;
    prompt.embeddings = Mat(0, 2);
    auto cfg = full_res_config(1, 1, 2, 1);
    cfg.wq_cross = {Mat(2, 1)};
    cfg.wk_cross = {Mat(2, 1)};
    CHECK_THROWS_AS(compute_cross_attention(latent, prompt, cfg), ConfigError);
}

TEST_CASE("upsample: factor 1 is the identity") {
    Rng rng(11);
    Mat m(6, 6);
    for (double& v : m.v) v = rng.u01();
    const Mat up = upsample_map(m, 2, 3, 2, 3, MapKind::Self);
    for (size_t i = 0; i < m.v.size(); ++i) CHECK(up.v[i] == m.v[i]);
}

TEST_CASE("upsample: constant self map extends to the constant") {
    Mat m(1, 1);
    m.at(0, 0) = 0.7;
    const Mat up = upsample_map(m, 1, 1, 2, 2, MapKind::Self);
    REQUIRE(up.rows == 4);
    REQUIRE(up.cols == 4);
    for (double v : up.v) CHECK(v == doctest::Approx(0.7));
}

TEST_CASE("upsample: bilinear weights along a doubled axis") {
    // source grid 2x1 (two pixels along y), cross map with one token column
    Mat m(2, 1);
    m.at(0, 0) = 0.0;
    m.at(1, 0) = 1.0;
    const Mat up = upsample_map(m, 2, 1, 4, 2, MapKind::Cross);
    REQUIRE(up.rows == 8);
    const double expected[4] = {0.0, 0.25, 0.75, 1.0};
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 2; ++c)
            CHECK(up.at(r * 2 + c, 0) == doctest::Approx(expected[r]));
}

TEST_CASE("upsample: non-integer factor is a configuration error") {
    Mat m(6, 6);
    CHECK_THROWS_AS(upsample_map(m, 2, 3, 3, 5, MapKind::Self), ConfigError);
}

TEST_CASE("accumulate: single full-resolution map reduces to min-max normalization") {
    Rng rng(5);
    Mat m(4, 4);
    for (double& v : m.v) v = rng.u01();
    const Mat acc = accumulate({{m}}, MapKind::Self);
    const Mat norm = minmax_normalize(m);
    for (size_t i = 0; i < acc.v.size(); ++i) CHECK(acc.v[i] == doctest::Approx(norm.v[i]));
}

TEST_CASE("accumulate: averaging two identical maps is idempotent") {
    Rng rng(6);
    Mat m(4, 4);
    for (double& v : m.v) v = rng.u01();
    const Mat one = accumulate({{m}}, MapKind::Self);
    const Mat two = accumulate({{m, m}}, MapKind::Self);
    for (size_t i = 0; i < one.v.size(); ++i) CHECK(two.v[i] == doctest::Approx(one.v[i]));
}

TEST_CASE("accumulate: one-pixel heads hit the degenerate normalization rule") {
    Mat a(1, 1), b(1, 1);
    a.at(0, 0) = 0.2;
    b.at(0, 0) = 0.6;
    const Mat mean = accumulate_mean({{a, b}});
    CHECK(mean.at(0, 0) == doctest::Approx(0.4));
    const Mat acc = accumulate({{a, b}}, MapKind::Self);
    CHECK(acc.at(0, 0) == 0.0);
}

TEST_CASE("accumulate: empty layer list is a configuration error") {
    CHECK_THROWS_AS(accumulate({}, MapKind::Self), ConfigError);
}

TEST_CASE("minmax_normalize examples") {
    Mat m(1, 2);
    m.at(0, 0) = 0.4;
    m.at(0, 1) = 0.8;
    Mat n = minmax_normalize(m);
    CHECK(n.at(0, 0) == 0.0);
    CHECK(n.at(0, 1) == 1.0);

    Mat c(2, 2, 3.14);
    n = minmax_normalize(c);
    for (double v : n.v) CHECK(v == 0.0);

    Mat t(1, 3);
    t.at(0, 0) = 1.0;
    t.at(0, 1) = 2.0;
    t.at(0, 2) = 5.0;
    n = minmax_normalize(t);
    CHECK(n.at(0, 0) == doctest::Approx(0.0));
    CHECK(n.at(0, 1) == doctest::Approx(0.25));
    CHECK(n.at(0, 2) == doctest::Approx(1.0));
}

TEST_CASE("property: attention rows are stochastic and accumulation stays in [0,1]") {
    Rng rng(99);
    for (int rep = 0; rep < 20; ++rep) {
        Grid latent(4, 4, 4);
        for (double& v : latent.v) v = rng.normal();
        auto cfg = full_res_config(4, 4, 4, 2);
        cfg.head_count = 2;
        for (int h = 0; h < 2; ++h) {
            Mat wq(4, 2), wk(4, 2);
            for (double& v : wq.v) v = rng.normal() * 0.5;
            for (double& v : wk.v) v = rng.normal() * 0.5;
            cfg.wq_self.push_back(wq);
            cfg.wk_self.push_back(wk);
        }
        const auto maps = compute_self_attention(latent, cfg);
        for (const Mat& m : maps) {
            for (int i = 0; i < m.rows; ++i) {
                double sum = 0.0;
                for (int j = 0; j < m.cols; ++j) sum += m.at(i, j);
                CHECK(std::abs(sum - 1.0) < 1e-6);
            }
        }
        const Mat acc = accumulate({maps}, MapKind::Self);
        for (double v : acc.v) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("property: min-max normalization is invariant under positive affine maps") {
    Rng rng(123);
    for (int rep = 0; rep < 50; ++rep) {
        Mat m(3, 5);
        for (double& v : m.v) v = rng.normal();
        const double a = 0.1 + 3.0 * rng.u01();
        const double b = rng.normal();
        Mat scaled = m;
        for (double& v : scaled.v) v = a * v + b;
        const Mat n1 = minmax_normalize(m);
        const Mat n2 = minmax_normalize(scaled);
        for (size_t i = 0; i < n1.v.size(); ++i) CHECK(std::abs(n1.v[i] - n2.v[i]) < 1e-6);
    }
}

TEST_CASE("property: upsampling preserves constants") {
    for (double c : {0.0, 0.3, 1.0}) {
        Mat m(4, 4, c);
        const Mat up = upsample_map(m, 2, 2, 6, 6, MapKind::Self);
        for (double v : up.v) CHECK(v == doctest::Approx(c));
    }
}

TEST_CASE("determinism: identical latent and config give bit-identical maps") {
    auto make = [] {
        Rng rng(42);
        Grid latent(4, 4, 4);
        for (double& v : latent.v) v = rng.normal();
        auto cfg = full_res_config(2, 2, 4, 2);
        Mat wq(4, 2), wk(4, 2);
        for (double& v : wq.v) v = rng.normal();
        for (double& v : wk.v) v = rng.normal();
        cfg.wq_self = {wq};
        cfg.wk_self = {wk};
        auto maps = compute_self_attention(latent, cfg);
        std::vector<Mat> up;
        for (auto& m : maps) up.push_back(upsample_map(m, 2, 2, 4, 4, MapKind::Self));
        return accumulate({up}, MapKind::Self);
    };
    const Mat a = make();
    const Mat b = make();
    for (size_t i = 0; i < a.v.size(); ++i) CHECK(a.v[i] == b.v[i]);
}
