#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "gradient_check.hpp"
#include "isac/artifacts.hpp"
#include "isac/engine.hpp"
#include "isac/tensor_io.hpp"

using namespace isac;
using isac_test::random_latent;
using isac_test::synthetic_prompt;

namespace {

/// Predicts zero noise; exposes one trivial attention layer.
class ZeroNoiseBackend final : public DenoiserBackend {
public:
    ZeroNoiseBackend(int H, int W, int d) : H_(H), W_(W), d_(d) {
        AttentionLayerConfig cfg;
        cfg.height = H;
        cfg.width = W;
        cfg.head_count = 1;
        layers_.push_back(cfg);
    }
    std::string id() const override { return "zero-noise-test"; }
    const std::vector<AttentionLayerConfig>& layers() const override { return layers_; }
    AttentionCapture capture_attention(const Grid&, const PromptSpec& prompt,
                                       int) const override {
        AttentionCapture cap;
        LayerAttention la;
        Mat self(H_ * W_, H_ * W_);
        softmax_rows(self);
        Mat cross(H_ * W_, prompt.length());
        softmax_rows(cross);
        la.self_heads.push_back(self);
        la.cross_heads.push_back(cross);
        cap.layers.push_back(la);
        return cap;
    }
    void attention_backward(const AttentionCapture&, const AttentionGrads&, const Grid&,
                            const PromptSpec&, int, Grid&) const override {}
    Grid predict_noise(const Grid&, const PromptSpec&, int) const override {
        return Grid(H_, W_, d_);
    }
    Image decode(const Grid&, const PromptSpec&) const override { return Image(H_, W_); }
    uint64_t weight_hash() const override { return 0; }

private:
    int H_, W_, d_;
    std::vector<AttentionLayerConfig> layers_;
};

RunConfig scene_config(int T, int grid, const std::string& kind) {
    RunConfig cfg;
    cfg.T = T;
    cfg.H = cfg.W = grid;
    cfg.d = 8;
    cfg.backend_id = "synthetic-scene";
    if (kind == "multi-instance") {
        cfg.prompt.kind = "multi-instance";
        cfg.prompt.classes = {"cat"};
        cfg.prompt.counts = {2};
    } else {
        cfg.prompt.kind = "multi-class";
        cfg.prompt.classes = {"cat", "dog"};
        cfg.prompt.counts = {1, 1};
    }
    return cfg;
}

}  // namespace

TEST_CASE("denoise_step: zero noise prediction rescales by 1/sqrt(alpha_t)") {
    const int T = 50;
    const DiffusionSchedule s = DiffusionSchedule::linear(T);
    ZeroNoiseBackend backend(4, 4, 3);
    const PromptSpec prompt = synthetic_prompt(2, {1}, 3, 1);
    const Grid x = random_latent(4, 4, 3, 11);

    // terminal step: no injection even with a live generator
    Rng rng(5);
    const Grid out1 = denoise_step(x, 1, backend, prompt, s, rng);
    for (size_t i = 0; i < x.v.size(); ++i)
        CHECK(out1.v[i] == doctest::Approx(x.v[i] / std::sqrt(s.alpha_at(1))).epsilon(1e-12));

    // same seeds give identical trajectories at a noisy step
    Rng ra(7), rb(7);
    const Grid a = denoise_step(x, 30, backend, prompt, s, ra);
    const Grid b = denoise_step(x, 30, backend, prompt, s, rb);
    CHECK(a.v == b.v);
}

TEST_CASE("denoise_step: non-finite latent raises a numerical error with the timestep") {
    const DiffusionSchedule s = DiffusionSchedule::linear(50);
    const PromptSpec prompt = synthetic_prompt(4, {2}, 8, 1);
    auto backend = build_scene_denoiser(prompt, 8, 8, 8, 50, 3);
    Grid x = random_latent(8, 8, 8, 13);
    x.v[5] = std::numeric_limits<double>::quiet_NaN();
    Rng rng(1);
    try {
        denoise_step(x, 17, *backend, prompt, s, rng);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(e.timestep() == 17);
    }
}

TEST_CASE("isac_update: eta 0 and zero gradients are bit-exact no-ops") {
    const Grid x = random_latent(6, 6, 4, 3);
    const Grid zero(6, 6, 4);
    CHECK(isac_update(x, zero, 0.01).v == x.v);
    Grid g = random_latent(6, 6, 4, 4);
    CHECK(isac_update(x, g, 0.0).v == x.v);
}

TEST_CASE("isac_step: update is exactly X minus eta times the step gradient") {
    RunConfig cfg;
    cfg.T = 10;
    cfg.H = cfg.W = 8;
    cfg.d = 4;
    cfg.backend_id = "seeded-attention";
    cfg.prompt.kind = "multi-class";
    cfg.prompt.classes = {"cat", "dog"};
    cfg.prompt.counts = {1, 1};
    cfg.seed = 3;
    const PromptSpec prompt = prompt_from_config(cfg.prompt, cfg.d, cfg.seed);
    const auto backend = make_backend(cfg, prompt);
    const Grid x = random_latent(8, 8, 4, 21);
    const auto [updated, report] = isac_step(x, 5, cfg, *backend, prompt);
    const StepContext ctx = make_step(cfg, *backend, prompt, x, 5);
    const Grid g = loss_gradient(x, ctx);
    for (size_t i = 0; i < x.v.size(); ++i)
        CHECK(updated.v[i] == doctest::Approx(x.v[i] - cfg.eta * g.v[i]).epsilon(1e-15));
    CHECK(std::isfinite(report.loss_total));
}

TEST_CASE("run: identical config and seed give bit-identical artifacts") {
    RunConfig cfg = scene_config(8, 10, "multi-instance");
    const RunRecord a = run(cfg, 99);
    const RunRecord b = run(cfg, 99);
    REQUIRE(a.reports.size() == 8);
    CHECK(losses_csv(a) == losses_csv(b));
    CHECK(ppm_bytes(a.image) == ppm_bytes(b.image));
    CHECK(a.final_latent.v == b.final_latent.v);
    REQUIRE(a.ground_truth.has_value());
    CHECK(a.ground_truth->instances.size() == 2);
}

TEST_CASE("run: reports cover t = T..1 and weights follow the schedule") {
    RunConfig cfg = scene_config(6, 10, "multi-class");
    cfg.schedule = ScheduleId::D;
    const RunRecord rec = run(cfg, 5);
    REQUIRE(rec.reports.size() == 6);
    for (int i = 0; i < 6; ++i) {
        const int t = 6 - i;
        CHECK(rec.reports[i].t == t);
        CHECK(rec.reports[i].lambda_ins == doctest::Approx(1.0 - double(t) / 6));
    }
}

TEST_CASE("run: hook purity, dumping does not change the trajectory") {
    RunConfig cfg = scene_config(8, 10, "multi-class");
    const RunRecord plain = run(cfg, 17);
    cfg.dump_timesteps = {8, 4, 1};
    const RunRecord dumped = run(cfg, 17);
    CHECK(losses_csv(plain) == losses_csv(dumped));
    CHECK(ppm_bytes(plain.image) == ppm_bytes(dumped.image));
    CHECK(dumped.dumps.size() == 3);
}

TEST_CASE("run: eta 0 keeps finite loss reports") {
    RunConfig cfg = scene_config(8, 10, "multi-instance");
    cfg.eta = 0.0;
    const RunRecord rec = run(cfg, 23);
    CHECK(rec.reports.size() == 8);
    for (const auto& r : rec.reports) CHECK(std::isfinite(r.loss_total));
}

TEST_CASE("run: descent sanity, optimization lowers the median final instance loss") {
    RunConfig base = scene_config(25, 12, "multi-instance");
    std::vector<double> with, without;
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        const RunRecord a = run(base, seed);
        with.push_back(a.reports.back().loss_ins);
        RunConfig off = base;
        off.eta = 0.0;
        const RunRecord b = run(off, seed);
        without.push_back(b.reports.back().loss_ins);
    }
    std::sort(with.begin(), with.end());
    std::sort(without.begin(), without.end());
    const double med_with = (with[4] + with[5]) / 2;
    const double med_without = (without[4] + without[5]) / 2;
    INFO("median L_ins with eta: ", med_with, " without: ", med_without);
    CHECK(med_with < med_without);
}

TEST_CASE("run: numerical failure aborts with a partial record") {
    RunConfig cfg = scene_config(8, 10, "multi-instance");
    cfg.eta = 1e14;  // drives the latent to overflow mid-run
    RunRecord partial;
    CHECK_THROWS_AS(run(cfg, 3, &partial), NumericalError);
    CHECK(partial.reports.size() >= 1);
    CHECK(partial.reports.size() < 8);
}

TEST_CASE("extract_ground_truth: scene runs expose blob parameters, seeded runs do not") {
    RunConfig cfg = scene_config(6, 10, "multi-instance");
    const RunRecord rec = run(cfg, 31);
    const auto instances = extract_ground_truth(rec);
    CHECK(instances.size() == 2);

    RunConfig seeded = cfg;
    seeded.backend_id = "seeded-attention";
    const RunRecord rec2 = run(seeded, 31);
    CHECK(!rec2.ground_truth.has_value());
    CHECK_THROWS_AS(extract_ground_truth(rec2), ConfigError);
}

TEST_CASE("write_run_artifacts: manifest hashes are stable across reruns") {
    RunConfig cfg = scene_config(6, 10, "multi-class");
    cfg.dump_timesteps = {3};
    const RunRecord rec = run(cfg, 41);
    const std::string dir1 = "/tmp/isac_test_rundir_a";
    const std::string dir2 = "/tmp/isac_test_rundir_b";
    RunConfig stamped = cfg;
    stamped.seed = 41;
    write_run_artifacts(stamped, rec, dir1);
    write_run_artifacts(stamped, run(cfg, 41), dir2);
    const auto m1 = read_manifest(dir1 + "/manifest.txt");
    const auto m2 = read_manifest(dir2 + "/manifest.txt");
    CHECK(m1.at("losses_hash") == m2.at("losses_hash"));
    CHECK(m1.at("image_hash") == m2.at("image_hash"));
    CHECK(m1.at("config_hash") == m2.at("config_hash"));
    CHECK(m1.at("seed") == "41");
    // dump round trip preserves the [0,1] attention range
    const Tensor sa = read_tensor(dir1 + "/sa_3.tnsr");
    for (float v : sa.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    // gt text round trip
    const SceneSpec gt = parse_ground_truth(read_file(dir1 + "/gt.txt"));
    CHECK(gt.instances.size() == rec.ground_truth->instances.size());
}

TEST_CASE("run config validation rejects bad inputs") {
    RunConfig cfg = scene_config(8, 10, "multi-class");
    cfg.T = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = scene_config(8, 10, "multi-class");
    cfg.eta = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = scene_config(8, 10, "multi-class");
    cfg.backend_id = "mystery";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = scene_config(8, 10, "multi-class");
    cfg.dump_timesteps = {9};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = scene_config(8, 10, "multi-class");
    cfg.prompt.counts = {1, 2};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
