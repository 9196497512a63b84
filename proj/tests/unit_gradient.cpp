#include "doctest.h"
#include "gradient_check.hpp"
#include "isac/backend.hpp"

using namespace isac;
using isac_test::fd_check;
using isac_test::random_latent;
using isac_test::synthetic_prompt;

namespace {

std::unique_ptr<DenoiserBackend> small_seeded(int H, int W, int d, uint64_t seed) {
    std::vector<LayerPlan> plan = {{H, W, 2}, {H / 2, W / 2, 2}};
    return build_seeded_denoiser(H, W, d, plan, 50, seed);
}

}  // namespace

TEST_CASE("gradient: constant one-pixel pipeline has zero gradient") {
    // one pixel and one token: every map is the constant [1], min-max zeroes
    // it, and all losses vanish identically in a neighborhood
    const PromptSpec prompt = synthetic_prompt(1, {1}, 2, 5);
    std::vector<LayerPlan> plan = {{1, 1, 1}};
    auto backend = build_seeded_denoiser(1, 1, 2, plan, 50, 7);
    Grid latent = random_latent(1, 1, 2, 3);
    const LossWeights w{0.5, 0.5, ScheduleId::C};
    const StepContext ctx = build_step_context(*backend, latent, prompt, 25, w, LossKind::Mpo, 1);
    CHECK(ctx.report.loss_total == 0.0);
    const Grid g = loss_gradient(latent, ctx);
    for (double v : g.v) CHECK(v == 0.0);
}

TEST_CASE("gradient: tiny nontrivial composite matches finite differences") {
    const PromptSpec prompt = synthetic_prompt(2, {1, 1}, 3, 11);
    std::vector<LayerPlan> plan = {{2, 2, 1}};
    auto backend = build_seeded_denoiser(2, 2, 3, plan, 50, 13);
    const Grid latent = random_latent(2, 2, 3, 17);
    const LossWeights w{0.5, 0.5, ScheduleId::C};
    const auto res = fd_check(*backend, latent, prompt, 25, w, LossKind::Mpo, 42, 1e-3);
    INFO("max_rel=", res.max_rel, " excluded=", res.excluded, "/", res.total);
    CHECK(res.max_rel <= 1e-4);
    CHECK(res.excluded < res.total);
}

TEST_CASE("gradient: seeded backend at 8x8 matches finite differences") {
    const PromptSpec prompt = synthetic_prompt(4, {2, 1}, 4, 21);
    auto backend = small_seeded(8, 8, 4, 23);
    for (uint64_t rep = 0; rep < 3; ++rep) {
        const Grid latent = random_latent(8, 8, 4, 100 + rep);
        const LossWeights w{0.6, 0.4, ScheduleId::E};
        const auto res = fd_check(*backend, latent, prompt, 40, w, LossKind::Mpo,
                                  derive_seed(7, "km", rep), 1e-3);
        INFO("rep=", rep, " max_rel=", res.max_rel, " excluded=", res.excluded);
        CHECK(res.max_rel <= 1e-4);
    }
}

TEST_CASE("gradient: every ablation loss kind matches finite differences") {
    const PromptSpec prompt = synthetic_prompt(4, {2, 1}, 4, 31);
    auto backend = small_seeded(8, 8, 4, 37);
    const Grid latent = random_latent(8, 8, 4, 41);
    for (LossKind kind : {LossKind::Mpo, LossKind::Mae, LossKind::Kl, LossKind::Iou}) {
        const LossWeights w{0.5, 0.5, ScheduleId::C};
        const auto res = fd_check(*backend, latent, prompt, 30, w, kind, 77, 1e-3);
        INFO("kind=", to_string(kind), " max_rel=", res.max_rel);
        CHECK(res.max_rel <= 1e-4);
    }
}

TEST_CASE("gradient: scene backend matches finite differences at several timesteps") {
    const PromptSpec prompt = synthetic_prompt(5, {2, 1}, 4, 51);
    auto backend = build_scene_denoiser(prompt, 8, 8, 4, 50, 53);
    for (int t : {50, 25}) {
        const Grid latent = random_latent(8, 8, 4, 60 + t);
        const LossWeights w = schedule_weights(ScheduleId::E, t, 50);
        const auto res = fd_check(*backend, latent, prompt, t, w, LossKind::Mpo,
                                  derive_seed(9, "km", t), 3e-4);
        INFO("t=", t, " max_rel=", res.max_rel, " excluded=", res.excluded, "/", res.total);
        CHECK(res.max_rel <= 2e-4);  // sharpness grows toward t=1
    }
}

TEST_CASE("gradient: lambda weights scale the two paths independently") {
    const PromptSpec prompt = synthetic_prompt(4, {2, 1}, 4, 61);
    auto backend = small_seeded(8, 8, 4, 67);
    const Grid latent = random_latent(8, 8, 4, 71);
    const uint64_t kseed = 5;
    auto grad_for = [&](double li, double lc) {
        const LossWeights w{li, lc, ScheduleId::C};
        const StepContext ctx =
            build_step_context(*backend, latent, prompt, 20, w, LossKind::Mpo, kseed);
        return loss_gradient(latent, ctx);
    };
    const Grid g_ins = grad_for(1.0, 0.0);
    const Grid g_cls = grad_for(0.0, 1.0);
    const Grid g_mix = grad_for(0.3, 0.7);
    for (size_t i = 0; i < g_mix.v.size(); ++i)
        CHECK(g_mix.v[i] == doctest::Approx(0.3 * g_ins.v[i] + 0.7 * g_cls.v[i]).epsilon(1e-9));
}
