#include "isac/engine.hpp"

#include <algorithm>
#include <cmath>

namespace isac {

std::string PromptConfig::render_text() const {
    validate();
    if (kind == "multi-class") return render_multiclass_prompt(classes);
    return render_multiinstance_prompt(classes[0], counts[0]);
}

int PromptConfig::total_instances() const {
    int n = 0;
    for (int c : counts) n += c;
    return n;
}

void PromptConfig::validate() const {
    if (kind != "multi-class" && kind != "multi-instance")
        throw ConfigError("prompt kind must be multi-class or multi-instance");
    if (classes.empty() || classes.size() != counts.size())
        throw ConfigError("prompt classes/counts must be non-empty and aligned");
    if (kind == "multi-class") {
        if (classes.size() < 2) throw ConfigError("multi-class prompt needs >= 2 classes");
        for (int c : counts)
            if (c != 1) throw ConfigError("multi-class prompt uses one instance per class");
    } else {
        if (classes.size() != 1) throw ConfigError("multi-instance prompt uses a single class");
        if (counts[0] < 1) throw ConfigError("instance count must be >= 1");
    }
}

void RunConfig::validate() const {
    if (T < 2) throw ConfigError("run config: T must be >= 2");
    if (eta < 0.0) throw ConfigError("run config: eta must be >= 0");
    if (H < 2 || W < 2 || d < 2) throw ConfigError("run config: grid dims must be >= 2");
    if (backend_id != "synthetic-scene" && backend_id != "seeded-attention")
        throw ConfigError("run config: unknown backend id: " + backend_id);
    prompt.validate();
    for (int t : dump_timesteps)
        if (t < 1 || t > T) throw ConfigError("run config: dump timestep outside 1..T");
}

PromptSpec prompt_from_config(const PromptConfig& pc, int d, uint64_t seed) {
    pc.validate();
    PromptSpec spec = build_prompt_spec(pc.render_text(), pc.classes, pc.counts, d,
                                        derive_seed(seed, "prompt-embeddings"));
    return spec;
}

std::unique_ptr<DenoiserBackend> make_backend(const RunConfig& cfg, const PromptSpec& prompt) {
    const uint64_t backend_seed = derive_seed(cfg.seed, "backend");
    if (cfg.backend_id == "synthetic-scene")
        return build_scene_denoiser(prompt, cfg.H, cfg.W, cfg.d, cfg.T, backend_seed);
    std::vector<LayerPlan> plan;
    plan.push_back({cfg.H, cfg.W, 2});
    if (cfg.H % 2 == 0 && cfg.W % 2 == 0) plan.push_back({cfg.H / 2, cfg.W / 2, 2});
    return build_seeded_denoiser(cfg.H, cfg.W, cfg.d, plan, cfg.T, backend_seed);
}

Grid denoise_step(const Grid& x, int t, const DenoiserBackend& backend, const PromptSpec& prompt,
                  const DiffusionSchedule& schedule, Rng& rng) {
    if (t < 1 || t > schedule.T) throw ConfigError("denoise_step: t outside 1..T");
    const Grid eps = backend.predict_noise(x, prompt, t);
    const double a = schedule.alpha_at(t);
    const double abar = schedule.alpha_bar_at(t);
    const double coef = schedule.beta_at(t) / std::sqrt(1.0 - abar);
    const double inv_sqrt_a = 1.0 / std::sqrt(a);
    Grid out(x.H, x.W, x.d);
    for (size_t i = 0; i < x.v.size(); ++i) out.v[i] = (x.v[i] - coef * eps.v[i]) * inv_sqrt_a;
    if (t > 1) {
        const double sigma = schedule.sigma_at(t);
        for (double& v : out.v) v += sigma * rng.normal();
    }
    if (!all_finite(out.v)) throw NumericalError("denoise_step: non-finite latent", t);
    return out;
}

Grid isac_update(const Grid& x, const Grid& grad, double eta) {
    Grid out = x;
    if (eta == 0.0) return out;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= eta * grad.v[i];
    return out;
}

StepContext make_step(const RunConfig& cfg, const DenoiserBackend& backend,
                      const PromptSpec& prompt, const Grid& x, int t) {
    const LossWeights w = schedule_weights(cfg.schedule, t, cfg.T);
    const uint64_t kseed = derive_seed(cfg.seed, "kmeans", static_cast<uint64_t>(t));
    return build_step_context(backend, x, prompt, t, w, cfg.loss, kseed);
}

std::pair<Grid, LossReport> isac_step(const Grid& x, int t, const RunConfig& cfg,
                                      const DenoiserBackend& backend, const PromptSpec& prompt) {
    const StepContext ctx = make_step(cfg, backend, prompt, x, t);
    const Grid grad = loss_gradient(x, ctx);
    return {isac_update(x, grad, cfg.eta), ctx.report};
}

StepDump dump_from_context(const StepContext& ctx) {
    StepDump d;
    d.t = ctx.t;
    d.sa = ctx.sa_norm;
    d.ca = ctx.ca_norm;
    d.ca_prop = ctx.ca_prop;
    d.ca_bin = ctx.ca_bin;
    d.foreground.assign(ctx.fg.mask.begin(), ctx.fg.mask.end());
    d.foreground_indices = ctx.fg.indices;
    d.masks = ctx.masks;
    return d;
}

RunRecord run(const RunConfig& cfg, uint64_t seed, RunRecord* partial) {
    RunConfig c = cfg;
    c.seed = seed;
    c.validate();

    const PromptSpec prompt = prompt_from_config(c.prompt, c.d, seed);
    const auto backend = make_backend(c, prompt);
    const DiffusionSchedule schedule = DiffusionSchedule::linear(c.T);
    Rng rng(derive_seed(seed, "trajectory"));

    RunRecord rec;
    RunRecord& out = partial ? *partial : rec;
    out = RunRecord{};

    Grid x(c.H, c.W, c.d);
    for (double& v : x.v) v = rng.normal();

    try {
        for (int t = c.T; t >= 1; --t) {
            const StepContext ctx = make_step(c, *backend, prompt, x, t);
            out.reports.push_back(ctx.report);
            if (std::find(c.dump_timesteps.begin(), c.dump_timesteps.end(), t) !=
                c.dump_timesteps.end())
                out.dumps.push_back(dump_from_context(ctx));
            const Grid grad = loss_gradient(x, ctx);
            const Grid updated = isac_update(x, grad, c.eta);
            x = denoise_step(updated, t, *backend, prompt, schedule, rng);
        }
    } catch (const NumericalError&) {
        out.final_latent = x;
        throw;
    }

    out.final_latent = x;
    out.image = backend->decode(x, prompt);
    if (backend->has_ground_truth()) out.ground_truth = backend->ground_truth(x, prompt);
    return out;
}

RunRecord run(const RunConfig& cfg) { return run(cfg, cfg.seed); }

std::vector<SceneInstance> extract_ground_truth(const RunRecord& record) {
    if (!record.ground_truth)
        throw ConfigError("extract_ground_truth: the run's backend provides no ground truth");
    return record.ground_truth->instances;
}

}  // namespace isac
