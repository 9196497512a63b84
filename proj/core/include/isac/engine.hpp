#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "isac/backend.hpp"
#include "isac/diffusion.hpp"
#include "isac/pipeline.hpp"
#include "isac/rng.hpp"

namespace isac {

/// What to generate: prompt kind, classes and per-class instance counts.
struct PromptConfig {
    std::string kind;  // "multi-class" | "multi-instance"
    std::vector<std::string> classes;
    std::vector<int> counts;

    std::string render_text() const;
    int total_instances() const;
    void validate() const;
};

struct RunConfig {
    int T = 50;
    double eta = 0.01;
    ScheduleId schedule = ScheduleId::E;
    LossKind loss = LossKind::Mpo;
    std::string backend_id = "synthetic-scene";
    uint64_t seed = 0;
    int H = 20, W = 20, d = 8;
    PromptConfig prompt;
    std::vector<int> dump_timesteps;

    void validate() const;
};

/// Attention and mask snapshots kept for one dumped timestep.
struct StepDump {
    int t = 0;
    Mat sa, ca, ca_prop, ca_bin;
    std::vector<double> foreground;               // HW entries as 0/1
    std::vector<std::vector<double>> masks;       // instance masks over F
    std::vector<int> foreground_indices;
};

struct RunRecord {
    std::vector<LossReport> reports;  // one per timestep, t = T..1
    Grid final_latent;
    Image image;
    std::optional<SceneSpec> ground_truth;
    std::vector<StepDump> dumps;
};

PromptSpec prompt_from_config(const PromptConfig& pc, int d, uint64_t seed);
std::unique_ptr<DenoiserBackend> make_backend(const RunConfig& cfg, const PromptSpec& prompt);

/// One reverse-process step: posterior mean of the linear-beta process plus
/// seeded noise injection; the terminal step (t = 1) injects none.
Grid denoise_step(const Grid& x, int t, const DenoiserBackend& backend, const PromptSpec& prompt,
                  const DiffusionSchedule& schedule, Rng& rng);

/// The per-timestep latent update: X~ = X - eta * grad. A zero gradient or
/// eta = 0 returns X bit-identically.
Grid isac_update(const Grid& x, const Grid& grad, double eta);

/// Probe pass + masks + loss for one timestep under the run's schedule.
StepContext make_step(const RunConfig& cfg, const DenoiserBackend& backend,
                      const PromptSpec& prompt, const Grid& x, int t);

/// Single-call form: capture, loss, one gradient step.
std::pair<Grid, LossReport> isac_step(const Grid& x, int t, const RunConfig& cfg,
                                      const DenoiserBackend& backend, const PromptSpec& prompt);

/// Full Algorithm-1 loop: sample X_T, then for t = T..1 capture attention,
/// optimize the latent once, and denoise; finally decode. `partial`, when
/// given, receives whatever completed before an error for diagnostics.
RunRecord run(const RunConfig& cfg, uint64_t seed, RunRecord* partial = nullptr);
RunRecord run(const RunConfig& cfg);

/// Blob parameters read back from the record's final latent.
std::vector<SceneInstance> extract_ground_truth(const RunRecord& record);

StepDump dump_from_context(const StepContext& ctx);

}  // namespace isac
