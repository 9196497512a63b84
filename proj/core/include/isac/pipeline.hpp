#pragma once

#include <cstdint>

#include "isac/backend.hpp"
#include "isac/losses.hpp"
#include "isac/masking.hpp"

namespace isac {

/// Snapshot of one timestep's forward pass through the attention-to-loss
/// pipeline. Hard selections (binarization, foreground gathering, cluster
/// assignment, realized maxima) are recomputed each step but held constant
/// within a gradient evaluation.
struct StepContext {
    int t = 0;
    int H = 0, W = 0;
    const DenoiserBackend* backend = nullptr;
    const PromptSpec* prompt = nullptr;
    LossWeights weights;
    LossKind kind = LossKind::Mpo;
    uint64_t kmeans_seed = 0;

    AttentionCapture capture;
    Mat sa_norm, ca_norm;  // accumulated and min-max rescaled
    MinmaxInfo sa_mm, ca_mm;
    std::vector<double> sa_row_sums;  // row sums of sa_norm (propagation)
    Mat ca_prop;
    Mat ca_bin;
    ForegroundSelection fg;
    bool clustered = false;
    HardInstanceAssignment assign;
    Mat sa_fg;
    std::vector<std::vector<double>> masks;  // per-instance soft masks over F
    Mat cls;                                 // HW×k class masks
    LossReport report;

    /// Hash over every hard selection of the step; two contexts with equal
    /// fingerprints share the same differentiable path.
    uint64_t selection_fingerprint() const;
};

/// Runs the probe forward pass and the full mask/loss pipeline at X_t.
StepContext build_step_context(const DenoiserBackend& backend, const Grid& latent,
                               const PromptSpec& prompt, int t, const LossWeights& weights,
                               LossKind kind, uint64_t kmeans_seed);

/// Exact gradient of the combined loss along the differentiable path
/// (logits -> softmax -> accumulation -> normalization -> propagation ->
/// soft masks -> overlap), with the step's hard selections frozen.
Grid loss_gradient(const Grid& latent, const StepContext& ctx);

}  // namespace isac
