#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "isac/attention.hpp"
#include "isac/diffusion.hpp"
#include "isac/image.hpp"
#include "isac/mat.hpp"
#include "isac/prompt.hpp"

namespace isac {

/// Post-softmax attention maps captured from one probe forward pass.
struct LayerAttention {
    std::vector<Mat> self_heads;   // each H_lW_l × H_lW_l
    std::vector<Mat> cross_heads;  // each H_lW_l × L
};

struct AttentionCapture {
    std::vector<LayerAttention> layers;
    std::shared_ptr<const void> ctx;  // backend forward state for the adjoint
};

/// Gradients w.r.t. the captured post-softmax maps, same shapes as the capture.
using AttentionGrads = std::vector<LayerAttention>;

struct SceneInstance {
    int class_index = 0;
    double cx = 0.0, cy = 0.0;  // normalized [0,1]
    double radius = 0.0;        // normalized units
};

struct SceneSpec {
    std::vector<SceneInstance> instances;
    std::vector<Color> palette;  // one color per prompt class
    Color background{};
};

/// A denoiser the engine can drive: it predicts noise, exposes attention
/// through hooks that never alter the forward computation, and decodes the
/// final latent. Immutable after construction.
class DenoiserBackend {
public:
    virtual ~DenoiserBackend() = default;

    virtual std::string id() const = 0;
    virtual const std::vector<AttentionLayerConfig>& layers() const = 0;

    virtual AttentionCapture capture_attention(const Grid& latent, const PromptSpec& prompt,
                                               int t) const = 0;

    /// Accumulates d(loss)/d(latent) given gradients on the captured maps.
    virtual void attention_backward(const AttentionCapture& capture, const AttentionGrads& grads,
                                    const Grid& latent, const PromptSpec& prompt, int t,
                                    Grid& dlatent) const = 0;

    virtual Grid predict_noise(const Grid& latent, const PromptSpec& prompt, int t) const = 0;

    virtual Image decode(const Grid& latent, const PromptSpec& prompt) const = 0;

    virtual bool has_ground_truth() const { return false; }
    virtual SceneSpec ground_truth(const Grid& latent, const PromptSpec& prompt) const;

    /// Inverse of the scene read-out: the minimum-norm latent whose blob
    /// parameters decode to the given instances, with each blob's class
    /// logit raised by logit_margin over the others. Scene backends only.
    virtual Grid encode_scene(const std::vector<SceneInstance>& instances,
                              double logit_margin) const;

    /// Hash over the constructed weights; build determinism checks.
    virtual uint64_t weight_hash() const = 0;
};

struct LayerPlan {
    int height = 0;
    int width = 0;
    int head_count = 1;
};

/// Random-projection denoiser: per-layer multi-head QK^T attention with
/// seeded Gaussian weights (scale 1/sqrt(d)), noise predicted by a fixed
/// linear read-out of the attended features.
std::unique_ptr<DenoiserBackend> build_seeded_denoiser(int H, int W, int d,
                                                       const std::vector<LayerPlan>& plan,
                                                       int T, uint64_t seed);

/// Tunables of the scene denoiser. Values are declared constants of the
/// artifact, not fitted quantities.
struct SceneParams {
    double self_temperature = 1.5;   // membership-distance scale in self logits
    double kappa0 = 48.0;            // membership sharpness at t = T
    double kappa_pow = 1.0;          // sharpness grows like (T/t)^pow
    double kappa_cap = 5.0;          // cap on the growth factor
    // the membership vector carries the pixel position scaled by
    // locality_gain * H_l/H, so rows concentrate on a fixed pixel
    // neighborhood at every resolution
    double locality_gain = 0.7;
    // blobs occupy attention with radius + attn_radius_pad, keeping even
    // nascent blobs from collapsing to single-pixel attention supports
    double attn_radius_pad = 0.04;
    // class-token logit: gain*S/(1+S) - offset + membership-weighted mean
    // class logit, with S the pixel's membership sum. The offset keeps soft
    // membership tails below the adaptive foreground threshold.
    double cross_gain = 16.0;
    double cross_offset = 5.0;
    double cross_floor = 0.25;   // softens the weighted logit mean
    double center_span = 0.45;   // centers live in 0.5 +- span
    double center_gain = 0.8;
    double radius_max = 0.34;
    double radius_gain = 1.0;
    double logit_gain = 1.5;
};

/// Blob-scene denoiser: N blob parameter vectors (center, radius, class
/// logits) are read from the latent by a fixed seeded orthonormal linear
/// map; attention is derived from soft blob memberships, and denoising
/// drifts the latent toward the scene its current read-out encodes.
std::unique_ptr<DenoiserBackend> build_scene_denoiser(const PromptSpec& prompt, int H, int W,
                                                      int d, int T, uint64_t seed,
                                                      const SceneParams& params = {});

/// Hard-class renderer: every pixel takes the nearest covering blob's class
/// color with a 1-pixel anti-aliased edge, otherwise the background color.
/// Discs smaller than half a pixel are below the raster floor and invisible.
Image render_scene(const std::vector<SceneInstance>& instances, const std::vector<Color>& palette,
                   const Color& background, int H, int W);

/// Shared rasterizer with explicit per-blob colors (soft class blends).
Image render_blobs(const std::vector<SceneInstance>& instances, const std::vector<Color>& colors,
                   const Color& background, int H, int W);

/// Fixed class color table used by scenes and detectors.
Color class_color(int class_index);
Color scene_background();

/// Row-softmax adjoint for one captured map: dlogits from d(post-softmax).
void softmax_backward(const Mat& softmaxed, const Mat& dmap, Mat& dlogits);

}  // namespace isac
