#pragma once

#include <vector>

#include "isac/mat.hpp"
#include "isac/prompt.hpp"

namespace isac {

/// One attention layer: spatial resolution, head count and per-head
/// projection weights. Weight vectors may stay empty for backends that
/// emit attention maps directly instead of projecting the latent.
struct AttentionLayerConfig {
    int layer_index = 0;
    int height = 0;  // H_l
    int width = 0;   // W_l
    int head_count = 1;
    int head_dim = 0;
    std::vector<Mat> wq_self, wk_self;    // per head, d×head_dim
    std::vector<Mat> wq_cross, wk_cross;  // per head, d×head_dim

    int tokens() const { return height * width; }
};

/// Resolution-unified attention at one timestep, min-max rescaled to [0,1].
struct AccumulatedAttention {
    Mat sa;  // HW×HW
    Mat ca;  // HW×L
};

enum class MapKind { Self, Cross };

/// Non-overlapping average pooling of the latent down to Hl×Wl.
Grid downsample_average(const Grid& latent, int target_h, int target_w);

/// Row-softmax in place helpers.
void softmax_rows(Mat& m);

/// Per-head self-attention maps at the layer's resolution. The latent is
/// average-pooled to the layer resolution before projecting.
/// Each row sums to 1 over the H_lW_l keys.
std::vector<Mat> compute_self_attention(const Grid& latent, const AttentionLayerConfig& cfg);

/// Per-head cross-attention maps (H_lW_l × L); rows sum to 1 over tokens.
std::vector<Mat> compute_cross_attention(const Grid& latent, const PromptSpec& prompt,
                                         const AttentionLayerConfig& cfg);

/// 1-D interpolation plan for one axis, half-pixel sample centers with edge
/// clamping. Target position i reads (1-w)*src[i0] + w*src[i1].
struct AxisInterp {
    std::vector<int> i0, i1;
    std::vector<double> w;
    int src = 0, dst = 0;
};
AxisInterp make_axis_interp(int src, int dst);

/// Bilinear upsampling of a map whose pixel axes are flattened H×W grids.
/// Self maps interpolate both the query and the key axis; cross maps only
/// the query (pixel) axis. The scale factor must be a positive integer.
Mat upsample_map(const Mat& map, int src_h, int src_w, int dst_h, int dst_w, MapKind kind);

/// Applies the pixel-axis interpolation to rows (each column treated as a
/// src_h×src_w image); adjoint scatters back. Shared with the gradient path.
Mat upsample_pixel_rows(const Mat& m, const AxisInterp& ry, const AxisInterp& rx);
Mat upsample_pixel_rows_adjoint(const Mat& g, const AxisInterp& ry, const AxisInterp& rx);

/// Mean of already-upsampled per-layer, per-head maps; divides by the total
/// head count across layers. Summation order is layer index then head index.
Mat accumulate_mean(const std::vector<std::vector<Mat>>& per_layer_heads);

/// Full accumulation contract: mean across heads and layers followed by
/// min-max rescaling. kind selects the dimension sanity check only.
Mat accumulate(const std::vector<std::vector<Mat>>& per_layer_heads, MapKind kind);

/// Global min-max rescale to [0,1]; a constant map maps to all zeros.
Mat minmax_normalize(const Mat& m);

/// Positions of the global min/max used by the normalization adjoint.
struct MinmaxInfo {
    int argmin = 0, argmax = 0;
    double min = 0.0, max = 0.0;
    bool degenerate = false;  // max == min
};
MinmaxInfo minmax_info(const Mat& m);
Mat minmax_apply(const Mat& m, const MinmaxInfo& info);

}  // namespace isac
