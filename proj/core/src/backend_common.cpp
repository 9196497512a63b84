#include <algorithm>
#include <cmath>

#include "isac/backend.hpp"

namespace isac {

SceneSpec DenoiserBackend::ground_truth(const Grid&, const PromptSpec&) const {
    throw ConfigError("backend '" + id() + "' provides no scene ground truth");
}

Grid DenoiserBackend::encode_scene(const std::vector<SceneInstance>&, double) const {
    throw ConfigError("backend '" + id() + "' has no scene encoding");
}

Color class_color(int class_index) {
    static const Color table[] = {
        {0.90, 0.10, 0.10},  // red
        {0.10, 0.80, 0.15},  // green
        {0.15, 0.25, 0.95},  // blue
        {0.95, 0.85, 0.10},  // yellow
        {0.90, 0.15, 0.85},  // magenta
        {0.10, 0.85, 0.85},  // cyan
    };
    if (class_index < 0 || class_index >= static_cast<int>(std::size(table)))
        throw ConfigError("class_color: palette has no entry for this class index");
    return table[class_index];
}

Color scene_background() { return {0.06, 0.06, 0.06}; }

Image render_blobs(const std::vector<SceneInstance>& instances, const std::vector<Color>& colors,
                   const Color& background, int H, int W) {
    if (instances.size() != colors.size())
        throw ConfigError("render_blobs: one color per instance required");
    Image img(H, W);
    const double px_scale = std::min(H, W);  // normalized units -> pixels
    for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
            const double x = (c + 0.5) / W;
            const double y = (r + 0.5) / H;
            int best = -1;
            double best_dist = 0.0, best_alpha = 0.0;
            for (size_t i = 0; i < instances.size(); ++i) {
                const SceneInstance& b = instances[i];
                if (b.radius * px_scale <= 0.5) continue;  // below the raster floor
                const double dx = x - b.cx;
                const double dy = y - b.cy;
                const double dist = std::sqrt(dx * dx + dy * dy);
                const double alpha = std::clamp((b.radius - dist) * px_scale + 0.5, 0.0, 1.0);
                if (alpha <= 0.0) continue;
                if (best < 0 || dist < best_dist) {
                    best = static_cast<int>(i);
                    best_dist = dist;
                    best_alpha = alpha;
                }
            }
            Color out = background;
            if (best >= 0) {
                for (int ch = 0; ch < 3; ++ch)
                    out[ch] += best_alpha * (colors[best][ch] - background[ch]);
            }
            img.set_pixel(r, c, out);
        }
    }
    return img;
}

Image render_scene(const std::vector<SceneInstance>& instances, const std::vector<Color>& palette,
                   const Color& background, int H, int W) {
    std::vector<Color> colors;
    colors.reserve(instances.size());
    for (const auto& b : instances) {
        if (b.class_index < 0 || b.class_index >= static_cast<int>(palette.size()))
            throw ConfigError("render_scene: instance class outside the palette");
        colors.push_back(palette[b.class_index]);
    }
    return render_blobs(instances, colors, background, H, W);
}

void softmax_backward(const Mat& softmaxed, const Mat& dmap, Mat& dlogits) {
    if (!softmaxed.same_shape(dmap)) throw ConfigError("softmax_backward: shape mismatch");
    dlogits = Mat(softmaxed.rows, softmaxed.cols);
    for (int i = 0; i < softmaxed.rows; ++i) {
        const double* a = &softmaxed.v[static_cast<size_t>(i) * softmaxed.cols];
        const double* g = &dmap.v[static_cast<size_t>(i) * dmap.cols];
        double* o = &dlogits.v[static_cast<size_t>(i) * dlogits.cols];
        double dot = 0.0;
        for (int j = 0; j < softmaxed.cols; ++j) dot += a[j] * g[j];
        for (int j = 0; j < softmaxed.cols; ++j) o[j] = a[j] * (g[j] - dot);
    }
}

}  // namespace isac
