#include "isac/pipeline.hpp"

#include <cmath>

#include "isac/rng.hpp"

namespace isac {

namespace {

Mat transpose(const Mat& m) {
    Mat t(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
    return t;
}

int total_heads(const AttentionCapture& cap) {
    int n = 0;
    for (const auto& la : cap.layers) n += static_cast<int>(la.self_heads.size());
    return n;
}

/// Adjoint of minmax_apply with the min/max positions frozen.
void minmax_backward(const Mat& normalized, const MinmaxInfo& mm, const Mat& dnorm, Mat& draw) {
    draw = Mat(normalized.rows, normalized.cols);
    if (mm.degenerate) return;
    const double inv = 1.0 / (mm.max - mm.min);
    double g_sum = 0.0, g_dot = 0.0;
    for (size_t i = 0; i < dnorm.v.size(); ++i) {
        g_sum += dnorm.v[i];
        g_dot += dnorm.v[i] * normalized.v[i];
    }
    for (size_t i = 0; i < dnorm.v.size(); ++i) draw.v[i] = dnorm.v[i] * inv;
    draw.v[mm.argmin] -= g_sum * inv;
    draw.v[mm.argmax] -= g_dot * inv;
    draw.v[mm.argmin] += g_dot * inv;
}

}  // namespace

uint64_t StepContext::selection_fingerprint() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix_int = [&h](int x) { h = fnv1a64(&x, sizeof(x), h); };
    mix_int(sa_mm.argmin);
    mix_int(sa_mm.argmax);
    mix_int(ca_mm.argmin);
    mix_int(ca_mm.argmax);
    mix_int(static_cast<int>(sa_mm.degenerate));
    mix_int(static_cast<int>(ca_mm.degenerate));
    for (int idx : fg.indices) mix_int(idx);
    mix_int(clustered ? 1 : 0);
    if (clustered)
        for (int l : assign.labels) mix_int(l);
    int zero_rows = 0;
    for (double s : sa_row_sums)
        if (s == 0.0) ++zero_rows;
    mix_int(zero_rows);
    mix_int(report.ins_prov.first);
    mix_int(report.ins_prov.second);
    mix_int(report.ins_prov.pixel);
    mix_int(report.cls_prov.first);
    mix_int(report.cls_prov.second);
    mix_int(report.cls_prov.pixel);
    return h;
}

StepContext build_step_context(const DenoiserBackend& backend, const Grid& latent,
                               const PromptSpec& prompt, int t, const LossWeights& weights,
                               LossKind kind, uint64_t kmeans_seed) {
    StepContext ctx;
    ctx.t = t;
    ctx.H = latent.H;
    ctx.W = latent.W;
    ctx.backend = &backend;
    ctx.prompt = &prompt;
    ctx.weights = weights;
    ctx.kind = kind;
    ctx.kmeans_seed = kmeans_seed;
    ctx.capture = backend.capture_attention(latent, prompt, t);

    const auto& layers = backend.layers();
    if (layers.size() != ctx.capture.layers.size())
        throw ConfigError("step context: capture does not match layer configs");

    // accumulate upsampled maps, summation order: layer index then head index
    const int hw = latent.H * latent.W;
    Mat sa_sum(hw, hw);
    Mat ca_sum(hw, prompt.length());
    for (size_t l = 0; l < layers.size(); ++l) {
        const auto& cfg = layers[l];
        for (const Mat& m : ctx.capture.layers[l].self_heads) {
            Mat up = upsample_map(m, cfg.height, cfg.width, latent.H, latent.W, MapKind::Self);
            for (size_t i = 0; i < sa_sum.v.size(); ++i) sa_sum.v[i] += up.v[i];
        }
        for (const Mat& m : ctx.capture.layers[l].cross_heads) {
            Mat up = upsample_map(m, cfg.height, cfg.width, latent.H, latent.W, MapKind::Cross);
            for (size_t i = 0; i < ca_sum.v.size(); ++i) ca_sum.v[i] += up.v[i];
        }
    }
    const int heads = total_heads(ctx.capture);
    if (heads == 0) throw ConfigError("step context: backend emitted no attention maps");
    for (double& v : sa_sum.v) v /= heads;
    for (double& v : ca_sum.v) v /= heads;

    ctx.sa_mm = minmax_info(sa_sum);
    ctx.ca_mm = minmax_info(ca_sum);
    ctx.sa_norm = minmax_apply(sa_sum, ctx.sa_mm);
    ctx.ca_norm = minmax_apply(ca_sum, ctx.ca_mm);

    ctx.sa_row_sums.resize(hw);
    for (int i = 0; i < hw; ++i) {
        double s = 0.0;
        for (int j = 0; j < hw; ++j) s += ctx.sa_norm.at(i, j);
        ctx.sa_row_sums[i] = s;
    }
    ctx.ca_prop = propagate_classes(ctx.sa_norm, ctx.ca_norm);
    ctx.ca_bin = binarize(ctx.ca_prop);
    ctx.fg = global_foreground(ctx.ca_bin, prompt.class_token_indices);

    const int n_instances = prompt.total_instances();
    if (ctx.fg.count() >= n_instances && ctx.fg.count() >= 1) {
        ctx.sa_fg = filter_self_attention(ctx.sa_norm, ctx.fg);
        const Mat points = append_coordinates(ctx.sa_fg, ctx.fg, latent.H, latent.W);
        ctx.assign = kmeans_cluster(points, n_instances, kmeans_seed);
        ctx.masks = instance_masks(ctx.sa_fg, ctx.assign);
        ctx.clustered = true;
    }
    ctx.cls = class_masks(ctx.ca_prop, prompt.class_token_indices);
    ctx.report = combined_loss(ctx.masks, ctx.cls, weights, kind, t);
    if (!std::isfinite(ctx.report.loss_total))
        throw NumericalError("step context: non-finite loss", t);
    return ctx;
}

Grid loss_gradient(const Grid& latent, const StepContext& ctx) {
    const int hw = ctx.H * ctx.W;
    const PromptSpec& prompt = *ctx.prompt;
    Grid dlatent(ctx.H, ctx.W, latent.d);

    const bool ins_live = ctx.weights.ins != 0.0 && ctx.clustered &&
                          ctx.report.ins_prov.first >= 0;
    const bool cls_live = ctx.weights.cls != 0.0 && ctx.report.cls_prov.first >= 0;
    if (!ins_live && !cls_live) return dlatent;

    // ---- loss -> masks -------------------------------------------------
    Mat dca_prop(hw, prompt.length());
    Mat dsa_norm(hw, hw);

    if (ins_live) {
        std::vector<std::vector<double>> dmasks(ctx.masks.size(),
                                                std::vector<double>(ctx.fg.count(), 0.0));
        const PairProvenance& pv = ctx.report.ins_prov;
        overlap_backward(ctx.masks[pv.first], ctx.masks[pv.second], ctx.kind, pv.pixel,
                         ctx.weights.ins, dmasks[pv.first], dmasks[pv.second]);
        // masks -> filtered self-attention -> accumulated self-attention
        const int f = ctx.fg.count();
        for (int q = 0; q < f; ++q) {
            const int c = ctx.assign.labels[q];
            const double inv = 1.0 / ctx.assign.sizes[c];
            const int col = ctx.fg.indices[q];
            for (int p = 0; p < f; ++p) {
                const double g = dmasks[c][p];
                if (g == 0.0) continue;
                dsa_norm.at(ctx.fg.indices[p], col) += g * inv;
            }
        }
    }

    if (cls_live) {
        const PairProvenance& pv = ctx.report.cls_prov;
        std::vector<double> a(hw), b(hw), da(hw, 0.0), db(hw, 0.0);
        for (int i = 0; i < hw; ++i) {
            a[i] = ctx.cls.at(i, pv.first);
            b[i] = ctx.cls.at(i, pv.second);
        }
        overlap_backward(a, b, ctx.kind, pv.pixel, ctx.weights.cls, da, db);
        for (int i = 0; i < hw; ++i) {
            dca_prop.at(i, prompt.class_token_indices[pv.first]) += da[i];
            dca_prop.at(i, prompt.class_token_indices[pv.second]) += db[i];
        }
    }

    // ---- propagation: ca_prop = row_normalize(sa_norm) · ca_norm -------
    Mat dca_norm(hw, prompt.length());
    {
        const Mat rn = row_normalize(ctx.sa_norm);
        // dca_norm += rn^T · dca_prop
        Mat dca = matmul_at(rn, dca_prop);
        for (size_t i = 0; i < dca_norm.v.size(); ++i) dca_norm.v[i] += dca.v[i];
        // d(rn) = dca_prop · ca_norm^T, then through the row normalization
        Mat drn = matmul_bt(dca_prop, ctx.ca_norm);
        for (int i = 0; i < hw; ++i) {
            const double sum = ctx.sa_row_sums[i];
            if (sum == 0.0) continue;  // uniform fallback row: fixed selection
            const double inv = 1.0 / sum;
            double dot = 0.0;
            for (int j = 0; j < hw; ++j) dot += drn.at(i, j) * rn.at(i, j);
            for (int j = 0; j < hw; ++j)
                dsa_norm.at(i, j) += (drn.at(i, j) - dot) * inv;
        }
    }

    // ---- min-max normalization ------------------------------------------
    Mat dsa_raw, dca_raw;
    minmax_backward(ctx.sa_norm, ctx.sa_mm, dsa_norm, dsa_raw);
    minmax_backward(ctx.ca_norm, ctx.ca_mm, dca_norm, dca_raw);

    // ---- accumulation and per-layer upsampling ---------------------------
    const auto& layers = ctx.backend->layers();
    const int heads = total_heads(ctx.capture);
    const double inv_heads = 1.0 / heads;
    AttentionGrads grads(layers.size());
    for (size_t l = 0; l < layers.size(); ++l) {
        const auto& cfg = layers[l];
        const AxisInterp ry = make_axis_interp(cfg.height, ctx.H);
        const AxisInterp rx = make_axis_interp(cfg.width, ctx.W);
        for (size_t h = 0; h < ctx.capture.layers[l].self_heads.size(); ++h) {
            Mat g = dsa_raw;
            for (double& v : g.v) v *= inv_heads;
            // adjoint of: rows-up, transpose, rows-up, transpose
            Mat m3 = transpose(g);
            Mat m2 = upsample_pixel_rows_adjoint(m3, ry, rx);
            Mat m1 = transpose(m2);
            grads[l].self_heads.push_back(upsample_pixel_rows_adjoint(m1, ry, rx));
        }
        for (size_t h = 0; h < ctx.capture.layers[l].cross_heads.size(); ++h) {
            Mat g = dca_raw;
            for (double& v : g.v) v *= inv_heads;
            grads[l].cross_heads.push_back(upsample_pixel_rows_adjoint(g, ry, rx));
        }
    }

    ctx.backend->attention_backward(ctx.capture, grads, latent, prompt, ctx.t, dlatent);
    if (!all_finite(dlatent.v))
        throw NumericalError("loss gradient: non-finite result", ctx.t);
    return dlatent;
}

}  // namespace isac
