#include "isac/attention.hpp"

#include <algorithm>
#include <cmath>

namespace isac {

Grid downsample_average(const Grid& latent, int target_h, int target_w) {
    if (target_h < 1 || target_w < 1 || latent.H % target_h != 0 || latent.W % target_w != 0)
        throw ConfigError("downsample_average: resolution does not divide latent grid");
    const int fh = latent.H / target_h;
    const int fw = latent.W / target_w;
    if (fh == 1 && fw == 1) return latent;
    Grid out(target_h, target_w, latent.d);
    const double inv = 1.0 / (fh * fw);
    for (int r = 0; r < target_h; ++r) {
        for (int c = 0; c < target_w; ++c) {
            const int p = r * target_w + c;
            for (int dr = 0; dr < fh; ++dr) {
                for (int dc = 0; dc < fw; ++dc) {
                    const int q = (r * fh + dr) * latent.W + (c * fw + dc);
                    for (int ch = 0; ch < latent.d; ++ch) out.at(p, ch) += latent.at(q, ch);
                }
            }
            for (int ch = 0; ch < latent.d; ++ch) out.at(p, ch) *= inv;
        }
    }
    return out;
}

void softmax_rows(Mat& m) {
    for (int i = 0; i < m.rows; ++i) {
        double* row = &m.v[static_cast<size_t>(i) * m.cols];
        double mx = row[0];
        for (int j = 1; j < m.cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < m.cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        const double inv = 1.0 / sum;
        for (int j = 0; j < m.cols; ++j) row[j] *= inv;
    }
}

namespace {

void check_projection(const AttentionLayerConfig& cfg, const std::vector<Mat>& wq,
                      const std::vector<Mat>& wk, int dim, const char* what) {
    if (static_cast<int>(wq.size()) != cfg.head_count ||
        static_cast<int>(wk.size()) != cfg.head_count)
        throw ConfigError(std::string(what) + ": head weight count mismatch");
    for (int h = 0; h < cfg.head_count; ++h) {
        if (wq[h].rows != dim || wk[h].rows != dim)
            throw ConfigError(std::string(what) + ": latent dim does not match weight rows");
        if (wq[h].cols != cfg.head_dim || wk[h].cols != cfg.head_dim)
            throw ConfigError(std::string(what) + ": head dim mismatch");
        if (!all_finite(wq[h]) || !all_finite(wk[h]))
            throw ConfigError(std::string(what) + ": non-finite projection weights");
    }
}

}  // namespace

std::vector<Mat> compute_self_attention(const Grid& latent, const AttentionLayerConfig& cfg) {
    check_projection(cfg, cfg.wq_self, cfg.wk_self, latent.d, "self-attention");
    const Grid down = downsample_average(latent, cfg.height, cfg.width);
    const Mat x = down.as_mat();
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim));
    std::vector<Mat> maps;
    maps.reserve(cfg.head_count);
    for (int h = 0; h < cfg.head_count; ++h) {
        Mat q = matmul(x, cfg.wq_self[h]);
        Mat k = matmul(x, cfg.wk_self[h]);
        Mat logits = matmul_bt(q, k);
        for (double& v : logits.v) v *= scale;
        softmax_rows(logits);
        maps.push_back(std::move(logits));
    }
    return maps;
}

std::vector<Mat> compute_cross_attention(const Grid& latent, const PromptSpec& prompt,
                                         const AttentionLayerConfig& cfg) {
    if (prompt.length() == 0) throw ConfigError("cross-attention: empty prompt");
    if (prompt.embeddings.cols != latent.d)
        throw ConfigError("cross-attention: prompt embedding dim does not match latent dim");
    check_projection(cfg, cfg.wq_cross, cfg.wk_cross, latent.d, "cross-attention");
    const Grid down = downsample_average(latent, cfg.height, cfg.width);
    const Mat x = down.as_mat();
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim));
    std::vector<Mat> maps;
    maps.reserve(cfg.head_count);
    for (int h = 0; h < cfg.head_count; ++h) {
        Mat q = matmul(x, cfg.wq_cross[h]);
        Mat k = matmul(prompt.embeddings, cfg.wk_cross[h]);
        Mat logits = matmul_bt(q, k);
        for (double& v : logits.v) v *= scale;
        softmax_rows(logits);
        maps.push_back(std::move(logits));
    }
    return maps;
}

AxisInterp make_axis_interp(int src, int dst) {
    AxisInterp ai;
    ai.src = src;
    ai.dst = dst;
    ai.i0.resize(dst);
    ai.i1.resize(dst);
    ai.w.resize(dst);
    const double scale = static_cast<double>(src) / dst;
    for (int i = 0; i < dst; ++i) {
        double pos = (i + 0.5) * scale - 0.5;  // half-pixel sample centers
        pos = std::clamp(pos, 0.0, static_cast<double>(src - 1));
        int lo = static_cast<int>(std::floor(pos));
        int hi = std::min(lo + 1, src - 1);
        ai.i0[i] = lo;
        ai.i1[i] = hi;
        ai.w[i] = pos - lo;
    }
    return ai;
}

Mat upsample_pixel_rows(const Mat& m, const AxisInterp& ry, const AxisInterp& rx) {
    const int sh = ry.src, sw = rx.src, dh = ry.dst, dw = rx.dst;
    if (m.rows != sh * sw) throw ConfigError("upsample: row count does not match source grid");
    // pass 1: expand rows of the underlying grid (vertical axis)
    Mat mid(dh * sw, m.cols);
    for (int r = 0; r < dh; ++r) {
        const double w = ry.w[r];
        for (int c = 0; c < sw; ++c) {
            const double* a = &m.v[static_cast<size_t>(ry.i0[r] * sw + c) * m.cols];
            const double* b = &m.v[static_cast<size_t>(ry.i1[r] * sw + c) * m.cols];
            double* o = &mid.v[static_cast<size_t>(r * sw + c) * m.cols];
            for (int j = 0; j < m.cols; ++j) o[j] = (1.0 - w) * a[j] + w * b[j];
        }
    }
    // pass 2: horizontal axis
    Mat out(dh * dw, m.cols);
    for (int r = 0; r < dh; ++r) {
        for (int c = 0; c < dw; ++c) {
            const double w = rx.w[c];
            const double* a = &mid.v[static_cast<size_t>(r * sw + rx.i0[c]) * m.cols];
            const double* b = &mid.v[static_cast<size_t>(r * sw + rx.i1[c]) * m.cols];
            double* o = &out.v[static_cast<size_t>(r * dw + c) * m.cols];
            for (int j = 0; j < m.cols; ++j) o[j] = (1.0 - w) * a[j] + w * b[j];
        }
    }
    return out;
}

Mat upsample_pixel_rows_adjoint(const Mat& g, const AxisInterp& ry, const AxisInterp& rx) {
    const int sh = ry.src, sw = rx.src, dh = ry.dst, dw = rx.dst;
    if (g.rows != dh * dw) throw ConfigError("upsample adjoint: row count mismatch");
    Mat mid(dh * sw, g.cols);
    for (int r = 0; r < dh; ++r) {
        for (int c = 0; c < dw; ++c) {
            const double w = rx.w[c];
            const double* go = &g.v[static_cast<size_t>(r * dw + c) * g.cols];
            double* a = &mid.v[static_cast<size_t>(r * sw + rx.i0[c]) * g.cols];
            double* b = &mid.v[static_cast<size_t>(r * sw + rx.i1[c]) * g.cols];
            for (int j = 0; j < g.cols; ++j) {
                a[j] += (1.0 - w) * go[j];
                b[j] += w * go[j];
            }
        }
    }
    Mat out(sh * sw, g.cols);
    for (int r = 0; r < dh; ++r) {
        const double w = ry.w[r];
        for (int c = 0; c < sw; ++c) {
            const double* go = &mid.v[static_cast<size_t>(r * sw + c) * g.cols];
            double* a = &out.v[static_cast<size_t>(ry.i0[r] * sw + c) * g.cols];
            double* b = &out.v[static_cast<size_t>(ry.i1[r] * sw + c) * g.cols];
            for (int j = 0; j < g.cols; ++j) {
                a[j] += (1.0 - w) * go[j];
                b[j] += w * go[j];
            }
        }
    }
    return out;
}

namespace {

Mat transpose(const Mat& m) {
    Mat t(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
    return t;
}

}  // namespace

Mat upsample_map(const Mat& map, int src_h, int src_w, int dst_h, int dst_w, MapKind kind) {
    if (src_h < 1 || src_w < 1 || dst_h % src_h != 0 || dst_w % src_w != 0 ||
        dst_h / src_h != dst_w / src_w)
        throw ConfigError("upsample_map: scale factor is not a positive integer");
    const AxisInterp ry = make_axis_interp(src_h, dst_h);
    const AxisInterp rx = make_axis_interp(src_w, dst_w);
    Mat out = upsample_pixel_rows(map, ry, rx);
    if (kind == MapKind::Self) {
        // key axis: same interpolation applied to the transposed map
        out = transpose(upsample_pixel_rows(transpose(out), ry, rx));
    }
    return out;
}

Mat accumulate_mean(const std::vector<std::vector<Mat>>& per_layer_heads) {
    int total_heads = 0;
    const Mat* first = nullptr;
    for (const auto& layer : per_layer_heads) {
        for (const auto& m : layer) {
            if (!first) first = &m;
            if (!m.same_shape(*first))
                throw ConfigError("accumulate: maps must share the unified resolution");
            ++total_heads;
        }
    }
    if (total_heads == 0) throw ConfigError("accumulate: empty layer list");
    Mat sum(first->rows, first->cols);
    for (const auto& layer : per_layer_heads)
        for (const auto& m : layer)
            for (size_t i = 0; i < sum.v.size(); ++i) sum.v[i] += m.v[i];
    const double inv = 1.0 / total_heads;
    for (double& v : sum.v) v *= inv;
    return sum;
}

Mat accumulate(const std::vector<std::vector<Mat>>& per_layer_heads, MapKind kind) {
    Mat mean = accumulate_mean(per_layer_heads);
    if (kind == MapKind::Self && mean.rows != mean.cols)
        throw ConfigError("accumulate: self maps must be square");
    return minmax_normalize(mean);
}

MinmaxInfo minmax_info(const Mat& m) {
    MinmaxInfo info;
    if (m.v.empty()) throw ConfigError("minmax: empty map");
    info.min = info.max = m.v[0];
    for (size_t i = 1; i < m.v.size(); ++i) {
        if (m.v[i] < info.min) {
            info.min = m.v[i];
            info.argmin = static_cast<int>(i);
        }
        if (m.v[i] > info.max) {
            info.max = m.v[i];
            info.argmax = static_cast<int>(i);
        }
    }
    info.degenerate = (info.max == info.min);
    return info;
}

Mat minmax_apply(const Mat& m, const MinmaxInfo& info) {
    Mat out(m.rows, m.cols);
    if (info.degenerate) return out;  // constant map -> all zeros
    const double inv = 1.0 / (info.max - info.min);
    for (size_t i = 0; i < m.v.size(); ++i) out.v[i] = (m.v[i] - info.min) * inv;
    return out;
}

Mat minmax_normalize(const Mat& m) { return minmax_apply(m, minmax_info(m)); }

}  // namespace isac
