#include <cmath>

#include "isac/backend.hpp"
#include "isac/rng.hpp"

namespace isac {

namespace {

struct SeededForward {
    std::vector<Grid> downsampled;         // per layer
    std::vector<std::vector<Mat>> q_self;  // [layer][head]
    std::vector<std::vector<Mat>> k_self;
    std::vector<std::vector<Mat>> q_cross;
    std::vector<std::vector<Mat>> k_cross;
};

class SeededAttentionBackend final : public DenoiserBackend {
public:
    SeededAttentionBackend(int H, int W, int d, const std::vector<LayerPlan>& plan, int T,
                           uint64_t seed)
        : H_(H), W_(W), d_(d), schedule_(DiffusionSchedule::linear(T)) {
        if (plan.empty()) throw ConfigError("seeded backend: empty layer plan");
        Rng rng(derive_seed(seed, "seeded-attention-weights"));
        const double scale = 1.0 / std::sqrt(static_cast<double>(d));
        const int head_dim = std::max(2, d / 2);
        int index = 0;
        for (const auto& lp : plan) {
            if (lp.height < 1 || lp.width < 1 || H % lp.height != 0 || W % lp.width != 0 ||
                H / lp.height != W / lp.width)
                throw ConfigError("seeded backend: layer resolution must divide the grid");
            AttentionLayerConfig cfg;
            cfg.layer_index = index++;
            cfg.height = lp.height;
            cfg.width = lp.width;
            cfg.head_count = lp.head_count;
            cfg.head_dim = head_dim;
            auto draw = [&] {
                Mat w(d, head_dim);
                for (double& v : w.v) v = rng.normal() * scale;
                return w;
            };
            for (int h = 0; h < lp.head_count; ++h) {
                cfg.wq_self.push_back(draw());
                cfg.wk_self.push_back(draw());
                cfg.wq_cross.push_back(draw());
                cfg.wk_cross.push_back(draw());
            }
            layers_.push_back(std::move(cfg));
        }
        readout_ = Mat(d, d);
        for (double& v : readout_.v) v = rng.normal() * scale;
        rgb_ = Mat(d, 3);
        for (double& v : rgb_.v) v = rng.normal() * scale;

        uint64_t h = 0xcbf29ce484222325ULL;
        auto hash_mat = [&h](const Mat& m) { h = fnv1a64(m.v.data(), m.v.size() * sizeof(double), h); };
        for (const auto& cfg : layers_) {
            for (const auto& w : cfg.wq_self) hash_mat(w);
            for (const auto& w : cfg.wk_self) hash_mat(w);
            for (const auto& w : cfg.wq_cross) hash_mat(w);
            for (const auto& w : cfg.wk_cross) hash_mat(w);
        }
        hash_mat(readout_);
        hash_mat(rgb_);
        hash_ = h;
    }

    std::string id() const override { return "seeded-attention"; }
    const std::vector<AttentionLayerConfig>& layers() const override { return layers_; }
    uint64_t weight_hash() const override { return hash_; }

    AttentionCapture capture_attention(const Grid& latent, const PromptSpec& prompt,
                                       int /*t*/) const override {
        AttentionCapture cap;
        auto fwd = std::make_shared<SeededForward>();
        for (const auto& cfg : layers_) {
            LayerAttention la;
            la.self_heads = compute_self_attention(latent, cfg);
            la.cross_heads = compute_cross_attention(latent, prompt, cfg);
            cap.layers.push_back(std::move(la));

            Grid down = downsample_average(latent, cfg.height, cfg.width);
            const Mat x = down.as_mat();
            std::vector<Mat> qs, ks, qc, kc;
            for (int h = 0; h < cfg.head_count; ++h) {
                qs.push_back(matmul(x, cfg.wq_self[h]));
                ks.push_back(matmul(x, cfg.wk_self[h]));
                qc.push_back(matmul(x, cfg.wq_cross[h]));
                kc.push_back(matmul(prompt.embeddings, cfg.wk_cross[h]));
            }
            fwd->downsampled.push_back(std::move(down));
            fwd->q_self.push_back(std::move(qs));
            fwd->k_self.push_back(std::move(ks));
            fwd->q_cross.push_back(std::move(qc));
            fwd->k_cross.push_back(std::move(kc));
        }
        cap.ctx = fwd;
        return cap;
    }

    void attention_backward(const AttentionCapture& capture, const AttentionGrads& grads,
                            const Grid& latent, const PromptSpec& /*prompt*/, int /*t*/,
                            Grid& dlatent) const override {
        const auto* fwd = static_cast<const SeededForward*>(capture.ctx.get());
        if (!fwd) throw ConfigError("seeded backend: capture context missing");
        for (size_t l = 0; l < layers_.size(); ++l) {
            const AttentionLayerConfig& cfg = layers_[l];
            const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim));
            Mat dx(cfg.tokens(), d_);  // gradient on the downsampled latent
            bool any = false;
            for (int h = 0; h < cfg.head_count; ++h) {
                // self path
                if (!grads[l].self_heads.empty()) {
                    Mat dlogits;
                    softmax_backward(capture.layers[l].self_heads[h], grads[l].self_heads[h],
                                     dlogits);
                    for (double& v : dlogits.v) v *= scale;
                    Mat dq = matmul(dlogits, fwd->k_self[l][h]);
                    Mat dk = matmul_at(dlogits, fwd->q_self[l][h]);
                    Mat dx_q = matmul_bt(dq, cfg.wq_self[h]);
                    Mat dx_k = matmul_bt(dk, cfg.wk_self[h]);
                    for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dx_q.v[i] + dx_k.v[i];
                    any = true;
                }
                // cross path: only the query side touches the latent
                if (!grads[l].cross_heads.empty()) {
                    Mat dlogits;
                    softmax_backward(capture.layers[l].cross_heads[h], grads[l].cross_heads[h],
                                     dlogits);
                    for (double& v : dlogits.v) v *= scale;
                    Mat dq = matmul(dlogits, fwd->k_cross[l][h]);
                    Mat dx_q = matmul_bt(dq, cfg.wq_cross[h]);
                    for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dx_q.v[i];
                    any = true;
                }
            }
            if (!any) continue;
            // average-pooling adjoint: spread evenly over the pooled block
            const int fh = latent.H / cfg.height;
            const int fw = latent.W / cfg.width;
            const double inv = 1.0 / (fh * fw);
            for (int r = 0; r < cfg.height; ++r) {
                for (int c = 0; c < cfg.width; ++c) {
                    const int p = r * cfg.width + c;
                    for (int dr = 0; dr < fh; ++dr) {
                        for (int dc = 0; dc < fw; ++dc) {
                            const int q = (r * fh + dr) * latent.W + (c * fw + dc);
                            for (int ch = 0; ch < d_; ++ch)
                                dlatent.at(q, ch) += dx.at(p, ch) * inv;
                        }
                    }
                }
            }
        }
    }

    Grid predict_noise(const Grid& latent, const PromptSpec& prompt, int t) const override {
        // mean over layers of upsampled attended features, then a linear map
        Mat feats(H_ * W_, d_);
        for (const auto& cfg : layers_) {
            const Grid down = downsample_average(latent, cfg.height, cfg.width);
            const Mat x = down.as_mat();
            std::vector<Mat> maps = compute_self_attention(latent, cfg);
            Mat mean_map(cfg.tokens(), cfg.tokens());
            for (const Mat& m : maps)
                for (size_t i = 0; i < mean_map.v.size(); ++i) mean_map.v[i] += m.v[i];
            for (double& v : mean_map.v) v /= cfg.head_count;
            Mat attended = matmul(mean_map, x);
            const AxisInterp ry = make_axis_interp(cfg.height, H_);
            const AxisInterp rx = make_axis_interp(cfg.width, W_);
            Mat up = upsample_pixel_rows(attended, ry, rx);
            for (size_t i = 0; i < feats.v.size(); ++i) feats.v[i] += up.v[i];
        }
        for (double& v : feats.v) v /= static_cast<double>(layers_.size());
        Mat eps = matmul(feats, readout_);
        Grid out(H_, W_, d_);
        out.v = eps.v;
        if (!all_finite(out.v))
            throw NumericalError("seeded backend: non-finite noise prediction", t);
        return out;
    }

    Image decode(const Grid& latent, const PromptSpec& /*prompt*/) const override {
        Mat rgb = matmul(latent.as_mat(), rgb_);
        Image img(H_, W_);
        for (int p = 0; p < H_ * W_; ++p)
            for (int ch = 0; ch < 3; ++ch)
                img.rgb[static_cast<size_t>(p) * 3 + ch] = 1.0 / (1.0 + std::exp(-rgb.at(p, ch)));
        return img;
    }

private:
    int H_, W_, d_;
    DiffusionSchedule schedule_;
    std::vector<AttentionLayerConfig> layers_;
    Mat readout_;  // d×d
    Mat rgb_;      // d×3
    uint64_t hash_ = 0;
};

}  // namespace

std::unique_ptr<DenoiserBackend> build_seeded_denoiser(int H, int W, int d,
                                                       const std::vector<LayerPlan>& plan, int T,
                                                       uint64_t seed) {
    return std::make_unique<SeededAttentionBackend>(H, W, d, plan, T, seed);
}

}  // namespace isac
