#include <algorithm>
#include <cmath>

#include "isac/backend.hpp"
#include "isac/rng.hpp"

namespace isac {

namespace {

struct BlobState {
    double cx = 0.0, cy = 0.0, radius = 0.0;
    std::vector<double> logits;  // k class logits
    // transform slopes at the read-out point
    double dcx = 0.0, dcy = 0.0, dradius = 0.0;
};

struct SceneForward {
    std::vector<double> theta;          // raw read-out, N*(3+k)
    std::vector<BlobState> blobs;       // transformed
    double kappa = 0.0;
    std::vector<Mat> membership;        // per layer, P_l×N
    std::vector<Mat> distance;          // per layer, P_l×N
    std::vector<std::vector<double>> px, py;  // per layer pixel centers
};

class SceneBackend final : public DenoiserBackend {
public:
    SceneBackend(const PromptSpec& prompt, int H, int W, int d, int T, uint64_t seed,
                 const SceneParams& sp)
        : H_(H), W_(W), d_(d), sp_(sp), schedule_(DiffusionSchedule::linear(T)) {
        n_blobs_ = prompt.total_instances();
        k_ = prompt.num_classes();
        class_tokens_ = prompt.class_token_indices;
        if (n_blobs_ > 6 || k_ > 4)
            throw ConfigError("scene backend: desk-scale cap is 6 instances / 4 classes");
        if (H % 2 != 0 || W % 2 != 0)
            throw ConfigError("scene backend: grid dims must be even for the two-resolution plan");
        params_per_blob_ = 3 + k_;
        const int P = n_blobs_ * params_per_blob_;
        const int D = H * W * d;
        if (P > D) throw ConfigError("scene backend: latent too small for the blob read-out");

        // seeded orthonormal read-out rows (modified Gram-Schmidt)
        readout_ = Mat(P, D);
        Rng rng(derive_seed(seed, "scene-readout"));
        for (double& v : readout_.v) v = rng.normal();
        for (int i = 0; i < P; ++i) {
            double* ri = &readout_.v[static_cast<size_t>(i) * D];
            for (int j = 0; j < i; ++j) {
                const double* rj = &readout_.v[static_cast<size_t>(j) * D];
                double dot = 0.0;
                for (int a = 0; a < D; ++a) dot += ri[a] * rj[a];
                for (int a = 0; a < D; ++a) ri[a] -= dot * rj[a];
            }
            double norm = 0.0;
            for (int a = 0; a < D; ++a) norm += ri[a] * ri[a];
            norm = std::sqrt(norm);
            if (norm < 1e-9) throw NumericalError("scene backend: degenerate read-out row");
            for (int a = 0; a < D; ++a) ri[a] /= norm;
        }
        hash_ = fnv1a64(readout_.v.data(), readout_.v.size() * sizeof(double));

        auto layer = [&](int h, int w, int idx) {
            AttentionLayerConfig cfg;
            cfg.layer_index = idx;
            cfg.height = h;
            cfg.width = w;
            cfg.head_count = 1;
            cfg.head_dim = 0;
            return cfg;
        };
        layers_.push_back(layer(H, W, 0));
        layers_.push_back(layer(H / 2, W / 2, 1));
    }

    std::string id() const override { return "synthetic-scene"; }
    const std::vector<AttentionLayerConfig>& layers() const override { return layers_; }
    uint64_t weight_hash() const override { return hash_; }
    bool has_ground_truth() const override { return true; }

    std::vector<double> read_theta(const Grid& latent) const {
        const int P = readout_.rows;
        const int D = readout_.cols;
        if (static_cast<int>(latent.v.size()) != D)
            throw ConfigError("scene backend: latent dims changed after construction");
        std::vector<double> theta(P, 0.0);
        for (int i = 0; i < P; ++i) {
            const double* ri = &readout_.v[static_cast<size_t>(i) * D];
            double s = 0.0;
            for (int a = 0; a < D; ++a) s += ri[a] * latent.v[a];
            theta[i] = s;
        }
        return theta;
    }

    std::vector<BlobState> transform_blobs(const std::vector<double>& theta) const {
        std::vector<BlobState> blobs(n_blobs_);
        for (int i = 0; i < n_blobs_; ++i) {
            const double* u = &theta[static_cast<size_t>(i) * params_per_blob_];
            BlobState& b = blobs[i];
            const double tx = std::tanh(sp_.center_gain * u[0]);
            const double ty = std::tanh(sp_.center_gain * u[1]);
            b.cx = 0.5 + sp_.center_span * tx;
            b.cy = 0.5 + sp_.center_span * ty;
            b.dcx = sp_.center_span * sp_.center_gain * (1.0 - tx * tx);
            b.dcy = sp_.center_span * sp_.center_gain * (1.0 - ty * ty);
            const double rho = sp_.radius_gain * u[2];
            const double den = 1.0 + rho * rho;
            b.radius = sp_.radius_max * rho * rho / den;
            b.dradius = sp_.radius_max * sp_.radius_gain * 2.0 * rho / (den * den);
            b.logits.resize(k_);
            for (int c = 0; c < k_; ++c) b.logits[c] = sp_.logit_gain * u[3 + c];
        }
        return blobs;
    }

    double kappa_at(int t) const {
        const int T = schedule_.T;
        if (t < 1 || t > T) throw ConfigError("scene backend: timestep outside 1..T");
        const double growth =
            std::min(sp_.kappa_cap, std::pow(static_cast<double>(T) / t, sp_.kappa_pow));
        return sp_.kappa0 * growth;
    }

    AttentionCapture capture_attention(const Grid& latent, const PromptSpec& prompt,
                                       int t) const override {
        if (prompt.num_classes() != k_ || prompt.total_instances() != n_blobs_)
            throw ConfigError("scene backend: prompt does not match construction");
        auto fwd = std::make_shared<SceneForward>();
        fwd->theta = read_theta(latent);
        fwd->blobs = transform_blobs(fwd->theta);
        fwd->kappa = kappa_at(t);

        AttentionCapture cap;
        for (const auto& cfg : layers_) {
            const int pl = cfg.tokens();
            std::vector<double> px(pl), py(pl);
            for (int p = 0; p < pl; ++p) {
                px[p] = (p % cfg.width + 0.5) / cfg.width;
                py[p] = (p / cfg.width + 0.5) / cfg.height;
            }
            Mat mem(pl, n_blobs_);
            Mat dist(pl, n_blobs_);
            for (int p = 0; p < pl; ++p) {
                for (int i = 0; i < n_blobs_; ++i) {
                    const BlobState& b = fwd->blobs[i];
                    const double dx = px[p] - b.cx;
                    const double dy = py[p] - b.cy;
                    const double dd = std::sqrt(dx * dx + dy * dy + 1e-12);
                    dist.at(p, i) = dd;
                    mem.at(p, i) = 1.0 / (1.0 + std::exp(-fwd->kappa *
                                                         (b.radius + sp_.attn_radius_pad - dd)));
                }
            }

            LayerAttention la;
            // self logits: squared distance between augmented memberships,
            // whose position part scales with the layer resolution
            const double gl = sp_.locality_gain * cfg.height / H_;
            Mat self(pl, pl);
            for (int p = 0; p < pl; ++p) {
                for (int q = 0; q < pl; ++q) {
                    double s = 0.0;
                    for (int i = 0; i < n_blobs_; ++i) {
                        const double diff = mem.at(p, i) - mem.at(q, i);
                        s += diff * diff;
                    }
                    const double ddx = gl * (px[p] - px[q]);
                    const double ddy = gl * (py[p] - py[q]);
                    s += ddx * ddx + ddy * ddy;
                    self.at(p, q) = -sp_.self_temperature * s;
                }
            }
            softmax_rows(self);
            la.self_heads.push_back(std::move(self));

            // cross logits on class tokens: saturating membership presence
            // plus the membership-weighted mean class logit
            Mat cross(pl, prompt.length());
            for (int p = 0; p < pl; ++p) {
                double msum = 0.0;
                for (int i = 0; i < n_blobs_; ++i) msum += mem.at(p, i);
                const double presence = sp_.cross_gain * msum / (1.0 + msum) - sp_.cross_offset;
                const double denom = msum + sp_.cross_floor;
                for (int c = 0; c < k_; ++c) {
                    double wcl = 0.0;
                    for (int i = 0; i < n_blobs_; ++i)
                        wcl += mem.at(p, i) * fwd->blobs[i].logits[c];
                    cross.at(p, class_tokens_[c]) = presence + wcl / denom;
                }
            }
            softmax_rows(cross);
            la.cross_heads.push_back(std::move(cross));

            cap.layers.push_back(std::move(la));
            fwd->membership.push_back(std::move(mem));
            fwd->distance.push_back(std::move(dist));
            fwd->px.push_back(std::move(px));
            fwd->py.push_back(std::move(py));
        }
        cap.ctx = fwd;
        return cap;
    }

    void attention_backward(const AttentionCapture& capture, const AttentionGrads& grads,
                            const Grid& latent, const PromptSpec& /*prompt*/, int /*t*/,
                            Grid& dlatent) const override {
        const auto* fwd = static_cast<const SceneForward*>(capture.ctx.get());
        if (!fwd) throw ConfigError("scene backend: capture context missing");
        const int P = readout_.rows;
        std::vector<double> dtheta(P, 0.0);
        std::vector<double> dcx(n_blobs_, 0.0), dcy(n_blobs_, 0.0), dr(n_blobs_, 0.0);
        Mat dcl(n_blobs_, k_);

        for (size_t l = 0; l < layers_.size(); ++l) {
            const int pl = layers_[l].tokens();
            const Mat& mem = fwd->membership[l];
            Mat dmem(pl, n_blobs_);

            if (!grads[l].self_heads.empty()) {
                Mat dz;
                softmax_backward(capture.layers[l].self_heads[0], grads[l].self_heads[0], dz);
                for (int p = 0; p < pl; ++p) {
                    const double* dzrow = &dz.v[static_cast<size_t>(p) * pl];
                    for (int q = 0; q < pl; ++q) {
                        const double g = dzrow[q];
                        if (g == 0.0) continue;
                        for (int i = 0; i < n_blobs_; ++i) {
                            const double diff = mem.at(p, i) - mem.at(q, i);
                            const double v = -2.0 * sp_.self_temperature * diff * g;
                            dmem.at(p, i) += v;
                            dmem.at(q, i) -= v;
                        }
                    }
                }
            }
            if (!grads[l].cross_heads.empty()) {
                Mat dz;
                softmax_backward(capture.layers[l].cross_heads[0], grads[l].cross_heads[0], dz);
                for (int p = 0; p < pl; ++p) {
                    double msum = 0.0;
                    for (int i = 0; i < n_blobs_; ++i) msum += mem.at(p, i);
                    const double denom = msum + sp_.cross_floor;
                    const double presence_slope =
                        sp_.cross_gain / ((1.0 + msum) * (1.0 + msum));
                    for (int c = 0; c < k_; ++c) {
                        const double g = dz.at(p, class_tokens_[c]);
                        if (g == 0.0) continue;
                        double wcl = 0.0;
                        for (int i = 0; i < n_blobs_; ++i)
                            wcl += mem.at(p, i) * fwd->blobs[i].logits[c];
                        for (int i = 0; i < n_blobs_; ++i) {
                            const double dwcl =
                                (fwd->blobs[i].logits[c] * denom - wcl) / (denom * denom);
                            dmem.at(p, i) += g * (presence_slope + dwcl);
                            dcl.at(i, c) += g * mem.at(p, i) / denom;
                        }
                    }
                }
            }

            // membership -> blob geometry
            const Mat& dist = fwd->distance[l];
            for (int p = 0; p < pl; ++p) {
                for (int i = 0; i < n_blobs_; ++i) {
                    const double gm = dmem.at(p, i);
                    if (gm == 0.0) continue;
                    const double m = mem.at(p, i);
                    const double slope = gm * m * (1.0 - m) * fwd->kappa;
                    dr[i] += slope;
                    const BlobState& b = fwd->blobs[i];
                    const double dd = dist.at(p, i);
                    dcx[i] -= slope * (b.cx - fwd->px[l][p]) / dd;
                    dcy[i] -= slope * (b.cy - fwd->py[l][p]) / dd;
                }
            }
        }

        for (int i = 0; i < n_blobs_; ++i) {
            const BlobState& b = fwd->blobs[i];
            double* du = &dtheta[static_cast<size_t>(i) * params_per_blob_];
            du[0] = dcx[i] * b.dcx;
            du[1] = dcy[i] * b.dcy;
            du[2] = dr[i] * b.dradius;
            for (int c = 0; c < k_; ++c) du[3 + c] = dcl.at(i, c) * sp_.logit_gain;
        }

        const int D = readout_.cols;
        for (int a = 0; a < P; ++a) {
            const double g = dtheta[a];
            if (g == 0.0) continue;
            const double* row = &readout_.v[static_cast<size_t>(a) * D];
            for (int j = 0; j < D; ++j) dlatent.v[j] += g * row[j];
        }
        (void)latent;
    }

    Grid predict_noise(const Grid& latent, const PromptSpec& /*prompt*/, int t) const override {
        if (t < 1 || t > schedule_.T) throw ConfigError("scene backend: timestep outside 1..T");
        const std::vector<double> theta = read_theta(latent);
        const int D = readout_.cols;
        std::vector<double> projected(D, 0.0);
        for (int a = 0; a < readout_.rows; ++a) {
            const double* row = &readout_.v[static_cast<size_t>(a) * D];
            for (int j = 0; j < D; ++j) projected[j] += theta[a] * row[j];
        }
        const double sa = std::sqrt(schedule_.alpha_bar_at(t));
        const double sn = std::sqrt(1.0 - schedule_.alpha_bar_at(t));
        Grid eps(H_, W_, d_);
        for (int j = 0; j < D; ++j) eps.v[j] = (latent.v[j] - sa * projected[j]) / sn;
        if (!all_finite(eps.v))
            throw NumericalError("scene backend: non-finite noise prediction", t);
        return eps;
    }

    Image decode(const Grid& latent, const PromptSpec& /*prompt*/) const override {
        const std::vector<BlobState> blobs = transform_blobs(read_theta(latent));
        std::vector<SceneInstance> instances;
        std::vector<Color> colors;
        for (const BlobState& b : blobs) {
            SceneInstance inst;
            inst.cx = b.cx;
            inst.cy = b.cy;
            inst.radius = b.radius;
            // color = softmax-weighted blend of the class palette; ambiguous
            // logits show up as off-palette blends the detectors can reject
            double mx = b.logits[0];
            for (double v : b.logits) mx = std::max(mx, v);
            double z = 0.0;
            std::vector<double> w(k_);
            for (int c = 0; c < k_; ++c) {
                w[c] = std::exp(b.logits[c] - mx);
                z += w[c];
            }
            Color col{0.0, 0.0, 0.0};
            for (int c = 0; c < k_; ++c) {
                const Color pc = class_color(c);
                for (int ch = 0; ch < 3; ++ch) col[ch] += w[c] / z * pc[ch];
            }
            instances.push_back(inst);
            colors.push_back(col);
        }
        return render_blobs(instances, colors, scene_background(), H_, W_);
    }

    Grid encode_scene(const std::vector<SceneInstance>& instances,
                      double logit_margin) const override {
        if (static_cast<int>(instances.size()) != n_blobs_)
            throw ConfigError("encode_scene: instance count does not match the prompt");
        std::vector<double> theta(readout_.rows, 0.0);
        for (int i = 0; i < n_blobs_; ++i) {
            const SceneInstance& b = instances[i];
            double* u = &theta[static_cast<size_t>(i) * params_per_blob_];
            auto inv_center = [this](double c) {
                const double arg = (c - 0.5) / sp_.center_span;
                if (std::abs(arg) >= 1.0)
                    throw ConfigError("encode_scene: center outside the representable span");
                return std::atanh(arg) / sp_.center_gain;
            };
            u[0] = inv_center(b.cx);
            u[1] = inv_center(b.cy);
            if (b.radius < 0.0 || b.radius >= sp_.radius_max)
                throw ConfigError("encode_scene: radius outside [0, radius_max)");
            u[2] = std::sqrt(b.radius / (sp_.radius_max - b.radius)) / sp_.radius_gain;
            if (b.class_index < 0 || b.class_index >= k_)
                throw ConfigError("encode_scene: class index out of range");
            u[3 + b.class_index] = logit_margin / sp_.logit_gain;
        }
        // minimum-norm preimage: rows are orthonormal, so R^T theta works
        Grid latent(H_, W_, d_);
        const int D = readout_.cols;
        for (int a = 0; a < readout_.rows; ++a) {
            if (theta[a] == 0.0) continue;
            const double* row = &readout_.v[static_cast<size_t>(a) * D];
            for (int j = 0; j < D; ++j) latent.v[j] += theta[a] * row[j];
        }
        return latent;
    }

    SceneSpec ground_truth(const Grid& latent, const PromptSpec& /*prompt*/) const override {
        const std::vector<BlobState> blobs = transform_blobs(read_theta(latent));
        SceneSpec spec;
        spec.background = scene_background();
        for (int c = 0; c < k_; ++c) spec.palette.push_back(class_color(c));
        for (const BlobState& b : blobs) {
            SceneInstance inst;
            inst.cx = b.cx;
            inst.cy = b.cy;
            inst.radius = b.radius;
            inst.class_index = 0;
            for (int c = 1; c < k_; ++c)
                if (b.logits[c] > b.logits[inst.class_index]) inst.class_index = c;
            spec.instances.push_back(inst);
        }
        return spec;
    }

private:
    int H_, W_, d_;
    SceneParams sp_;
    DiffusionSchedule schedule_;
    int n_blobs_ = 0;
    int k_ = 0;
    int params_per_blob_ = 0;
    std::vector<int> class_tokens_;
    std::vector<AttentionLayerConfig> layers_;
    Mat readout_;  // P×D orthonormal rows
    uint64_t hash_ = 0;
};

}  // namespace

std::unique_ptr<DenoiserBackend> build_scene_denoiser(const PromptSpec& prompt, int H, int W,
                                                      int d, int T, uint64_t seed,
                                                      const SceneParams& params) {
    return std::make_unique<SceneBackend>(prompt, H, W, d, T, seed, params);
}

}  // namespace isac
