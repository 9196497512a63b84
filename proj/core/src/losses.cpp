#include "isac/losses.hpp"

#include <algorithm>
#include <cmath>

namespace isac {

ScheduleId parse_schedule(const std::string& s) {
    if (s == "A") return ScheduleId::A;
    if (s == "B") return ScheduleId::B;
    if (s == "C") return ScheduleId::C;
    if (s == "D") return ScheduleId::D;
    if (s == "E") return ScheduleId::E;
    throw ConfigError("unknown schedule id: " + s);
}

LossKind parse_loss_kind(const std::string& s) {
    if (s == "MPO") return LossKind::Mpo;
    if (s == "MAE") return LossKind::Mae;
    if (s == "KL") return LossKind::Kl;
    if (s == "IoU") return LossKind::Iou;
    throw ConfigError("unknown loss kind: " + s);
}

std::string to_string(ScheduleId s) {
    switch (s) {
        case ScheduleId::A: return "A";
        case ScheduleId::B: return "B";
        case ScheduleId::C: return "C";
        case ScheduleId::D: return "D";
        case ScheduleId::E: return "E";
    }
    return "?";
}

std::string to_string(LossKind k) {
    switch (k) {
        case LossKind::Mpo: return "MPO";
        case LossKind::Mae: return "MAE";
        case LossKind::Kl: return "KL";
        case LossKind::Iou: return "IoU";
    }
    return "?";
}

LossWeights schedule_weights(ScheduleId id, int t, int T) {
    if (t < 1 || t > T) throw ConfigError("schedule_weights: t out of range");
    LossWeights w;
    w.schedule = id;
    const double frac = static_cast<double>(t) / T;
    switch (id) {
        case ScheduleId::A: w.ins = 1.0; break;
        case ScheduleId::B: w.ins = 0.0; break;
        case ScheduleId::C: w.ins = 0.5; break;
        case ScheduleId::D: w.ins = 1.0 - frac; break;
        case ScheduleId::E: w.ins = frac; break;
    }
    w.cls = 1.0 - w.ins;
    return w;
}

double mpo(std::span<const double> a, std::span<const double> b) {
    return mpo_argmax(a, b, nullptr);
}

double mpo_argmax(std::span<const double> a, std::span<const double> b, int* argmax_pixel) {
    if (a.size() != b.size()) throw ConfigError("mpo: mask length mismatch");
    double best = 0.0;
    int arg = a.empty() ? -1 : 0;
    if (!a.empty()) best = a[0] * b[0];
    for (size_t p = 1; p < a.size(); ++p) {
        const double v = a[p] * b[p];
        if (v > best) {
            best = v;
            arg = static_cast<int>(p);
        }
    }
    if (argmax_pixel) *argmax_pixel = arg;
    return best;
}

namespace {

constexpr double kKlEps = 1e-8;  // guards zero entries inside the log

double kl_sym_normalized(std::span<const double> a, std::span<const double> b,
                         std::vector<double>* ahat_out, std::vector<double>* bhat_out) {
    double sa = 0.0, sb = 0.0;
    for (double x : a) sa += x;
    for (double x : b) sb += x;
    if (sa <= 0.0 || sb <= 0.0) throw ConfigError("alt_overlap: KL on a zero-sum mask");
    const size_t n = a.size();
    const double za = sa + kKlEps * n;
    const double zb = sb + kKlEps * n;
    std::vector<double> ah(n), bh(n);
    double kl = 0.0;
    for (size_t p = 0; p < n; ++p) {
        ah[p] = (a[p] + kKlEps) / za;
        bh[p] = (b[p] + kKlEps) / zb;
        kl += (ah[p] - bh[p]) * (std::log(ah[p]) - std::log(bh[p]));
    }
    if (ahat_out) *ahat_out = std::move(ah);
    if (bhat_out) *bhat_out = std::move(bh);
    return kl;
}

}  // namespace

double alt_overlap(std::span<const double> a, std::span<const double> b, LossKind kind) {
    if (a.size() != b.size()) throw ConfigError("alt_overlap: mask length mismatch");
    switch (kind) {
        case LossKind::Mae: {
            double s = 0.0;
            for (size_t p = 0; p < a.size(); ++p) s += std::abs(a[p] - b[p]);
            return 1.0 - s / static_cast<double>(a.size());
        }
        case LossKind::Kl:
            return std::exp(-kl_sym_normalized(a, b, nullptr, nullptr));
        case LossKind::Iou: {
            double inter = 0.0, uni = 0.0;
            for (size_t p = 0; p < a.size(); ++p) {
                inter += std::min(a[p], b[p]);
                uni += std::max(a[p], b[p]);
            }
            return uni == 0.0 ? 0.0 : inter / uni;
        }
        case LossKind::Mpo:
            return mpo(a, b);
    }
    return 0.0;
}

double overlap_value(std::span<const double> a, std::span<const double> b, LossKind kind,
                     int* argmax_pixel) {
    if (kind == LossKind::Mpo) return mpo_argmax(a, b, argmax_pixel);
    if (argmax_pixel) *argmax_pixel = -1;
    return alt_overlap(a, b, kind);
}

void overlap_backward(std::span<const double> a, std::span<const double> b, LossKind kind,
                      int argmax_pixel, double upstream, std::span<double> grad_a,
                      std::span<double> grad_b) {
    const size_t n = a.size();
    switch (kind) {
        case LossKind::Mpo: {
            if (argmax_pixel < 0) return;
            grad_a[argmax_pixel] += upstream * b[argmax_pixel];
            grad_b[argmax_pixel] += upstream * a[argmax_pixel];
            return;
        }
        case LossKind::Mae: {
            const double inv = upstream / static_cast<double>(n);
            for (size_t p = 0; p < n; ++p) {
                const double d = a[p] - b[p];
                if (d > 0.0) {
                    grad_a[p] -= inv;
                    grad_b[p] += inv;
                } else if (d < 0.0) {
                    grad_a[p] += inv;
                    grad_b[p] -= inv;
                }
            }
            return;
        }
        case LossKind::Kl: {
            std::vector<double> ah, bh;
            const double kl = kl_sym_normalized(a, b, &ah, &bh);
            const double v = std::exp(-kl);
            double sa = 0.0, sb = 0.0;
            for (double x : a) sa += x;
            for (double x : b) sb += x;
            const double za = sa + kKlEps * n;
            const double zb = sb + kKlEps * n;
            // dKL/d ahat_q with ahat treated free, then project through the
            // sum-normalization jacobian
            std::vector<double> ga(n), gb(n);
            double dot_a = 0.0, dot_b = 0.0;
            for (size_t q = 0; q < n; ++q) {
                ga[q] = std::log(ah[q]) - std::log(bh[q]) + 1.0 - bh[q] / ah[q];
                gb[q] = std::log(bh[q]) - std::log(ah[q]) + 1.0 - ah[q] / bh[q];
                dot_a += ga[q] * ah[q];
                dot_b += gb[q] * bh[q];
            }
            const double scale = -upstream * v;
            for (size_t p = 0; p < n; ++p) {
                grad_a[p] += scale * (ga[p] - dot_a) / za;
                grad_b[p] += scale * (gb[p] - dot_b) / zb;
            }
            return;
        }
        case LossKind::Iou: {
            double inter = 0.0, uni = 0.0;
            for (size_t p = 0; p < n; ++p) {
                inter += std::min(a[p], b[p]);
                uni += std::max(a[p], b[p]);
            }
            if (uni == 0.0) return;
            const double inv2 = upstream / (uni * uni);
            for (size_t p = 0; p < n; ++p) {
                // ties: a carries the min side, b the max side
                const double da_i = a[p] <= b[p] ? 1.0 : 0.0;
                const double da_u = a[p] > b[p] ? 1.0 : 0.0;
                grad_a[p] += inv2 * (da_i * uni - inter * da_u);
                const double db_i = b[p] < a[p] ? 1.0 : 0.0;
                const double db_u = b[p] >= a[p] ? 1.0 : 0.0;
                grad_b[p] += inv2 * (db_i * uni - inter * db_u);
            }
            return;
        }
    }
}

double instance_loss(const std::vector<std::vector<double>>& masks, LossKind kind,
                     PairProvenance* prov) {
    PairProvenance best;
    const int n = static_cast<int>(masks.size());
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            int px = -1;
            const double v = overlap_value(masks[i], masks[j], kind, &px);
            if (best.first < 0 || v > best.value) {
                best = {i, j, px, v};
            }
        }
    }
    if (best.first < 0) best.value = 0.0;  // fewer than two masks
    if (prov) *prov = best;
    return best.value;
}

double instance_loss(const std::vector<std::vector<double>>& masks) {
    return instance_loss(masks, LossKind::Mpo, nullptr);
}

namespace {

std::vector<double> column_of(const Mat& m, int j) {
    std::vector<double> col(m.rows);
    for (int i = 0; i < m.rows; ++i) col[i] = m.at(i, j);
    return col;
}

}  // namespace

double class_loss(const Mat& cls_masks, LossKind kind, PairProvenance* prov) {
    PairProvenance best;
    for (int i = 0; i < cls_masks.cols; ++i) {
        const std::vector<double> a = column_of(cls_masks, i);
        for (int j = i + 1; j < cls_masks.cols; ++j) {
            const std::vector<double> b = column_of(cls_masks, j);
            int px = -1;
            const double v = overlap_value(a, b, kind, &px);
            if (best.first < 0 || v > best.value) {
                best = {i, j, px, v};
            }
        }
    }
    if (best.first < 0) best.value = 0.0;
    if (prov) *prov = best;
    return best.value;
}

double class_loss(const Mat& cls_masks) { return class_loss(cls_masks, LossKind::Mpo, nullptr); }

LossReport combined_loss(const std::vector<std::vector<double>>& masks, const Mat& cls_masks,
                         const LossWeights& weights, LossKind kind, int t) {
    LossReport r;
    r.t = t;
    r.lambda_ins = weights.ins;
    r.lambda_cls = weights.cls;
    r.loss_ins = instance_loss(masks, kind, &r.ins_prov);
    r.loss_cls = class_loss(cls_masks, kind, &r.cls_prov);
    r.loss_total = weights.ins * r.loss_ins + weights.cls * r.loss_cls;
    return r;
}

}  // namespace isac
