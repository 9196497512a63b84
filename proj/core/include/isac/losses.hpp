#pragma once

#include <span>
#include <string>
#include <vector>

#include "isac/mat.hpp"

namespace isac {

enum class ScheduleId { A, B, C, D, E };
enum class LossKind { Mpo, Mae, Kl, Iou };

ScheduleId parse_schedule(const std::string& s);
LossKind parse_loss_kind(const std::string& s);
std::string to_string(ScheduleId s);
std::string to_string(LossKind k);

/// Time-dependent loss weights; lambda_cls = 1 - lambda_ins for every config.
struct LossWeights {
    double ins = 0.0;
    double cls = 0.0;
    ScheduleId schedule = ScheduleId::E;
};

/// Table of configs, with t counting down from T to 1:
///   A (1,0)  B (0,1)  C (0.5,0.5)  D (1-t/T, t/T)  E (t/T, 1-t/T)
LossWeights schedule_weights(ScheduleId id, int t, int T);

/// Maximum pixel-wise overlap of two soft masks: max_p A[p]*B[p].
double mpo(std::span<const double> a, std::span<const double> b);
double mpo_argmax(std::span<const double> a, std::span<const double> b, int* argmax_pixel);

/// Ablation substitutes, each mapping "more overlap" to a larger value so
/// they drop into the pairwise maxima unchanged:
///   MAE: 1 - mean|A-B|
///   KL:  exp(-KL_sym(Ahat||Bhat)) on sum-normalized masks
///   IoU: sum(min)/sum(max), 0/0 -> 0
double alt_overlap(std::span<const double> a, std::span<const double> b, LossKind kind);

/// Dispatch over MPO and the substitutes. For MPO, argmax_pixel receives the
/// realized pixel; for the substitutes it is set to -1 (whole-mask gradient).
double overlap_value(std::span<const double> a, std::span<const double> b, LossKind kind,
                     int* argmax_pixel);

/// d(overlap)/dA and d(overlap)/dB scaled by `upstream`, accumulated into
/// grad_a/grad_b. For MPO the gradient lives on argmax_pixel only.
void overlap_backward(std::span<const double> a, std::span<const double> b, LossKind kind,
                      int argmax_pixel, double upstream, std::span<double> grad_a,
                      std::span<double> grad_b);

/// Which pair and pixel realized a pairwise maximum.
struct PairProvenance {
    int first = -1;
    int second = -1;
    int pixel = -1;   // -1 for whole-mask kinds
    double value = 0.0;
};

/// max over pairs i<j of overlap(M[i], M[j]); 0 when fewer than two masks.
double instance_loss(const std::vector<std::vector<double>>& masks, LossKind kind,
                     PairProvenance* prov);
double instance_loss(const std::vector<std::vector<double>>& masks);

/// max over column pairs of the class-mask matrix; 0 when k < 2.
double class_loss(const Mat& cls_masks, LossKind kind, PairProvenance* prov);
double class_loss(const Mat& cls_masks);

/// Per-timestep loss values plus the provenance needed by the gradient.
struct LossReport {
    int t = 0;
    double lambda_ins = 0.0;
    double lambda_cls = 0.0;
    double loss_ins = 0.0;
    double loss_cls = 0.0;
    double loss_total = 0.0;
    PairProvenance ins_prov;
    PairProvenance cls_prov;
};

LossReport combined_loss(const std::vector<std::vector<double>>& masks, const Mat& cls_masks,
                         const LossWeights& weights, LossKind kind, int t);

}  // namespace isac
