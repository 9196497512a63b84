#pragma once

#include <cstdint>
#include <vector>

#include "isac/mat.hpp"

namespace isac {

/// Foreground pixels: binary mask over HW plus the sorted index set.
struct ForegroundSelection {
    std::vector<uint8_t> mask;  // HW entries, 0/1
    std::vector<int> indices;   // strictly increasing pixel indices where mask=1

    int count() const { return static_cast<int>(indices.size()); }
};

/// One-hot pixel-to-instance assignment from clustering the foreground.
struct HardInstanceAssignment {
    std::vector<int> labels;  // F entries in [0,N)
    std::vector<int> sizes;   // N cluster cardinalities, all >= 1
    int clusters = 0;

    Mat onehot() const;  // F×N
};

/// Divide every row by its sum; an all-zero row becomes uniform.
Mat row_normalize(const Mat& m);

/// Spread token activation along pixel affinities: row_normalize(sa)·ca.
/// Entries stay in [0,1] because each output row is a convex combination
/// of ca rows.
Mat propagate_classes(const Mat& sa, const Mat& ca);

/// Adaptive threshold per column: out[i,j] = 1 iff in[i,j] > column mean.
Mat binarize(const Mat& ca_prop);

/// Union of the binarized class-token columns.
ForegroundSelection global_foreground(const Mat& ca_bin, const std::vector<int>& class_token_indices);

/// Gather rows and columns of sa at the foreground indices; no renormalization.
Mat filter_self_attention(const Mat& sa, const ForegroundSelection& sel);

/// Appends normalized x = col/(W-1) and y = row/(H-1) columns for each
/// foreground pixel; a degenerate axis (W=1 or H=1) contributes zeros.
Mat append_coordinates(const Mat& sa_fg, const ForegroundSelection& sel, int H, int W);

/// K-means with k-means++ seeding. Deterministic given the seed: at most 50
/// iterations, convergence when the largest centroid displacement drops
/// below 1e-6, nearest-centroid ties broken toward the lowest cluster index,
/// an empty cluster reseeded at the point farthest from its centroid.
/// Labels are canonicalized by first occurrence so output ordering is stable.
HardInstanceAssignment kmeans_cluster(const Mat& points, int n_clusters, uint64_t seed);

/// Soft per-instance masks: column i of sa_fg·K divided by the cluster
/// cardinality, i.e. the mean dependency map over the cluster's pixels.
std::vector<std::vector<double>> instance_masks(const Mat& sa_fg,
                                                const HardInstanceAssignment& assign);

/// Gather the class-token columns of the propagated map, in prompt class order.
Mat class_masks(const Mat& ca_prop, const std::vector<int>& class_token_indices);

}  // namespace isac
