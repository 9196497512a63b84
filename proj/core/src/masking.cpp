#include "isac/masking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "isac/rng.hpp"

namespace isac {

Mat HardInstanceAssignment::onehot() const {
    Mat k(static_cast<int>(labels.size()), clusters);
    for (size_t i = 0; i < labels.size(); ++i) k.at(static_cast<int>(i), labels[i]) = 1.0;
    return k;
}

Mat row_normalize(const Mat& m) {
    Mat out(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i) {
        double sum = 0.0;
        for (int j = 0; j < m.cols; ++j) sum += m.at(i, j);
        if (sum == 0.0) {
            const double u = 1.0 / m.cols;
            for (int j = 0; j < m.cols; ++j) out.at(i, j) = u;
        } else {
            const double inv = 1.0 / sum;
            for (int j = 0; j < m.cols; ++j) out.at(i, j) = m.at(i, j) * inv;
        }
    }
    return out;
}

Mat propagate_classes(const Mat& sa, const Mat& ca) {
    if (sa.rows != sa.cols) throw ConfigError("propagate_classes: sa must be square");
    if (sa.cols != ca.rows) throw ConfigError("propagate_classes: sa/ca dimension mismatch");
    return matmul(row_normalize(sa), ca);
}

Mat binarize(const Mat& ca_prop) {
    Mat out(ca_prop.rows, ca_prop.cols);
    for (int j = 0; j < ca_prop.cols; ++j) {
        double mean = 0.0;
        for (int i = 0; i < ca_prop.rows; ++i) mean += ca_prop.at(i, j);
        mean /= ca_prop.rows;
        for (int i = 0; i < ca_prop.rows; ++i)
            out.at(i, j) = ca_prop.at(i, j) > mean ? 1.0 : 0.0;
    }
    return out;
}

ForegroundSelection global_foreground(const Mat& ca_bin,
                                      const std::vector<int>& class_token_indices) {
    if (class_token_indices.empty()) throw ConfigError("global_foreground: no class tokens");
    ForegroundSelection sel;
    sel.mask.assign(ca_bin.rows, 0);
    for (int i = 0; i < ca_bin.rows; ++i) {
        for (int j : class_token_indices) {
            if (j < 0 || j >= ca_bin.cols)
                throw ConfigError("global_foreground: class token index out of range");
            if (ca_bin.at(i, j) != 0.0) {
                sel.mask[i] = 1;
                break;
            }
        }
        if (sel.mask[i]) sel.indices.push_back(i);
    }
    return sel;
}

Mat filter_self_attention(const Mat& sa, const ForegroundSelection& sel) {
    const int f = sel.count();
    Mat out(f, f);
    for (int i = 0; i < f; ++i)
        for (int j = 0; j < f; ++j) out.at(i, j) = sa.at(sel.indices[i], sel.indices[j]);
    return out;
}

Mat append_coordinates(const Mat& sa_fg, const ForegroundSelection& sel, int H, int W) {
    const int f = sel.count();
    if (sa_fg.rows != f || sa_fg.cols != f)
        throw ConfigError("append_coordinates: filtered map does not match selection");
    Mat out(f, f + 2);
    for (int i = 0; i < f; ++i) {
        for (int j = 0; j < f; ++j) out.at(i, j) = sa_fg.at(i, j);
        const int p = sel.indices[i];
        const int row = p / W;
        const int col = p % W;
        out.at(i, f) = W > 1 ? static_cast<double>(col) / (W - 1) : 0.0;
        out.at(i, f + 1) = H > 1 ? static_cast<double>(row) / (H - 1) : 0.0;
    }
    return out;
}

namespace {

double sq_dist(const Mat& pts, int i, const std::vector<double>& center) {
    const double* row = &pts.v[static_cast<size_t>(i) * pts.cols];
    double s = 0.0;
    for (int j = 0; j < pts.cols; ++j) {
        const double d = row[j] - center[j];
        s += d * d;
    }
    return s;
}

}  // namespace

HardInstanceAssignment kmeans_cluster(const Mat& points, int n_clusters, uint64_t seed) {
    const int f = points.rows;
    const int dim = points.cols;
    if (n_clusters < 1) throw ConfigError("kmeans: cluster count must be >= 1");
    if (f < n_clusters) throw ConfigError("kmeans: fewer points than clusters");

    Rng rng(seed);
    std::vector<std::vector<double>> centers(n_clusters, std::vector<double>(dim));

    // k-means++ seeding
    {
        int first = rng.uniform_int(f);
        for (int j = 0; j < dim; ++j) centers[0][j] = points.at(first, j);
        std::vector<double> d2(f);
        for (int c = 1; c < n_clusters; ++c) {
            double total = 0.0;
            for (int i = 0; i < f; ++i) {
                double best = std::numeric_limits<double>::infinity();
                for (int cc = 0; cc < c; ++cc) best = std::min(best, sq_dist(points, i, centers[cc]));
                d2[i] = best;
                total += best;
            }
            int pick = 0;
            if (total > 0.0) {
                const double target = rng.u01() * total;
                double acc = 0.0;
                pick = f - 1;
                for (int i = 0; i < f; ++i) {
                    acc += d2[i];
                    if (acc > target) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = rng.uniform_int(f);
            }
            for (int j = 0; j < dim; ++j) centers[c][j] = points.at(pick, j);
        }
    }

    std::vector<int> labels(f, 0);
    std::vector<int> sizes(n_clusters, 0);
    for (int iter = 0; iter < 50; ++iter) {
        // assignment, ties toward the lowest cluster index
        for (int i = 0; i < f; ++i) {
            int best = 0;
            double bestd = sq_dist(points, i, centers[0]);
            for (int c = 1; c < n_clusters; ++c) {
                const double d = sq_dist(points, i, centers[c]);
                if (d < bestd) {
                    bestd = d;
                    best = c;
                }
            }
            labels[i] = best;
        }
        std::fill(sizes.begin(), sizes.end(), 0);
        for (int l : labels) ++sizes[l];

        // reseed empty clusters at the point farthest from their stale centroid
        for (int c = 0; c < n_clusters; ++c) {
            if (sizes[c] > 0) continue;
            int far = 0;
            double fard = -1.0;
            for (int i = 0; i < f; ++i) {
                const double d = sq_dist(points, i, centers[c]);
                if (d > fard) {
                    fard = d;
                    far = i;
                }
            }
            for (int j = 0; j < dim; ++j) centers[c][j] = points.at(far, j);
            labels[far] = c;
            // rebuild sizes after stealing the point
            std::fill(sizes.begin(), sizes.end(), 0);
            for (int l : labels) ++sizes[l];
        }

        // centroid update
        double max_shift = 0.0;
        std::vector<std::vector<double>> next(n_clusters, std::vector<double>(dim, 0.0));
        for (int i = 0; i < f; ++i) {
            const double* row = &points.v[static_cast<size_t>(i) * dim];
            for (int j = 0; j < dim; ++j) next[labels[i]][j] += row[j];
        }
        for (int c = 0; c < n_clusters; ++c) {
            if (sizes[c] == 0) continue;
            double shift = 0.0;
            for (int j = 0; j < dim; ++j) {
                next[c][j] /= sizes[c];
                const double d = next[c][j] - centers[c][j];
                shift += d * d;
            }
            centers[c] = next[c];
            max_shift = std::max(max_shift, std::sqrt(shift));
        }
        if (max_shift < 1e-6) break;
    }

    // canonicalize labels by first occurrence
    std::vector<int> remap(n_clusters, -1);
    int next_label = 0;
    for (int i = 0; i < f && next_label < n_clusters; ++i)
        if (remap[labels[i]] < 0) remap[labels[i]] = next_label++;
    for (int c = 0; c < n_clusters; ++c)
        if (remap[c] < 0) remap[c] = next_label++;

    HardInstanceAssignment out;
    out.clusters = n_clusters;
    out.labels.resize(f);
    out.sizes.assign(n_clusters, 0);
    for (int i = 0; i < f; ++i) {
        out.labels[i] = remap[labels[i]];
        ++out.sizes[out.labels[i]];
    }
    return out;
}

std::vector<std::vector<double>> instance_masks(const Mat& sa_fg,
                                                const HardInstanceAssignment& assign) {
    const int f = sa_fg.rows;
    if (static_cast<int>(assign.labels.size()) != f)
        throw ConfigError("instance_masks: assignment size mismatch");
    std::vector<std::vector<double>> masks(assign.clusters, std::vector<double>(f, 0.0));
    for (int q = 0; q < f; ++q) {
        const int c = assign.labels[q];
        for (int p = 0; p < f; ++p) masks[c][p] += sa_fg.at(p, q);
    }
    for (int c = 0; c < assign.clusters; ++c) {
        if (assign.sizes[c] == 0) continue;
        const double inv = 1.0 / assign.sizes[c];
        for (double& v : masks[c]) v *= inv;
    }
    return masks;
}

Mat class_masks(const Mat& ca_prop, const std::vector<int>& class_token_indices) {
    Mat out(ca_prop.rows, static_cast<int>(class_token_indices.size()));
    for (size_t j = 0; j < class_token_indices.size(); ++j) {
        const int src = class_token_indices[j];
        if (src < 0 || src >= ca_prop.cols)
            throw ConfigError("class_masks: class token index out of range");
        for (int i = 0; i < ca_prop.rows; ++i) out.at(i, static_cast<int>(j)) = ca_prop.at(i, src);
    }
    return out;
}

}  // namespace isac
