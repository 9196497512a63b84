#include "isac/mat.hpp"

#include <cmath>

namespace isac {

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw ConfigError("matmul: inner dimensions disagree");
    Mat c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = &a.v[static_cast<size_t>(i) * a.cols];
        double* crow = &c.v[static_cast<size_t>(i) * c.cols];
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = &b.v[static_cast<size_t>(k) * b.cols];
            for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Mat matmul_bt(const Mat& a, const Mat& b) {
    if (a.cols != b.cols) throw ConfigError("matmul_bt: inner dimensions disagree");
    Mat c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = &a.v[static_cast<size_t>(i) * a.cols];
        for (int j = 0; j < b.rows; ++j) {
            const double* brow = &b.v[static_cast<size_t>(j) * b.cols];
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            c.at(i, j) = s;
        }
    }
    return c;
}

Mat matmul_at(const Mat& a, const Mat& b) {
    if (a.rows != b.rows) throw ConfigError("matmul_at: inner dimensions disagree");
    Mat c(a.cols, b.cols);
    for (int k = 0; k < a.rows; ++k) {
        const double* arow = &a.v[static_cast<size_t>(k) * a.cols];
        const double* brow = &b.v[static_cast<size_t>(k) * b.cols];
        for (int i = 0; i < a.cols; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = &c.v[static_cast<size_t>(i) * c.cols];
            for (int j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

bool all_finite(const Mat& m) { return all_finite(m.v); }

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace isac
