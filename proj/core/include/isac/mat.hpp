#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace isac {

/// Raised when inputs violate a configuration contract (bad dimensions,
/// unknown identifiers, malformed files). The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raised when a computation produces non-finite values. Carries the
/// timestep where it happened when known. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg, int timestep = -1)
        : std::runtime_error(msg), timestep_(timestep) {}
    int timestep() const { return timestep_; }

private:
    int timestep_;
};

/// Dense row-major matrix of doubles. Small helper type; all attention
/// maps, masks and weight blocks use it.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

    size_t size() const { return v.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

/// Spatial latent: H×W grid of d-dimensional vectors, row-major pixels.
/// Pixel p = r*W + c; channel-contiguous per pixel.
struct Grid {
    int H = 0;
    int W = 0;
    int d = 0;
    std::vector<double> v;

    Grid() = default;
    Grid(int h, int w, int dim, double fill = 0.0)
        : H(h), W(w), d(dim), v(static_cast<size_t>(h) * w * dim, fill) {}

    int pixels() const { return H * W; }
    double& at(int pixel, int ch) { return v[static_cast<size_t>(pixel) * d + ch]; }
    double at(int pixel, int ch) const { return v[static_cast<size_t>(pixel) * d + ch]; }

    /// Latent as a pixels×d matrix view (copy).
    Mat as_mat() const {
        Mat m(pixels(), d);
        m.v = v;
        return m;
    }
};

/// C = A * B
Mat matmul(const Mat& a, const Mat& b);
/// C = A * B^T
Mat matmul_bt(const Mat& a, const Mat& b);
/// C = A^T * B
Mat matmul_at(const Mat& a, const Mat& b);

bool all_finite(const Mat& m);
bool all_finite(const std::vector<double>& v);

}  // namespace isac
