#pragma once

#include <array>
#include <string>
#include <vector>

namespace isac {

using Color = std::array<double, 3>;

/// RGB image, channels in [0,1], row-major pixels.
struct Image {
    int H = 0;
    int W = 0;
    std::vector<double> rgb;  // 3 per pixel

    Image() = default;
    Image(int h, int w) : H(h), W(w), rgb(static_cast<size_t>(h) * w * 3, 0.0) {}

    double& at(int r, int c, int ch) { return rgb[(static_cast<size_t>(r) * W + c) * 3 + ch]; }
    double at(int r, int c, int ch) const { return rgb[(static_cast<size_t>(r) * W + c) * 3 + ch]; }

    Color pixel(int r, int c) const { return {at(r, c, 0), at(r, c, 1), at(r, c, 2)}; }
    void set_pixel(int r, int c, const Color& col) {
        for (int ch = 0; ch < 3; ++ch) at(r, c, ch) = col[ch];
    }
};

/// Binary PPM (P6), 8-bit, round-to-nearest quantization.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

std::string ppm_bytes(const Image& img);

double color_distance(const Color& a, const Color& b);  // Euclidean

}  // namespace isac
