#include "isac/image.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "isac/mat.hpp"
#include "isac/tensor_io.hpp"

namespace isac {

std::string ppm_bytes(const Image& img) {
    std::ostringstream head;
    head << "P6\n" << img.W << " " << img.H << "\n255\n";
    std::string out = head.str();
    out.reserve(out.size() + img.rgb.size());
    for (double v : img.rgb) {
        double q = std::clamp(v, 0.0, 1.0) * 255.0;
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(q))));
    }
    return out;
}

void write_ppm(const std::string& path, const Image& img) {
    atomic_write_file(path, ppm_bytes(img));
}

Image read_ppm(const std::string& path) {
    std::string bytes = read_file(path);
    std::istringstream ss(bytes);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    ss >> magic >> w >> h >> maxval;
    if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255)
        throw ConfigError("read_ppm: unsupported header in " + path);
    ss.get();  // single whitespace after maxval
    Image img(h, w);
    size_t need = static_cast<size_t>(w) * h * 3;
    size_t off = static_cast<size_t>(ss.tellg());
    if (bytes.size() < off + need) throw ConfigError("read_ppm: truncated payload in " + path);
    for (size_t i = 0; i < need; ++i)
        img.rgb[i] = static_cast<unsigned char>(bytes[off + i]) / 255.0;
    return img;
}

double color_distance(const Color& a, const Color& b) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace isac
