#include "isac/tensor_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace isac {

namespace {

constexpr char kMagic[8] = {'I', 'S', 'A', 'C', 'T', 'N', 'S', 'R'};

void put_u32_le(std::string& out, uint32_t x) {
    out.push_back(static_cast<char>(x & 0xff));
    out.push_back(static_cast<char>((x >> 8) & 0xff));
    out.push_back(static_cast<char>((x >> 16) & 0xff));
    out.push_back(static_cast<char>((x >> 24) & 0xff));
}

uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void write_tensor(const std::string& path, const Tensor& t) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32_le(out, static_cast<uint32_t>(t.dims.size()));
    size_t count = 1;
    for (uint32_t d : t.dims) {
        put_u32_le(out, d);
        count *= d;
    }
    if (count != t.data.size()) throw ConfigError("write_tensor: dims do not match payload size");
    for (float f : t.data) {
        uint32_t bits;
        std::memcpy(&bits, &f, sizeof(bits));
        put_u32_le(out, bits);
    }
    atomic_write_file(path, out);
}

Tensor read_tensor(const std::string& path) {
    std::string bytes = read_file(path);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0)
        throw ConfigError("read_tensor: bad magic in " + path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    uint32_t rank = get_u32_le(p + 8);
    if (bytes.size() < 12 + 4ull * rank) throw ConfigError("read_tensor: truncated header");
    Tensor t;
    size_t count = 1;
    for (uint32_t i = 0; i < rank; ++i) {
        uint32_t d = get_u32_le(p + 12 + 4 * i);
        t.dims.push_back(d);
        count *= d;
    }
    size_t off = 12 + 4ull * rank;
    if (bytes.size() != off + 4 * count) throw ConfigError("read_tensor: truncated payload");
    t.data.resize(count);
    for (size_t i = 0; i < count; ++i) {
        uint32_t bits = get_u32_le(p + off + 4 * i);
        float f;
        std::memcpy(&f, &bits, sizeof(f));
        t.data[i] = f;
    }
    return t;
}

Tensor tensor_from_mat(const Mat& m) {
    Tensor t;
    t.dims = {static_cast<uint32_t>(m.rows), static_cast<uint32_t>(m.cols)};
    t.data.assign(m.v.begin(), m.v.end());
    return t;
}

Tensor tensor_from_vec(const std::vector<double>& v) {
    Tensor t;
    t.dims = {static_cast<uint32_t>(v.size())};
    t.data.assign(v.begin(), v.end());
    return t;
}

void atomic_write_file(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw ConfigError("cannot open for write: " + tmp);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw ConfigError("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw ConfigError("rename failed: " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace isac
