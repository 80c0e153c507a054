#include "domdepth/image_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace domdepth {

static_assert(std::endian::native == std::endian::little,
              "PFM writer assumes a little-endian host");

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "' for reading");
    return in;
}

void read_pnm_header(std::ifstream& in, const std::string& path, const std::string& magic,
                     int* w, int* h, int* maxval) {
    std::string m;
    in >> m;
    if (m != magic) throw ValidationError("'" + path + "': expected " + magic + " header");
    in >> *w >> *h;
    if (maxval) in >> *maxval;
    if (!in || *w <= 0 || *h <= 0) throw ValidationError("'" + path + "': malformed header");
    in.get();  // single whitespace before binary payload
}

std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_ppm(const std::string& path, const ImageBuffer& image) {
    auto out = open_out(path);
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<size_t>(image.width) * 3);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < 3; ++c) {
                int src_c = image.channels == 3 ? c : 0;
                row[static_cast<size_t>(x) * 3 + c] = quantize(image.at(y, x, src_c));
            }
        out.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!out) throw ValidationError("failed writing '" + path + "'");
}

ImageBuffer read_ppm(const std::string& path) {
    auto in = open_in(path);
    int w, h, maxval;
    read_pnm_header(in, path, "P6", &w, &h, &maxval);
    if (maxval != 255) throw ValidationError("'" + path + "': only maxval 255 supported");
    ImageBuffer img(h, w, 3);
    std::vector<std::uint8_t> row(static_cast<size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), row.size());
        if (!in) throw ValidationError("'" + path + "': truncated pixel data");
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = row[static_cast<size_t>(x) * 3 + c] / 255.0;
    }
    return img;
}

void write_pgm(const std::string& path, const Mask& mask) {
    auto out = open_out(path);
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    std::vector<std::uint8_t> row(mask.width);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) row[x] = mask.at(y, x) ? 255 : 0;
        out.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
    if (!out) throw ValidationError("failed writing '" + path + "'");
}

Mask read_pgm(const std::string& path) {
    auto in = open_in(path);
    int w, h, maxval;
    read_pnm_header(in, path, "P5", &w, &h, &maxval);
    Mask mask(h, w);
    std::vector<std::uint8_t> row(w);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), row.size());
        if (!in) throw ValidationError("'" + path + "': truncated pixel data");
        for (int x = 0; x < w; ++x) mask.set(y, x, row[x] != 0);
    }
    return mask;
}

void write_pfm(const std::string& path, const DepthMap& depth) {
    auto out = open_out(path);
    out << "Pf\n" << depth.width << " " << depth.height << "\n-1.0\n";
    std::vector<float> row(depth.width);
    for (int y = depth.height - 1; y >= 0; --y) {  // bottom-to-top
        for (int x = 0; x < depth.width; ++x)
            row[x] = depth.is_valid(y, x) ? static_cast<float>(depth.at(y, x)) : 0.0f;
        out.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
    }
    if (!out) throw ValidationError("failed writing '" + path + "'");
}

DepthMap read_pfm(const std::string& path) {
    auto in = open_in(path);
    std::string magic;
    in >> magic;
    if (magic != "Pf") throw ValidationError("'" + path + "': only grayscale PFM supported");
    int w, h;
    double scale;
    in >> w >> h >> scale;
    if (!in || w <= 0 || h <= 0) throw ValidationError("'" + path + "': malformed header");
    if (scale >= 0) throw ValidationError("'" + path + "': big-endian PFM not supported");
    in.get();
    DepthMap depth(h, w);
    std::vector<float> row(w);
    for (int y = h - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char*>(row.data()), row.size() * sizeof(float));
        if (!in) throw ValidationError("'" + path + "': truncated pixel data");
        for (int x = 0; x < w; ++x)
            if (std::isfinite(row[x]) && row[x] > 0.0f) depth.set(y, x, row[x]);
    }
    return depth;
}

std::uint64_t fnv1a_hash(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace domdepth
