#include "domdepth/geometry.hpp"

#include <cmath>
#include <stdexcept>

#include "domdepth/parallel.hpp"

namespace domdepth {

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

Mat3 Mat3::axis_angle(const Vec3& w) {
    double theta = w.norm();
    Mat3 r = Mat3::identity();
    if (theta < 1e-300) return r;
    Vec3 a = w * (1.0 / theta);
    double c = std::cos(theta), s = std::sin(theta), omc = 1.0 - c;
    r.at(0, 0) = c + a.x * a.x * omc;
    r.at(0, 1) = a.x * a.y * omc - a.z * s;
    r.at(0, 2) = a.x * a.z * omc + a.y * s;
    r.at(1, 0) = a.y * a.x * omc + a.z * s;
    r.at(1, 1) = c + a.y * a.y * omc;
    r.at(1, 2) = a.y * a.z * omc - a.x * s;
    r.at(2, 0) = a.z * a.x * omc - a.y * s;
    r.at(2, 1) = a.z * a.y * omc + a.x * s;
    r.at(2, 2) = c + a.z * a.z * omc;
    return r;
}

Mat3 Mat3::operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += at(i, k) * o.at(k, j);
            r.at(i, j) = s;
        }
    return r;
}

Mat3 Mat3::transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r.at(i, j) = at(j, i);
    return r;
}

double Mat3::det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

void ImageBuffer::validate() const {
    if (height <= 0 || width <= 0) throw ValidationError("ImageBuffer: empty dimensions");
    if (channels != 1 && channels != 3) throw ValidationError("ImageBuffer: channels must be 1 or 3");
    if (data.size() != pixel_count() * channels) throw ValidationError("ImageBuffer: data size mismatch");
    for (double v : data)
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw ValidationError("ImageBuffer: values must be finite and within [0,1]");
}

void DepthMap::validate() const {
    if (height <= 0 || width <= 0) throw ValidationError("DepthMap: empty dimensions");
    if (depth.size() != pixel_count() || valid.size() != pixel_count())
        throw ValidationError("DepthMap: buffer size mismatch");
    for (size_t i = 0; i < depth.size(); ++i)
        if (valid[i] && (!std::isfinite(depth[i]) || depth[i] <= 0.0))
            throw ValidationError("DepthMap: valid pixels must have finite depth > 0");
}

size_t Mask::count() const {
    size_t n = 0;
    for (auto v : data) n += v != 0;
    return n;
}

Mask Mask::operator~() const {
    Mask out(height, width);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = data[i] ? 0 : 1;
    return out;
}

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw ValidationError("intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw ValidationError("intrinsics: image size must be positive");
    if (!(cx > 0.0 && cx < width)) throw ValidationError("intrinsics: cx must lie inside the image");
    if (!(cy > 0.0 && cy < height)) throw ValidationError("intrinsics: cy must lie inside the image");
}

RigidPose RigidPose::inverse() const {
    Mat3 rt = rotation.transposed();
    Vec3 t = rt * translation;
    return RigidPose{rt, {-t.x, -t.y, -t.z}};
}

RigidPose RigidPose::compose(const RigidPose& a, const RigidPose& b) {
    return RigidPose{a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

void RigidPose::validate() const {
    Mat3 should_be_identity = rotation.transposed() * rotation;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double want = (i == j) ? 1.0 : 0.0;
            if (std::abs(should_be_identity.at(i, j) - want) > 1e-9)
                throw ValidationError("RigidPose: rotation is not orthonormal");
        }
    if (std::abs(rotation.det() - 1.0) > 1e-9)
        throw ValidationError("RigidPose: rotation determinant is not +1");
}

Projection project(const Vec3& point, const CameraIntrinsics& intr) {
    if (!(point.z > 0.0)) throw std::domain_error("project: point behind camera (z <= 0)");
    Projection out;
    out.pixel.u = intr.fx * point.x / point.z + intr.cx;
    out.pixel.v = intr.fy * point.y / point.z + intr.cy;
    out.depth = point.z;
    return out;
}

Vec3 backproject(const PixelCoord& pixel, double depth, const CameraIntrinsics& intr) {
    if (!(depth > 0.0)) throw std::domain_error("backproject: depth must be positive");
    return {depth * (pixel.u - intr.cx) / intr.fx, depth * (pixel.v - intr.cy) / intr.fy, depth};
}

bool sample_bilinear(const ImageBuffer& img, double u, double v, double* out) {
    const int w = img.width, h = img.height;
    if (!(u >= 0.0 && u <= w - 1 && v >= 0.0 && v <= h - 1)) {
        for (int c = 0; c < img.channels; ++c) out[c] = 0.0;
        return false;
    }
    int x0 = static_cast<int>(std::floor(u));
    int y0 = static_cast<int>(std::floor(v));
    double fu = u - x0, fv = v - y0;
    for (int c = 0; c < img.channels; ++c) out[c] = 0.0;
    const double wgt[4] = {(1 - fu) * (1 - fv), fu * (1 - fv), (1 - fu) * fv, fu * fv};
    const int dx[4] = {0, 1, 0, 1}, dy[4] = {0, 0, 1, 1};
    for (int k = 0; k < 4; ++k) {
        if (wgt[k] == 0.0) continue;
        int x = x0 + dx[k], y = y0 + dy[k];
        for (int c = 0; c < img.channels; ++c) out[c] += wgt[k] * img.at(y, x, c);
    }
    return true;
}

WarpResult warp_image(const ImageBuffer& source,
                      const DepthMap& target_depth,
                      const RigidPose& pose_target_to_source,
                      const CameraIntrinsics& intr,
                      const Mask* source_invalid) {
    if (source.height != intr.height || source.width != intr.width)
        throw ValidationError("warp_image: source does not match intrinsics");
    if (target_depth.height != intr.height || target_depth.width != intr.width)
        throw ValidationError("warp_image: target_depth does not match intrinsics");
    if (source_invalid &&
        (source_invalid->height != source.height || source_invalid->width != source.width))
        throw ValidationError("warp_image: source_invalid does not match source");
    pose_target_to_source.validate();

    const int w = intr.width, h = intr.height, ch = source.channels;
    WarpResult out;
    out.image = ImageBuffer(h, w, ch, 0.0);
    out.valid = Mask(h, w, false);
    out.hit_invalid = Mask(h, w, false);

    // Identity pose maps every pixel onto itself; taking that path literally
    // keeps the no-parallax warp bit-exact instead of within rounding noise.
    const bool is_identity = pose_target_to_source.rotation.m == Mat3::identity().m &&
                             pose_target_to_source.translation.x == 0.0 &&
                             pose_target_to_source.translation.y == 0.0 &&
                             pose_target_to_source.translation.z == 0.0;

    parallel_for(h, [&](int y) {
        double sample[3];
        for (int x = 0; x < w; ++x) {
            if (!target_depth.is_valid(y, x)) continue;
            double u, v;
            if (is_identity) {
                u = x;
                v = y;
            } else {
                double d = target_depth.at(y, x);
                Vec3 p{d * (x - intr.cx) / intr.fx, d * (y - intr.cy) / intr.fy, d};
                Vec3 q = pose_target_to_source.apply(p);
                if (!(q.z > 0.0)) continue;  // behind the source camera
                u = intr.fx * q.x / q.z + intr.cx;
                v = intr.fy * q.y / q.z + intr.cy;
            }
            bool in_frustum = sample_bilinear(source, u, v, sample);
            if (!in_frustum) continue;
            bool touched = false;
            if (source_invalid) {
                int x0 = static_cast<int>(std::floor(u));
                int y0 = static_cast<int>(std::floor(v));
                double fu = u - x0, fv = v - y0;
                const double wgt[4] = {(1 - fu) * (1 - fv), fu * (1 - fv), (1 - fu) * fv, fu * fv};
                const int dx[4] = {0, 1, 0, 1}, dy[4] = {0, 0, 1, 1};
                for (int k = 0; k < 4; ++k)
                    if (wgt[k] > 0.0 && source_invalid->at(y0 + dy[k], x0 + dx[k])) touched = true;
            }
            for (int c = 0; c < ch; ++c) out.image.at(y, x, c) = sample[c];
            out.hit_invalid.set(y, x, touched);
            out.valid.set(y, x, !touched);
        }
    });
    return out;
}

}  // namespace domdepth
