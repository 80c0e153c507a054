#include "domdepth/scenesim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "domdepth/parallel.hpp"

namespace domdepth {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double lattice_value(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
    std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(ix) * 0x9e3779b97f4a7c15ULL ^
                                                   splitmix64(static_cast<std::uint64_t>(iy))));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double value_noise(std::uint64_t seed, double s, double t) {
    double fs = std::floor(s), ft = std::floor(t);
    auto ix = static_cast<std::int64_t>(fs);
    auto iy = static_cast<std::int64_t>(ft);
    double u = fade(s - fs), v = fade(t - ft);
    double n00 = lattice_value(seed, ix, iy);
    double n10 = lattice_value(seed, ix + 1, iy);
    double n01 = lattice_value(seed, ix, iy + 1);
    double n11 = lattice_value(seed, ix + 1, iy + 1);
    return (1 - v) * ((1 - u) * n00 + u * n10) + v * ((1 - u) * n01 + u * n11);
}

}  // namespace

void TextureSpec::validate(bool allow_textureless) const {
    if (kind != "noise" && kind != "constant")
        throw ValidationError("texture: unknown kind '" + kind + "'");
    if (kind == "constant" && !allow_textureless)
        throw ValidationError("texture: constant textures are rejected (matching is ill-posed); "
                              "set allow_textureless = true to override");
    if (!(scale > 0.0)) throw ValidationError("texture: scale must be positive");
    if (levels < 1 || levels > 8) throw ValidationError("texture: levels must be in [1,8]");
}

double sample_texture(const TextureSpec& tex, int channel, double s, double t) {
    if (tex.kind == "constant") return 0.5;
    std::uint64_t seed = splitmix64(tex.seed + 0x51ed2700u * static_cast<std::uint64_t>(channel + 1));
    double sum = 0.0, wsum = 0.0, amp = 1.0, freq = 1.0 / tex.scale;
    for (int level = 0; level < tex.levels; ++level) {
        // Irrational per-octave offset keeps lattice points of different
        // octaves from coinciding.
        double off = 17.123456789 * (level + 1);
        sum += amp * value_noise(seed + level, s * freq + off, t * freq + off * 0.7);
        wsum += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    return 0.1 + 0.8 * (sum / wsum);
}

void PriorSpec::validate() const {
    if (mode != "exact" && mode != "noise" && mode != "bias")
        throw ValidationError("prior: unknown mode '" + mode + "'");
    if (sigma < 0.0) throw ValidationError("prior: sigma must be non-negative");
    if (mode == "bias" && beta <= -1.0)
        throw ValidationError("prior: beta <= -1 would produce non-positive depth");
}

void SceneSpec::validate() const {
    camera.intr.validate();
    camera.cam_to_world_prev.validate();
    camera.cam_to_world_next.validate();
    prior.validate();
    if (background.empty()) throw ValidationError("scene: at least one background plane required");
    for (const auto& p : background) {
        if (!(p.depth > 0.0)) throw ValidationError("scene: plane depth must be positive");
        p.texture.validate(allow_textureless);
    }
    for (const auto& o : objects) {
        if (!(o.width > 0.0) || !(o.height > 0.0))
            throw ValidationError("scene: object size must be positive");
        for (const Vec3* pos : {&o.pos_prev, &o.pos_t, &o.pos_next}) {
            if (!(pos->z > 0.0)) throw ValidationError("scene: object depth must be positive");
            // Billboards must sit in front of every background plane along the
            // reference-camera ray through the object center.
            for (const auto& p : background) {
                Mat3 rot = Mat3::axis_angle({p.tilt_x, 0.0, 0.0}) * Mat3::axis_angle({0.0, p.tilt_y, 0.0});
                Vec3 normal = rot * Vec3{0.0, 0.0, 1.0};
                double denom = pos->dot(normal);
                if (denom == 0.0) continue;  // plane parallel to the ray
                double t_plane = Vec3{0.0, 0.0, p.depth}.dot(normal) / denom;
                if (t_plane > 0.0 && !(t_plane > 1.0))
                    throw ValidationError("scene: object must be nearer than the background it occludes");
            }
        }
        o.texture.validate(allow_textureless);
    }
}

namespace {

struct PlaneGeometry {
    Vec3 point;   // point on the plane
    Vec3 normal;  // unit normal
    Vec3 e1, e2;  // in-plane texture basis
    const PlaneSpec* spec = nullptr;
};

PlaneGeometry make_plane_geometry(const PlaneSpec& p) {
    PlaneGeometry g;
    g.point = {0.0, 0.0, p.depth};
    Mat3 rot = Mat3::axis_angle({p.tilt_x, 0.0, 0.0}) * Mat3::axis_angle({0.0, p.tilt_y, 0.0});
    g.normal = rot * Vec3{0.0, 0.0, 1.0};
    g.e1 = rot * Vec3{1.0, 0.0, 0.0};
    g.e2 = rot * Vec3{0.0, 1.0, 0.0};
    g.spec = &p;
    return g;
}

struct Hit {
    bool found = false;
    double ray_t = std::numeric_limits<double>::infinity();
    bool is_object = false;
    const TextureSpec* texture = nullptr;
    double s = 0.0, t = 0.0;  // texture coordinates
};

void intersect_plane(const PlaneGeometry& g, const Vec3& origin, const Vec3& dir, Hit* best) {
    double denom = dir.dot(g.normal);
    if (denom == 0.0) return;
    double t = (g.point - origin).dot(g.normal) / denom;
    if (!(t > 0.0) || t >= best->ray_t) return;
    Vec3 hit = origin + dir * t;
    best->found = true;
    best->ray_t = t;
    best->is_object = false;
    best->texture = &g.spec->texture;
    Vec3 rel = hit - g.point;
    best->s = rel.dot(g.e1);
    best->t = rel.dot(g.e2);
}

void intersect_object(const ObjectSpec& o, const Vec3& center, const Vec3& origin, const Vec3& dir,
                      Hit* best) {
    if (dir.z == 0.0) return;
    double t = (center.z - origin.z) / dir.z;
    if (!(t > 0.0) || t >= best->ray_t) return;
    Vec3 hit = origin + dir * t;
    double s = hit.x - center.x, u = hit.y - center.y;
    if (std::abs(s) > o.width * 0.5 || std::abs(u) > o.height * 0.5) return;
    best->found = true;
    best->ray_t = t;
    best->is_object = true;
    best->texture = &o.texture;
    best->s = s;
    best->t = u;
}

void render_frame(const SceneSpec& spec, const RigidPose& cam_to_world, int frame_index,
                  ImageBuffer* image, DepthMap* depth, Mask* mask) {
    const CameraIntrinsics& intr = spec.camera.intr;
    const int w = intr.width, h = intr.height;
    *image = ImageBuffer(h, w, 3, 0.0);
    *depth = DepthMap(h, w);
    *mask = Mask(h, w, false);

    std::vector<PlaneGeometry> planes;
    planes.reserve(spec.background.size());
    for (const auto& p : spec.background) planes.push_back(make_plane_geometry(p));

    std::vector<Vec3> centers;
    centers.reserve(spec.objects.size());
    for (const auto& o : spec.objects)
        centers.push_back(frame_index < 0 ? o.pos_prev : (frame_index > 0 ? o.pos_next : o.pos_t));

    RigidPose world_to_cam = cam_to_world.inverse();
    Vec3 origin = cam_to_world.translation;

    std::vector<std::string> row_errors(h);
    parallel_for(h, [&](int y) {
        for (int x = 0; x < w; ++x) {
            Vec3 dir_cam{(x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0};
            Vec3 dir = cam_to_world.rotation * dir_cam;
            Hit best;
            for (size_t i = 0; i < spec.objects.size(); ++i)
                intersect_object(spec.objects[i], centers[i], origin, dir, &best);
            for (const auto& g : planes) intersect_plane(g, origin, dir, &best);
            if (!best.found) {
                row_errors[y] = "scene: ray through pixel misses the background (frustum not covered)";
                return;
            }
            Vec3 hit_cam = world_to_cam.apply(origin + dir * best.ray_t);
            if (!(hit_cam.z > 0.0)) {
                row_errors[y] = "scene: surface behind the camera";
                return;
            }
            depth->set(y, x, hit_cam.z);
            mask->set(y, x, best.is_object);
            for (int c = 0; c < 3; ++c)
                image->at(y, x, c) = sample_texture(*best.texture, c, best.s, best.t);
        }
    });
    for (const auto& e : row_errors)
        if (!e.empty()) throw ValidationError(e);
}

}  // namespace

FrameTriplet render(const SceneSpec& spec) {
    spec.validate();
    FrameTriplet out;
    out.intr = spec.camera.intr;
    render_frame(spec, spec.camera.cam_to_world_prev, -1, &out.image_prev, &out.gt_prev, &out.mask_prev);
    render_frame(spec, RigidPose::identity(), 0, &out.image_t, &out.gt_t, &out.mask_t);
    render_frame(spec, spec.camera.cam_to_world_next, +1, &out.image_next, &out.gt_next, &out.mask_next);
    out.pose_t_to_prev = spec.camera.cam_to_world_prev.inverse();
    out.pose_t_to_next = spec.camera.cam_to_world_next.inverse();
    return out;
}

DepthMap make_prior(const DepthMap& gt, PriorMode mode, double param, std::uint64_t seed) {
    gt.validate();
    DepthMap out = gt;
    switch (mode) {
        case PriorMode::Exact:
            break;
        case PriorMode::MultiplicativeNoise: {
            if (param < 0.0) throw ValidationError("make_prior: sigma must be non-negative");
            std::mt19937_64 rng(seed);
            for (size_t i = 0; i < out.depth.size(); ++i) {
                double r = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0,1)
                double eps = (2.0 * r - 1.0) * param;
                if (out.valid[i]) out.depth[i] = gt.depth[i] * std::exp(eps);
            }
            break;
        }
        case PriorMode::ConstantBias: {
            if (param <= -1.0) throw ValidationError("make_prior: beta <= -1 gives non-positive depth");
            for (size_t i = 0; i < out.depth.size(); ++i)
                if (out.valid[i]) out.depth[i] = gt.depth[i] * (1.0 + param);
            break;
        }
    }
    return out;
}

DepthMap make_prior(const DepthMap& gt, const PriorSpec& spec) {
    spec.validate();
    if (spec.mode == "noise") return make_prior(gt, PriorMode::MultiplicativeNoise, spec.sigma, spec.seed);
    if (spec.mode == "bias") return make_prior(gt, PriorMode::ConstantBias, spec.beta, spec.seed);
    return make_prior(gt, PriorMode::Exact, 0.0, spec.seed);
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace {

struct ConfigLine {
    int number = 0;
    std::string key, value;
};

[[noreturn]] void parse_fail(int line, const std::string& msg) {
    throw ValidationError("config line " + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const ConfigLine& l) {
    size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(l.value, &pos);
    } catch (const std::exception&) {
        parse_fail(l.number, "expected a number for '" + l.key + "'");
    }
    if (trim(l.value.substr(pos)) != "") parse_fail(l.number, "trailing junk after number for '" + l.key + "'");
    return v;
}

std::vector<double> parse_doubles(const ConfigLine& l, size_t n) {
    std::istringstream ss(l.value);
    std::vector<double> out;
    double v;
    while (ss >> v) out.push_back(v);
    std::string rest;
    if (ss.fail() && !ss.eof()) parse_fail(l.number, "expected numbers for '" + l.key + "'");
    if (out.size() != n)
        parse_fail(l.number, "'" + l.key + "' expects " + std::to_string(n) + " numbers");
    return out;
}

bool parse_bool(const ConfigLine& l) {
    if (l.value == "true" || l.value == "1") return true;
    if (l.value == "false" || l.value == "0") return false;
    parse_fail(l.number, "expected true/false for '" + l.key + "'");
}

RigidPose parse_pose(const ConfigLine& l) {
    auto v = parse_doubles(l, 6);  // tx ty tz rx ry rz (axis-angle)
    RigidPose p;
    p.translation = {v[0], v[1], v[2]};
    p.rotation = Mat3::axis_angle({v[3], v[4], v[5]});
    return p;
}

class Section {
public:
    Section(std::string name, int line) : name_(std::move(name)), line_(line) {}

    void add(const ConfigLine& l) { lines_.push_back(l); }

    const ConfigLine* find(const std::string& key) const {
        for (const auto& l : lines_)
            if (l.key == key) return &l;
        return nullptr;
    }
    const ConfigLine& require(const std::string& key) const {
        const ConfigLine* l = find(key);
        if (!l)
            throw ValidationError("config: [" + name_ + "] section starting at line " +
                                  std::to_string(line_) + " is missing required key '" + key + "'");
        return *l;
    }
    double number(const std::string& key, double fallback) const {
        const ConfigLine* l = find(key);
        return l ? parse_double(*l) : fallback;
    }
    const std::string& name() const { return name_; }
    const std::vector<ConfigLine>& lines() const { return lines_; }

private:
    std::string name_;
    int line_ = 0;
    std::vector<ConfigLine> lines_;
};

TextureSpec parse_texture(const Section& s) {
    TextureSpec tex;
    if (const ConfigLine* l = s.find("texture_kind")) tex.kind = l->value;
    tex.seed = static_cast<std::uint64_t>(s.number("texture_seed", 1));
    tex.scale = s.number("texture_scale", 2.0);
    tex.levels = static_cast<int>(s.number("texture_levels", 3));
    return tex;
}

}  // namespace

SceneSpec parse_scene_spec(const std::string& text) {
    std::vector<Section> sections;
    sections.emplace_back("", 0);  // top level
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') parse_fail(line_no, "unterminated section header");
            sections.emplace_back(trim(line.substr(1, line.size() - 2)), line_no);
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) parse_fail(line_no, "expected 'key = value'");
        ConfigLine cl;
        cl.number = line_no;
        cl.key = trim(line.substr(0, eq));
        cl.value = trim(line.substr(eq + 1));
        if (cl.key.empty()) parse_fail(line_no, "empty key");
        sections.back().add(cl);
    }

    SceneSpec spec;
    bool saw_camera = false;
    for (const auto& s : sections) {
        if (s.name() == "") {
            for (const auto& l : s.lines()) {
                if (l.key == "spec_version") spec.spec_version = static_cast<int>(parse_double(l));
                else if (l.key == "allow_textureless") spec.allow_textureless = parse_bool(l);
                else parse_fail(l.number, "unknown top-level key '" + l.key + "'");
            }
        } else if (s.name() == "camera") {
            saw_camera = true;
            CameraSpec& cam = spec.camera;
            cam.intr.width = static_cast<int>(parse_double(s.require("width")));
            cam.intr.height = static_cast<int>(parse_double(s.require("height")));
            cam.intr.fx = parse_double(s.require("fx"));
            cam.intr.fy = parse_double(s.require("fy"));
            cam.intr.cx = parse_double(s.require("cx"));
            cam.intr.cy = parse_double(s.require("cy"));
            if (const ConfigLine* l = s.find("pose_prev")) cam.cam_to_world_prev = parse_pose(*l);
            if (const ConfigLine* l = s.find("pose_next")) cam.cam_to_world_next = parse_pose(*l);
        } else if (s.name() == "plane") {
            PlaneSpec p;
            p.depth = parse_double(s.require("depth"));
            p.tilt_x = s.number("tilt_x", 0.0);
            p.tilt_y = s.number("tilt_y", 0.0);
            p.texture = parse_texture(s);
            spec.background.push_back(p);
        } else if (s.name() == "object") {
            ObjectSpec o;
            o.width = parse_double(s.require("width"));
            o.height = parse_double(s.require("height"));
            auto pp = parse_doubles(s.require("pos_prev"), 3);
            auto pt = parse_doubles(s.require("pos_t"), 3);
            auto pn = parse_doubles(s.require("pos_next"), 3);
            o.pos_prev = {pp[0], pp[1], pp[2]};
            o.pos_t = {pt[0], pt[1], pt[2]};
            o.pos_next = {pn[0], pn[1], pn[2]};
            o.texture = parse_texture(s);
            spec.objects.push_back(o);
        } else if (s.name() == "prior") {
            if (const ConfigLine* l = s.find("mode")) spec.prior.mode = l->value;
            spec.prior.sigma = s.number("sigma", 0.0);
            spec.prior.beta = s.number("beta", 0.0);
            spec.prior.seed = static_cast<std::uint64_t>(s.number("seed", 1));
        } else {
            throw ValidationError("config: unknown section [" + s.name() + "]");
        }
    }
    if (spec.spec_version != 1)
        throw ValidationError("config: unsupported spec_version " + std::to_string(spec.spec_version));
    if (!saw_camera) throw ValidationError("config: missing required [camera] section");
    spec.validate();
    return spec;
}

SceneSpec load_scene_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scene_spec(ss.str());
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_pose(const RigidPose& cam_to_world) {
    // Recover axis-angle; config poses are built from axis-angle so the
    // round-trip stays within formatting precision.
    const Mat3& r = cam_to_world.rotation;
    double c = std::clamp((r.at(0, 0) + r.at(1, 1) + r.at(2, 2) - 1.0) * 0.5, -1.0, 1.0);
    double theta = std::acos(c);
    Vec3 axis{0, 0, 0};
    if (theta > 1e-12) {
        double s = 2.0 * std::sin(theta);
        axis = {(r.at(2, 1) - r.at(1, 2)) / s, (r.at(0, 2) - r.at(2, 0)) / s,
                (r.at(1, 0) - r.at(0, 1)) / s};
        axis = axis * theta;
    }
    const Vec3& t = cam_to_world.translation;
    return fmt(t.x) + " " + fmt(t.y) + " " + fmt(t.z) + "  " + fmt(axis.x) + " " + fmt(axis.y) +
           " " + fmt(axis.z);
}

void append_texture(std::ostringstream& out, const TextureSpec& tex) {
    out << "texture_kind = " << tex.kind << "\n";
    out << "texture_seed = " << tex.seed << "\n";
    out << "texture_scale = " << fmt(tex.scale) << "\n";
    out << "texture_levels = " << tex.levels << "\n";
}

}  // namespace

std::string format_scene_spec(const SceneSpec& spec) {
    std::ostringstream out;
    out << "spec_version = " << spec.spec_version << "\n";
    if (spec.allow_textureless) out << "allow_textureless = true\n";
    out << "\n[camera]\n";
    const CameraIntrinsics& i = spec.camera.intr;
    out << "width = " << i.width << "\nheight = " << i.height << "\n";
    out << "fx = " << fmt(i.fx) << "\nfy = " << fmt(i.fy) << "\n";
    out << "cx = " << fmt(i.cx) << "\ncy = " << fmt(i.cy) << "\n";
    out << "pose_prev = " << fmt_pose(spec.camera.cam_to_world_prev) << "\n";
    out << "pose_next = " << fmt_pose(spec.camera.cam_to_world_next) << "\n";
    for (const auto& p : spec.background) {
        out << "\n[plane]\n";
        out << "depth = " << fmt(p.depth) << "\n";
        if (p.tilt_x != 0.0) out << "tilt_x = " << fmt(p.tilt_x) << "\n";
        if (p.tilt_y != 0.0) out << "tilt_y = " << fmt(p.tilt_y) << "\n";
        append_texture(out, p.texture);
    }
    for (const auto& o : spec.objects) {
        out << "\n[object]\n";
        out << "width = " << fmt(o.width) << "\nheight = " << fmt(o.height) << "\n";
        out << "pos_prev = " << fmt(o.pos_prev.x) << " " << fmt(o.pos_prev.y) << " " << fmt(o.pos_prev.z) << "\n";
        out << "pos_t = " << fmt(o.pos_t.x) << " " << fmt(o.pos_t.y) << " " << fmt(o.pos_t.z) << "\n";
        out << "pos_next = " << fmt(o.pos_next.x) << " " << fmt(o.pos_next.y) << " " << fmt(o.pos_next.z) << "\n";
        append_texture(out, o.texture);
    }
    out << "\n[prior]\n";
    out << "mode = " << spec.prior.mode << "\n";
    if (spec.prior.sigma != 0.0) out << "sigma = " << fmt(spec.prior.sigma) << "\n";
    if (spec.prior.beta != 0.0) out << "beta = " << fmt(spec.prior.beta) << "\n";
    out << "seed = " << spec.prior.seed << "\n";
    return out.str();
}

}  // namespace domdepth
