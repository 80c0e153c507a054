#include <cmath>
#include <random>

#include "doctest.h"
#include "domdepth/geometry.hpp"
#include "domdepth/scenesim.hpp"
#include "suite_scenes.hpp"

using namespace domdepth;

namespace {

CameraIntrinsics test_intrinsics() {
    CameraIntrinsics intr;
    intr.fx = 100.0;
    intr.fy = 100.0;
    intr.cx = 50.0;
    intr.cy = 50.0;
    intr.width = 100;
    intr.height = 100;
    return intr;
}

RigidPose random_pose(std::mt19937_64& rng, double max_angle, double max_shift) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Vec3 axis{unit(rng), unit(rng), unit(rng)};
    double n = axis.norm();
    if (n < 1e-9) axis = {1, 0, 0}, n = 1;
    RigidPose pose;
    pose.rotation = Mat3::axis_angle(axis * (max_angle * unit(rng) / n));
    pose.translation = {max_shift * unit(rng), max_shift * unit(rng), max_shift * unit(rng)};
    return pose;
}

}  // namespace

TEST_CASE("project: optical axis and unit offsets") {
    auto intr = test_intrinsics();
    auto p = project({0, 0, 2}, intr);
    CHECK(p.pixel.u == 50.0);
    CHECK(p.pixel.v == 50.0);
    CHECK(p.depth == 2.0);

    auto q = project({1, 0, 2}, intr);
    CHECK(q.pixel.u == 100.0);  // 100*0.5 + 50
    CHECK(q.pixel.v == 50.0);
}

TEST_CASE("project: behind-camera error") {
    auto intr = test_intrinsics();
    CHECK_THROWS_AS(project({0, 0, 0}, intr), std::domain_error);
    CHECK_THROWS_AS(project({0, 0, -1}, intr), std::domain_error);
}

TEST_CASE("project: randomized points match the scalar pinhole formula") {
    auto intr = test_intrinsics();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coord(-3.0, 3.0), depth(0.5, 20.0);
    for (int i = 0; i < 200; ++i) {
        Vec3 p{coord(rng), coord(rng), depth(rng)};
        auto proj = project(p, intr);
        // Hand evaluation, component by component.
        double u = intr.fx * p.x / p.z + intr.cx;
        double v = intr.fy * p.y / p.z + intr.cy;
        CHECK(proj.pixel.u == doctest::Approx(u).epsilon(1e-14));
        CHECK(proj.pixel.v == doctest::Approx(v).epsilon(1e-14));
        CHECK(proj.depth == p.z);
    }
}

TEST_CASE("backproject: principal point and hand-inverted example") {
    auto intr = test_intrinsics();
    Vec3 p = backproject({50, 50}, 3.0, intr);
    CHECK(p.x == 0.0);
    CHECK(p.y == 0.0);
    CHECK(p.z == 3.0);

    Vec3 q = backproject({100, 50}, 2.0, intr);
    CHECK(q.x == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(q.y == doctest::Approx(0.0));
    CHECK(q.z == 2.0);

    CHECK_THROWS_AS(backproject({10, 10}, 0.0, intr), std::domain_error);
    CHECK_THROWS_AS(backproject({10, 10}, -2.0, intr), std::domain_error);
}

TEST_CASE("project/backproject round-trip for 1000 random pixels") {
    auto intr = test_intrinsics();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> px(0.0, 99.0), depth(0.1, 50.0);
    for (int i = 0; i < 1000; ++i) {
        PixelCoord pix{px(rng), px(rng)};
        double d = depth(rng);
        auto round = project(backproject(pix, d, intr), intr);
        CHECK(std::abs(round.pixel.u - pix.u) < 1e-9);
        CHECK(std::abs(round.pixel.v - pix.v) < 1e-9);
        CHECK(std::abs(round.depth - d) < 1e-9);
    }
}

TEST_CASE("transform: identity, pure translation, inverse law") {
    Vec3 p{0.3, -0.7, 2.0};
    Vec3 same = transform(RigidPose::identity(), p);
    CHECK(same.x == p.x);
    CHECK(same.y == p.y);
    CHECK(same.z == p.z);

    Vec3 shifted = transform(RigidPose::translate({0, 0, 1}), {0, 0, 2});
    CHECK(shifted.z == 3.0);

    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
        RigidPose pose = random_pose(rng, 1.5, 4.0);
        pose.validate();
        Vec3 q = transform(pose.inverse(), transform(pose, p));
        CHECK(std::abs(q.x - p.x) < 1e-9);
        CHECK(std::abs(q.y - p.y) < 1e-9);
        CHECK(std::abs(q.z - p.z) < 1e-9);

        RigidPose ident = RigidPose::compose(pose, pose.inverse());
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                CHECK(std::abs(ident.rotation.at(r, c) - (r == c ? 1.0 : 0.0)) < 1e-9);
        CHECK(ident.translation.norm() < 1e-9);
    }
}

TEST_CASE("pose validation rejects non-rotations") {
    RigidPose pose;
    pose.rotation.at(0, 0) = 2.0;
    CHECK_THROWS_AS(pose.validate(), ValidationError);
    RigidPose reflect;  // det -1
    reflect.rotation.at(0, 0) = -1.0;
    CHECK_THROWS_AS(reflect.validate(), ValidationError);
}

TEST_CASE("warp_image: identity pose is the identity on images") {
    auto triplet = render(suite::static_scene(0));
    DepthMap any_depth = DepthMap::constant(triplet.intr.height, triplet.intr.width, 5.0);
    WarpResult res = warp_image(triplet.image_t, any_depth, RigidPose::identity(), triplet.intr);
    REQUIRE(res.image.same_shape(triplet.image_t));
    CHECK(res.valid.count() == res.valid.pixel_count());
    // Bit-exact: integer tap positions with weight one.
    CHECK(res.image.data == triplet.image_t.data);
}

TEST_CASE("warp_image: frustum exit flags everything invalid") {
    auto triplet = render(suite::static_scene(1));
    DepthMap depth = DepthMap::constant(triplet.intr.height, triplet.intr.width, 5.0);
    RigidPose away = RigidPose::translate({1e6, 0, 0});
    WarpResult res = warp_image(triplet.image_t, depth, away, triplet.intr);
    CHECK(res.valid.count() == 0);
}

TEST_CASE("warp_image: z-translation onto a fronto-parallel plane matches the analytic render") {
    // Ray-cast oracle: the same plane viewed from the shifted camera.
    SceneSpec spec = suite::static_scene(2);
    spec.camera.cam_to_world_prev = RigidPose::translate({0, 0, -0.5});
    FrameTriplet triplet = render(spec);

    WarpResult res = warp_image(triplet.image_prev, triplet.gt_t, triplet.pose_t_to_prev,
                                triplet.intr);
    double err = 0.0;
    size_t n = 0;
    for (int y = 4; y < triplet.intr.height - 4; ++y)
        for (int x = 4; x < triplet.intr.width - 4; ++x) {
            if (!res.valid.at(y, x)) continue;
            for (int c = 0; c < 3; ++c)
                err += std::abs(res.image.at(y, x, c) - triplet.image_t.at(y, x, c));
            n += 3;
        }
    REQUIRE(n > 0);
    CHECK(err / n < 1e-3);
}

TEST_CASE("warp round-trip through ground truth reproduces the source") {
    // Generic (non-exact) pose: translation plus a small rotation.
    SceneSpec spec = suite::static_scene(3);
    Vec3 axis{0.0, 0.004, 0.0};
    spec.camera.cam_to_world_prev =
        RigidPose{Mat3::axis_angle(axis), {-0.3789, 0.011, -0.02}};
    FrameTriplet triplet = render(spec);

    WarpResult to_t = warp_image(triplet.image_prev, triplet.gt_t, triplet.pose_t_to_prev,
                                 triplet.intr);
    WarpResult back = warp_image(to_t.image, triplet.gt_prev, triplet.pose_t_to_prev.inverse(),
                                 triplet.intr, nullptr);
    double err = 0.0;
    size_t n = 0;
    for (int y = 6; y < triplet.intr.height - 6; ++y)
        for (int x = 6; x < triplet.intr.width - 6; ++x) {
            if (!back.valid.at(y, x) || !to_t.valid.at(y, x)) continue;
            for (int c = 0; c < 3; ++c)
                err += std::abs(back.image.at(y, x, c) - triplet.image_prev.at(y, x, c));
            n += 3;
        }
    REQUIRE(n > 1000);
    CHECK(err / n < 2e-2);
}

TEST_CASE("warp validity is monotone under frustum shrinking") {
    // A pixel invalid for a wide frustum stays invalid for a narrower one.
    auto base = render(suite::static_scene(4));
    RigidPose pose = RigidPose::translate({0.8, 0.0, 0.0});
    DepthMap depth = DepthMap::constant(base.intr.height, base.intr.width, 6.0);
    WarpResult wide = warp_image(base.image_t, depth, pose, base.intr);

    CameraIntrinsics narrow = base.intr;
    narrow.width -= 16;  // shrink the frustum on the right
    ImageBuffer cropped(narrow.height, narrow.width, 3);
    for (int y = 0; y < narrow.height; ++y)
        for (int x = 0; x < narrow.width; ++x)
            for (int c = 0; c < 3; ++c) cropped.at(y, x, c) = base.image_t.at(y, x, c);
    DepthMap cropped_depth = DepthMap::constant(narrow.height, narrow.width, 6.0);
    WarpResult tight = warp_image(cropped, cropped_depth, pose, narrow);

    for (int y = 0; y < narrow.height; ++y)
        for (int x = 0; x < narrow.width; ++x)
            if (!wide.valid.at(y, x)) CHECK(!tight.valid.at(y, x));
}

TEST_CASE("warp_image flags pixels whose taps touch source_invalid") {
    auto triplet = render(suite::static_scene(5));
    Mask invalid(triplet.intr.height, triplet.intr.width, false);
    invalid.set(40, 90, true);
    DepthMap depth = DepthMap::constant(triplet.intr.height, triplet.intr.width, 8.0);
    WarpResult res = warp_image(triplet.image_t, depth, RigidPose::identity(), triplet.intr,
                                &invalid);
    CHECK(!res.valid.at(40, 90));
    CHECK(res.hit_invalid.at(40, 90));
    CHECK(res.valid.at(40, 91));  // integer taps: neighbors untouched
    CHECK(res.valid.count() == res.valid.pixel_count() - 1);
}
