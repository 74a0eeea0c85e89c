#include <cmath>
#include <fstream>

#include <gtest/gtest.h>
#include <opencv2/imgcodecs.hpp>

#include "llie/error.hpp"
#include "llie/image.hpp"
#include "llie/synthetic.hpp"
#include "test_util.hpp"

using namespace llie;
using llie::test::TempDir;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no llie::Error thrown";
    return ErrorKind::IoError;
}

// Bilinear sample of a (C,H,W) tensor at real coordinates, no border handling.
float bilinear(const torch::Tensor& img, int c, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    auto at = [&](int yy, int xx) { return img[c][yy][xx].item<double>(); };
    return static_cast<float>((1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
                              fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1)));
}

}  // namespace

TEST(ImageTensor, RejectsInvalidContents) {
    EXPECT_EQ(kind_of([] { ImageTensor(torch::full({3, 8, 8}, 1.5f)); }), ErrorKind::InvalidInput);
    EXPECT_EQ(kind_of([] { ImageTensor(torch::full({3, 8, 8}, NAN)); }), ErrorKind::InvalidInput);
    EXPECT_EQ(kind_of([] { ImageTensor(torch::zeros({3, 4, 8})); }), ErrorKind::InvalidInput);
    EXPECT_EQ(kind_of([] { ImageTensor(torch::zeros({2, 8, 8})); }), ErrorKind::ShapeError);
    EXPECT_NO_THROW(ImageTensor(torch::zeros({1, 8, 8})));
}

TEST(ImageTensor, PairRequiresMatchingShapesAndScene) {
    const auto a = ImageTensor::filled(3, 8, 8, 0.2f);
    const auto b = ImageTensor::filled(3, 8, 9, 0.2f);
    EXPECT_EQ(kind_of([&] { ExposurePair(a, b, "s"); }), ErrorKind::ShapeError);
    EXPECT_EQ(kind_of([&] { ExposurePair(a, a, ""); }), ErrorKind::InvalidInput);
}

TEST(LoadImage, EightBitScaling) {
    TempDir dir("load8");
    cv::Mat m(8, 8, CV_8UC3, cv::Scalar(0, 128, 255));  // BGR
    cv::imwrite((dir / "x.png").string(), m);
    const auto img = load_image(dir / "x.png");
    ASSERT_EQ(img.channels(), 3);
    EXPECT_FLOAT_EQ(img.tensor()[0][0][0].item<float>(), 1.0f);  // R = 255
    EXPECT_FLOAT_EQ(img.tensor()[1][3][3].item<float>(), 128.0f / 255.0f);
    EXPECT_NEAR(img.tensor()[1][3][3].item<float>(), 0.50196, 1e-5);
    EXPECT_FLOAT_EQ(img.tensor()[2][7][7].item<float>(), 0.0f);
}

TEST(LoadImage, SixteenBitAndGray) {
    TempDir dir("load16");
    cv::Mat m(9, 10, CV_16UC1, cv::Scalar(65535));
    m.at<uint16_t>(0, 0) = 0;
    cv::imwrite((dir / "g.png").string(), m);
    const auto img = load_image(dir / "g.png");
    ASSERT_EQ(img.channels(), 3);
    EXPECT_EQ(img.height(), 9);
    EXPECT_EQ(img.width(), 10);
    EXPECT_FLOAT_EQ(img.tensor()[1][4][4].item<float>(), 1.0f);
    EXPECT_FLOAT_EQ(img.tensor()[2][0][0].item<float>(), 0.0f);
    EXPECT_TRUE(torch::equal(img.tensor()[0], img.tensor()[2]));
}

TEST(LoadImage, Errors) {
    TempDir dir("loaderr");
    EXPECT_EQ(kind_of([&] { load_image(dir / "missing.png"); }), ErrorKind::NotFound);
    std::ofstream(dir / "junk.png") << "not an image at all";
    EXPECT_EQ(kind_of([&] { load_image(dir / "junk.png"); }), ErrorKind::DecodeError);
}

TEST(SaveImage, RoundTrips) {
    TempDir dir("save");
    for (float v : {0.0f, 1.0f}) {
        save_image(ImageTensor::filled(3, 16, 16, v), dir / "c.png");
        EXPECT_TRUE(torch::equal(load_image(dir / "c.png").tensor(), torch::full({3, 16, 16}, v)));
    }
    save_image(ImageTensor::filled(3, 16, 16, 0.5f), dir / "h.png");
    EXPECT_NEAR(load_image(dir / "h.png").tensor()[0][0][0].item<float>(), 128.0 / 255.0, 1e-7);

    const auto img = llie::test::random_image(3, 20, 24, 7);
    save_image(img, dir / "r.png");
    const auto back = load_image(dir / "r.png");
    EXPECT_LE((back.tensor() - img.tensor()).abs().max().item<float>(), 1.0f / 255.0f + 1e-6f);
}

TEST(SaveImage, UnwritablePathIsIoError) {
    TempDir dir("saveerr");
    EXPECT_EQ(kind_of([&] { save_image(ImageTensor::filled(3, 8, 8, 0.1f), dir / "no" / "such" / "x.png"); }),
              ErrorKind::IoError);
}

TEST(Resize, IdentityAndConstant) {
    const auto img = llie::test::random_image(3, 16, 16, 1);
    EXPECT_TRUE(torch::equal(resize(img, 16, 16).tensor(), img.tensor()));
    const auto c = resize(ImageTensor::filled(3, 16, 16, 0.3f), 23, 9);
    EXPECT_EQ(c.height(), 23);
    EXPECT_EQ(c.width(), 9);
    EXPECT_NEAR((c.tensor() - 0.3f).abs().max().item<float>(), 0.0f, 1e-6f);
    EXPECT_EQ(kind_of([&] { resize(img, 4, 16); }), ErrorKind::InvalidInput);
    EXPECT_EQ(kind_of([&] { resize(img, 0, 16); }), ErrorKind::InvalidInput);
}

TEST(Resize, TwoByTwoRampBothConventions) {
    const auto ramp = torch::tensor({0.0f, 1.0f, 0.0f, 1.0f}).view({1, 2, 2});
    const auto half_pixel = resize_bilinear(ramp, 2, 4, false);
    const auto corners = resize_bilinear(ramp, 2, 4, true);
    const float expect_half[] = {0.0f, 0.25f, 0.75f, 1.0f};
    const float expect_corners[] = {0.0f, 1.0f / 3.0f, 2.0f / 3.0f, 1.0f};
    for (int x = 0; x < 4; ++x) {
        EXPECT_NEAR(half_pixel[0][1][x].item<float>(), expect_half[x], 1e-6f);
        EXPECT_NEAR(corners[0][0][x].item<float>(), expect_corners[x], 1e-4f);
    }
}

TEST(Augment, DeterministicAndBounded) {
    const auto a = llie::test::random_image(3, 24, 24, 3, 0.1, 0.6);
    const ExposurePair pair(a, apply_gain_gamma(a, 0.8, 1.1), "s");
    const auto x = augment(pair, 42);
    const auto y = augment(pair, 42);
    EXPECT_TRUE(torch::equal(x.low_a.tensor(), y.low_a.tensor()));
    EXPECT_TRUE(torch::equal(x.low_b.tensor(), y.low_b.tensor()));
    EXPECT_EQ(x.scene_id, "s");
    for (uint64_t seed = 0; seed < 2000; ++seed) {
        const auto p = sample_augment_params(seed);
        ASSERT_LE(std::abs(p.angle_degrees), 15.0);
        ASSERT_GE(p.gain_a, 0.9);
        ASSERT_LE(p.gain_a, 1.1);
        ASSERT_GE(p.gain_b, 0.9);
        ASSERT_LE(p.gain_b, 1.1);
    }
}

TEST(Augment, SameGeometryIndependentGain) {
    // b is a is pure gain of a, so after augmentation b/gain_b must equal a/gain_a.
    const auto a = llie::test::random_image(3, 32, 32, 5, 0.05, 0.45);
    const ExposurePair pair(a, ImageTensor(a.tensor() * 0.5f), "s");
    const AugmentParams params{true, 11.0, 0.93, 1.07};
    const auto out = apply_augment(pair, params);
    const auto lhs = out.low_a.tensor() / params.gain_a;
    const auto rhs = out.low_b.tensor() / (0.5 * params.gain_b);
    EXPECT_LE((lhs - rhs).abs().max().item<float>(), 1e-5f);
}

TEST(Augment, RotationMatchesIndependentOracle) {
    const int64_t n = 33;
    auto yy = torch::arange(n, torch::kFloat32).view({n, 1}).expand({n, n});
    auto xx = torch::arange(n, torch::kFloat32).view({1, n}).expand({n, n});
    auto grid = (0.5 + 0.2 * torch::sin(xx * 0.35) + 0.2 * torch::cos(yy * 0.27)).unsqueeze(0).contiguous();
    const ImageTensor img(grid);
    const double deg = 10.0;
    const auto rot = rotate(img, deg).tensor();

    const double th = deg * M_PI / 180.0, c = std::cos(th), s = std::sin(th), ctr = (n - 1) / 2.0;
    double worst = 0.0;
    for (int y = 8; y < n - 8; ++y) {
        for (int x = 8; x < n - 8; ++x) {
            const double dx = x - ctr, dy = y - ctr;
            const double sx = c * dx - s * dy + ctr;
            const double sy = s * dx + c * dy + ctr;
            worst = std::max(worst, std::abs(rot[0][y][x].item<double>() - bilinear(grid, 0, sx, sy)));
        }
    }
    // warpAffine resolves source coordinates to 1/32 pixel.
    EXPECT_LT(worst, 5e-3);
}

TEST(Augment, RotationReflectsBorders) {
    const auto img = ImageTensor::filled(3, 16, 16, 0.4f);
    const auto r = rotate(img, 15.0);
    EXPECT_NEAR(r.tensor().min().item<float>(), 0.4f, 1e-5f);  // no black corners
}

TEST(SynthExposure, ClosedForms) {
    const auto a = ImageTensor::filled(3, 8, 8, 0.8f);
    EXPECT_TRUE(torch::equal(apply_gain_gamma(a, 1.0, 1.0).tensor(), a.tensor()));
    EXPECT_NEAR(apply_gain_gamma(a, 0.5, 1.0).tensor()[0][0][0].item<float>(), 0.4f, 1e-7f);
    EXPECT_NEAR(apply_gain_gamma(ImageTensor::filled(3, 8, 8, 0.5f), 1.0, 2.0).tensor()[1][2][3].item<float>(),
                0.25f, 1e-7f);
    EXPECT_THROW(apply_gain_gamma(a, 0.0, 1.0), Error);
}

TEST(SynthExposure, ParametersInRangeAndMonotone) {
    for (uint64_t seed = 0; seed < 500; ++seed) {
        const auto p = sample_exposure_params(seed);
        ASSERT_GE(p.gain, 0.7);
        ASSERT_LE(p.gain, 1.3);
        ASSERT_GE(p.gamma, 0.8);
        ASSERT_LE(p.gamma, 1.2);
    }
    const auto img = llie::test::random_image(3, 16, 16, 9);
    const auto pair = synth_second_exposure(img, 77, "scene");
    EXPECT_TRUE(torch::equal(pair.low_a.tensor(), img.tensor()));
    auto a = pair.low_a.tensor().flatten();
    auto b = pair.low_b.tensor().flatten();
    auto order = torch::argsort(a);
    auto sorted_b = b.index_select(0, order);
    EXPECT_TRUE((sorted_b.slice(0, 1) >= sorted_b.slice(0, 0, -1)).all().item<bool>());
    const auto again = synth_second_exposure(img, 77, "scene");
    EXPECT_TRUE(torch::equal(again.low_b.tensor(), pair.low_b.tensor()));
}

TEST(Synthetic, ScenesAreValidAndDark) {
    const auto scene = textured_scene(3, 64, 48);
    EXPECT_EQ(scene.height(), 64);
    EXPECT_EQ(scene.width(), 48);
    EXPECT_TRUE(torch::equal(scene.tensor(), textured_scene(3, 64, 48).tensor()));
    const auto dark = low_light_version(scene, 3);
    EXPECT_LT(mean_luma(dark), 0.15);
    EXPECT_LT(mean_luma(dark), mean_luma(scene));
}

TEST(Geometry, FlipIsInvolution) {
    const auto img = llie::test::random_image(3, 8, 12, 2);
    EXPECT_TRUE(torch::equal(flip_horizontal(flip_horizontal(img)).tensor(), img.tensor()));
    EXPECT_FLOAT_EQ(flip_horizontal(img).tensor()[1][2][0].item<float>(), img.tensor()[1][2][11].item<float>());
}
