#include <cmath>
#include <fstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "llie/error.hpp"
#include "llie/evaluate.hpp"
#include "llie/metrics.hpp"
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

ImageTensor natural(const std::string& name) { return load_image(llie::test::assets() / "natural" / (name + ".png")); }

ImageTensor crop(const ImageTensor& img, int64_t h, int64_t w) {
    return ImageTensor(img.tensor().slice(1, 0, h).slice(2, 0, w).contiguous());
}

ImageTensor noisy(const ImageTensor& img, double sigma, uint64_t seed) {
    torch::manual_seed(seed);
    return ImageTensor::clamped(img.tensor() + sigma * torch::randn_like(img.tensor()));
}

const NsParams& bundled() {
    static const NsParams p = load_ns_params(default_ns_params_path());
    return p;
}

}  // namespace

TEST(Psnr, ClosedForms) {
    const auto a = llie::test::random_image(3, 16, 16, 1);
    EXPECT_EQ(psnr(a, a), kPsnrCap);
    EXPECT_NEAR(psnr(ImageTensor::filled(3, 16, 16, 0.5f), ImageTensor::filled(3, 16, 16, 0.4f)), 20.0, 1e-5);
    // MSE of exactly 1e-3 over a random subset.
    auto t = torch::zeros({3, 10, 10});
    t.view({-1}).slice(0, 0, 30).fill_(std::sqrt(0.01f));
    EXPECT_NEAR(psnr(ImageTensor(torch::zeros({3, 10, 10})), ImageTensor(t)), 30.0, 1e-5);
    EXPECT_EQ(psnr(ImageTensor::filled(3, 8, 8, 0.f), ImageTensor::filled(3, 8, 8, 1.f)), 0.0);
    EXPECT_EQ(kind_of([&] { psnr(a, llie::test::random_image(3, 16, 12, 1)); }), ErrorKind::ShapeError);
}

TEST(Ssim, ClosedForms) {
    const auto a = llie::test::random_image(3, 32, 32, 2);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
    EXPECT_NEAR(ssim(ImageTensor::filled(3, 16, 16, 0.3f), ImageTensor::filled(3, 16, 16, 0.3f)), 1.0, 1e-12);
    EXPECT_LT(ssim(a, ImageTensor(1.0 - a.tensor())), 0.5);
    EXPECT_EQ(kind_of([&] { ssim(ImageTensor::filled(3, 10, 32, 0.f), ImageTensor::filled(3, 10, 32, 0.f)); }),
              ErrorKind::InvalidInput);
    EXPECT_EQ(kind_of([&] { ssim(a, llie::test::random_image(3, 32, 16, 2)); }), ErrorKind::ShapeError);
}

TEST(FullReference, ReferenceImplementationOracles) {
    std::ifstream in(llie::test::assets() / "pairs" / "oracle.json");
    ASSERT_TRUE(in);
    const auto oracle = nlohmann::json::parse(in);
    ASSERT_EQ(oracle.size(), 5u);
    for (const auto& [name, expected] : oracle.items()) {
        const auto a = load_image(llie::test::assets() / "pairs" / (name + "_a.png"));
        const auto b = load_image(llie::test::assets() / "pairs" / (name + "_b.png"));
        EXPECT_NEAR(psnr(a, b), expected.at("psnr").get<double>(), 1e-6) << name;
        EXPECT_NEAR(ssim(a, b), expected.at("ssim").get<double>(), 1e-4) << name;
    }
}

TEST(FullReference, SymmetricAndFlipInvariant) {
    const auto a = crop(natural("chelsea"), 64, 80);
    const auto b = noisy(a, 0.05, 3);
    EXPECT_EQ(psnr(a, b), psnr(b, a));
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
    EXPECT_NEAR(psnr(flip_horizontal(a), flip_horizontal(b)), psnr(a, b), 1e-9);
    EXPECT_NEAR(ssim(flip_horizontal(a), flip_horizontal(b)), ssim(a, b), 1e-9);
}

TEST(Perceptual, MonotoneInNoise) {
    const auto extractor = make_extractor("filterbank");
    const auto a = crop(natural("coffee"), 96, 96);
    EXPECT_EQ(perceptual_distance(extractor.get(), a, a), 0.0);
    double prev = 0.0;
    for (double sigma : {0.05, 0.1, 0.2}) {
        const double d = perceptual_distance(extractor.get(), a, noisy(a, sigma, 4));
        EXPECT_GT(d, prev) << sigma;
        prev = d;
    }
    EXPECT_EQ(kind_of([&] { perceptual_distance(nullptr, a, a); }), ErrorKind::DependencyError);
}

TEST(Niqe, BundledModelLoads) {
    const auto& p = bundled();
    EXPECT_EQ(p.mean.size(), static_cast<size_t>(kNiqeFeatures));
    EXPECT_EQ(p.covariance.size(), static_cast<size_t>(kNiqeFeatures * kNiqeFeatures));
}

TEST(Niqe, FeatureGrid) {
    const auto gray = niqe_gray(crop(natural("rocket"), 200, 300));
    std::vector<double> sharp;
    const auto f = niqe_patch_features(gray, &sharp);
    EXPECT_EQ(f.rows, 2 * 3);
    EXPECT_EQ(f.cols, kNiqeFeatures);
    EXPECT_EQ(sharp.size(), 6u);
}

TEST(Niqe, NaturalScoresBelowDegraded) {
    for (const auto* name : {"chelsea", "coffee", "rocket"}) {
        const auto img = natural(name);
        const double clean = niqe(img, bundled());
        EXPECT_GE(clean, 0.0);
        EXPECT_LT(clean, niqe(noisy(img, 0.1, 5), bundled())) << name;
        EXPECT_EQ(clean, niqe(img, bundled())) << "deterministic";
    }
}

TEST(Niqe, FlipInvariantOnWholePatchGrid) {
    for (const auto* name : {"chelsea", "coffee", "rocket"}) {
        const auto img = crop(natural(name), 288, 384);
        EXPECT_NEAR(niqe(flip_horizontal(img), bundled()), niqe(img, bundled()), 1e-6) << name;
    }
}

TEST(Niqe, Errors) {
    EXPECT_EQ(kind_of([] { niqe(ImageTensor::filled(3, 95, 200, 0.5f), bundled()); }), ErrorKind::InvalidInput);
    EXPECT_EQ(kind_of([] { load_ns_params("/nonexistent/niqe.json"); }), ErrorKind::DependencyError);
    TempDir dir("niqe");
    std::ofstream(dir / "bad.json") << "{\"mean\": [1, 2]}";
    EXPECT_EQ(kind_of([&] { load_ns_params(dir / "bad.json"); }), ErrorKind::DependencyError);
}

TEST(Niqe, SaveLoadRoundTrip) {
    TempDir dir("niqe_rt");
    save_ns_params(bundled(), dir / "p.json");
    const auto back = load_ns_params(dir / "p.json");
    EXPECT_EQ(back.mean, bundled().mean);
    EXPECT_EQ(back.covariance, bundled().covariance);
}

TEST(EvaluateDir, IdenticalDirectories) {
    TempDir a("eval_a"), b("eval_b");
    for (int k = 0; k < 3; ++k) {
        const auto img = llie::test::random_image(3, 24, 24, 10 + k);
        save_image(img, a / ("img" + std::to_string(k) + ".png"));
        save_image(img, b / ("img" + std::to_string(k) + ".png"));
    }
    const auto extractor = make_extractor("filterbank");
    const auto rep = evaluate_dir(a.path(), b.path(), extractor.get(), nullptr);
    ASSERT_EQ(rep.rows.size(), 3u);
    EXPECT_TRUE(rep.has_reference);
    for (const auto& r : rep.rows) {
        EXPECT_EQ(*r.psnr, kPsnrCap);
        EXPECT_NEAR(*r.ssim, 1.0, 1e-12);
        EXPECT_EQ(*r.perceptual, 0.0);
        EXPECT_FALSE(r.niqe);
    }
    EXPECT_EQ(rep.rows[0].filename, "img0.png");
    EXPECT_EQ(*rep.mean.psnr, kPsnrCap);
}

TEST(EvaluateDir, NoReferenceGivesNiqeOnly) {
    TempDir a("eval_nr");
    save_image(natural("chelsea"), a / "x.png");
    save_image(noisy(natural("coffee"), 0.05, 1), a / "y.png");
    const auto rep = evaluate_dir(a.path(), std::nullopt, nullptr, &bundled());
    ASSERT_EQ(rep.rows.size(), 2u);
    EXPECT_FALSE(rep.has_reference);
    for (const auto& r : rep.rows) {
        EXPECT_FALSE(r.psnr);
        EXPECT_FALSE(r.ssim);
        EXPECT_FALSE(r.perceptual);
        ASSERT_TRUE(r.niqe);
    }
    EXPECT_NEAR(*rep.mean.niqe, 0.5 * (*rep.rows[0].niqe + *rep.rows[1].niqe), 1e-12);
    const auto csv = to_csv(rep);
    EXPECT_EQ(csv.rfind("filename,psnr,ssim,perc_dist,niqe\n", 0), 0u);
    EXPECT_NE(csv.find("\nx.png,,,,"), std::string::npos);
    EXPECT_NE(csv.find("\nmean,,,,"), std::string::npos);
    EXPECT_NE(to_markdown(rep).find("NIQE"), std::string::npos);
}

TEST(EvaluateDir, MeanIsHandAverage) {
    TempDir a("eval_m"), b("eval_mb");
    const double sigmas[] = {0.02, 0.05, 0.1};
    std::vector<double> psnrs, ssims;
    for (int k = 0; k < 3; ++k) {
        const auto ref = llie::test::random_image(3, 32, 32, 20 + k, 0.2, 0.8);
        const auto enh = noisy(ref, sigmas[k], 30 + k);
        save_image(ref, b / ("s" + std::to_string(k) + ".png"));
        save_image(enh, a / ("s" + std::to_string(k) + ".png"));
        // Score what was written, so quantisation matches.
        const auto ra = load_image(a / ("s" + std::to_string(k) + ".png"));
        const auto rb = load_image(b / ("s" + std::to_string(k) + ".png"));
        psnrs.push_back(psnr(ra, rb));
        ssims.push_back(ssim(ra, rb));
    }
    const auto rep = evaluate_dir(a.path(), b.path(), nullptr, nullptr);
    for (int k = 0; k < 3; ++k) {
        EXPECT_DOUBLE_EQ(*rep.rows[k].psnr, psnrs[k]);
        EXPECT_DOUBLE_EQ(*rep.rows[k].ssim, ssims[k]);
        EXPECT_FALSE(rep.rows[k].perceptual);
    }
    EXPECT_NEAR(*rep.mean.psnr, (psnrs[0] + psnrs[1] + psnrs[2]) / 3.0, 1e-12);
    EXPECT_NEAR(*rep.mean.ssim, (ssims[0] + ssims[1] + ssims[2]) / 3.0, 1e-12);
    EXPECT_LT(*rep.rows[2].psnr, *rep.rows[0].psnr);
}

TEST(EvaluateDir, PairingErrorsNameOffenders) {
    TempDir a("eval_pa"), b("eval_pb");
    save_image(llie::test::random_image(3, 16, 16, 1), a / "same.png");
    save_image(llie::test::random_image(3, 16, 16, 1), b / "same.png");
    save_image(llie::test::random_image(3, 16, 16, 2), a / "only_a.png");
    save_image(llie::test::random_image(3, 16, 16, 3), b / "only_b.png");
    try {
        evaluate_dir(a.path(), b.path(), nullptr, nullptr);
        FAIL() << "expected PairingError";
    } catch (const PairingError& e) {
        EXPECT_EQ(e.kind(), ErrorKind::PairingError);
        EXPECT_EQ(e.offenders(), (std::vector<std::string>{"only_a.png", "only_b.png"}));
    }
    EXPECT_EQ(kind_of([&] { evaluate_dir(a / "missing", std::nullopt, nullptr, nullptr); }), ErrorKind::NotFound);
    TempDir empty("eval_empty");
    EXPECT_EQ(kind_of([&] { evaluate_dir(empty.path(), std::nullopt, nullptr, nullptr); }), ErrorKind::InvalidInput);
}
