#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "llie/error.hpp"
#include "llie/synthetic.hpp"
#include "llie/training.hpp"
#include "test_util.hpp"

using namespace llie;
using llie::test::TempDir;

namespace {

PairDataset scene_dataset(int n, int64_t side = 40, uint64_t seed = 0) {
    std::vector<ExposurePair> pairs;
    for (int k = 0; k < n; ++k) {
        const auto dark = low_light_version(textured_scene(seed + k, side, side), seed + k);
        pairs.push_back(synth_second_exposure(dark, seed + 100 + k, "scene" + std::to_string(k)));
    }
    return PairDataset::from_pairs(std::move(pairs));
}

TrainConfig small_config() {
    TrainConfig c;
    c.model = llie::test::small_model();
    c.batch_size = 2;
    c.image_size = 32;
    c.max_iterations = 10;
    c.checkpoint_every = 5;
    c.learning_rate = 1e-3;
    c.seed = 7;
    return c;
}

std::vector<torch::Tensor> snapshot(ModelBundle& b) {
    std::vector<torch::Tensor> out;
    for (const auto& p : b.net()->parameters()) out.push_back(p.detach().clone());
    return out;
}

bool same(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
    if (a.size() != b.size()) return false;
    for (size_t k = 0; k < a.size(); ++k)
        if (!torch::equal(a[k], b[k])) return false;
    return true;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    return lines;
}

}  // namespace

TEST(TrainConfig, Validation) {
    EXPECT_NO_THROW(TrainConfig{}.validate());
    auto bad = [](auto mutate) {
        TrainConfig c;
        mutate(c);
        try {
            c.validate();
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::IoError;
    };
    EXPECT_EQ(bad([](TrainConfig& c) { c.learning_rate = -1; }), ErrorKind::InvalidInput);
    EXPECT_EQ(bad([](TrainConfig& c) { c.batch_size = 0; }), ErrorKind::InvalidInput);
    EXPECT_EQ(bad([](TrainConfig& c) { c.image_size = 4; }), ErrorKind::InvalidInput);
    EXPECT_EQ(bad([](TrainConfig& c) { c.beta1 = 1.0; }), ErrorKind::InvalidInput);
    EXPECT_EQ(bad([](TrainConfig& c) { c.clip_norm = 0.0; }), ErrorKind::InvalidInput);
    EXPECT_EQ(bad([](TrainConfig& c) { c.checkpoint_every = 0; }), ErrorKind::InvalidInput);
}

TEST(PairDataset, FromDirectory) {
    TempDir dir("dataset");
    save_image(textured_scene(1, 24, 24), dir / "flat1.png");
    save_image(textured_scene(2, 24, 32), dir / "flat2.jpg");
    std::filesystem::create_directories(dir / "real");
    save_image(textured_scene(3, 24, 24), dir / "real" / "a.png");
    save_image(textured_scene(4, 16, 16), dir / "real" / "b.png");
    std::ofstream(dir / "notes.txt") << "ignored";

    const auto ds = PairDataset::from_directory(dir.path(), 3);
    ASSERT_EQ(ds.size(), 3u);
    std::set<std::string> ids;
    for (size_t k = 0; k < ds.size(); ++k) {
        const auto p = ds.get(k);
        ids.insert(ds.scene_id(k));
        EXPECT_EQ(p.low_a.tensor().sizes(), p.low_b.tensor().sizes());
        // Synthetic partners stay fixed across reads.
        EXPECT_TRUE(torch::equal(p.low_b.tensor(), ds.get(k).low_b.tensor()));
    }
    EXPECT_EQ(ids.size(), 3u);
}

TEST(PairDataset, EmptyAndMissing) {
    TempDir dir("empty");
    auto kind = [](auto fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::IoError;
    };
    EXPECT_EQ(kind([&] { PairDataset::from_directory(dir.path()); }), ErrorKind::InvalidInput);
    EXPECT_EQ(kind([&] { PairDataset::from_directory(dir / "nope"); }), ErrorKind::NotFound);
    EXPECT_EQ(kind([] { PairDataset::from_pairs({}); }), ErrorKind::InvalidInput);
}

TEST(BatchStream, ShapesAndDeterminism) {
    const auto ds = scene_dataset(3);
    BatchStream s(ds, 4, 24, 11);
    const auto b1 = s.batch(5);
    ASSERT_EQ(b1.size(), 4u);
    for (const auto& p : b1) {
        EXPECT_EQ(p.low_a.tensor().sizes(), (std::vector<int64_t>{3, 24, 24}));
        EXPECT_EQ(p.low_b.tensor().sizes(), (std::vector<int64_t>{3, 24, 24}));
    }
    // Addressable by iteration, independent of access order.
    BatchStream fresh(ds, 4, 24, 11);
    fresh.batch(1);
    const auto b2 = fresh.batch(5);
    for (size_t k = 0; k < b1.size(); ++k) {
        EXPECT_TRUE(torch::equal(b1[k].low_a.tensor(), b2[k].low_a.tensor()));
        EXPECT_TRUE(torch::equal(b1[k].low_b.tensor(), b2[k].low_b.tensor()));
    }
}

TEST(BatchStream, EveryEpochVisitsEveryScene) {
    const auto ds = scene_dataset(5);
    BatchStream s(ds, 1, 16, 3);
    for (int epoch = 0; epoch < 3; ++epoch) {
        std::set<size_t> seen;
        for (int k = 0; k < 5; ++k) seen.insert(s.dataset_index(epoch * 5 + k));
        EXPECT_EQ(seen.size(), 5u);
    }
}

TEST(BatchStream, SingleSceneBatchGetsDistinctAugmentations) {
    const auto ds = scene_dataset(1);
    BatchStream s(ds, 4, 32, 5);
    const auto b = s.batch(1);
    ASSERT_EQ(b.size(), 4u);
    for (size_t i = 0; i < b.size(); ++i)
        for (size_t j = i + 1; j < b.size(); ++j)
            EXPECT_FALSE(torch::equal(b[i].low_a.tensor(), b[j].low_a.tensor())) << i << "," << j;
}

TEST(TrainStep, ZeroLearningRateLeavesParametersUnchanged) {
    const auto ds = scene_dataset(2);
    auto cfg = small_config();
    cfg.learning_rate = 0.0;
    Trainer t(cfg, ds);
    const auto before = snapshot(t.bundle());
    for (int k = 0; k < 3; ++k) t.step();
    EXPECT_TRUE(same(before, snapshot(t.bundle())));
    EXPECT_EQ(t.iteration(), 3);
}

TEST(TrainStep, ReportsFiniteTermsAndClipsGradients) {
    const auto ds = scene_dataset(2);
    auto cfg = small_config();
    cfg.clip_norm = 0.01;
    Trainer t(cfg, ds);
    const auto before = snapshot(t.bundle());
    const auto r = t.step();
    for (double v : {r.report.projection, r.report.consistency, r.report.retinex, r.report.perceptual, r.report.total}) {
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GE(v, 0.0);
    }
    EXPECT_GT(r.grad_norm, 0.0);
    EXPECT_LE(r.clipped_norm, cfg.clip_norm * (1.0 + 1e-5));
    EXPECT_FALSE(same(before, snapshot(t.bundle())));
}

TEST(TrainStep, DefaultClipBoundsTheUpdate) {
    const auto ds = scene_dataset(2);
    auto cfg = small_config();
    Trainer t(cfg, ds);
    for (int k = 0; k < 3; ++k) EXPECT_LE(t.step().clipped_norm, 5.0 * (1.0 + 1e-5));
}

TEST(TrainStep, SameSeedIsBitIdentical) {
    const auto ds = scene_dataset(3);
    const auto cfg = small_config();
    Trainer a(cfg, ds), b(cfg, ds);
    for (int k = 0; k < 4; ++k) {
        const auto ra = a.step();
        const auto rb = b.step();
        EXPECT_EQ(ra.report.total, rb.report.total);
    }
    EXPECT_TRUE(same(snapshot(a.bundle()), snapshot(b.bundle())));

    auto other = cfg;
    other.seed = cfg.seed + 1;
    Trainer c(other, ds);
    for (int k = 0; k < 4; ++k) c.step();
    EXPECT_FALSE(same(snapshot(a.bundle()), snapshot(c.bundle())));
}

TEST(TrainStep, NonFiniteLossNamesTheTerm) {
    const auto ds = scene_dataset(2);
    Trainer t(small_config(), ds);
    {
        torch::NoGradGuard no_grad;
        t.bundle().net()->n_net->parameters().front().fill_(NAN);
    }
    try {
        t.step();
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_EQ(e.term(), "projection");
        EXPECT_EQ(e.kind(), ErrorKind::NumericalError);
    }
}

TEST(TrainStep, ReducedPrecisionRuns) {
    const auto ds = scene_dataset(2);
    auto cfg = small_config();
    cfg.precision = Precision::Reduced;
    Trainer t(cfg, ds);
    EXPECT_TRUE(t.scaler().enabled);
    const auto before = snapshot(t.bundle());
    for (int k = 0; k < 3; ++k) {
        const auto r = t.step();
        EXPECT_TRUE(std::isfinite(r.report.total));
    }
    EXPECT_EQ(t.bundle().net()->parameters().front().scalar_type(), torch::kFloat32);
    EXPECT_FALSE(same(before, snapshot(t.bundle())));
}

TEST(TrainStep, LossDecreasesOnAFixedPair) {
    const auto ds = scene_dataset(1, 32);
    auto cfg = small_config();
    cfg.batch_size = 1;
    cfg.augment = false;
    cfg.learning_rate = 2e-3;
    Trainer t(cfg, ds);
    const double first = t.step().report.total;
    double last = first;
    for (int k = 0; k < 60; ++k) last = t.step().report.total;
    EXPECT_LT(last, first);
}

TEST(Train, WritesLogAndCheckpoints) {
    TempDir run("train");
    const auto ds = scene_dataset(2);
    const auto cfg = small_config();
    int calls = 0;
    const auto last = train(cfg, ds, run.path(), std::nullopt, [&](int64_t it, const StepResult&) {
        EXPECT_EQ(it, ++calls);
    });
    EXPECT_EQ(calls, 10);
    EXPECT_EQ(last, checkpoint_dir(run.path(), 10));
    EXPECT_TRUE(std::filesystem::exists(checkpoint_dir(run.path(), 5) / "manifest.json"));
    EXPECT_TRUE(std::filesystem::exists(last / "optimizer.pt"));
    const auto lines = read_lines(run / "log.csv");
    ASSERT_EQ(lines.size(), 11u);
    EXPECT_EQ(lines[0].rfind("iteration,total,projection,consistency,retinex,perceptual", 0), 0u);
    EXPECT_EQ(lines[10].rfind("10,", 0), 0u);
    const auto m = load_checkpoint(last).manifest();
    EXPECT_EQ(m.iteration, 10);
    EXPECT_EQ(m.extra.at("train_config").at("seed"), 7);
}

TEST(Train, ResumeMatchesUninterruptedRun) {
    TempDir full("full"), part("part");
    const auto ds = scene_dataset(3);
    auto cfg = small_config();
    cfg.max_iterations = 8;
    cfg.checkpoint_every = 4;

    std::vector<double> full_losses;
    train(cfg, ds, full.path(), std::nullopt,
          [&](int64_t, const StepResult& r) { full_losses.push_back(r.report.total); });

    auto first = cfg;
    first.max_iterations = 4;
    train(first, ds, part.path());
    std::vector<double> resumed;
    const auto last = train(cfg, ds, part.path(), checkpoint_dir(part.path(), 4),
                            [&](int64_t, const StepResult& r) { resumed.push_back(r.report.total); });
    ASSERT_EQ(resumed.size(), 4u);
    for (size_t k = 0; k < 4; ++k) EXPECT_EQ(resumed[k], full_losses[4 + k]) << "iteration " << 5 + k;

    auto a = load_checkpoint(checkpoint_dir(full.path(), 8));
    auto b = load_checkpoint(last);
    EXPECT_TRUE(same(snapshot(a), snapshot(b)));
    EXPECT_EQ(read_lines(part / "log.csv").size(), 9u);
}

TEST(Train, ResumeRejectsOtherArchitecture) {
    TempDir run("arch");
    const auto ds = scene_dataset(2);
    auto cfg = small_config();
    cfg.max_iterations = 2;
    const auto ck = train(cfg, ds, run.path());
    auto other = cfg;
    other.model.cg.features = 4;
    try {
        Trainer t(other, ds, ck);
        FAIL() << "expected CheckpointError";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::CheckpointError);
    }
}
