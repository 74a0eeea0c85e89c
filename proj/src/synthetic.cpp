#include "llie/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace llie {

ImageTensor textured_scene(uint64_t seed, int64_t height, int64_t width) {
    std::mt19937_64 rng(mix_seed(seed, 0x5CE7E));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> colour(0.15, 1.0);

    auto ys = torch::linspace(0.0, 1.0, height, torch::kFloat64).view({height, 1}).expand({height, width});
    auto xs = torch::linspace(0.0, 1.0, width, torch::kFloat64).view({1, width}).expand({height, width});

    const double mix = unit(rng);
    auto ramp = (xs * mix + ys * (1.0 - mix)).unsqueeze(0);
    auto c0 = torch::tensor({colour(rng), colour(rng), colour(rng)}, torch::kFloat64).view({3, 1, 1});
    auto c1 = torch::tensor({colour(rng), colour(rng), colour(rng)}, torch::kFloat64).view({3, 1, 1});
    auto img = (c0 * (1.0 - ramp) + c1 * ramp) * 0.7;

    const int shapes = 5 + static_cast<int>(unit(rng) * 4.0);
    for (int s = 0; s < shapes; ++s) {
        auto c = torch::tensor({unit(rng), unit(rng), unit(rng)}, torch::kFloat64).view({3, 1, 1});
        torch::Tensor mask;
        const double x0 = unit(rng);
        const double y0 = unit(rng);
        if (unit(rng) < 0.5) {
            const double w = 0.1 + 0.3 * unit(rng);
            const double h = 0.1 + 0.3 * unit(rng);
            mask = (xs >= x0) & (xs < x0 + w) & (ys >= y0) & (ys < y0 + h);
        } else {
            const double r = 0.05 + 0.2 * unit(rng);
            mask = ((xs - x0).square() + (ys - y0).square()) < r * r;
        }
        img = torch::where(mask.unsqueeze(0), c.expand_as(img), img);
    }

    const double freq = 4.0 + 16.0 * unit(rng);
    const double theta = std::numbers::pi * unit(rng);
    auto grating = torch::sin(2.0 * std::numbers::pi * freq * (xs * std::cos(theta) + ys * std::sin(theta)));
    img = img * (0.85 + 0.15 * grating).unsqueeze(0);

    std::normal_distribution<double> noise(0.0, 0.015);
    auto n = torch::empty({3, height, width}, torch::kFloat64);
    auto acc = n.accessor<double, 3>();
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t y = 0; y < height; ++y)
            for (int64_t x = 0; x < width; ++x) acc[c][y][x] = noise(rng);

    return ImageTensor::clamped((img + n).to(torch::kFloat32));
}

ImageTensor low_light_version(const ImageTensor& scene, uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 0xDA4C));
    std::uniform_real_distribution<double> gain(0.12, 0.3);
    std::uniform_real_distribution<double> gamma(1.1, 1.4);
    const double g = gain(rng);
    const double gm = gamma(rng);
    return apply_gain_gamma(scene, g, gm);
}

}  // namespace llie
