#pragma once

#include <cstdint>

#include "llie/image.hpp"

namespace llie {

/// Procedural, normally exposed RGB scene: colour gradient background,
/// overlapping flat-coloured rectangles and discs, a sinusoidal grating and
/// mild sensor-like noise. Deterministic in `seed`.
ImageTensor textured_scene(uint64_t seed, int64_t height, int64_t width);

/// Low-light rendition of a scene: a global gain in [0.12, 0.3] and gamma in
/// [1.1, 1.4], both drawn from `seed`.
ImageTensor low_light_version(const ImageTensor& scene, uint64_t seed);

}  // namespace llie
