#pragma once

#include <cstdint>

#include "chimeramix/dataset.hpp"

namespace chimeramix {

/// Each class has a fixed base RGB color (the same for every seed); every pixel gets
/// independent Gaussian noise.
LabeledImageDataset make_flat_color_dataset(int64_t classes, int64_t per_class, int64_t side,
                                            double noise, uint64_t seed);

/// Two classes (reddish and bluish blobs on a gray background) used as the bundled
/// CLI fixture.
LabeledImageDataset make_two_class_fixture(int64_t per_class, int64_t side, uint64_t seed);

/// Three-class scenes: a class-specific shape (square, disc or cross) in a jittered
/// class tint at a random position, a checkered distractor, a random background and
/// pixel noise.
/// Class identity lives in a local part of the image while the rest is nuisance.
LabeledImageDataset make_structured_dataset(int64_t per_class, int64_t side, uint64_t seed,
                                            double noise = 0.04);

}  // namespace chimeramix
