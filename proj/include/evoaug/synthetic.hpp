#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "evoaug/dataset.hpp"

namespace evoaug {

/// Parameters of a Gaussian-blob image dataset: every image is a soft disc
/// of its class color on a dark background, with per-image pixel noise and
/// a small random offset of the disc centre. Classes differ only in color.
/// The first six classes use the six channel orderings of one base color, so
/// permuting channels maps one class onto another.
struct BlobDatasetSpec {
    int classes = 5;
    int shots = 1;
    int image_size = 32;
    double blob_sigma = 0.3;       // fraction of image size
    double pixel_noise = 6.0;      // stddev of per-sample noise
    std::array<int, 3> base_color{230, 130, 30};
    int background = 20;
    /// Class pairs (a, b): class b reuses class a's color, making the pair
    /// inseparable.
    std::vector<std::pair<int, int>> identical_classes;
    std::uint64_t seed = 0;
};

/// Item ids are "c<label>_<shot>"; class names "class<label>".
LabeledDataset make_blob_dataset(const BlobDatasetSpec& spec);

}  // namespace evoaug
