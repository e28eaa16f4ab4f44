#include "evoaug/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evoaug/errors.hpp"

namespace evoaug {

namespace {

std::array<int, 3> class_color(const BlobDatasetSpec& spec, int label, RandomStream& palette) {
    static constexpr std::array<std::array<int, 3>, 6> kOrders{{
        {0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {0, 2, 1}, {2, 1, 0}, {1, 0, 2},
    }};
    if (label < 6) {
        const auto& o = kOrders[static_cast<std::size_t>(label)];
        return {spec.base_color[o[0]], spec.base_color[o[1]], spec.base_color[o[2]]};
    }
    return {static_cast<int>(palette.below(256)), static_cast<int>(palette.below(256)),
            static_cast<int>(palette.below(256))};
}

}  // namespace

LabeledDataset make_blob_dataset(const BlobDatasetSpec& spec) {
    if (spec.classes < 1 || spec.shots < 1 || spec.image_size < 1)
        throw ConfigError("blob dataset needs positive classes, shots and image_size");
    RandomStream root(spec.seed);
    auto palette = root.derive("palette");

    std::vector<std::array<int, 3>> colors;
    for (int c = 0; c < spec.classes; ++c) colors.push_back(class_color(spec, c, palette));
    for (const auto& [a, b] : spec.identical_classes) {
        if (a < 0 || b < 0 || a >= spec.classes || b >= spec.classes)
            throw ConfigError("identical_classes refers to a missing class");
        colors[static_cast<std::size_t>(b)] = colors[static_cast<std::size_t>(a)];
    }

    const int n = spec.image_size;
    const double sigma = std::max(1e-6, spec.blob_sigma * n);
    std::vector<LabeledItem> items;
    std::vector<std::string> names;
    for (int c = 0; c < spec.classes; ++c) {
        names.push_back("class" + std::to_string(c));
        for (int s = 0; s < spec.shots; ++s) {
            const std::string id = "c" + std::to_string(c) + "_" + std::to_string(s);
            auto rng = root.derive(id);
            const double cx = (n - 1) / 2.0 + rng.uniform(-0.05, 0.05) * n;
            const double cy = (n - 1) / 2.0 + rng.uniform(-0.05, 0.05) * n;
            RasterImage img(n, n, 3);
            for (int y = 0; y < n; ++y) {
                for (int x = 0; x < n; ++x) {
                    const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                    const double w = std::exp(-r2 / (2.0 * sigma * sigma));
                    for (int ch = 0; ch < 3; ++ch) {
                        const double v = spec.background + (colors[c][ch] - spec.background) * w +
                                         rng.normal(0.0, spec.pixel_noise);
                        img.at(x, y, ch) = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
                    }
                }
            }
            items.push_back({id, std::move(img), c});
        }
    }
    return LabeledDataset(std::move(items), std::move(names));
}

}  // namespace evoaug
