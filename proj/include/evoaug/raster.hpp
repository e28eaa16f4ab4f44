#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evoaug/random.hpp"

namespace evoaug {

/// 8-bit image, row-major with interleaved channels (1 = gray, 3 = RGB).
class RasterImage {
public:
    RasterImage() = default;
    /// Zero-filled image. Throws FormatError on bad dimensions.
    RasterImage(int width, int height, int channels);
    RasterImage(int width, int height, int channels, std::vector<std::uint8_t> data);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    bool empty() const { return data_.empty(); }

    std::span<const std::uint8_t> data() const { return data_; }
    std::span<std::uint8_t> mutable_data() { return data_; }

    std::uint8_t at(int x, int y, int c) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    std::uint8_t& at(int x, int y, int c) {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    bool operator==(const RasterImage&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Decodes PNG or binary PPM (P6) by content sniffing.
RasterImage load_image(const std::filesystem::path& path);
/// Always writes a lossless 8-bit PNG (gray or RGB).
void save_image(const RasterImage& img, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const RasterImage& img);
RasterImage decode_png(std::span<const std::uint8_t> bytes);
RasterImage decode_ppm(std::span<const std::uint8_t> bytes);
RasterImage decode_image(std::span<const std::uint8_t> bytes);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Parameters of one classical augmentation. Disengaged optionals and false
/// flips are inactive sub-transforms; the default value is the identity.
struct ClassicalTransformSpec {
    std::optional<double> crop_fraction;                      // (0, 1]
    std::optional<std::pair<double, double>> translate_xy;    // fraction of width/height, [-0.25, 0.25]
    std::optional<double> scale;                              // [0.5, 2.0]
    std::optional<double> rotate_degrees;                     // [-180, 180], counter-clockwise
    bool hflip = false;
    bool vflip = false;
    std::optional<double> brightness;                         // [0.5, 1.5]
    std::optional<double> contrast;                           // [0.5, 1.5]
    std::optional<double> saturation;                         // [0.5, 1.5]

    bool is_identity() const;
    bool has_geometry() const;
    /// Throws ConfigError if an active parameter is outside its declared range.
    void validate() const;

    bool operator==(const ClassicalTransformSpec&) const = default;
};

/// Sampling configuration for the Classical operator: per sub-transform
/// activation probability and parameter range.
struct ClassicalRanges {
    double p_crop = 0.5;
    Range crop{0.7, 1.0};
    double p_translate = 0.5;
    Range translate{-0.1, 0.1};
    double p_scale = 0.5;
    Range scale{0.9, 1.1};
    double p_rotate = 0.5;
    Range rotate{-30.0, 30.0};
    double p_hflip = 0.5;
    double p_vflip = 0.5;
    double p_brightness = 0.5;
    Range brightness{0.8, 1.2};
    double p_contrast = 0.5;
    Range contrast{0.8, 1.2};
    double p_saturation = 0.5;
    Range saturation{0.8, 1.2};

    /// All activation probabilities zero: every sample is the identity.
    static ClassicalRanges identity();

    /// Throws ConfigError when a range leaves the declared bounds or a
    /// probability leaves [0, 1].
    void validate() const;
};

/// Same-size output. Geometry is resampled back to the input grid with
/// bilinear interpolation and black fill; color jitter is applied as
/// brightness, then contrast, then saturation, clamping after each step.
RasterImage apply_transform(const RasterImage& img, const ClassicalTransformSpec& spec);

ClassicalTransformSpec sample_classical_spec(RandomStream& rng, const ClassicalRanges& cfg);

}  // namespace evoaug
