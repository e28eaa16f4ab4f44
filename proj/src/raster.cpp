#include "evoaug/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include "evoaug/errors.hpp"

namespace evoaug {

RasterImage::RasterImage(int width, int height, int channels)
    : RasterImage(width, height, channels,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                            std::max(height, 0) * std::max(channels, 0))) {}

RasterImage::RasterImage(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    if (width < 1 || height < 1) throw FormatError("image dimensions must be positive");
    if (channels != 1 && channels != 3) throw FormatError("image must have 1 or 3 channels");
    if (data_.size() != static_cast<std::size_t>(width) * height * channels)
        throw FormatError("image data length does not match width*height*channels");
}

// ---------------------------------------------------------------------------
// Codecs

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = img.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

    const auto stride = static_cast<png_int_32>(img.width() * img.channels());
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.data().data(), stride, nullptr))
        throw FormatError(std::string("png encode: ") + image.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.data().data(), stride, nullptr))
        throw FormatError(std::string("png encode: ") + image.message);
    out.resize(size);
    return out;
}

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw FormatError(std::string("png decode: ") + image.message);

    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const int channels = color ? 3 : 1;
    if (image.width == 0 || image.height == 0) {
        png_image_free(&image);
        throw FormatError("png decode: empty image");
    }
    std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, data.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw FormatError("png decode: " + msg);
    }
    return RasterImage(static_cast<int>(image.width), static_cast<int>(image.height), channels,
                       std::move(data));
}

namespace {

// Reads one unsigned header field of a netpbm file, skipping whitespace and
// '#' comments.
long read_ppm_field(std::span<const std::uint8_t> bytes, std::size_t& pos) {
    for (;;) {
        while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        if (pos < bytes.size() && bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw FormatError("ppm: malformed header");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
        v = v * 10 + (bytes[pos] - '0');
        if (v > (1L << 24)) throw FormatError("ppm: header value too large");
        ++pos;
    }
    return v;
}

bool has_png_signature(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    return bytes.size() >= 8 && std::equal(std::begin(kSig), std::end(kSig), bytes.begin());
}

}  // namespace

RasterImage decode_ppm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw FormatError("ppm: not a P6 file");
    std::size_t pos = 2;
    const long width = read_ppm_field(bytes, pos);
    const long height = read_ppm_field(bytes, pos);
    const long maxval = read_ppm_field(bytes, pos);
    if (width < 1 || height < 1) throw FormatError("ppm: dimensions must be positive");
    if (maxval < 1 || maxval > 255) throw FormatError("ppm: only 8-bit maxval is supported");
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("ppm: malformed header");
    ++pos;
    const std::size_t n = static_cast<std::size_t>(width) * height * 3;
    if (bytes.size() - pos < n) throw FormatError("ppm: truncated pixel data");
    std::vector<std::uint8_t> data(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
    if (maxval != 255) {
        for (auto& v : data) v = static_cast<std::uint8_t>(std::lround(v * 255.0 / maxval));
    }
    return RasterImage(static_cast<int>(width), static_cast<int>(height), 3, std::move(data));
}

RasterImage decode_image(std::span<const std::uint8_t> bytes) {
    if (has_png_signature(bytes)) return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
    throw FormatError("unsupported image format (expected PNG or binary PPM)");
}

RasterImage load_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("cannot read image: " + path.string());
    try {
        return decode_image(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_image(const RasterImage& img, const std::filesystem::path& path) {
    const auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write image: " + path.string());
}

// ---------------------------------------------------------------------------
// Classical transforms

namespace {

constexpr Range kCropBounds{0.0, 1.0};
constexpr Range kTranslateBounds{-0.25, 0.25};
constexpr Range kScaleBounds{0.5, 2.0};
constexpr Range kRotateBounds{-180.0, 180.0};
constexpr Range kJitterBounds{0.5, 1.5};

void check_param(const std::optional<double>& v, Range bounds, const char* name) {
    if (v && !(bounds.contains(*v) && std::isfinite(*v)))
        throw ConfigError(std::string(name) + " outside [" + std::to_string(bounds.lo) + ", " +
                          std::to_string(bounds.hi) + "]");
}

void check_range(Range r, Range bounds, const char* name) {
    if (!(r.lo <= r.hi) || !bounds.contains(r.lo) || !bounds.contains(r.hi))
        throw ConfigError(std::string("classical range ") + name + " must lie within [" +
                          std::to_string(bounds.lo) + ", " + std::to_string(bounds.hi) + "]");
}

void check_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0))
        throw ConfigError(std::string("classical activation probability ") + name + " must be in [0, 1]");
}

// Values within 1e-12 of -1, 0 or 1 are snapped so that axis-aligned
// rotations map pixel centres exactly.
double snap_unit(double v) {
    for (double target : {-1.0, 0.0, 1.0})
        if (std::abs(v - target) < 1e-12) return target;
    return v;
}

RasterImage warp(const RasterImage& img, const ClassicalTransformSpec& spec) {
    const int w = img.width();
    const int h = img.height();
    const int ch = img.channels();
    const double cx = (w - 1) / 2.0;
    const double cy = (h - 1) / 2.0;

    double magnification = 1.0;
    if (spec.crop_fraction) magnification /= *spec.crop_fraction;
    if (spec.scale) magnification *= *spec.scale;
    double cos_t = 1.0;
    double sin_t = 0.0;
    if (spec.rotate_degrees) {
        const double theta = *spec.rotate_degrees * std::numbers::pi / 180.0;
        cos_t = snap_unit(std::cos(theta));
        sin_t = snap_unit(std::sin(theta));
    }

    RasterImage out(w, h, ch);
    std::vector<double> acc(static_cast<std::size_t>(ch));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // Map the output pixel back into the source frame, undoing the
            // forward chain zoom -> rotate -> translate -> flip in reverse.
            double px = x - cx;
            double py = y - cy;
            if (spec.hflip) px = -px;
            if (spec.vflip) py = -py;
            if (spec.translate_xy) {
                px -= spec.translate_xy->first * w;
                py -= spec.translate_xy->second * h;
            }
            if (spec.rotate_degrees) {
                const double rx = cos_t * px - sin_t * py;
                const double ry = sin_t * px + cos_t * py;
                px = rx;
                py = ry;
            }
            if (magnification != 1.0) {
                px /= magnification;
                py /= magnification;
            }
            const double sx = px + cx;
            const double sy = py + cy;

            const double fx0 = std::floor(sx);
            const double fy0 = std::floor(sy);
            const double fx = sx - fx0;
            const double fy = sy - fy0;
            const long x0 = static_cast<long>(fx0);
            const long y0 = static_cast<long>(fy0);
            std::fill(acc.begin(), acc.end(), 0.0);
            const double weights[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
            const long xs[4] = {x0, x0 + 1, x0, x0 + 1};
            const long ys[4] = {y0, y0, y0 + 1, y0 + 1};
            for (int k = 0; k < 4; ++k) {
                if (weights[k] == 0.0) continue;
                if (xs[k] < 0 || xs[k] >= w || ys[k] < 0 || ys[k] >= h) continue;  // black
                for (int c = 0; c < ch; ++c)
                    acc[c] += weights[k] * img.at(static_cast<int>(xs[k]), static_cast<int>(ys[k]), c);
            }
            for (int c = 0; c < ch; ++c)
                out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(acc[c], 0.0, 255.0)));
        }
    }
    return out;
}

void jitter(RasterImage& img, const ClassicalTransformSpec& spec) {
    auto px = img.mutable_data();
    std::vector<double> v(px.begin(), px.end());
    const int ch = img.channels();
    const std::size_t npix = v.size() / ch;
    auto clamp_all = [&] {
        for (auto& s : v) s = std::clamp(s, 0.0, 255.0);
    };
    auto gray_of = [&](std::size_t i) {
        return ch == 1 ? v[i] : 0.299 * v[3 * i] + 0.587 * v[3 * i + 1] + 0.114 * v[3 * i + 2];
    };

    if (spec.brightness) {
        for (auto& s : v) s *= *spec.brightness;
        clamp_all();
    }
    if (spec.contrast) {
        double mean = 0.0;
        for (std::size_t i = 0; i < npix; ++i) mean += gray_of(i);
        mean /= static_cast<double>(npix);
        for (auto& s : v) s = (s - mean) * *spec.contrast + mean;
        clamp_all();
    }
    if (spec.saturation && ch == 3) {
        for (std::size_t i = 0; i < npix; ++i) {
            const double g = gray_of(i);
            for (int c = 0; c < 3; ++c) v[3 * i + c] = (v[3 * i + c] - g) * *spec.saturation + g;
        }
        clamp_all();
    }
    for (std::size_t i = 0; i < v.size(); ++i) px[i] = static_cast<std::uint8_t>(std::lround(v[i]));
}

}  // namespace

bool ClassicalTransformSpec::has_geometry() const {
    return crop_fraction || translate_xy || scale || rotate_degrees || hflip || vflip;
}

bool ClassicalTransformSpec::is_identity() const {
    return !has_geometry() && !brightness && !contrast && !saturation;
}

void ClassicalTransformSpec::validate() const {
    if (crop_fraction && !(*crop_fraction > 0.0 && *crop_fraction <= 1.0))
        throw ConfigError("crop_fraction outside (0, 1]");
    if (translate_xy) {
        check_param(translate_xy->first, kTranslateBounds, "translate_x");
        check_param(translate_xy->second, kTranslateBounds, "translate_y");
    }
    check_param(scale, kScaleBounds, "scale");
    check_param(rotate_degrees, kRotateBounds, "rotate_degrees");
    check_param(brightness, kJitterBounds, "brightness");
    check_param(contrast, kJitterBounds, "contrast");
    check_param(saturation, kJitterBounds, "saturation");
}

ClassicalRanges ClassicalRanges::identity() {
    ClassicalRanges r;
    r.p_crop = r.p_translate = r.p_scale = r.p_rotate = 0.0;
    r.p_hflip = r.p_vflip = 0.0;
    r.p_brightness = r.p_contrast = r.p_saturation = 0.0;
    return r;
}

void ClassicalRanges::validate() const {
    check_range(crop, kCropBounds, "crop");
    if (!(crop.lo > 0.0)) throw ConfigError("classical range crop must be strictly positive");
    check_range(translate, kTranslateBounds, "translate");
    check_range(scale, kScaleBounds, "scale");
    check_range(rotate, kRotateBounds, "rotate");
    check_range(brightness, kJitterBounds, "brightness");
    check_range(contrast, kJitterBounds, "contrast");
    check_range(saturation, kJitterBounds, "saturation");
    check_probability(p_crop, "crop");
    check_probability(p_translate, "translate");
    check_probability(p_scale, "scale");
    check_probability(p_rotate, "rotate");
    check_probability(p_hflip, "hflip");
    check_probability(p_vflip, "vflip");
    check_probability(p_brightness, "brightness");
    check_probability(p_contrast, "contrast");
    check_probability(p_saturation, "saturation");
}

RasterImage apply_transform(const RasterImage& img, const ClassicalTransformSpec& spec) {
    if (spec.is_identity()) return img;
    RasterImage out = spec.has_geometry() ? warp(img, spec) : img;
    if (spec.brightness || spec.contrast || spec.saturation) jitter(out, spec);
    return out;
}

ClassicalTransformSpec sample_classical_spec(RandomStream& rng, const ClassicalRanges& cfg) {
    cfg.validate();
    ClassicalTransformSpec s;
    auto draw = [&rng](Range r) { return rng.uniform(r.lo, r.hi); };
    if (rng.bernoulli(cfg.p_crop)) s.crop_fraction = draw(cfg.crop);
    if (rng.bernoulli(cfg.p_translate)) {
        const double tx = draw(cfg.translate);
        const double ty = draw(cfg.translate);
        s.translate_xy = std::make_pair(tx, ty);
    }
    if (rng.bernoulli(cfg.p_scale)) s.scale = draw(cfg.scale);
    if (rng.bernoulli(cfg.p_rotate)) s.rotate_degrees = draw(cfg.rotate);
    s.hflip = rng.bernoulli(cfg.p_hflip);
    s.vflip = rng.bernoulli(cfg.p_vflip);
    if (rng.bernoulli(cfg.p_brightness)) s.brightness = draw(cfg.brightness);
    if (rng.bernoulli(cfg.p_contrast)) s.contrast = draw(cfg.contrast);
    if (rng.bernoulli(cfg.p_saturation)) s.saturation = draw(cfg.saturation);
    return s;
}

}  // namespace evoaug
