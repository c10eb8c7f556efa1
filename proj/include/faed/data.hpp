#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "faed/rng.hpp"

namespace faed::data {

/// Square RGB raster with channel-major pixels in [0, 1].
struct Image {
    std::size_t side = 0;
    std::size_t channels = 3;
    std::vector<double> pixels;

    Image() = default;
    Image(std::size_t side, std::size_t channels, double fill = 0.0)
        : side(side), channels(channels), pixels(channels * side * side, fill) {}

    double& at(std::size_t c, std::size_t y, std::size_t x) noexcept { return pixels[(c * side + y) * side + x]; }
    double at(std::size_t c, std::size_t y, std::size_t x) const noexcept { return pixels[(c * side + y) * side + x]; }

    bool operator==(const Image&) const = default;
};

struct Dataset {
    std::string name;
    std::vector<Image> images;
    std::vector<std::string> labels;  // optional; empty or one per image

    std::size_t size() const noexcept { return images.size(); }
};

/// Binary 8-bit PPM (P6). Values map to v / 255. Only square images are accepted.
Image load_image_ppm(std::span<const std::uint8_t> bytes);
/// Quantizes each value to round(v * 255).
std::vector<std::uint8_t> write_image_ppm(const Image& img);

Image read_ppm_file(const std::filesystem::path& path);
void write_ppm_file(const Image& img, const std::filesystem::path& path);

/// Bilinear resampling with half-pixel-center alignment.
Image resize_bilinear(const Image& img, std::size_t target_side);

/// Adds N(0, (0.02 * max pixel)^2) noise to every value.
Image augment_noise(const Image& img, RngStream rng, bool clamp = true);

/// Pastes `count` rotated thumbnails drawn from `sources` onto a copy of `img`.
/// Patch k draws everything it needs from rng.substream(k), so a run with
/// fewer patches is a prefix of a run with more.
Image augment_overlay(const Image& img, std::span<const Image> sources, std::size_t count, std::size_t patch_side,
                      const RngStream& rng);

/// Self-overlay: the thumbnails are whole-image minis of `img` itself.
Image augment_self_overlay(const Image& img, std::size_t count, std::size_t patch_side, const RngStream& rng);

std::pair<Dataset, Dataset> split_halves(const Dataset& ds);

enum class SynthFamily { Blobs, Stripes };
SynthFamily parse_family(const std::string& text);
const char* to_string(SynthFamily family);

/// Procedural textured images: soft Gaussian blobs on a dim gradient, or
/// oriented two-colour sinusoidal stripes.
Dataset synth_dataset(SynthFamily family, std::size_t n, std::size_t side, std::uint64_t seed);

enum class AugmentKind { None, Noise, SelfOverlay, ForeignOverlay };
AugmentKind parse_augment_kind(const std::string& text);
const char* to_string(AugmentKind kind);

struct AugmentSpec {
    AugmentKind kind = AugmentKind::None;
    std::size_t count = 5;
    std::size_t patch_side = 31;
    bool clamp_noise = true;
};

/// Applies one augmentation rung to every image; image i uses stream
/// (seed, derive_stream(tag, i)) so the result does not depend on order of work.
Dataset augment_dataset(const Dataset& ds, const AugmentSpec& spec, std::span<const Image> foreign, std::uint64_t seed);

/// Lexicographically sorted *.ppm files of a flat directory.
Dataset load_dataset_dir(const std::filesystem::path& dir);
void save_dataset_dir(const Dataset& ds, const std::filesystem::path& dir);

}  // namespace faed::data
