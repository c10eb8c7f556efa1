#include "faed/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>

#include "faed/error.hpp"

namespace faed::data {

namespace {

constexpr std::uint64_t kSynthTag = 0x5359'4E54'4845'5349ULL;
constexpr std::uint64_t kAugmentTag = 0x4155'474D'454E'5421ULL;

class PpmCursor {
public:
    explicit PpmCursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::size_t read_uint(const char* field) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        std::size_t value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > (1u << 24)) throw ParseError(std::string("PPM ") + field + " is too large", start);
            ++pos_;
        }
        if (pos_ == start) throw ParseError(std::string("PPM: expected ") + field, pos_);
        return value;
    }

    std::size_t pos() const noexcept { return pos_; }
    void advance(std::size_t n) noexcept { pos_ += n; }
    std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void require_valid(const Image& img, const char* who) {
    if (img.side == 0 || img.channels == 0 || img.pixels.size() != img.channels * img.side * img.side) {
        throw DimensionError(std::string(who) + ": malformed image");
    }
}

}  // namespace

Image load_image_ppm(std::span<const std::uint8_t> bytes) {
    PpmCursor cur(bytes);
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw ParseError("PPM: missing P6 magic", 0);
    cur.advance(2);
    const std::size_t width = cur.read_uint("width");
    const std::size_t height = cur.read_uint("height");
    const std::size_t maxval_at = cur.pos();
    const std::size_t maxval = cur.read_uint("maxval");
    if (maxval != 255) throw ParseError("PPM: maxval must be 255, got " + std::to_string(maxval), maxval_at);
    if (cur.pos() >= bytes.size() || !std::isspace(bytes[cur.pos()])) {
        throw ParseError("PPM: expected a single whitespace byte after maxval", cur.pos());
    }
    cur.advance(1);
    if (width == 0 || height == 0) throw ParseError("PPM: zero-sized image", 0);
    if (width != height) {
        throw ParseError("PPM: only square images are supported, got " + std::to_string(width) + "x" +
                             std::to_string(height),
                         0);
    }

    const std::size_t payload = width * height * 3;
    if (bytes.size() - cur.pos() < payload) {
        throw ParseError("PPM: truncated payload, need " + std::to_string(payload) + " bytes", bytes.size());
    }

    Image img(width, 3);
    const std::uint8_t* p = bytes.data() + cur.pos();
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x)
            for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = static_cast<double>(*p++) / 255.0;
    return img;
}

std::vector<std::uint8_t> write_image_ppm(const Image& img) {
    require_valid(img, "write_image_ppm");
    if (img.channels != 3) throw DimensionError("write_image_ppm: expected 3 channels");
    const std::string header = "P6\n" + std::to_string(img.side) + " " + std::to_string(img.side) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + img.pixels.size());
    for (std::size_t y = 0; y < img.side; ++y) {
        for (std::size_t x = 0; x < img.side; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
                out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
            }
        }
    }
    return out;
}

Image read_ppm_file(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return load_image_ppm(bytes);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.offset());
    }
}

void write_ppm_file(const Image& img, const std::filesystem::path& path) {
    const auto bytes = write_image_ppm(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

Image resize_bilinear(const Image& img, std::size_t target_side) {
    require_valid(img, "resize_bilinear");
    if (target_side == 0) throw ConfigError("resize_bilinear: target side must be positive");

    const double scale = static_cast<double>(img.side) / static_cast<double>(target_side);
    const double last = static_cast<double>(img.side - 1);

    struct Tap {
        std::size_t lo, hi;
        double frac;
    };
    std::vector<Tap> taps(target_side);
    for (std::size_t d = 0; d < target_side; ++d) {
        const double s = std::clamp((static_cast<double>(d) + 0.5) * scale - 0.5, 0.0, last);
        const auto lo = static_cast<std::size_t>(std::floor(s));
        taps[d] = {lo, std::min(lo + 1, img.side - 1), s - static_cast<double>(lo)};
    }

    Image out(target_side, img.channels);
    for (std::size_t c = 0; c < img.channels; ++c) {
        for (std::size_t y = 0; y < target_side; ++y) {
            const Tap& ty = taps[y];
            for (std::size_t x = 0; x < target_side; ++x) {
                const Tap& tx = taps[x];
                const double top = img.at(c, ty.lo, tx.lo) * (1.0 - tx.frac) + img.at(c, ty.lo, tx.hi) * tx.frac;
                const double bot = img.at(c, ty.hi, tx.lo) * (1.0 - tx.frac) + img.at(c, ty.hi, tx.hi) * tx.frac;
                out.at(c, y, x) = top * (1.0 - ty.frac) + bot * ty.frac;
            }
        }
    }
    return out;
}

Image augment_noise(const Image& img, RngStream rng, bool clamp) {
    require_valid(img, "augment_noise");
    const double sigma = 0.02 * *std::max_element(img.pixels.begin(), img.pixels.end());
    Image out = img;
    if (sigma <= 0.0) return out;
    for (double& v : out.pixels) {
        v += sigma * rng.normal();
        if (clamp) v = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

Image augment_overlay(const Image& img, std::span<const Image> sources, std::size_t count, std::size_t patch_side,
                      const RngStream& rng) {
    require_valid(img, "augment_overlay");
    if (count == 0) return img;
    if (sources.empty()) throw ConfigError("augment_overlay: no source images for " + std::to_string(count) + " patches");
    if (patch_side == 0 || patch_side >= img.side) {
        throw ConfigError("augment_overlay: patch side " + std::to_string(patch_side) + " must be in [1, " +
                          std::to_string(img.side) + ")");
    }

    Image out = img;
    const double center = 0.5 * static_cast<double>(patch_side - 1);
    const std::size_t positions = img.side - patch_side + 1;

    for (std::size_t k = 0; k < count; ++k) {
        RngStream r = rng.substream(k);
        const Image& src = sources[r.index(sources.size())];
        const double angle = r.uniform(0.0, 2.0 * std::numbers::pi);
        const std::size_t left = r.index(positions);
        const std::size_t top = r.index(positions);

        const Image thumb = resize_bilinear(src, patch_side);
        if (thumb.channels != out.channels) throw DimensionError("augment_overlay: channel count mismatch");
        const double cs = std::cos(angle);
        const double sn = std::sin(angle);

        // Inverse-map every destination pixel of the patch square; pixels whose
        // preimage falls outside the thumbnail are left untouched.
        for (std::size_t v = 0; v < patch_side; ++v) {
            for (std::size_t u = 0; u < patch_side; ++u) {
                const double dx = static_cast<double>(u) - center;
                const double dy = static_cast<double>(v) - center;
                const double sx = std::round(cs * dx + sn * dy + center);
                const double sy = std::round(-sn * dx + cs * dy + center);
                if (sx < 0.0 || sy < 0.0 || sx >= static_cast<double>(patch_side) ||
                    sy >= static_cast<double>(patch_side)) {
                    continue;
                }
                const auto ix = static_cast<std::size_t>(sx);
                const auto iy = static_cast<std::size_t>(sy);
                for (std::size_t c = 0; c < out.channels; ++c) out.at(c, top + v, left + u) = thumb.at(c, iy, ix);
            }
        }
    }
    return out;
}

Image augment_self_overlay(const Image& img, std::size_t count, std::size_t patch_side, const RngStream& rng) {
    return augment_overlay(img, std::span<const Image>(&img, 1), count, patch_side, rng);
}

std::pair<Dataset, Dataset> split_halves(const Dataset& ds) {
    if (ds.size() < 2) throw InsufficientDataError("split_halves: need at least 2 images, got " + std::to_string(ds.size()));
    const std::size_t half = ds.size() / 2;
    Dataset first{ds.name + ".first", {ds.images.begin(), ds.images.begin() + half}, {}};
    Dataset second{ds.name + ".second", {ds.images.begin() + half, ds.images.end()}, {}};
    if (ds.labels.size() == ds.size()) {
        first.labels.assign(ds.labels.begin(), ds.labels.begin() + half);
        second.labels.assign(ds.labels.begin() + half, ds.labels.end());
    }
    return {std::move(first), std::move(second)};
}

SynthFamily parse_family(const std::string& text) {
    if (text == "blobs") return SynthFamily::Blobs;
    if (text == "stripes") return SynthFamily::Stripes;
    throw ConfigError("unknown synthetic family '" + text + "' (expected blobs or stripes)");
}

const char* to_string(SynthFamily family) {
    return family == SynthFamily::Blobs ? "blobs" : "stripes";
}

namespace {

Image synth_blobs(std::size_t side, RngStream& r) {
    Image img(side, 3);
    const double s = static_cast<double>(side);
    double base[3], gx[3], gy[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = r.uniform(0.05, 0.3);
        gx[c] = r.uniform(-0.1, 0.1);
        gy[c] = r.uniform(-0.1, 0.1);
    }
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < side; ++y)
            for (std::size_t x = 0; x < side; ++x)
                img.at(c, y, x) = base[c] + gx[c] * (static_cast<double>(x) / s - 0.5) +
                                  gy[c] * (static_cast<double>(y) / s - 0.5);

    const std::size_t blobs = 2 + r.index(4);
    for (std::size_t b = 0; b < blobs; ++b) {
        const double cx = r.uniform(0.0, s);
        const double cy = r.uniform(0.0, s);
        const double sigma = r.uniform(0.08, 0.2) * s;
        double amp[3];
        for (double& a : amp) a = r.uniform(0.2, 0.8);
        for (std::size_t y = 0; y < side; ++y) {
            for (std::size_t x = 0; x < side; ++x) {
                const double dx = static_cast<double>(x) + 0.5 - cx;
                const double dy = static_cast<double>(y) + 0.5 - cy;
                const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) += amp[c] * w;
            }
        }
    }
    for (double& v : img.pixels) v = std::clamp(v, 0.0, 1.0);
    return img;
}

Image synth_stripes(std::size_t side, RngStream& r) {
    Image img(side, 3);
    const double s = static_cast<double>(side);
    const double angle = r.uniform(0.0, std::numbers::pi);
    const double cycles = r.uniform(2.0, 6.0);
    const double phase = r.uniform(0.0, 2.0 * std::numbers::pi);
    double lo[3], hi[3];
    for (int c = 0; c < 3; ++c) {
        lo[c] = r.uniform(0.2, 0.6);
        hi[c] = r.uniform(0.6, 1.0);
    }
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
            const double proj = (static_cast<double>(x) * ca + static_cast<double>(y) * sa) / s;
            const double t = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * cycles * proj + phase);
            for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = std::clamp(lo[c] + (hi[c] - lo[c]) * t, 0.0, 1.0);
        }
    }
    return img;
}

}  // namespace

Dataset synth_dataset(SynthFamily family, std::size_t n, std::size_t side, std::uint64_t seed) {
    if (n == 0) throw ConfigError("synth_dataset: n must be at least 1");
    if (side == 0) throw ConfigError("synth_dataset: side must be positive");
    Dataset ds;
    ds.name = to_string(family);
    ds.images.reserve(n);
    const std::uint64_t tag = derive_stream(kSynthTag, static_cast<std::uint64_t>(family));
    for (std::size_t i = 0; i < n; ++i) {
        RngStream r(seed, derive_stream(tag, i));
        ds.images.push_back(family == SynthFamily::Blobs ? synth_blobs(side, r) : synth_stripes(side, r));
        ds.labels.emplace_back(to_string(family));
    }
    return ds;
}

AugmentKind parse_augment_kind(const std::string& text) {
    if (text == "none") return AugmentKind::None;
    if (text == "noise") return AugmentKind::Noise;
    if (text == "self-overlay") return AugmentKind::SelfOverlay;
    if (text == "foreign-overlay") return AugmentKind::ForeignOverlay;
    throw ConfigError("unknown augmentation '" + text + "' (expected none, noise, self-overlay or foreign-overlay)");
}

const char* to_string(AugmentKind kind) {
    switch (kind) {
        case AugmentKind::None: return "none";
        case AugmentKind::Noise: return "noise";
        case AugmentKind::SelfOverlay: return "self-overlay";
        case AugmentKind::ForeignOverlay: return "foreign-overlay";
    }
    return "unknown";
}

Dataset augment_dataset(const Dataset& ds, const AugmentSpec& spec, std::span<const Image> foreign, std::uint64_t seed) {
    Dataset out;
    out.name = ds.name + "+" + to_string(spec.kind);
    out.labels = ds.labels;
    out.images.reserve(ds.size());
    const std::uint64_t tag = derive_stream(kAugmentTag, static_cast<std::uint64_t>(spec.kind));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const RngStream rng(seed, derive_stream(tag, i));
        const Image& img = ds.images[i];
        switch (spec.kind) {
            case AugmentKind::None: out.images.push_back(img); break;
            case AugmentKind::Noise: out.images.push_back(augment_noise(img, rng, spec.clamp_noise)); break;
            case AugmentKind::SelfOverlay:
                out.images.push_back(augment_self_overlay(img, spec.count, spec.patch_side, rng));
                break;
            case AugmentKind::ForeignOverlay:
                out.images.push_back(augment_overlay(img, foreign, spec.count, spec.patch_side, rng));
                break;
        }
    }
    return out;
}

Dataset load_dataset_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ppm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
    if (files.empty()) throw IoError("no .ppm files in " + dir.string());

    Dataset ds;
    ds.name = dir.filename().string();
    for (const auto& f : files) {
        ds.images.push_back(read_ppm_file(f));
        if (ds.images.back().side != ds.images.front().side) {
            throw DimensionError(f.string() + ": side " + std::to_string(ds.images.back().side) +
                                 " differs from the first image (" + std::to_string(ds.images.front().side) + ")");
        }
    }
    return ds;
}

void save_dataset_dir(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "%06zu.ppm", i);
        write_ppm_file(ds.images[i], dir / name);
    }
}

}  // namespace faed::data
