#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "faed/data.hpp"
#include "faed/error.hpp"

using namespace faed;
using namespace faed::data;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& header, std::initializer_list<int> payload) {
    std::vector<std::uint8_t> b(header.begin(), header.end());
    for (int v : payload) b.push_back(static_cast<std::uint8_t>(v));
    return b;
}

Image ramp(std::size_t side, std::size_t channels = 3) {
    Image img(side, channels);
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < side; ++y)
            for (std::size_t x = 0; x < side; ++x)
                img.at(c, y, x) = (double(x) + 2.0 * double(y) + double(c)) / double(4 * side + channels);
    return img;
}

// Scalar bilinear oracle written directly from the sampling definition.
double bilinear_oracle(const Image& img, std::size_t c, double sy, double sx) {
    const double last = double(img.side - 1);
    sy = std::min(std::max(sy, 0.0), last);
    sx = std::min(std::max(sx, 0.0), last);
    const int y0 = int(std::floor(sy)), x0 = int(std::floor(sx));
    const int y1 = std::min(y0 + 1, int(img.side) - 1), x1 = std::min(x0 + 1, int(img.side) - 1);
    const double fy = sy - y0, fx = sx - x0;
    return (1 - fy) * ((1 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1)) +
           fy * ((1 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1));
}

struct Placement {
    std::size_t left, top;
};

// Replays the per-patch draw order: source index, angle, left, top.
Placement placement(const RngStream& rng, std::size_t k, std::size_t n_sources, std::size_t side, std::size_t patch) {
    RngStream r = rng.substream(k);
    (void)r.index(n_sources);
    (void)r.uniform(0.0, 2.0 * std::numbers::pi);
    const std::size_t left = r.index(side - patch + 1);
    const std::size_t top = r.index(side - patch + 1);
    return {left, top};
}

bool in_any_square(std::size_t y, std::size_t x, const std::vector<Placement>& ps, std::size_t patch) {
    for (const auto& p : ps)
        if (y >= p.top && y < p.top + patch && x >= p.left && x < p.left + patch) return true;
    return false;
}

}  // namespace

TEST_CASE("PPM decoding") {
    const auto img = load_image_ppm(bytes_of("P6\n1 1\n255\n", {255, 0, 0}));
    CHECK(img.side == 1);
    CHECK(img.pixels == std::vector<double>{1.0, 0.0, 0.0});

    const auto commented = load_image_ppm(bytes_of("P6 # hi\n2 # w\n2\n255\n", {0, 0, 0, 51, 51, 51, 102, 102, 102, 255, 255, 255}));
    CHECK(commented.at(0, 1, 1) == 1.0);
    CHECK(commented.at(1, 0, 1) == doctest::Approx(0.2));

    CHECK_THROWS_AS(load_image_ppm(bytes_of("P6\n1 1\n65535\n", {0, 0, 0, 0, 0, 0})), ParseError);
    CHECK_THROWS_AS(load_image_ppm(bytes_of("P3\n1 1\n255\n", {0, 0, 0})), ParseError);
    CHECK_THROWS_AS(load_image_ppm(bytes_of("P6\n2 1\n255\n", {0, 0, 0, 0, 0, 0})), ParseError);

    try {
        load_image_ppm(bytes_of("P6\n2 2\n255\n", {1, 2, 3}));
        FAIL("truncated payload accepted");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 14);
    }
}

TEST_CASE("PPM round trip is the identity on quantized values") {
    RngStream rng(31, 0);
    Image img(5, 3);
    for (double& v : img.pixels) v = double(rng.index(256)) / 255.0;
    const auto back = load_image_ppm(write_image_ppm(img));
    CHECK(back == img);

    const auto dir = std::filesystem::temp_directory_path() / "faed_test_data_rt";
    std::filesystem::remove_all(dir);
    Dataset ds{"rt", {img, img}, {}};
    ds.images[1].pixels[0] = 0.0;
    save_dataset_dir(ds, dir);
    const auto loaded = load_dataset_dir(dir);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded.images[0] == ds.images[0]);
    CHECK(loaded.images[1] == ds.images[1]);
    std::filesystem::remove_all(dir);
}

TEST_CASE("resize_bilinear") {
    SUBCASE("constant stays constant") {
        for (std::size_t target : {1u, 3u, 7u, 16u}) {
            const auto out = resize_bilinear(Image(9, 3, 0.37), target);
            CHECK(out.side == target);
            for (double v : out.pixels) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
        }
    }
    SUBCASE("same side is identity") {
        const auto img = ramp(6);
        const auto out = resize_bilinear(img, 6);
        for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(std::abs(out.pixels[i] - img.pixels[i]) <= 1e-12);
    }
    SUBCASE("matches scalar oracle") {
        const auto img = ramp(4);
        for (std::size_t target : {2u, 3u, 5u, 8u}) {
            const auto out = resize_bilinear(img, target);
            const double scale = 4.0 / double(target);
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t y = 0; y < target; ++y)
                    for (std::size_t x = 0; x < target; ++x) {
                        const double want = bilinear_oracle(img, c, (y + 0.5) * scale - 0.5, (x + 0.5) * scale - 0.5);
                        CHECK(std::abs(out.at(c, y, x) - want) <= 1e-12);
                    }
        }
        // 4x4 -> 2x2 samples the midpoint of each 2x2 block.
        const auto out = resize_bilinear(img, 2);
        CHECK(out.at(0, 0, 0) == doctest::Approx(0.25 * (img.at(0, 0, 0) + img.at(0, 0, 1) + img.at(0, 1, 0) + img.at(0, 1, 1))));
    }
    SUBCASE("errors") { CHECK_THROWS_AS(resize_bilinear(Image(4, 3), 0), ConfigError); }
}

TEST_CASE("augment_noise") {
    SUBCASE("zero image unchanged") {
        const Image img(8, 3, 0.0);
        CHECK(augment_noise(img, RngStream(1, 2)) == img);
    }
    SUBCASE("standard deviation is 2% of the max") {
        Image img(100, 3, 0.5);
        img.pixels[17] = 1.0;
        const auto out = augment_noise(img, RngStream(32, 0), false);
        double sum = 0.0, sq = 0.0;
        const double n = double(img.pixels.size());
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
            const double d = out.pixels[i] - img.pixels[i];
            sum += d;
            sq += d * d;
        }
        const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
        CHECK(sd == doctest::Approx(0.02).epsilon(0.05));

        Image dim(100, 3, 0.1);
        dim.pixels[3] = 0.25;
        const auto out2 = augment_noise(dim, RngStream(32, 0), false);
        for (std::size_t i = 0; i < 50; ++i) {
            CHECK((out2.pixels[i] - dim.pixels[i]) == doctest::Approx(0.25 * (out.pixels[i] - img.pixels[i])).epsilon(1e-9));
        }
    }
    SUBCASE("deterministic and clamped") {
        Image img(16, 3, 0.99);
        img.pixels[0] = 0.0;
        const auto a = augment_noise(img, RngStream(5, 6));
        CHECK(a == augment_noise(img, RngStream(5, 6)));
        CHECK(a != augment_noise(img, RngStream(5, 7)));
        for (double v : a.pixels) CHECK((v >= 0.0 && v <= 1.0));
        CHECK(a.side == img.side);
    }
}

TEST_CASE("augment_overlay") {
    const std::size_t side = 32, patch = 8;
    const Image base(side, 3, 0.2);
    const Image source(20, 3, 0.7);
    const std::vector<Image> sources{source, Image(12, 3, 0.9)};
    const RngStream rng(33, 4);

    CHECK(augment_overlay(base, sources, 0, patch, rng) == base);
    CHECK(augment_overlay(base, {}, 0, patch, rng) == base);
    CHECK_THROWS_AS(augment_overlay(base, {}, 1, patch, rng), ConfigError);
    CHECK_THROWS_AS(augment_overlay(base, sources, 1, side, rng), ConfigError);
    CHECK_THROWS_AS(augment_overlay(base, sources, 1, 0, rng), ConfigError);

    SUBCASE("changes only land inside the drawn patch squares") {
        for (std::size_t count : {1u, 3u, 5u}) {
            const auto out = augment_overlay(base, sources, count, patch, rng);
            std::vector<Placement> ps;
            for (std::size_t k = 0; k < count; ++k) ps.push_back(placement(rng, k, sources.size(), side, patch));
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t y = 0; y < side; ++y)
                    for (std::size_t x = 0; x < side; ++x) {
                        const double v = out.at(c, y, x);
                        CHECK((v >= 0.0 && v <= 1.0));
                        if (!in_any_square(y, x, ps, patch)) CHECK(v == base.at(c, y, x));
                    }
            // The centre of the last patch is always inside the rotated footprint.
            const auto& last = ps.back();
            CHECK(out.at(0, last.top + patch / 2, last.left + patch / 2) != 0.2);
        }
    }
    SUBCASE("fewer patches modify a subset of the pixels") {
        std::vector<std::vector<bool>> masks;
        for (std::size_t count = 0; count <= 5; ++count) {
            const auto out = augment_overlay(base, sources, count, patch, rng);
            std::vector<bool> m(out.pixels.size());
            for (std::size_t i = 0; i < m.size(); ++i) m[i] = out.pixels[i] != base.pixels[i];
            masks.push_back(std::move(m));
        }
        for (std::size_t a = 0; a + 1 < masks.size(); ++a)
            for (std::size_t i = 0; i < masks[a].size(); ++i)
                if (masks[a][i]) CHECK(masks[a + 1][i]);
    }
    SUBCASE("self-overlay pastes a thumbnail of the input") {
        Image img = ramp(side);
        const auto out = augment_self_overlay(img, 1, patch, rng);
        const auto p = placement(rng, 0, 1, side, patch);
        const auto thumb = resize_bilinear(img, patch);
        bool found = false;
        const double v = out.at(1, p.top + patch / 2, p.left + patch / 2);
        for (double t : thumb.pixels) found = found || t == v;
        CHECK(found);
        CHECK(out != img);
    }
    SUBCASE("rotation keeps the patch area roughly constant") {
        const auto out = augment_overlay(base, sources, 1, 31 * side / 128 + 20, rng);
        std::size_t changed = 0;
        for (std::size_t i = 0; i < side * side; ++i) changed += out.pixels[i] != base.pixels[i];
        const double p = 31.0 * side / 128 + 20;
        CHECK(double(changed) >= std::numbers::pi * (p / 2 - 1) * (p / 2 - 1));
        CHECK(double(changed) <= p * p);
    }
}

TEST_CASE("split_halves") {
    Dataset ds{"d", {}, {}};
    for (int i = 0; i < 5; ++i) ds.images.push_back(Image(2, 3, i / 10.0));
    auto [a, b] = split_halves(ds);
    CHECK(a.size() == 2);
    CHECK(b.size() == 3);
    std::vector<Image> joined = a.images;
    joined.insert(joined.end(), b.images.begin(), b.images.end());
    CHECK(joined == ds.images);

    ds.images.pop_back();
    auto [c, d] = split_halves(ds);
    CHECK(c.size() == 2);
    CHECK(d.size() == 2);

    ds.images.resize(1);
    CHECK_THROWS_AS(split_halves(ds), InsufficientDataError);
}

TEST_CASE("synth_dataset") {
    const auto a = synth_dataset(SynthFamily::Blobs, 8, 16, 9);
    const auto b = synth_dataset(SynthFamily::Blobs, 8, 16, 9);
    REQUIRE(a.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) CHECK(a.images[i] == b.images[i]);
    CHECK(synth_dataset(SynthFamily::Blobs, 8, 16, 10).images[0] != a.images[0]);

    const std::size_t n = 256;
    double mean[2] = {}, var[2] = {};
    for (auto fam : {SynthFamily::Blobs, SynthFamily::Stripes}) {
        const auto ds = synth_dataset(fam, n, 32, 1);
        std::vector<double> m;
        for (const auto& img : ds.images) {
            CHECK(img.pixels.size() == 3 * 32 * 32);
            double s = 0.0;
            for (double v : img.pixels) {
                REQUIRE((v >= 0.0 && v <= 1.0));
                s += v;
            }
            m.push_back(s / double(img.pixels.size()));
        }
        const int f = fam == SynthFamily::Blobs ? 0 : 1;
        for (double v : m) mean[f] += v / n;
        for (double v : m) var[f] += (v - mean[f]) * (v - mean[f]) / (n - 1);
    }
    const double se = std::sqrt(var[0] / n + var[1] / n);
    CHECK(std::abs(mean[0] - mean[1]) > 3.0 * se);

    CHECK(parse_family("stripes") == SynthFamily::Stripes);
    CHECK_THROWS_AS(parse_family("waves"), ConfigError);
}

TEST_CASE("augment_dataset") {
    const auto ds = synth_dataset(SynthFamily::Blobs, 6, 16, 2);
    const auto foreign = synth_dataset(SynthFamily::Stripes, 3, 16, 3);
    for (auto kind : {AugmentKind::None, AugmentKind::Noise, AugmentKind::SelfOverlay, AugmentKind::ForeignOverlay}) {
        const AugmentSpec spec{kind, 2, 4, true};
        const auto out = augment_dataset(ds, spec, foreign.images, 4);
        REQUIRE(out.size() == ds.size());
        CHECK(augment_dataset(ds, spec, foreign.images, 4).images == out.images);
        if (kind == AugmentKind::None) {
            CHECK(out.images == ds.images);
        } else {
            CHECK(out.images != ds.images);
            CHECK(augment_dataset(ds, spec, foreign.images, 5).images != out.images);
        }
        CHECK(parse_augment_kind(to_string(kind)) == kind);
    }
    CHECK_THROWS_AS(augment_dataset(ds, {AugmentKind::ForeignOverlay, 2, 4, true}, {}, 4), ConfigError);
}
