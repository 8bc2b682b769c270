#include <catch_amalgamated.hpp>

#include <cmath>

#include "retistack/image.hpp"
#include "retistack/rng.hpp"

using namespace retistack;

namespace {

ImageBuffer random_image(Rng& rng, int h, int w) {
    ImageBuffer img(h, w);
    for (auto& v : img.data) v = float(rng.next_double());
    return img;
}

} // namespace

TEST_CASE("square_pad centers content in a max-side square") {
    SECTION("3x1 column pads to 3x3 with the middle column original") {
        ImageBuffer img(3, 1);
        for (int y = 0; y < 3; ++y)
            for (int c = 0; c < 3; ++c) img.at(y, 0, c) = float(y + 1) / 10.0f;
        const ImageBuffer out = square_pad(img, 0.0f);
        REQUIRE(out.height == 3);
        REQUIRE(out.width == 3);
        for (int y = 0; y < 3; ++y) {
            CHECK(out.at(y, 1, 0) == img.at(y, 0, 0));
            CHECK(out.at(y, 0, 0) == 0.0f);
            CHECK(out.at(y, 2, 0) == 0.0f);
        }
    }
    SECTION("already square is returned unchanged") {
        Rng rng(1);
        const ImageBuffer img = random_image(rng, 100, 100);
        const ImageBuffer out = square_pad(img);
        CHECK(out.data == img.data);
    }
    SECTION("landscape raster pads height") {
        const ImageBuffer out = square_pad(ImageBuffer(2848, 4288));
        CHECK(out.height == 4288);
        CHECK(out.width == 4288);
    }
}

TEST_CASE("center_crop uses floor((dim-size)/2) offsets") {
    ImageBuffer img(5, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) img.at(y, x, 0) = float(y * 5 + x);
    const ImageBuffer out = center_crop(img, 3);
    REQUIRE(out.height == 3);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x)
            CHECK(out.at(y, x, 0) == img.at(y + 1, x + 1, 0)); // rows/cols 1..3

    SECTION("identity crop") {
        const ImageBuffer same = center_crop(img, 5);
        CHECK(same.data == img.data);
    }
    SECTION("oversize crop is an error") {
        CHECK_THROWS_AS(center_crop(img, 6), Error);
    }
}

TEST_CASE("resize_bilinear with half-pixel centers") {
    SECTION("constant image stays constant at any size") {
        ImageBuffer img(3, 5);
        for (auto& v : img.data) v = 0.37f;
        for (int size : {1, 2, 7, 16}) {
            const ImageBuffer out = resize_bilinear(img, size);
            REQUIRE(out.height == size);
            for (float v : out.data) CHECK_THAT(v, Catch::Matchers::WithinAbs(0.37f, 1e-7));
        }
    }
    SECTION("2x2 checkerboard upsampled to 4x4 keeps the corners") {
        ImageBuffer img(2, 2);
        img.at(0, 0, 0) = 0.0f;
        img.at(0, 1, 0) = 1.0f;
        img.at(1, 0, 0) = 1.0f;
        img.at(1, 1, 0) = 0.0f;
        const ImageBuffer out = resize_bilinear(img, 4);
        CHECK(out.at(0, 0, 0) == img.at(0, 0, 0));
        CHECK(out.at(0, 3, 0) == img.at(0, 1, 0));
        CHECK(out.at(3, 0, 0) == img.at(1, 0, 0));
        CHECK(out.at(3, 3, 0) == img.at(1, 1, 0));
    }
    SECTION("invalid size") {
        CHECK_THROWS_AS(resize_bilinear(ImageBuffer(2, 2), 0), Error);
    }
}

TEST_CASE("normalize_zscore") {
    NormalizationStats stats;
    SECTION("pixel at the mean maps to zero") {
        ImageBuffer img(1, 1);
        for (int c = 0; c < 3; ++c) img.at(0, 0, c) = float(stats.mean[c]);
        const ImageBuffer out = normalize_zscore(img, stats);
        for (int c = 0; c < 3; ++c) CHECK_THAT(out.at(0, 0, c), Catch::Matchers::WithinAbs(0.0, 1e-7));
    }
    SECTION("identity stats") {
        NormalizationStats id;
        for (int c = 0; c < 3; ++c) {
            id.mean[c] = 0.0;
            id.std[c] = 1.0;
        }
        Rng rng(4);
        const ImageBuffer img = random_image(rng, 4, 4);
        CHECK(normalize_zscore(img, id).data == img.data);
    }
    SECTION("hand value per channel") {
        ImageBuffer img(1, 1);
        img.at(0, 0, 0) = 0.585f;
        img.at(0, 0, 1) = 0.456f;
        img.at(0, 0, 2) = 0.406f;
        const ImageBuffer out = normalize_zscore(img, stats);
        CHECK_THAT(out.at(0, 0, 0), Catch::Matchers::WithinAbs((0.585 - 0.485) / 0.229, 1e-6));
        CHECK_THAT(out.at(0, 0, 1), Catch::Matchers::WithinAbs(0.0, 1e-7));
        CHECK_THAT(out.at(0, 0, 2), Catch::Matchers::WithinAbs(0.0, 1e-7));
    }
    SECTION("inversion recovers the input within 1e-7") {
        Rng rng(6);
        const ImageBuffer img = random_image(rng, 8, 8);
        const ImageBuffer out = normalize_zscore(img, stats);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x)
                for (int c = 0; c < 3; ++c) {
                    const double back = double(out.at(y, x, c)) * stats.std[c] + stats.mean[c];
                    CHECK_THAT(back, Catch::Matchers::WithinAbs(double(img.at(y, x, c)), 1e-7));
                }
    }
    SECTION("non-positive std rejected") {
        NormalizationStats bad;
        bad.std[1] = 0.0;
        CHECK_THROWS_AS(normalize_zscore(ImageBuffer(1, 1), bad), Error);
    }
}

TEST_CASE("preprocess chains pad, crop, resize, normalize") {
    NormalizationStats stats;
    SECTION("smallest camera profile end to end") {
        // scaled-down analog of the real chain; exact shapes run in acceptance
        const ImageBuffer img(71, 107); // landscape
        const CameraProfile cam{107, 71, 80};
        const ImageBuffer out = preprocess(img, cam, ArchPreset{"p", 19}, stats);
        CHECK(out.height == 19);
        CHECK(out.width == 19);
    }
    SECTION("square input equal to crop size: pad and crop are identities") {
        Rng rng(9);
        const ImageBuffer img = random_image(rng, 64, 64);
        const CameraProfile cam{64, 64, 64};
        const ImageBuffer out = preprocess(img, cam, ArchPreset{"p", 64}, stats);
        const ImageBuffer direct = normalize_zscore(img, stats);
        CHECK(out.data == direct.data);
    }
    SECTION("crop larger than padded image is an error") {
        const ImageBuffer img(10, 20);
        CHECK_THROWS_AS(preprocess(img, CameraProfile{20, 10, 30}, ArchPreset{"p", 8}, stats),
                        Error);
    }
}

TEST_CASE("geometry formulas hold for randomized sizes") {
    Rng rng(12);
    for (int t = 0; t < 50; ++t) {
        const int h = 1 + int(rng.below(40)), w = 1 + int(rng.below(40));
        const ImageBuffer img = random_image(rng, h, w);
        const ImageBuffer padded = square_pad(img);
        const int side = std::max(h, w);
        CHECK(padded.height == side);
        CHECK(padded.width == side);

        // pad then crop at the full side is idempotent
        const ImageBuffer again = center_crop(padded, side);
        CHECK(again.data == padded.data);

        const int crop = 1 + int(rng.below(std::uint64_t(side)));
        CHECK(center_crop(padded, crop).height == crop);

        const int target = 1 + int(rng.below(50));
        const ImageBuffer resized = resize_bilinear(img, target);
        CHECK(resized.height == target);
        CHECK(resized.width == target);
    }
}

TEST_CASE("camera profile matching") {
    bool matched = false;
    const CameraProfile p = match_camera_profile(2048, 1536, default_camera_profiles(), &matched);
    CHECK(matched);
    CHECK(p.crop_size == 1536);

    const CameraProfile q = match_camera_profile(640, 480, default_camera_profiles(), &matched);
    CHECK_FALSE(matched);
    CHECK(q.crop_size == 0); // pad-only fallback

    // all three defaults satisfy crop <= max(native)
    for (const auto& cam : default_camera_profiles())
        CHECK(cam.crop_size <= std::max(cam.native_width, cam.native_height));
}
