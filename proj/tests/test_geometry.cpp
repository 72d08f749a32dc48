#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "tomo/geometry.hpp"

using namespace tomo;

TEST_CASE("default geometry reproduces the protocol constants") {
    const DefaultGeometry d = default_paper_geometry();
    CHECK(d.fan.source_distance_mm == 397.0);
    CHECK(d.fan.n_detectors == 321);
    CHECK(d.fan.n_views == 320);
    CHECK(d.image_side == 416);
    CHECK(d.parallel.n_detectors == 321);
    CHECK(d.parallel.n_views == 320);
    CHECK(d.parallel.angle_spacing_rad == doctest::Approx(std::numbers::pi / 320).epsilon(1e-12));

    // views cover [0, 2*pi)
    CHECK(d.fan.beta(0) == 0.0);
    CHECK(d.fan.beta(319) == doctest::Approx(2.0 * std::numbers::pi * 319 / 320).epsilon(1e-12));

    // the fan reaches the inscribed FOV circle exactly
    const double reach = d.fan.source_distance_mm * std::sin(d.fan.gamma_max());
    CHECK(reach == doctest::Approx(208.0).epsilon(1e-12));
    CHECK(d.parallel.t_max() == doctest::Approx(208.0).epsilon(1e-12));
}

TEST_CASE("pixel coordinate mapping is a bijection") {
    ImageGrid x(23, 0.7);
    for (int r = 0; r < x.side; ++r)
        for (int c = 0; c < x.side; ++c) {
            CHECK(x.row_at(x.v(r)) == r);
            CHECK(x.col_at(x.u(c)) == c);
        }
    // center pixel of an odd grid sits at the origin
    CHECK(x.u(11) == doctest::Approx(0.0));
    CHECK(x.v(11) == doctest::Approx(0.0));
}

TEST_CASE("ellipse phantom") {
    SUBCASE("no ellipses gives a zero grid") {
        const auto x = ellipse_phantom<float>(32, 1.0, {});
        for (std::size_t p = 0; p < x.values.size(); ++p) CHECK(x.values.data()[p] == 0.0f);
    }
    SUBCASE("centered disc holds its value at the origin") {
        EllipseSpec disc{0.0, 0.0, 5.0, 5.0, 0.0, 0.02};
        const auto x = ellipse_phantom<float>(33, 1.0, {disc});
        CHECK(x.values(16, 16) == doctest::Approx(0.02f));
        CHECK(x.values(0, 0) == 0.0f);
    }
    SUBCASE("overlapping discs add") {
        EllipseSpec a{0.0, 0.0, 6.0, 6.0, 0.0, 0.01};
        EllipseSpec b{2.0, 0.0, 6.0, 6.0, 0.0, 0.03};
        const auto x = ellipse_phantom<float>(33, 1.0, {a, b});
        CHECK(x.values(16, 16) == doctest::Approx(0.04f));      // inside both
        CHECK(x.values(16, 16 - 5) == doctest::Approx(0.01f));  // only a
    }
    SUBCASE("rotation moves the major axis") {
        EllipseSpec e{0.0, 0.0, 8.0, 2.0, std::numbers::pi / 2.0, 1.0};
        const auto x = ellipse_phantom<float>(33, 1.0, {e});
        CHECK(x.values(16 - 6, 16) == 1.0f);  // along v now
        CHECK(x.values(16, 16 + 6) == 0.0f);
    }
}

TEST_CASE("insert_metal") {
    EllipseSpec tissue{0.0, 0.0, 10.0, 10.0, 0.0, 0.02};
    const auto x = ellipse_phantom<float>(33, 1.0, {tissue});

    SUBCASE("empty mask is the identity") {
        MetalMask m(33);
        const auto out = insert_metal(x, m, 0.68);
        CHECK(out.values == x.values);
    }
    SUBCASE("full mask saturates") {
        MetalMask m(33, 1);
        const auto out = insert_metal(x, m, 0.68);
        for (std::size_t p = 0; p < out.values.size(); ++p)
            CHECK(out.values.data()[p] == doctest::Approx(0.68f));
    }
    SUBCASE("disc mask replaces, and is idempotent") {
        EllipseSpec hole{3.0, 0.0, 2.0, 2.0, 0.0, 0.0};
        const MetalMask m = ellipse_mask(33, 1.0, {hole});
        REQUIRE(!m.empty());
        const auto once = insert_metal(x, m, 0.68);
        const auto twice = insert_metal(once, m, 0.68);
        CHECK(once.values == twice.values);
        CHECK(once.values(16, 16 + 3) == doctest::Approx(0.68f));
        CHECK(once.values(16, 16 - 5) == doctest::Approx(0.02f));
    }
    SUBCASE("dimension mismatch") {
        MetalMask m(12);
        CHECK_THROWS_AS(insert_metal(x, m, 0.68), ValidationError);
    }
}

TEST_CASE("hounsfield conversions") {
    CHECK(mu_to_hu(kMuWaterPerMm) == doctest::Approx(0.0));
    CHECK(mu_to_hu(0.0) == doctest::Approx(-1000.0));
    CHECK(hu_to_mu(0.0) == doctest::Approx(kMuWaterPerMm));

    for (double hu : {-1000.0, -31.5, 0.0, 250.0, 2000.0, 30000.0})
        CHECK(mu_to_hu(hu_to_mu(hu)) == doctest::Approx(hu).epsilon(1e-12));
    for (double mu : {0.0, 0.001, 0.0192, 0.68})
        CHECK(hu_to_mu(mu_to_hu(mu)) == doctest::Approx(mu).epsilon(1e-12));

    CHECK_THROWS_AS(hu_to_mu(0.0, 0.0), ValidationError);
}

TEST_CASE("segment_metal thresholds in HU") {
    // air background with a 3000 HU disc
    EllipseSpec disc{0.0, 0.0, 4.0, 4.0, 0.0, 3000.0};
    const auto x = ellipse_phantom<float>(33, 1.0, {disc});

    SUBCASE("values below the threshold give an empty mask") {
        const MetalMask m = segment_metal(x, 5000.0);
        CHECK(m.empty());
    }
    SUBCASE("default 2000 HU recovers the disc") {
        const MetalMask m = segment_metal(x);
        const MetalMask expected = ellipse_mask(33, 1.0, {disc});
        CHECK(m.values == expected.values);
    }
    SUBCASE("a very low threshold marks everything") {
        const MetalMask m = segment_metal(x, -2000.0);
        CHECK(m.pixel_count() == 33l * 33l);
    }
}

TEST_CASE("scene json round trip") {
    SceneConfig cfg;
    cfg.side = 256;
    cfg.pixel_spacing_mm = 1.0;
    cfg.fan = make_fan_covering_fov(397.0, 321, 320, 128.0);
    cfg.ellipses.push_back({0.0, 0.0, 90.0, 70.0, 0.1, 0.02});
    cfg.metal_ellipses.push_back({20.0, -10.0, 5.0, 5.0, 0.0, 0.0});
    cfg.metal_mu_per_mm = 0.68;

    const SceneConfig back = parse_scene_json(scene_to_json(cfg));
    CHECK(back.side == cfg.side);
    CHECK(back.fan.source_distance_mm == cfg.fan.source_distance_mm);
    CHECK(back.fan.detector_spacing_rad ==
          doctest::Approx(cfg.fan.detector_spacing_rad).epsilon(1e-14));
    REQUIRE(back.ellipses.size() == 1);
    CHECK(back.ellipses[0].semi_axis_b_mm == 70.0);
    REQUIRE(back.metal_ellipses.size() == 1);
    CHECK(back.metal_mu_per_mm == 0.68);

    SUBCASE("defaulted detector spacing follows the FOV rule") {
        const SceneConfig d = parse_scene_json("{\"side\":416,\"pixel_spacing_mm\":1.0}");
        const double reach = d.fan.source_distance_mm * std::sin(d.fan.gamma_max());
        CHECK(reach == doctest::Approx(208.0).epsilon(1e-12));
    }
    SUBCASE("invalid json is a validation error") {
        CHECK_THROWS_AS(parse_scene_json("{nope"), ValidationError);
    }
}
