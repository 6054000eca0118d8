#include <gtest/gtest.h>

#include <microdarcy/config.hpp>
#include <microdarcy/errors.hpp>

#include <cmath>

using namespace microdarcy;

TEST(Config, DefaultTextParsesAndValidates) {
    const Config c = parse_config(default_config_text());
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.resolution, 8);
    EXPECT_EQ(c.sweep_resolution, 6);
    EXPECT_EQ(c.darcy_resolution, 12);
    EXPECT_EQ(c.inverse_epsilons, (std::vector<int>{2, 3, 4}));
    const DimensionlessParams p = c.params();
    EXPECT_DOUBLE_EQ(p.N2, 0.25);
    EXPECT_NEAR(p.gamma(), 0, 1e-15);
    EXPECT_DOUBLE_EQ(c.safety_factor, 1.25);
    EXPECT_TRUE(c.emits("json") && c.emits("csv") && c.emits("vtk"));
}

TEST(Config, CommentsAndWhitespace) {
    const Config c = parse_config("  # header\n\ngeometry.resolution=5   # trailing\n params.N2 = 0.1\n");
    EXPECT_EQ(c.resolution, 5);
    EXPECT_DOUBLE_EQ(*c.N2, 0.1);
}

TEST(Config, AlphaDefaultsToGammaZero) {
    Config c = parse_config("params.N2 = 0.2\nparams.beta = 3\n");
    EXPECT_DOUBLE_EQ(1 / c.params().alpha, 0.8);
    set_config_value(c, "params.alpha", "10");
    EXPECT_DOUBLE_EQ(c.params().gamma(), 0.1 - 0.8);
}

TEST(Config, Viscosities) {
    const Config c = parse_config("params.nu = 1\nparams.nu_r = 1\nparams.ca = 0.125\nparams.cd = 0.125\nparams.epsilon = 0.5\n");
    EXPECT_NO_THROW(c.validate());
    const DimensionlessParams p = c.params();
    EXPECT_DOUBLE_EQ(p.N2, 0.5);
    EXPECT_DOUBLE_EQ(p.Rc, 0.5);
    Config both = c;
    both.N2 = 0.3;
    EXPECT_THROW(both.validate(), ConfigInvalid);
    Config partial = parse_config("params.nu = 1\nparams.ca = 1\n");
    EXPECT_THROW(partial.validate(), ConfigInvalid);
    Config none;
    EXPECT_THROW(none.validate(), ConfigInvalid);
}

TEST(Config, Rejections) {
    EXPECT_THROW(parse_config("nonsense.key = 1\n"), ConfigInvalid);
    EXPECT_THROW(parse_config("geometry.resolution 8\n"), ConfigInvalid);
    EXPECT_THROW(parse_config("geometry.resolution = 8.5\n"), ConfigInvalid);
    EXPECT_THROW(parse_config("params.N2 = abc\n"), ConfigInvalid);
    EXPECT_THROW(parse_config("sweep.epsilons = 0.5\n"), ConfigInvalid);
    EXPECT_THROW(parse_config("sweep.epsilons = 1/1\n"), ConfigInvalid);
    EXPECT_THROW(parse_config("forcing.f = 1, 2\n"), ConfigInvalid);
    EXPECT_THROW(parse_config("geometry.obstacle_center = 1, x, 2\n"), ConfigInvalid);
    Config c = parse_config(default_config_text());
    c.darcy_resolution = 10; // not a multiple of 3 and 4
    EXPECT_THROW(c.validate(), ConfigInvalid);
    c = parse_config(default_config_text());
    c.inverse_epsilons = {2, 2};
    EXPECT_THROW(c.validate(), ConfigInvalid);
    c = parse_config(default_config_text());
    c.safety_factor = 0.9;
    EXPECT_THROW(c.validate(), ConfigInvalid);
    c = parse_config(default_config_text());
    c.formats = {"json", "xml"};
    EXPECT_THROW(c.validate(), ConfigInvalid);
    c = parse_config(default_config_text());
    c.N2 = 1.5;
    EXPECT_THROW(c.validate(), ConfigInvalid);
    EXPECT_THROW(load_config("/nonexistent/microdarcy.cfg"), ConfigInvalid);
}

TEST(Config, Epsilons) {
    const Config c = parse_config("sweep.epsilons = 1/2, 1/5\n");
    const auto e = c.epsilons();
    ASSERT_EQ(e.size(), 2u);
    EXPECT_DOUBLE_EQ(e[0], 0.5);
    EXPECT_DOUBLE_EQ(e[1], 0.2);
}

TEST(Config, Fields) {
    const Vec3 x(0.2, 0.25, 0.9);
    EXPECT_EQ(parse_field("zero")(x), Vec3::Zero());
    EXPECT_EQ(parse_field("e2")(x), Vec3::UnitY());
    EXPECT_EQ(parse_field(" 1, -2, 3 ")(x), Vec3(1, -2, 3));
    EXPECT_NEAR(parse_field("shear")(x)[0], std::sin(M_PI * 0.25), 1e-15);
    EXPECT_THROW(parse_field("e4"), ConfigInvalid);
}
