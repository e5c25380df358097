#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include <json.hpp>

#include <lcforge/levels.hpp>

using namespace lcforge;

namespace {

SignalRange range_of(double x_min, double delta) { return {x_min, x_min + delta, delta}; }

void expect_levels(const LevelScheme& s, const std::vector<double>& want, double tol)
{
    ASSERT_EQ(s.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
        EXPECT_NEAR(s[i], want[i], tol) << "level " << i;
    }
}

} // namespace

TEST(LevelScheme, SortsAndMergesNearDuplicates)
{
    const LevelScheme s({3.0, 1.0, 2.0, 1.0 + 1e-13});
    expect_levels(s, {1.0, 2.0, 3.0}, 0.0);
    EXPECT_DOUBLE_EQ(s.min_gap(), 1.0);
}

TEST(LevelScheme, RejectsInvalidConstruction)
{
    EXPECT_THROW(LevelScheme({1.0}), ArgumentError);
    EXPECT_THROW(LevelScheme({1.0, 1.0 + 1e-14}), ArgumentError);
    EXPECT_THROW(LevelScheme({0.0, 1.0}, -0.1), ArgumentError);
    EXPECT_THROW(LevelScheme({0.0, 1.0, 1.5}, 0.5), ArgumentError);
    EXPECT_THROW(LevelScheme({0.0, std::nan("")}), ArgumentError);
    EXPECT_NO_THROW(LevelScheme({0.0, 1.0, 1.5}, 0.49));
}

TEST(LevelScheme, JsonRoundTrip)
{
    const LevelScheme s({-0.5, 0.1, 0.7}, 0.01);
    const nlohmann::json j = s;
    EXPECT_EQ(j.at("levels").size(), 3u);
    EXPECT_DOUBLE_EQ(j.at("hysteresis").get<double>(), 0.01);
    EXPECT_EQ(level_scheme_from_json(nlohmann::json::parse(j.dump())), s);
    EXPECT_THROW(level_scheme_from_json(nlohmann::json{{"hysteresis", 0.0}}), FormatError);
    EXPECT_THROW(level_scheme_from_json(nlohmann::json{{"levels", "oops"}}), FormatError);
}

TEST(UniformLevels, FormulaInstances)
{
    expect_levels(uniform_levels(4, range_of(0.0, 3.0)), {0, 1, 2, 3}, 1e-15);
    expect_levels(uniform_levels(3, range_of(-1.0, 2.0)), {-1, 0, 1}, 1e-15);
    const auto two = uniform_levels(2, range_of(0.3, 1.7));
    expect_levels(two, {0.3, 2.0}, 1e-15);
    EXPECT_EQ(two.hysteresis(), 0.0);
}

TEST(UniformLevels, DegenerateRange)
{
    EXPECT_THROW(uniform_levels(4, range_of(1.0, 0.0)), DegenerateRangeError);
    EXPECT_THROW(uniform_levels(1, range_of(0.0, 1.0)), ArgumentError);
}

TEST(LogarithmicLevels, ThreeLevelsCoincideWithUniform)
{
    // raw {-8, 1, 10} normalises to {0, 0.5, 1}
    expect_levels(logarithmic_levels(3, range_of(0.0, 1.0)), {0.0, 0.5, 1.0}, 1e-15);
}

TEST(LogarithmicLevels, FiveLevelsHandValues)
{
    const double r10 = std::sqrt(10.0);
    // raw {-8, 2 - sqrt(10), 1, sqrt(10), 10} over a span of 18
    const std::vector<double> want{0.0, (2.0 - r10 + 8.0), 9.0, (r10 + 8.0), 18.0};
    expect_levels(logarithmic_levels(5, range_of(0.0, 18.0)), want, 1e-12);
    expect_levels(logarithmic_levels(5, range_of(0.0, 18.0)), {0.0, 6.83772, 9.0, 11.16228, 18.0}, 5e-6);
}

TEST(LogarithmicLevels, EvenCountDropsTheMedian)
{
    const double r10 = std::sqrt(10.0);
    const std::vector<double> want{0.0, (10.0 - r10) / 18.0, (r10 + 8.0) / 18.0, 1.0};
    expect_levels(logarithmic_levels(4, range_of(0.0, 1.0)), want, 1e-12);
    expect_levels(logarithmic_levels(4, range_of(0.0, 1.0)), {0.0, 0.37987, 0.62013, 1.0}, 5e-6);
}

TEST(LogarithmicLevels, DegenerateRange)
{
    EXPECT_THROW(logarithmic_levels(8, range_of(2.0, 0.0)), DegenerateRangeError);
}

TEST(StaticLevels, PropertyCountEndpointsAndOrder)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::uniform_real_distribution<double> span(1e-3, 10.0);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t count = 2 + rng() % 31;
        const auto range = range_of(u(rng), span(rng));
        for (const auto& s : {uniform_levels(count, range), logarithmic_levels(count, range)}) {
            ASSERT_EQ(s.size(), count);
            EXPECT_DOUBLE_EQ(s[0], range.x_min);
            EXPECT_NEAR(s[count - 1], range.x_max, 1e-12 * std::max(1.0, std::fabs(range.x_max)));
            for (std::size_t i = 1; i < count; ++i) {
                EXPECT_GT(s[i], s[i - 1]);
            }
            EXPECT_EQ(s.hysteresis(), 0.0);
        }
    }
}

TEST(LogarithmicLevels, PropertySymmetricAboutMidpoint)
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t count = 3 + 2 * (rng() % 12);
        const auto range = range_of(u(rng), std::uniform_real_distribution<double>(0.01, 10.0)(rng));
        const auto s = logarithmic_levels(count, range);
        for (std::size_t i = 0; i < count; ++i) {
            EXPECT_NEAR(s[i] + s[count - 1 - i], range.x_min + range.x_max, 1e-9);
        }
    }
}

TEST(LogarithmicLevels, PropertyGapsShrinkTowardMidpoint)
{
    // 10^(i/h) grows geometrically, so the outermost gaps are the widest
    for (std::size_t count = 5; count <= 31; count += 2) {
        const auto s = logarithmic_levels(count, range_of(0.0, 1.0));
        const std::size_t mid = count / 2;
        for (std::size_t i = 1; i < mid; ++i) {
            EXPECT_GT(s[i] - s[i - 1], s[i + 1] - s[i]) << "count " << count << " gap " << i;
        }
    }
}
