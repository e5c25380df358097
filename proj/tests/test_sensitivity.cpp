#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include <lcforge/pipeline.hpp>
#include <lcforge/sensitivity.hpp>
#include <lcforge/synthetic.hpp>

using namespace lcforge;

namespace {

// Response from known model coefficients evaluated at each coded corner.
std::vector<FactorialRun> runs_from(const std::vector<double>& k, double noise = 0.0, std::uint64_t seed = 1)
{
    auto runs = full_factorial_design(default_factors());
    const Eigen::MatrixXd x = design_matrix(runs);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, noise > 0.0 ? noise : 1.0);
    for (std::size_t r = 0; r < runs.size(); ++r) {
        double y = 0.0;
        for (std::size_t t = 0; t < k.size(); ++t) {
            y += k[t] * x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t));
        }
        runs[r].response = y + (noise > 0.0 ? g(rng) : 0.0);
    }
    return runs;
}

std::vector<double> random_coefficients(std::mt19937_64& rng)
{
    std::normal_distribution<double> g(0.0, 2.0);
    std::vector<double> k(kModelTerms);
    for (auto& c : k) {
        c = g(rng);
    }
    return k;
}

} // namespace

TEST(FactorialDesign, CornersAndCoding)
{
    const auto runs = full_factorial_design(default_factors());
    ASSERT_EQ(runs.size(), 32u);
    std::set<std::array<int, kFactorCount>> distinct;
    for (const auto& r : runs) {
        distinct.insert(r.coded);
    }
    EXPECT_EQ(distinct.size(), 32u);
    for (std::size_t i = 0; i < kFactorCount; ++i) {
        int plus = 0;
        for (const auto& r : runs) {
            plus += r.coded[i] == 1;
        }
        EXPECT_EQ(plus, 16);
    }
    const auto f = default_factors();
    EXPECT_DOUBLE_EQ(runs[0].natural[0], 10.0);
    EXPECT_DOUBLE_EQ(runs[31].natural[1], 300.0);
    EXPECT_DOUBLE_EQ(f[3].natural(0.0), 550.0);
    EXPECT_DOUBLE_EQ(f[4].coded(1.0), 1.0);
    EXPECT_DOUBLE_EQ(f[2].coded(1e-3), -1.0);
}

TEST(FactorialDesign, RejectsEmptyFactorInterval)
{
    auto f = default_factors();
    f[2].high = f[2].low;
    EXPECT_THROW(full_factorial_design(f), ArgumentError);
}

TEST(FactorialDesign, DesignMatrixIsOrthogonal)
{
    const auto runs = full_factorial_design(default_factors());
    const Eigen::MatrixXd x = design_matrix(runs);
    ASSERT_EQ(x.cols(), 16);
    const Eigen::MatrixXd gram = x.transpose() * x;
    EXPECT_LT((gram - 32.0 * Eigen::MatrixXd::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FactorialDesign, TermLabels)
{
    const auto t = model_terms(default_factors());
    ASSERT_EQ(t.size(), 16u);
    EXPECT_EQ(t[0], "K0");
    EXPECT_EQ(t[1], "I_p");
    EXPECT_EQ(t[6], "I_p*S_p");
    EXPECT_EQ(t[15], "T_l*lambda");
}

TEST(InteractionModel, RecoversExactCoefficients)
{
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const auto k = random_coefficients(rng);
        const auto fit = fit_interaction_model(runs_from(k));
        for (std::size_t t = 0; t < kModelTerms; ++t) {
            EXPECT_NEAR(fit.coefficients[t], k[t], 1e-10);
        }
        EXPECT_NEAR(fit.residual_sum_of_squares, 0.0, 1e-18 * fit.total_sum_of_squares + 1e-20);
    }
}

TEST(InteractionModel, ConstantResponse)
{
    std::vector<double> k(kModelTerms, 0.0);
    k[0] = 4.0;
    const auto fit = fit_interaction_model(runs_from(k));
    EXPECT_NEAR(fit.coefficients[0], 4.0, 1e-12);
    for (std::size_t t = 1; t < kModelTerms; ++t) {
        EXPECT_NEAR(fit.coefficients[t], 0.0, 1e-12);
        EXPECT_NEAR(fit.sum_of_squares[t], 0.0, 1e-20);
    }
    EXPECT_EQ(fit.pareto.front().term, 0u);
    EXPECT_NEAR(fit.pareto.front().share, 1.0, 1e-12);
}

TEST(InteractionModel, SingleInteractionCarriesItsSumOfSquares)
{
    const double eps = 0.37;
    std::vector<double> k(kModelTerms, 0.0);
    k[6] = eps;  // I_p*S_p
    const auto fit = fit_interaction_model(runs_from(k));
    EXPECT_NEAR(fit.sum_of_squares[6], 32.0 * eps * eps, 1e-12);
    EXPECT_EQ(fit.pareto.front().term, 6u);
}

TEST(InteractionModel, PropertySumOfSquaresDecomposition)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const auto fit = fit_interaction_model(runs_from(random_coefficients(rng), 0.5, rng()));
        double model = 0.0;
        for (double s : fit.sum_of_squares) {
            model += s;
        }
        EXPECT_NEAR(model + fit.residual_sum_of_squares, fit.total_sum_of_squares, 1e-8);
        // residuals are orthogonal to every model column
        const auto runs = full_factorial_design(default_factors());
        const Eigen::MatrixXd x = design_matrix(runs);
        const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(fit.residuals.data(), 32);
        EXPECT_LT((x.transpose() * r).cwiseAbs().maxCoeff(), 1e-9);
        // Pareto order, shares and residual trail
        ASSERT_EQ(fit.pareto.size(), 16u);
        for (std::size_t i = 1; i < fit.pareto.size(); ++i) {
            EXPECT_GE(fit.pareto[i - 1].sum_of_squares, fit.pareto[i].sum_of_squares);
            EXPECT_LE(fit.pareto[i].residual_after, fit.pareto[i - 1].residual_after + 1e-9);
        }
        EXPECT_NEAR(fit.pareto.back().cumulative_share, 1.0, 1e-12);
        EXPECT_NEAR(fit.pareto.back().residual_after, fit.residual_sum_of_squares, 1e-8);
    }
}

TEST(InteractionModel, PropertyRowPermutationInvariant)
{
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        auto runs = runs_from(random_coefficients(rng), 0.3, rng());
        const auto a = fit_interaction_model(runs);
        std::shuffle(runs.begin(), runs.end(), rng);
        const auto b = fit_interaction_model(runs);
        for (std::size_t t = 0; t < kModelTerms; ++t) {
            EXPECT_NEAR(a.coefficients[t], b.coefficients[t], 1e-12);
        }
    }
}

TEST(InteractionModel, IncompleteDesignIsRejected)
{
    auto runs = runs_from(std::vector<double>(kModelTerms, 1.0));
    runs[5].response.reset();
    EXPECT_THROW(fit_interaction_model(runs), ArgumentError);
    runs = runs_from(std::vector<double>(kModelTerms, 1.0));
    runs.pop_back();
    EXPECT_THROW(fit_interaction_model(runs), ArgumentError);
    runs = runs_from(std::vector<double>(kModelTerms, 1.0));
    runs[1] = runs[0];
    EXPECT_THROW(fit_interaction_model(runs), ArgumentError);
}

TEST(InteractionModel, CsvAndJsonOutputs)
{
    std::mt19937_64 rng(6);
    const auto runs = runs_from(random_coefficients(rng), 0.1);
    const auto fit = fit_interaction_model(runs);
    const nlohmann::json j = fit;
    EXPECT_EQ(j.at("pareto").size(), 16u);
    EXPECT_TRUE(j.at("coefficients").contains("S_p*xi"));
    std::ostringstream pareto;
    write_pareto_csv(pareto, fit);
    EXPECT_EQ(pareto.str().rfind("rank,term,sum_of_squares,ss_over_constant,share,cumulative_share,residual_after\n", 0),
              0u);
    std::ostringstream csv;
    write_runs_csv(csv, runs, default_factors());
    const std::string text = csv.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 33);
}

TEST(RunSensitivity, SmallStudyIsDeterministicAcrossJobCounts)
{
    const auto ecg = synthesize_ecg(25.0, 75.0, 128.0, 8);
    std::vector<AnnotatedRecord> records{{"synthetic", preprocess(ecg.signal, FilterSettings{}), ecg.beats}};
    FactorSet factors{{{"I_p", 2, 4}, {"S_p", 1, 3}, {"xi", 1e-3, 5e-2}, {"T_l", 5, 10}, {"lambda", 5e-2, 1.0}}};
    SensitivityConfig cfg;
    cfg.levels = 4;
    cfg.candidate_pool = 32;
    cfg.master_seed = 5;
    cfg.max_test_beats = 6;
    const auto a = run_sensitivity(records, factors, cfg);
    cfg.jobs = 3;
    const auto b = run_sensitivity(records, factors, cfg);
    ASSERT_EQ(a.size(), 32u);
    for (std::size_t c = 0; c < a.size(); ++c) {
        ASSERT_TRUE(a[c].response) << a[c].error;
        EXPECT_EQ(*a[c].response, *b[c].response);
        EXPECT_GE(*a[c].response, 0.0);
    }
    EXPECT_NO_THROW(fit_interaction_model(a, factors));
}

TEST(RunSensitivity, ShortRecordFailsEveryCornerWithoutThrowing)
{
    const auto ecg = synthesize_ecg(4.0, 60.0, 128.0, 8);
    std::vector<AnnotatedRecord> records{{"tiny", ecg.signal, ecg.beats}};
    FactorSet factors{{{"I_p", 2, 3}, {"S_p", 1, 2}, {"xi", 1e-3, 5e-2}, {"T_l", 100, 200}, {"lambda", 5e-2, 1.0}}};
    SensitivityConfig cfg;
    cfg.levels = 4;
    cfg.candidate_pool = 8;
    const auto runs = run_sensitivity(records, factors, cfg);
    for (const auto& r : runs) {
        EXPECT_FALSE(r.response);
        EXPECT_FALSE(r.error.empty());
    }
    EXPECT_THROW(fit_interaction_model(runs, factors), ArgumentError);
    EXPECT_THROW(run_sensitivity({}, factors, cfg), ArgumentError);
}
