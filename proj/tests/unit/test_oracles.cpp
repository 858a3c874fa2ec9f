#include <cmath>

#include <gtest/gtest.h>

#include "dfir/attention.hpp"
#include "dfir/firc3.hpp"
#include "dfir/oracles.hpp"
#include "dfir/suite.hpp"

using namespace dfir;
using verify::CaseStatus;

TEST(DenseReference, SingleTokenReturnsValue) {
  const Tensor v = random_tensor({1, 4}, 1);
  EXPECT_EQ(oracle::dense_attention_reference(random_tensor({1, 4}, 2), random_tensor({1, 4}, 3), v), v);
}

TEST(DenseReference, UniformLogitsAverageValues) {
  const Tensor q({3, 2});
  const Tensor v = random_tensor({3, 2}, 4);
  const Tensor out = oracle::dense_attention_reference(q, random_tensor({3, 2}, 5), v);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(out[i * 2 + j], (v[j] + v[2 + j] + v[4 + j]) / 3.0, 1e-15);
}

TEST(DenseReference, MatchesTopKAtFullK) {
  Rng rng(6);
  const Tensor q = random_tensor({3, 4}, rng), k = random_tensor({3, 4}, rng), v = random_tensor({3, 4}, rng);
  EXPECT_LE(max_rel_err(oracle::dense_attention_reference(q, k, v), topk_attention(q, k, v, 3)), 1e-6);
}

TEST(CircularReference, DeltaAndAllOnes) {
  const Tensor x = random_tensor({1, 2, 5, 5}, 7);
  EXPECT_EQ(oracle::circular_conv2d_reference(x, delta_taps(2, 3)), x);
  const Tensor c = Tensor::full({1, 1, 4, 4}, 1.5);
  const Tensor y = oracle::circular_conv2d_reference(c, Tensor::full({1, 3, 3}, 1.0));
  for (double v : y.data()) EXPECT_EQ(v, 13.5);
}

TEST(NaiveDft, AgreesWithFft) {
  const Tensor x = random_tensor({1, 1, 6, 5}, 8);
  EXPECT_LE(max_rel_err(oracle::naive_dft2(x), fft2(x)), 1e-12);
}

TEST(ClosedFormReference, DeltaKernelAndLargeEps) {
  Rng rng(9);
  const Tensor x = random_tensor({1, 2, 8, 8}, rng);
  EXPECT_LE(max_abs_diff(oracle::firc_closed_form_reference(x, periodize_kernel(delta_taps(2, 3), 8, 8), {0.3, 1e-5}), x),
            1e-12);
  const PeriodizedKernel k = periodize_kernel(random_tensor({2, 3, 3}, rng), 8, 8);
  // Relative to the signal scale; pointwise ratios are meaningless near zero crossings.
  double scale = 0.0;
  for (double v : x.data()) scale = std::max(scale, std::abs(v));
  EXPECT_LE(max_abs_diff(oracle::firc_closed_form_reference(x, k, {1e6, 1e6}), x), 1e-4 * scale);
}

TEST(RunSuite, EmptyGridHasNoCases) {
  verify::RunOptions options;
  options.grid = verify::Grid{};
  const verify::OracleReport r = verify::run_suite("core", options);
  EXPECT_TRUE(r.cases.empty());
  EXPECT_TRUE(r.ok());
}

namespace {

verify::Suite constant_suite(double error) {
  verify::Property p;
  p.name = "constant";
  p.grid = {verify::GridPoint{}};
  p.tolerance_f64 = p.tolerance_f32 = 1e-6;
  p.measure = [error](verify::CaseContext&) { return error; };
  return {"synthetic", {p}};
}

}  // namespace

TEST(RunSuite, OnePassingCase) {
  const verify::OracleReport r = verify::run_suite(constant_suite(1e-9), {});
  ASSERT_EQ(r.cases.size(), 1u);
  EXPECT_EQ(r.passed, 1u);
  EXPECT_EQ(r.failed, 0u);
  EXPECT_EQ(r.errored, 0u);
}

TEST(RunSuite, ZeroToleranceForcesFailure) {
  verify::RunOptions options;
  options.tolerance = 0.0;
  const verify::OracleReport r = verify::run_suite(constant_suite(1e-9), options);
  EXPECT_EQ(r.failed, 1u);
  EXPECT_EQ(r.cases[0].status, CaseStatus::fail);
  EXPECT_EQ(r.cases[0].max_rel_err, 1e-9);
  EXPECT_FALSE(r.ok());
}

TEST(RunSuite, ThrowingPropertyIsAnError) {
  verify::Suite s = constant_suite(0.0);
  s.properties[0].measure = [](verify::CaseContext&) -> double { throw Error("boom"); };
  const verify::OracleReport r = verify::run_suite(s, {});
  EXPECT_EQ(r.errored, 1u);
  EXPECT_TRUE(std::isnan(r.cases[0].max_rel_err));
  EXPECT_NE(r.cases[0].message.find("boom"), std::string::npos);
}

TEST(RunSuite, NanMeasureIsNotAPass) {
  const verify::OracleReport r = verify::run_suite(constant_suite(NAN), {});
  EXPECT_FALSE(r.ok());
}

TEST(RunSuite, UnknownSuiteThrows) { EXPECT_THROW(verify::run_suite("nope", {}), Error); }

TEST(RunSuite, ThreadCountDoesNotChangeResults) {
  verify::RunOptions one, many;
  one.seeds = many.seeds = {0, 1};
  many.threads = 4;
  const verify::OracleReport a = verify::run_suite("core", one);
  const verify::OracleReport b = verify::run_suite("core", many);
  ASSERT_EQ(a.cases.size(), b.cases.size());
  for (std::size_t i = 0; i < a.cases.size(); ++i) {
    EXPECT_EQ(a.cases[i].name, b.cases[i].name);
    EXPECT_EQ(a.cases[i].max_rel_err, b.cases[i].max_rel_err) << a.cases[i].name;
  }
}

class DefaultSuite : public ::testing::TestWithParam<std::string> {};

TEST_P(DefaultSuite, PassesOnFirstSeeds) {
  verify::RunOptions options;
  options.seeds = {0, 1};
  const verify::OracleReport r = verify::run_suite(GetParam(), options);
  for (const auto& c : r.cases) {
    EXPECT_EQ(c.status, CaseStatus::pass) << c.name << " err " << c.max_rel_err << " " << c.message;
  }
  EXPECT_GT(r.cases.size(), 0u);
}

TEST_P(DefaultSuite, PassesInSinglePrecision) {
  verify::RunOptions options;
  options.dtype = DType::f32;
  const verify::OracleReport r = verify::run_suite(GetParam(), options);
  for (const auto& c : r.cases) {
    EXPECT_EQ(c.status, CaseStatus::pass) << c.name << " err " << c.max_rel_err << " " << c.message;
  }
}

INSTANTIATE_TEST_SUITE_P(All, DefaultSuite, ::testing::ValuesIn(verify::suite_names()));
