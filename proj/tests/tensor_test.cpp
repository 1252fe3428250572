#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "nlmi/errors.hpp"
#include "nlmi/gradcheck.hpp"
#include "nlmi/ops.hpp"
#include "nlmi/rng.hpp"
#include "nlmi/tensor.hpp"
#include "test_support.hpp"

namespace nlmi {
namespace {

using testing::grads;
using testing::random_tensor;
using testing::values;

TEST(Rng, SplitmixMatchesReferenceValue) { EXPECT_EQ(splitmix64(0), 0xe220a8397b1dcdafULL); }

TEST(Rng, XoshiroStreamIsFrozen) {
  // Reference outputs from an independent implementation of xoshiro256**.
  Rng rng(42);
  EXPECT_EQ(rng.next_u64(), 0x5c8961e1f2055d33ULL);
  EXPECT_EQ(rng.next_u64(), 0xe182e8e848466886ULL);
  EXPECT_EQ(rng.next_u64(), 0x9f7313650e290a18ULL);
  Rng again(42);
  EXPECT_EQ(again.uniform(), 0.36147128835911724);
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(7), b(7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.normal(), b.normal());
}

TEST(Rng, DerivedSeedsAreDistinct) {
  EXPECT_NE(derive_seed(1, "init"), derive_seed(1, "batch"));
  EXPECT_NE(derive_seed(1, "init"), derive_seed(2, "init"));
  EXPECT_NE(derive_seed(1, std::uint64_t{0}), derive_seed(1, std::uint64_t{1}));
  EXPECT_EQ(derive_seed(5, "dataset"), derive_seed(5, "dataset"));
}

TEST(Rng, BelowStaysInRangeAndCoversIt) {
  Rng rng(3);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = rng.below(7);
    ASSERT_LT(v, 7u);
    ++hits[v];
  }
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Rng, PermutationIsAPermutation) {
  Rng rng(11);
  auto p = rng.permutation(50);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);
}

TEST(Tensor, FromChecksElementCount) {
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor::matrix({{1, 2}, {3}}), ShapeError);
}

TEST(Tensor, CloneIsDeep) {
  Tensor a = Tensor::matrix({{1, 2}});
  Tensor b = a.clone();
  b.data()[0] = 5;
  EXPECT_EQ(a.data()[0], 1);
  EXPECT_FALSE(a.same(b));
}

TEST(Tensor, CheckFiniteNamesLocation) {
  Tensor t = Tensor::from({2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
  try {
    t.check_finite("layer 3");
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 3"), std::string::npos);
  }
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(values(ops::matmul(Tensor::identity(2), a)), values(a));
}

TEST(Matmul, IdentityIsBitExactOnRandomInput) {
  Rng rng(1);
  Tensor a = random_tensor({5, 7}, rng);
  EXPECT_EQ(values(ops::matmul(Tensor::identity(5), a)), values(a));
}

TEST(Matmul, RowTimesColumn) {
  Tensor c = ops::matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}}));
  EXPECT_EQ(c.shape(), (Shape{1, 1}));
  EXPECT_EQ(c.item(), 11.0);
}

TEST(Matmul, ShapeErrorReportsBothShapes) {
  try {
    ops::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3] * [2x3]"), std::string::npos) << msg;
  }
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  Rng rng(2);
  Tensor a = random_tensor({3, 4}, rng, true);
  Tensor b = random_tensor({4, 2}, rng, true);
  const ScalarFn f = [&](const Tensor&) { return ops::sum(ops::matmul(a, b)); };
  EXPECT_LT(finite_diff_check(f, a), 1e-6);
  EXPECT_LT(finite_diff_check(f, b), 1e-6);
}

TEST(Elementwise, Relu) {
  EXPECT_EQ(values(ops::relu(Tensor::from({3}, {-1, 0, 2}))), (std::vector<double>{0, 0, 2}));
}

TEST(Elementwise, ReluSubgradientAtZeroIsZero) {
  Tensor x = Tensor::from({3}, {-1, 0, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  tape.backward(ops::sum(ops::relu(x)));
  EXPECT_EQ(grads(x), (std::vector<double>{0, 0, 1}));
}

TEST(Elementwise, SigmoidAtZero) { EXPECT_EQ(ops::sigmoid(Tensor::scalar(0)).item(), 0.5); }

TEST(Elementwise, SigmoidIsStableForLargeInputs) {
  Tensor y = ops::sigmoid(Tensor::from({2}, {-800, 800}));
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 1.0);
}

TEST(Elementwise, ConcatColsWidths) {
  Tensor y = ops::concat_cols(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix({{5}, {6}}));
  EXPECT_EQ(y.shape(), (Shape{2, 3}));
  EXPECT_EQ(values(y), (std::vector<double>{1, 2, 5, 3, 4, 6}));
  EXPECT_THROW(ops::concat_cols(Tensor::zeros({2, 1}), Tensor::zeros({3, 1})), ShapeError);
}

TEST(Elementwise, SumRowsAndScale) {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(values(ops::sum_rows(a)), (std::vector<double>{4, 6}));
  EXPECT_EQ(values(ops::scale(a, 2)), (std::vector<double>{2, 4, 6, 8}));
}

TEST(Broadcast, RowVectorAndScalarOnly) {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(values(ops::add(a, Tensor::from({2}, {10, 20}))), (std::vector<double>{11, 22, 13, 24}));
  EXPECT_EQ(values(ops::add(a, Tensor::from({1, 2}, {10, 20}))), (std::vector<double>{11, 22, 13, 24}));
  EXPECT_EQ(values(ops::mul(a, Tensor::scalar(2))), (std::vector<double>{2, 4, 6, 8}));
  EXPECT_THROW(ops::add(a, Tensor::from({2, 1}, {1, 2})), ShapeError);
  EXPECT_THROW(ops::add(a, Tensor::from({3}, {1, 2, 3})), ShapeError);
}

TEST(Broadcast, GradientOfBroadcastOperandSumsOverRows) {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}}, true);
  Tensor b = Tensor::from({2}, {1, 1}, true);
  Tape tape;
  TapeScope scope(tape);
  tape.backward(ops::sum(ops::add(a, b)));
  EXPECT_EQ(grads(b), (std::vector<double>{3, 3}));
}

TEST(Backward, SumGivesOnes) {
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  Tape tape;
  TapeScope scope(tape);
  tape.backward(ops::sum(x));
  EXPECT_EQ(grads(x), (std::vector<double>{1, 1, 1}));
}

TEST(Backward, SumOfSquares) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  tape.backward(ops::sum(ops::mul(x, x)));
  EXPECT_EQ(grads(x), (std::vector<double>{2, 4}));
}

TEST(Backward, SecondCallAccumulatesIntoLeaves) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  Tensor loss = ops::sum(ops::mul(x, x));
  tape.backward(loss);
  tape.backward(loss);
  EXPECT_EQ(grads(x), (std::vector<double>{4, 8}));
  x.zero_grad();
  tape.backward(loss);
  EXPECT_EQ(grads(x), (std::vector<double>{2, 4}));
}

TEST(Backward, NonScalarLossIsRejected) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  EXPECT_THROW(tape.backward(ops::scale(x, 2)), ShapeError);
}

TEST(Backward, NoGradScopeRecordsNothing) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  {
    NoGradScope off;
    ops::sum(ops::mul(x, x));
  }
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Backward, GradientsAreLinearInTheLoss) {
  Rng rng(5);
  Tensor x = random_tensor({4, 3}, rng, true);
  Tensor w = random_tensor({3, 3}, rng);
  const auto f = [&] { return ops::sum(ops::sigmoid(ops::matmul(x, w))); };
  const auto g = [&] { return ops::sum(ops::square(x)); };
  const auto grad_of = [&](auto loss_fn) {
    x.zero_grad();
    Tape tape;
    TapeScope scope(tape);
    tape.backward(loss_fn());
    return grads(x);
  };
  const auto gf = grad_of(f);
  const auto gg = grad_of(g);
  const auto gfg = grad_of([&] { return ops::add(f(), g()); });
  for (std::size_t i = 0; i < gfg.size(); ++i) EXPECT_NEAR(gfg[i], gf[i] + gg[i], 1e-14);
}

TEST(Backward, TwoLayerMlpMatchesFiniteDifferences) {
  Rng rng(9);
  Tensor x = random_tensor({5, 4}, rng, true);
  Tensor w1 = random_tensor({4, 6}, rng, true);
  Tensor b1 = random_tensor({6}, rng, true);
  Tensor w2 = random_tensor({6, 1}, rng, true);
  const ScalarFn f = [&](const Tensor&) {
    Tensor hidden = ops::relu(ops::add(ops::matmul(x, w1), b1));
    return ops::sum(ops::matmul(hidden, w2));
  };
  for (const Tensor& t : {x, w1, b1, w2}) EXPECT_LT(finite_diff_check(f, t, 1e-5), 1e-5);
}

struct PrimitiveCase {
  const char* name;
  std::function<Tensor(const Tensor&, const Tensor&)> op;
};

class PrimitiveGradient : public ::testing::TestWithParam<PrimitiveCase> {};

TEST_P(PrimitiveGradient, MatchesCentralDifferences) {
  Rng rng(17);
  Tensor a = random_tensor({4, 3}, rng, true);
  // Keep b away from zero so div, sqrt and relu kinks are not straddled.
  Tensor b = random_tensor({4, 3}, rng, true);
  for (double& v : b.data()) v = std::copysign(0.5 + std::abs(v), v);
  for (double& v : a.data()) v = std::copysign(0.2 + std::abs(v), v);
  Tensor r = random_tensor({4, 3}, rng);
  const auto& op = GetParam().op;
  const ScalarFn f = [&](const Tensor&) {
    Tensor y = op(a, b);
    if (y.rank() == 2 && y.rows() == 4 && y.cols() == 3) return ops::sum(ops::mul(y, r));
    return ops::sum(ops::mul(y, y));
  };
  EXPECT_LT(finite_diff_check(f, a), 1e-5) << GetParam().name;
  EXPECT_LT(finite_diff_check(f, b), 1e-5) << GetParam().name;
}

const std::vector<std::size_t> kGatherIndex{2, 0, 2, 3, 1};

INSTANTIATE_TEST_SUITE_P(
    Ops, PrimitiveGradient,
    ::testing::Values(
        PrimitiveCase{"add", [](const Tensor& a, const Tensor& b) { return ops::add(a, b); }},
        PrimitiveCase{"sub", [](const Tensor& a, const Tensor& b) { return ops::sub(a, b); }},
        PrimitiveCase{"mul", [](const Tensor& a, const Tensor& b) { return ops::mul(a, b); }},
        PrimitiveCase{"div", [](const Tensor& a, const Tensor& b) { return ops::div(a, b); }},
        PrimitiveCase{"add_row",
                      [](const Tensor& a, const Tensor& b) { return ops::add(a, ops::sum_rows(b)); }},
        PrimitiveCase{"mul_row",
                      [](const Tensor& a, const Tensor& b) { return ops::mul(a, ops::mean_rows(b)); }},
        PrimitiveCase{"mul_scalar", [](const Tensor& a, const Tensor& b) { return ops::mul(a, ops::mean(b)); }},
        PrimitiveCase{"scale_add_scalar",
                      [](const Tensor& a, const Tensor& b) { return ops::add_scalar(ops::scale(ops::add(a, b), -1.5), 2); }},
        PrimitiveCase{"relu", [](const Tensor& a, const Tensor& b) { return ops::relu(ops::mul(a, b)); }},
        PrimitiveCase{"sigmoid", [](const Tensor& a, const Tensor& b) { return ops::sigmoid(ops::mul(a, b)); }},
        PrimitiveCase{"sqrt_square",
                      [](const Tensor& a, const Tensor& b) { return ops::sqrt(ops::add(ops::square(a), ops::square(b))); }},
        PrimitiveCase{"matmul",
                      [](const Tensor& a, const Tensor& b) {
                        return ops::matmul(a, ops::matmul(Tensor::full({3, 4}, 0.25), b));
                      }},
        PrimitiveCase{"concat_cols", [](const Tensor& a, const Tensor& b) { return ops::concat_cols(a, b); }},
        PrimitiveCase{"gather_rows",
                      [](const Tensor& a, const Tensor& b) {
                        return ops::mul(ops::gather_rows(a, kGatherIndex), ops::gather_rows(b, kGatherIndex));
                      }},
        PrimitiveCase{"segment_sum",
                      [](const Tensor& a, const Tensor& b) {
                        static const std::vector<std::size_t> seg{1, 0, 1, 1}, key{3, 1, 0, 2};
                        return ops::segment_sum(ops::mul(a, b), SegmentIndex::build(3, seg, key));
                      }},
        PrimitiveCase{"scale_rows",
                      [](const Tensor& a, const Tensor& b) {
                        static const std::vector<double> c{0.5, -2.0, 1.0, 3.0};
                        return ops::scale_rows(ops::mul(a, b), c);
                      }}),
    [](const auto& info) { return std::string(info.param.name); });

TEST(SegmentSum, EmptySegmentsAreZeroAndOrderIsCanonical) {
  Tensor a = Tensor::matrix({{1}, {2}, {4}});
  const std::vector<std::size_t> seg{2, 0, 2}, key{5, 0, 1};
  SegmentIndex idx = SegmentIndex::build(3, seg, key);
  EXPECT_EQ(idx.count(1), 0u);
  EXPECT_EQ(idx.order, (std::vector<std::size_t>{1, 2, 0}));
  EXPECT_EQ(values(ops::segment_sum(a, idx)), (std::vector<double>{2, 0, 5}));
}

TEST(FiniteDiff, SumOfSquaresAtThree) {
  Tensor x = Tensor::from({1}, {3});
  EXPECT_LT(finite_diff_check([](const Tensor& t) { return ops::sum(ops::square(t)); }, x), 1e-8);
}

TEST(FiniteDiff, ConstantFunctionHasZeroError) {
  Tensor x = Tensor::from({3}, {1, 2, 3});
  const auto report = finite_diff_report([](const Tensor&) { return Tensor::scalar(4.0); }, x);
  EXPECT_EQ(report.analytic, 0.0);
  EXPECT_LE(report.max_rel_error, 1e-10);
}

TEST(FiniteDiff, RejectsNonScalarAndNan) {
  Tensor x = Tensor::from({2}, {1, 2});
  EXPECT_THROW(finite_diff_check([](const Tensor& t) { return ops::scale(t, 2); }, x), ShapeError);
  EXPECT_THROW(finite_diff_check([](const Tensor& t) { return ops::sum(ops::sqrt(ops::scale(t, -1))); }, x),
               NumericalError);
  EXPECT_THROW(finite_diff_check([](const Tensor& t) { return ops::sum(t); }, x, 0.0), ConfigError);
}

TEST(FiniteDiff, RestoresValuesAndGradient) {
  Tensor x = Tensor::from({2}, {1, 2}, false);
  finite_diff_check([](const Tensor& t) { return ops::sum(ops::square(t)); }, x);
  EXPECT_EQ(values(x), (std::vector<double>{1, 2}));
  EXPECT_FALSE(x.requires_grad());
  EXPECT_FALSE(x.has_grad());
}

TEST(FiniteDiff, DetectsAWrongGradient) {
  // An op whose recorded derivative is deliberately off by a factor of 2.
  Tensor x = Tensor::from({1}, {1.5});
  const ScalarFn f = [](const Tensor& t) {
    Tensor out = Tensor::scalar(t[0] * t[0]);
    if (Tape* tape = Tape::active()) {
      Tensor in = t;
      tape->record("bad_square", {t}, out, [in, out]() mutable { in.mutable_grad()[0] += 4.0 * in[0] * out.grad()[0]; });
    }
    return out;
  };
  EXPECT_GT(finite_diff_check(f, x), 0.1);
}

TEST(Determinism, SameSeedSameOpsBitIdentical) {
  const auto run = [] {
    Rng rng(21);
    Tensor a = random_tensor({6, 5}, rng, true);
    Tensor b = random_tensor({5, 4}, rng, true);
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = ops::sum(ops::sigmoid(ops::matmul(a, b)));
    tape.backward(loss);
    std::vector<double> out = grads(a);
    out.push_back(loss.item());
    return out;
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace nlmi
