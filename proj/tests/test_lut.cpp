#include <gtest/gtest.h>

#include <faqsim/lut.hpp>
#include <faqsim/lut_oracle.hpp>

#include "test_support.hpp"

using namespace faqsim;

TEST(ReachableSet, SingleStuckAtOneBit2)
{
    const std::vector<int> expected{-12, -11, -10, -9, -4, -3, -2, -1, 4, 5, 6, 7, 12, 13, 14, 15};
    EXPECT_EQ(reachable_set(FaultPattern::single(2, StuckAt::one, 5)), expected);
}

TEST(ReachableSet, SizeIsTwoToTheFreeBits)
{
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const int b = 2 + static_cast<int>(rng.below(9));
        const auto p = fixtures::random_pattern(rng, b);
        const int faulty = std::popcount(p.sa0_mask() | p.sa1_mask());
        EXPECT_EQ(reachable_set(p).size(), std::size_t(1) << (b - faulty));
    }
}

class Lut8 : public ::testing::Test {
protected:
    static void SetUpTestSuite() { lut_ = new LookupTable(build_lut(QuantSpec{8}, 4)); }
    static void TearDownTestSuite() { delete lut_; }
    static const LookupTable& lut() { return *lut_; }

private:
    static inline LookupTable* lut_ = nullptr;
};

TEST_F(Lut8, Dimensions)
{
    EXPECT_EQ(lut().pattern_count(), 6561u);
    EXPECT_EQ(lut().value_count(), 256u);
    EXPECT_EQ(lut_entry_count(8), 6561u * 256u);
}

TEST_F(Lut8, ReferenceExamples)
{
    const auto sa1_bit6 = FaultPattern::single(6, StuckAt::one, 8).index();
    EXPECT_EQ(sa1_bit6, 1458u);
    EXPECT_EQ(lut().nearest_valid(sa1_bit6, 23), -1);
    EXPECT_EQ(lut().nearest_valid(sa1_bit6, 100), 100);
    EXPECT_EQ(lut().nearest_valid(sa1_bit6, 31), -1);
    EXPECT_EQ(lut().nearest_valid(sa1_bit6, 32), 64);
    const auto sa0_bit0 = FaultPattern::single(0, StuckAt::zero, 8).index();
    EXPECT_EQ(lut().nearest_valid(sa0_bit0, 7), 6);  // 6 and 8 tie: smaller wins
    EXPECT_EQ(lut().nearest_valid(sa0_bit0, -7), -8);
    EXPECT_EQ(lut().nearest_valid(sa0_bit0, 127), 126);
}

TEST_F(Lut8, FaultFreeRowIsIdentity)
{
    for (int v = -128; v <= 127; ++v) ASSERT_EQ(lut().nearest_valid(0, v), v);
}

TEST_F(Lut8, MatchesOracleOnSample)
{
    Rng rng(5);
    for (int i = 0; i < 20000; ++i) {
        const auto p = fixtures::random_pattern(rng, 8);
        const int v = fixtures::random_value(rng, 8);
        ASSERT_EQ(lut().nearest_valid(p.index(), v), oracle_nearest(p, v)) << p.index() << ' ' << v;
    }
}

TEST_F(Lut8, InvariantsHoldForEveryEntry)
{
    for (std::uint32_t i = 0; i < lut().pattern_count(); ++i) {
        const auto p = FaultPattern::from_index(i, 8);
        int prev = -129;
        for (int v = -128; v <= 127; ++v) {
            const int e = lut().at_unchecked(i, v);
            ASSERT_EQ(apply_faults(e, p), e) << "entry must be reachable";
            ASSERT_EQ(lut().at_unchecked(i, e), e) << "projection";
            ASSERT_LE(std::abs(e - v), std::abs(apply_faults(v, p) - v)) << "dominates raw injection";
            ASSERT_GE(e, prev) << "monotone in v";
            prev = e;
            if (apply_faults(v, p) == v) {
                ASSERT_EQ(e, v) << "fixed point";
            }
        }
    }
}

TEST_F(Lut8, RejectsOutOfRangeQueries)
{
    EXPECT_THROW(lut().nearest_valid(6561, 0), IndexError);
    EXPECT_THROW(lut().nearest_valid(0, 128), IndexError);
    EXPECT_THROW(lut().nearest_valid(0, -129), IndexError);
}

TEST(BuildLut, MatchesOracleExhaustivelyForSmallWidths)
{
    for (int b : {2, 3, 4, 5, 6}) {
        const auto lut = build_lut(QuantSpec{b});
        for (std::uint32_t i = 0; i < pow3(b); ++i) {
            const auto p = FaultPattern::from_index(i, b);
            for (int v = -(1 << (b - 1)); v < (1 << (b - 1)); ++v)
                ASSERT_EQ(lut.nearest_valid(i, v), oracle_nearest(p, v)) << "b=" << b << " i=" << i << " v=" << v;
        }
    }
}

TEST(BuildLut, ThreadCountDoesNotChangeResult)
{
    const auto a = build_lut(QuantSpec{7}, 1);
    const auto b = build_lut(QuantSpec{7}, 5);
    EXPECT_TRUE(a == b);
    EXPECT_NO_THROW(a.validate());
}

TEST(BuildLut, RefusesWidthsAboveCap)
{
    EXPECT_THROW(build_lut(QuantSpec{13}), CapacityError);
    EXPECT_THROW(build_lut(QuantSpec{16}), CapacityError);
    EXPECT_THROW(build_lut(QuantSpec{1}), RangeError);
}

TEST(LookupTable, ValidateCatchesCorruptTables)
{
    auto good = build_lut(QuantSpec{3});
    std::vector<Code> entries(good.entries().begin(), good.entries().end());
    entries[0] = -3;  // row 0 must be the identity
    EXPECT_THROW(LookupTable(3, entries).validate(), RangeError);
    entries[0] = 9;
    EXPECT_THROW(LookupTable(3, entries).validate(), RangeError);
}
