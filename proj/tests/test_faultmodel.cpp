#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include <faqsim/faultmodel.hpp>
#include <faqsim/lut.hpp>

#include "test_support.hpp"

using namespace faqsim;

TEST(FaultPattern, IndexUsesLsbFirstTernaryDigits)
{
    EXPECT_EQ(FaultPattern::single(6, StuckAt::one, 8).index(), 1458u);  // 2 * 3^6
    EXPECT_EQ(FaultPattern::single(6, StuckAt::zero, 8).index(), 729u);
    EXPECT_EQ(FaultPattern::from_masks(0b01, 0b10, 8).index(), 7u);  // SA0@0, SA1@1: 1 + 2 * 3
    EXPECT_TRUE(FaultPattern::from_masks(0, 0, 8).fault_free());
}

TEST(FaultPattern, IndexRoundTrip)
{
    for (int b = 2; b <= 7; ++b)
        for (std::uint32_t i = 0; i < pow3(b); ++i) {
            const auto p = FaultPattern::from_index(i, b);
            ASSERT_EQ(p.index(), i);
            ASSERT_EQ(p.sa0_mask() & p.sa1_mask(), 0u);
            ASSERT_EQ(FaultPattern::from_digits(p.digits()), p);
            ASSERT_EQ(FaultPattern::from_masks(p.sa0_mask(), p.sa1_mask(), b), p);
        }
}

TEST(FaultPattern, RejectsBadInput)
{
    EXPECT_THROW(FaultPattern::from_index(pow3(4), 4), IndexError);
    EXPECT_THROW(FaultPattern::from_masks(1, 1, 4), RangeError);
    EXPECT_THROW(FaultPattern::from_masks(0x10, 0, 4), RangeError);
}

TEST(ApplyFaults, ReferenceCases)
{
    EXPECT_EQ(apply_faults(23, FaultPattern::single(6, StuckAt::one, 8)), 87);
    EXPECT_EQ(apply_faults(-37, FaultPattern::single(6, StuckAt::zero, 8)), -101);
    EXPECT_EQ(apply_faults(5, FaultPattern::single(7, StuckAt::one, 8)), -123);
    EXPECT_EQ(apply_faults(-1, FaultPattern::single(7, StuckAt::zero, 8)), 127);
}

TEST(ApplyFaults, FaultFreeIsIdentity)
{
    const auto clean = FaultPattern::from_index(0, 8);
    for (int v = -128; v <= 127; ++v) ASSERT_EQ(apply_faults(v, clean), v);
}

TEST(ApplyFaults, IdempotentExhaustive)
{
    for (int b = 2; b <= 6; ++b)
        for (std::uint32_t i = 0; i < pow3(b); ++i) {
            const auto p = FaultPattern::from_index(i, b);
            for (int v = -(1 << (b - 1)); v < (1 << (b - 1)); ++v) {
                const int once = apply_faults(v, p);
                ASSERT_EQ(apply_faults(once, p), once);
            }
        }
}

TEST(ApplyFaults, FixedPointsAreExactlyTheReachableSet)
{
    for (int b = 2; b <= 6; ++b)
        for (std::uint32_t i = 0; i < pow3(b); ++i) {
            const auto p = FaultPattern::from_index(i, b);
            const auto reach = reachable_set(p);
            const std::set<int> r(reach.begin(), reach.end());
            std::set<int> image;
            for (int v = -(1 << (b - 1)); v < (1 << (b - 1)); ++v) {
                image.insert(apply_faults(v, p));
                ASSERT_EQ(apply_faults(v, p) == v, r.count(v) == 1);
            }
            ASSERT_EQ(image, r);
        }
}

TEST(FaultMap, AccessorsAndBounds)
{
    FaultMap m(4, 5, 8);
    m.set_fault(2, 3, 6, StuckAt::one);
    m.set_fault(2, 3, 0, StuckAt::zero);
    EXPECT_TRUE(m.stuck_at_1(2, 3, 6));
    EXPECT_TRUE(m.stuck_at_0(2, 3, 0));
    EXPECT_FALSE(m.stuck_at_0(2, 3, 6));
    EXPECT_EQ(m.pattern_at(2, 3).index(), 1458u + 1u);
    m.set_fault(2, 3, 6, StuckAt::zero);
    EXPECT_FALSE(m.stuck_at_1(2, 3, 6));
    EXPECT_TRUE(m.stuck_at_0(2, 3, 6));

    EXPECT_THROW(m.pattern_at(4, 0), IndexError);
    EXPECT_THROW(m.pattern_at(0, 5), IndexError);
    EXPECT_THROW(m.stuck_at_0(0, 0, 8), IndexError);
    EXPECT_THROW(FaultMap(0, 3, 8), ShapeError);
}

TEST(GenerateFaultMap, RateZeroIsClean)
{
    const auto m = generate_fault_map(256, 256, 8, 0.0, 9);
    const auto s = fault_statistics(m);
    EXPECT_EQ(s.faulty_bits, 0u);
    EXPECT_EQ(s.faulty_cells, 0u);
}

TEST(GenerateFaultMap, RateOneFaultsEveryBitWithBalancedPolarity)
{
    const auto m = generate_fault_map(256, 256, 8, 1.0, 9);
    const auto s = fault_statistics(m);
    EXPECT_EQ(s.faulty_bits, s.bit_cells);
    // Binomial(524288, 0.5): 3 sigma is about 0.0021 in fraction.
    EXPECT_NEAR(s.sa1_fraction(), 0.5, 0.0021);
}

TEST(GenerateFaultMap, RateWithinThreeSigma)
{
    for (double p : {0.01, 0.04, 0.1}) {
        const double sigma = std::sqrt(p * (1 - p) / 524288.0);
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            const auto s = fault_statistics(generate_fault_map(256, 256, 8, p, seed));
            EXPECT_NEAR(s.rate(), p, 3 * sigma) << "p=" << p << " seed=" << seed;
        }
    }
    const auto s = fault_statistics(generate_fault_map(256, 256, 8, 0.1, 5));
    EXPECT_GE(s.rate(), 0.0975);
    EXPECT_LE(s.rate(), 0.1025);
}

TEST(GenerateFaultMap, DeterministicPerSeed)
{
    const auto a = generate_fault_map(64, 48, 8, 0.05, 77);
    const auto b = generate_fault_map(64, 48, 8, 0.05, 77);
    const auto c = generate_fault_map(64, 48, 8, 0.05, 78);
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a == c);
    EXPECT_EQ(a.seed(), 77u);
    EXPECT_EQ(a.fault_rate(), 0.05);
}

TEST(GenerateFaultMap, PolaritiesDisjointAndWithinWidth)
{
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const auto m = fixtures::random_fault_map(rng);
        EXPECT_NO_THROW(m.validate());
    }
}

TEST(GenerateFaultMap, RejectsBadRate)
{
    EXPECT_THROW(generate_fault_map(4, 4, 8, -0.1, 1), RangeError);
    EXPECT_THROW(generate_fault_map(4, 4, 8, 1.5, 1), RangeError);
    EXPECT_THROW(generate_fault_map(4, 4, 8, std::nan(""), 1), RangeError);
}

TEST(FaultStatistics, CountsManualFaults)
{
    FaultMap m(2, 2, 4);
    m.set_fault(0, 0, 0, StuckAt::zero);
    m.set_fault(0, 0, 3, StuckAt::one);
    m.set_fault(1, 1, 2, StuckAt::one);
    const auto s = fault_statistics(m);
    EXPECT_EQ(s.bit_cells, 16u);
    EXPECT_EQ(s.faulty_bits, 3u);
    EXPECT_EQ(s.stuck_at_0, 1u);
    EXPECT_EQ(s.stuck_at_1, 2u);
    EXPECT_EQ(s.faulty_cells, 2u);
    EXPECT_EQ(s.per_bit[3], 1u);
    EXPECT_DOUBLE_EQ(s.rate(), 3.0 / 16.0);
}
