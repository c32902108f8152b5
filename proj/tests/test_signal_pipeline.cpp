#include <gtest/gtest.h>

#include <cmath>

#include "immunesom/rng.hpp"
#include "immunesom/signal_pipeline.hpp"

using namespace immunesom;

namespace {

constexpr double kTol = 1e-9;

// 100 / (1 + 2^7.5) and 100 / (1 + 2^-7.5), 40-digit evaluation.
constexpr double kDs1AtZero = 0.5493921811082984900864166896537411238652;
constexpr double kDs1At1500 = 99.45060781889170150991358331034625887614;

RawSample random_sample(Rng& rng, Timestamp t) {
    RawSample s;
    s.timestamp = t;
    s.icmp_du_per_sec = rng.uniform(0.0, 60.0);
    s.rst_per_sec = rng.uniform(0.0, 400.0);
    s.pkts_sent_per_sec = rng.uniform(0.0, 5000.0);
    s.all_pkts_per_sec = rng.uniform(0.0, 8000.0);
    s.tcp_pkts_per_sec = rng.uniform(0.0, s.all_pkts_per_sec);
    s.pkt_rate_of_change = rng.uniform(0.0, 300.0);
    s.avg_pkt_size_bytes = rng.uniform(0.0, 200.0);
    s.root_login_active = rng.bernoulli(0.3);
    return s;
}

} // namespace

TEST(Pamp1, Golden) {
    EXPECT_NEAR(normalize_pamp1(20.0), 100.0, kTol);
    EXPECT_NEAR(normalize_pamp1(0.0), 0.0, kTol);
    EXPECT_NEAR(normalize_pamp1(7.0), 35.0, kTol);
    EXPECT_NEAR(normalize_pamp1(1e6), 100.0, kTol);
}

TEST(Pamp2, Golden) {
    EXPECT_NEAR(normalize_pamp2(250.0), 100.0, kTol);
    EXPECT_NEAR(normalize_pamp2(0.0), 0.0, kTol);
    EXPECT_NEAR(normalize_pamp2(42.0), 42.0, kTol);
}

TEST(Ds1, Golden) {
    EXPECT_NEAR(normalize_ds1(750.0), 50.0, kTol);
    EXPECT_NEAR(normalize_ds1(0.0), kDs1AtZero, kTol);
    EXPECT_NEAR(normalize_ds1(1500.0), kDs1At1500, kTol);
}

TEST(Ds1, AcceptsRatesAboveFifteenHundred) {
    EXPECT_LE(normalize_ds1(1e9), 100.0);
    EXPECT_GT(normalize_ds1(3000.0), normalize_ds1(1500.0));
}

TEST(Ds2, Golden) {
    EXPECT_NEAR(normalize_ds2(50.0, 100.0), 50.0, kTol);
    EXPECT_NEAR(normalize_ds2(0.0, 100.0), 0.0, kTol);
    EXPECT_NEAR(normalize_ds2(99.0, 100.0), 99.0, kTol);
    EXPECT_EQ(normalize_ds2(0.0, 0.0), 0.0);
}

TEST(Ds2, TcpAboveAllIsDomainError) {
    EXPECT_THROW(normalize_ds2(101.0, 100.0), DomainError);
}

TEST(Ss1, Golden) {
    EXPECT_NEAR(normalize_ss1(10.0), 100.0, kTol);
    EXPECT_NEAR(normalize_ss1(100.0), 0.0, kTol);
    EXPECT_NEAR(normalize_ss1(55.0), 50.0, kTol);
    EXPECT_NEAR(normalize_ss1(0.0), 100.0, kTol);
    EXPECT_NEAR(normalize_ss1(250.0), 0.0, kTol);
}

TEST(Normalizers, NegativeInputIsDomainError) {
    EXPECT_THROW(normalize_pamp1(-1.0), DomainError);
    EXPECT_THROW(normalize_pamp2(-0.5), DomainError);
    EXPECT_THROW(normalize_ds1(-1.0), DomainError);
    EXPECT_THROW(normalize_ds2(-1.0, 10.0), DomainError);
    EXPECT_THROW(normalize_ss1(-1.0), DomainError);
    Ss2State st;
    EXPECT_THROW(normalize_ss2(st, -1.0), DomainError);
    EXPECT_TRUE(st.empty());
}

TEST(Ss2, BandsOnWindowMean) {
    EXPECT_EQ(ss2_band(42.0), 0.0);
    EXPECT_EQ(ss2_band(80.0), 100.0);
    EXPECT_EQ(ss2_band(55.0), 50.0);
    EXPECT_EQ(ss2_band(45.0), 0.0);
    EXPECT_EQ(ss2_band(45.5), 10.0);
    EXPECT_EQ(ss2_band(50.0), 10.0);
    EXPECT_EQ(ss2_band(60.0), 50.0);
    EXPECT_EQ(ss2_band(60.01), 100.0);
    EXPECT_EQ(ss2_band(12.0), 0.0);
}

TEST(Ss2, WindowHoldsSixtySeconds) {
    Ss2State st;
    for (int i = 0; i < 60; ++i) {
        EXPECT_EQ(normalize_ss2(st, 80.0), 100.0);
    }
    EXPECT_EQ(st.size(), 60u);
    // 59 x 80 + 1 x 40 -> mean 79.33
    EXPECT_EQ(normalize_ss2(st, 40.0), 100.0);
    EXPECT_EQ(st.size(), 60u);
    for (int i = 0; i < 59; ++i) {
        normalize_ss2(st, 40.0);
    }
    EXPECT_NEAR(st.mean(), 40.0, kTol);
    EXPECT_EQ(normalize_ss2(st, 40.0), 0.0);
}

TEST(Ss2, PartialWindowUsesPopulatedEntries) {
    Ss2State st;
    normalize_ss2(st, 40.0);
    EXPECT_EQ(normalize_ss2(st, 70.0), 50.0);  // mean 55
    EXPECT_NEAR(st.mean(), 55.0, kTol);
}

TEST(Inflammation, Mapping) {
    EXPECT_EQ(inflammation_signal(true), 1);
    EXPECT_EQ(inflammation_signal(false), 0);
    const bool seq[] = {true, true, false};
    const int want[] = {1, 1, 0};
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(inflammation_signal(seq[i]), want[i]);
    }
}

TEST(BuildFrame, AllZeroSample) {
    Ss2State st;
    const auto f = build_frame(RawSample{}, st);
    EXPECT_NEAR(f.pamp1, 0.0, kTol);
    EXPECT_NEAR(f.pamp2, 0.0, kTol);
    EXPECT_NEAR(f.ds1, kDs1AtZero, kTol);
    EXPECT_NEAR(f.ds2, 0.0, kTol);
    EXPECT_NEAR(f.ss1, 100.0, kTol);
    EXPECT_NEAR(f.ss2, 0.0, kTol);
    EXPECT_FALSE(f.inflammation);
}

TEST(BuildFrame, ScanBurstSample) {
    RawSample s;
    s.icmp_du_per_sec = 20;
    s.rst_per_sec = 150;
    s.pkts_sent_per_sec = 1500;
    s.tcp_pkts_per_sec = 1500;
    s.all_pkts_per_sec = 1500;
    s.pkt_rate_of_change = 200;
    s.avg_pkt_size_bytes = 40;
    s.root_login_active = true;
    Ss2State st;
    const auto f = build_frame(s, st);
    EXPECT_NEAR(f.pamp1, 100.0, kTol);
    EXPECT_NEAR(f.pamp2, 100.0, kTol);
    EXPECT_NEAR(f.ds1, kDs1At1500, kTol);
    EXPECT_NEAR(f.ds2, 100.0, kTol);
    EXPECT_NEAR(f.ss1, 0.0, kTol);
    EXPECT_NEAR(f.ss2, 0.0, kTol);
    EXPECT_TRUE(f.inflammation);
    const auto v = f.as_vector();
    EXPECT_EQ(v[6], 1.0);
}

TEST(BuildFrame, InvalidSampleRejected) {
    RawSample s;
    s.tcp_pkts_per_sec = 5;
    s.all_pkts_per_sec = 4;
    Ss2State st;
    EXPECT_THROW(build_frame(s, st), DomainError);
}

TEST(SignalPipeline, RejectsNonIncreasingTimestamps) {
    SignalPipeline p;
    RawSample s;
    s.timestamp = 5;
    p.push(s);
    EXPECT_THROW(p.push(s), SequencingError);
    s.timestamp = 4;
    EXPECT_THROW(p.push(s), SequencingError);
    s.timestamp = 6;
    EXPECT_NO_THROW(p.push(s));
}

TEST(SignalProperties, OutputsStayInRange) {
    Rng rng(11);
    Ss2State st;
    for (int i = 0; i < 20000; ++i) {
        const auto f = build_frame(random_sample(rng, i), st);
        for (double v : {f.pamp1, f.pamp2, f.ds1, f.ds2, f.ss1, f.ss2}) {
            ASSERT_GE(v, 0.0);
            ASSERT_LE(v, 100.0);
        }
        ASSERT_TRUE(f.ss2 == 0.0 || f.ss2 == 10.0 || f.ss2 == 50.0 || f.ss2 == 100.0);
    }
}

TEST(SignalProperties, Ds1StrictlyIncreasingSs1NonIncreasing) {
    Rng rng(12);
    for (int i = 0; i < 20000; ++i) {
        const double a = rng.uniform(0.0, 1500.0);
        const double b = rng.uniform(0.0, 1500.0);
        if (a < b) {
            ASSERT_LT(normalize_ds1(a), normalize_ds1(b));
        }
        const double c = rng.uniform(0.0, 400.0);
        const double d = rng.uniform(0.0, 400.0);
        if (c <= d) {
            ASSERT_GE(normalize_ss1(c), normalize_ss1(d));
        }
    }
}

TEST(SignalProperties, ReplayIsBitIdentical) {
    Rng rng(13);
    std::vector<RawSample> samples;
    for (int i = 0; i < 500; ++i) {
        samples.push_back(random_sample(rng, i));
    }
    const auto a = normalize_session(samples);
    const auto b = normalize_session(samples);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].as_vector(), b[i].as_vector());
    }
}
