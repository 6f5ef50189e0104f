// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "vivid/binio.hpp"
#include "vivid/error.hpp"
#include "vivid/rng.hpp"
#include "vivid/tensor.hpp"

using namespace vivid;

TEST(Errors, ExitCodesFollowCategory) {
  EXPECT_EQ(exit_code(Errc::usage), 2);
  EXPECT_EQ(exit_code(Errc::numeric), 4);
  for (Errc c : {Errc::shape, Errc::io, Errc::bad_magic, Errc::version_mismatch, Errc::truncated,
                 Errc::shape_inconsistent, Errc::missing_file, Errc::missing_pair, Errc::frozen}) {
    EXPECT_EQ(exit_code(c), 3) << errc_name(c);
  }
}

TEST(Errors, RequireThrowsWithCode) {
  EXPECT_NO_THROW(require(true, Errc::io, "unused"));
  try {
    require(false, Errc::truncated, "short read");
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::truncated);
    EXPECT_NE(std::string(e.what()).find("short read"), std::string::npos);
  }
}

TEST(Rng, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    differs |= x != c.normal();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, MixSeedSeparatesStreams) {
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
  EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
  EXPECT_EQ(mix_seed(5, 9), mix_seed(5, 9));
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(7);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  // 5 sigma bounds.
  EXPECT_NEAR(su / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sn / n, 0.0, 5 / std::sqrt(double(n)));
  EXPECT_NEAR(sn2 / n, 1.0, 5 * std::sqrt(2.0 / n));
}

TEST(Rng, BelowStaysInRangeAndCoversIt) {
  Rng rng(3);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto k = rng.below(7);
    ASSERT_LT(k, 7u);
    hits[k]++;
  }
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Binio, RoundTripScalarsAndStrings) {
  binio::Writer w;
  w.bytes("ABCD");
  w.u32(0xdeadbeef);
  w.i32(-5);
  w.f32(1.5f);
  w.str("hello world");
  binio::Reader r(w.data(), "mem");
  EXPECT_EQ(r.bytes(4), "ABCD");
  EXPECT_EQ(r.u32(), 0xdeadbeefu);
  EXPECT_EQ(r.i32(), -5);
  EXPECT_EQ(r.f32(), 1.5f);
  EXPECT_EQ(r.str(), "hello world");
  EXPECT_EQ(r.remaining(), 0u);
}

TEST(Binio, LittleEndianLayout) {
  binio::Writer w;
  w.u32(0x01020304);
  const std::string& d = w.data();
  ASSERT_EQ(d.size(), 4u);
  EXPECT_EQ(d[0], 0x04);
  EXPECT_EQ(d[3], 0x01);
}

TEST(Binio, ShortReadIsTruncation) {
  binio::Writer w;
  w.u32(7);
  binio::Reader r(w.data().substr(0, 3), "mem");
  try {
    r.u32();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::truncated);
  }
}

TEST(Binio, MissingFileNamesPath) {
  try {
    binio::read_file("/nonexistent/dir/file.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::missing_file);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/file.bin"), std::string::npos);
  }
}

TEST(Binio, WriteCreatesParents) {
  const auto dir = std::filesystem::temp_directory_path() / "vivid_core_test";
  std::filesystem::remove_all(dir);
  binio::write_file(dir / "a" / "b.bin", "xyz");
  EXPECT_EQ(binio::read_file(dir / "a" / "b.bin"), "xyz");
  std::filesystem::remove_all(dir);
}

TEST(Tensor, PositionEncodingValues) {
  const MatD pe = position_encoding<double>(5, 8);
  ASSERT_EQ(pe.rows(), 5);
  ASSERT_EQ(pe.cols(), 8);
  for (int p = 0; p < 5; ++p) {
    for (int i = 0; i < 4; ++i) {
      const double w = 1.0 / std::pow(10000.0, 2.0 * i / 8.0);
      EXPECT_NEAR(pe(p, 2 * i), std::sin(p * w), 1e-12);
      EXPECT_NEAR(pe(p, 2 * i + 1), std::cos(p * w), 1e-12);
    }
  }
}

TEST(Tensor, ShapeMismatchRejected) {
  MatD a(2, 3), b(3, 2);
  EXPECT_THROW(require_same_shape(a, b, "t"), Error);
  EXPECT_NO_THROW(require_same_shape(a, a, "t"));
}
