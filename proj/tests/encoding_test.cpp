// Copyright 2026 The CDI Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "cdi/cdi.hpp"
#include "oracle/canonical_decoder.hpp"
#include "support/fixtures.hpp"
#include "support/random_structs.hpp"

namespace cdi {
namespace {

TEST(EncoderTest, TwoFieldsLayout) {
  Bytes out = Encoder().Field(std::string_view("ab")).Field(std::string_view("c")).Take();
  EXPECT_EQ(HexEncode(out), "00000002616200000001" "63");
}

TEST(EncoderTest, EmptyListIsZeroCount) {
  std::vector<std::string> none;
  EXPECT_EQ(HexEncode(Encoder().StringList(none).Take()), "00000000");
}

TEST(EncoderTest, U64IsEightByteBigEndianField) {
  EXPECT_EQ(HexEncode(Encoder().U64(0x0102030405060708ull).Take()),
            "000000080102030405060708");
}

TEST(EncoderTest, BoundaryShiftsChangeEncoding) {
  // ("ab","c") and ("a","bc") concatenate to the same bytes but must not
  // encode the same.
  EXPECT_NE(Encoder().Field(std::string_view("ab")).Field(std::string_view("c")).Take(),
            Encoder().Field(std::string_view("a")).Field(std::string_view("bc")).Take());
}

TEST(DecoderTest, RejectsTruncationAndTrailingBytes) {
  Bytes good = CanonicalEncode(HashBytes(std::string_view("x")));
  EXPECT_NO_THROW(CanonicalDecode<Digest>(good));
  for (std::size_t n = 0; n < good.size(); ++n) {
    Bytes cut(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(n));
    EXPECT_THROW(CanonicalDecode<Digest>(cut), Error) << n;
  }
  Bytes extra = good;
  extra.push_back(0);
  EXPECT_THROW(CanonicalDecode<Digest>(extra), Error);
}

TEST(DecoderTest, RejectsUnsortedMapKeys) {
  Bytes enc = Encoder()
                  .List(std::vector<std::pair<std::string, std::string>>{{"b", "1"}, {"a", "2"}},
                        [](const auto& kv) {
                          return Encoder().Field(kv.first).Field(kv.second).Take();
                        })
                  .Take();
  Decoder dec(enc);
  EXPECT_THROW(dec.StringMap(), Error);
}

TEST(DecoderTest, HugeCountDoesNotAllocate) {
  Bytes enc = {0xff, 0xff, 0xff, 0xff};
  Decoder dec(enc);
  EXPECT_THROW(dec.StringList(), Error);
}

TEST(CanonicalTest, FixtureStructuresMatchOracleTrees) {
  fixtures::Scenario s = fixtures::DiamondScenario();
  for (const CdiReport& r : s.reports) {
    auto tree = oracle::DecodeTree(oracle::ReportSchema(), CanonicalEncode(r));
    ASSERT_TRUE(tree.has_value());
    EXPECT_EQ(*tree, oracle::Tree(r));
  }
  auto chain = oracle::DecodeTree(oracle::ChainSchema(), CanonicalEncode(s.va.chain));
  ASSERT_TRUE(chain.has_value());
  EXPECT_EQ(*chain, oracle::Tree(s.va.chain));
}

TEST(CanonicalTest, RandomReportsRoundTripAndMatchOracle) {
  std::mt19937_64 rng(2024);
  testing_support::RandomStructs gen(rng);
  for (int i = 0; i < 300; ++i) {
    CdiReport r = gen.Report();
    Bytes enc = CanonicalEncode(r);
    EXPECT_EQ(CanonicalDecode<CdiReport>(enc), r);
    EXPECT_EQ(CanonicalEncode(CanonicalDecode<CdiReport>(enc)), enc);
    auto tree = oracle::DecodeTree(oracle::ReportSchema(), enc);
    ASSERT_TRUE(tree.has_value());
    EXPECT_EQ(*tree, oracle::Tree(r));
  }
}

TEST(CanonicalTest, DistinctMetadataEncodeDistinctly) {
  std::mt19937_64 rng(77);
  testing_support::RandomStructs gen(rng);
  std::map<Bytes, OperationMetadata> seen;
  for (int i = 0; i < 2000; ++i) {
    OperationMetadata m = gen.Metadata();
    Bytes enc = CanonicalEncode(m);
    auto [it, inserted] = seen.emplace(enc, m);
    if (!inserted) {
      EXPECT_EQ(it->second, m) << "two values share one encoding";
    }
  }
}

TEST(CanonicalTest, EncodingIsInjectiveOverSmallStringLists) {
  // Every list of up to three strings drawn from a tiny alphabet.
  const std::vector<std::string> atoms = {"", "a", "b", "ab", "ba", "aa"};
  std::vector<std::vector<std::string>> lists = {{}};
  for (int depth = 0; depth < 3; ++depth) {
    std::vector<std::vector<std::string>> next;
    for (const auto& l : lists) {
      if (l.size() != static_cast<std::size_t>(depth)) continue;
      for (const auto& a : atoms) {
        auto copy = l;
        copy.push_back(a);
        next.push_back(copy);
      }
    }
    lists.insert(lists.end(), next.begin(), next.end());
  }
  std::set<Bytes> encodings;
  for (const auto& l : lists) encodings.insert(Encoder().StringList(l).Take());
  EXPECT_EQ(encodings.size(), lists.size());
}

TEST(CanonicalTest, PropertySetRejectsNonCanonicalOrder) {
  Bytes enc = Encoder()
                  .StringList(std::vector<std::string>{"B_PROP", "A_PROP"})
                  .Take();
  EXPECT_THROW(CanonicalDecode<PropertySet>(enc), Error);
  EXPECT_THROW(PropertySet::Make({"A_PROP", "A_PROP"}), Error);
  EXPECT_THROW(PropertySet::Make({}), Error);
  EXPECT_THROW(PropertySet::Make({"lower"}), Error);
  EXPECT_NO_THROW(PropertySet::Make({"A_PROP", "B_PROP"}));
}

}  // namespace
}  // namespace cdi
