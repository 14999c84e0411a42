#include <gtest/gtest.h>

#include "tclp/docs_map.hpp"

using namespace tclp;

namespace {

bool mentions(const MapReport& r, const std::string& needle) {
  for (const auto& p : r.problems)
    if (p.find(needle) != std::string::npos) return true;
  return false;
}

const std::vector<std::string> kLibrary{"inline double alpha(int x);\nstruct Beta {};"};
const std::set<std::string> kTests{"A.One", "A.Two", "B.Three"};

}  // namespace

TEST(DocsMap, RepositoryMapIsComplete) {
  const auto r = check_map_completeness(TCLP_SOURCE_DIR);
  EXPECT_TRUE(r.passed()) << [&] {
    std::string s;
    for (const auto& p : r.problems) s += p + "\n";
    return s;
  }();
  EXPECT_GE(r.entries, required_anchors().size());
}

TEST(DocsMap, ParsesEntries) {
  const auto m = parse_map("# comment\n\nfirst | text | alpha | A.One, A.Two\nsecond|x|Beta|B.Three\n");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].anchor, "first");
  EXPECT_EQ(m[0].tests, std::vector<std::string>({"A.One", "A.Two"}));
  EXPECT_EQ(m[0].line, 3u);
  EXPECT_EQ(m[1].op, "Beta");
}

TEST(DocsMap, MalformedLineReportsLine) {
  try {
    parse_map("ok | a | alpha | A.One\nbroken | alpha\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(DocsMap, SmallMapPasses) {
  const auto m = parse_map("first | a | alpha | A.One\nsecond | b | Beta | B.Three\n");
  EXPECT_TRUE(check_map_completeness(m, {"first", "second"}, kTests, kLibrary).passed());
}

TEST(DocsMap, RemovedTestNamesOrphanedAnchor) {
  const auto m = parse_map("first | a | alpha | A.One\nsecond | b | Beta | B.Gone\n");
  const auto r = check_map_completeness(m, {"first", "second"}, kTests, kLibrary);
  EXPECT_FALSE(r.passed());
  EXPECT_TRUE(mentions(r, "anchor 'second'"));
  EXPECT_TRUE(mentions(r, "B.Gone"));
}

TEST(DocsMap, EntryWithoutTestsFails) {
  const auto m = parse_map("first | a | alpha | \n");
  const auto r = check_map_completeness(m, {"first"}, kTests, kLibrary);
  EXPECT_TRUE(mentions(r, "anchor 'first'"));
}

TEST(DocsMap, DuplicateAnchorFails) {
  const auto m = parse_map("first | a | alpha | A.One\nfirst | b | Beta | B.Three\n");
  const auto r = check_map_completeness(m, {"first"}, kTests, kLibrary);
  EXPECT_FALSE(r.passed());
  EXPECT_TRUE(mentions(r, "duplicate"));
}

TEST(DocsMap, MissingAnchorFails) {
  const auto m = parse_map("first | a | alpha | A.One\n");
  const auto r = check_map_completeness(m, {"first", "second"}, kTests, kLibrary);
  EXPECT_TRUE(mentions(r, "anchor 'second' missing"));
}

TEST(DocsMap, UnknownOperationFails) {
  const auto m = parse_map("first | a | alph | A.One\n");
  const auto r = check_map_completeness(m, {"first"}, kTests, kLibrary);
  EXPECT_TRUE(mentions(r, "'alph' not found"));
}

TEST(DocsMap, CollectsTestIds) {
  const auto ids = collect_test_ids({"TEST(Foo, Bar) {}\nTEST_F(Fix, Baz) {}\n  TEST_P( P , Q ) {}\n"});
  EXPECT_EQ(ids, std::set<std::string>({"Foo.Bar", "Fix.Baz", "P.Q"}));
}
