#include <gtest/gtest.h>

#include "l2h/config.hpp"
#include "l2h/errors.hpp"

namespace l2h {
namespace {

TEST(KeyValue, ParsesCommentsQuotesAndSections) {
  auto c = KeyValueConfig::parse(
      "# header\n[train]\nepochs = 12  # trailing\nname = \"a # b\"\nrate=0.5\nflag = yes\n\nlist = [0.4, 0.3,0.3]\n");
  EXPECT_EQ(c.get_int("epochs", 0), 12);
  EXPECT_EQ(c.get_string("name", ""), "a # b");
  EXPECT_DOUBLE_EQ(c.get_double("rate", 0), 0.5);
  EXPECT_TRUE(c.get_bool("flag", false));
  EXPECT_EQ(c.get_doubles("list"), (std::vector<double>{0.4, 0.3, 0.3}));
  EXPECT_EQ(c.get_int("missing", 7), 7);
  EXPECT_TRUE(c.get_doubles("missing").empty());
}

TEST(KeyValue, TypeErrorsAreConfigErrors) {
  auto c = KeyValueConfig::parse("n = 3.5\nb = maybe\nd = 1e\n");
  EXPECT_THROW(c.get_int("n", 0), ConfigError);
  EXPECT_THROW(c.get_bool("b", false), ConfigError);
  EXPECT_THROW(c.get_double("d", 0), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse("novalue\n"), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse("s = \"open\n"), ConfigError);
  EXPECT_THROW(KeyValueConfig::load("/nonexistent/l2h.toml"), IoError);
}

TEST(KeyValue, CanonicalFormIsOrderIndependent) {
  auto a = KeyValueConfig::parse("b = 2\na = 1\n");
  auto b = KeyValueConfig::parse("a=1   # x\n\n b =  2\n");
  EXPECT_EQ(a.canonical(), b.canonical());
  EXPECT_EQ(a.canonical(), "a=1\nb=2\n");
  b.set("a", "3");
  EXPECT_NE(a.canonical(), b.canonical());
}

}  // namespace
}  // namespace l2h
