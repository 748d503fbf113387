#include <gtest/gtest.h>

#include <filesystem>
#include <limits>

#include "cpindoor/report.hpp"
#include "support.hpp"

using namespace cpindoor;

namespace {

Table sample_table() {
  Table t{{"alpha", "n", "label", "qhat"}, {}};
  t.add_row({0.1, std::int64_t{500}, std::string("a"), 1.23456789});
  t.add_row({0.2, std::int64_t{-3}, std::string("b\"q"), std::numeric_limits<double>::infinity()});
  return t;
}

}  // namespace

TEST(Report, CsvLayout) {
  Table one{{"x", "y"}, {}};
  one.add_row({1.0, std::int64_t{2}});
  EXPECT_EQ(render_csv(one), "x,y\n1.000000,2\n");
  EXPECT_EQ(render_csv(sample_table()), "alpha,n,label,qhat\n0.100000,500,a,1.234568\n0.200000,-3,b\"q,inf\n");
  EXPECT_THROW(one.add_row({1.0}), ContractError);
}

TEST(Report, JsonLayout) {
  EXPECT_EQ(render_json(sample_table()),
            "[\n"
            "  {\"alpha\": 0.100000, \"n\": 500, \"label\": \"a\", \"qhat\": 1.234568},\n"
            "  {\"alpha\": 0.200000, \"n\": -3, \"label\": \"b\\\"q\", \"qhat\": \"inf\"}\n"
            "]\n");
}

TEST(Report, EmitIsDeterministicAndParsesBack) {
  const auto dir = testing_support::scratch_dir("report");
  Table t{{"a", "b"}, {}};
  for (int i = 0; i < 20; ++i) t.add_row({i / 7.0, std::int64_t{i}});
  emit_report(t, ReportFormat::csv, dir / "one.csv");
  emit_report(t, ReportFormat::csv, dir / "two.csv");
  const std::string one = testing_support::slurp(dir / "one.csv");
  EXPECT_EQ(one, testing_support::slurp(dir / "two.csv"));
  EXPECT_FALSE(std::filesystem::exists(dir / "one.csv.tmp"));
  const auto rows = testing_support::naive_csv(one);
  ASSERT_EQ(rows.size(), 21u);
  for (int i = 0; i < 20; ++i) {
    EXPECT_NEAR(std::stod(rows[i + 1][0]), i / 7.0, 5e-7);
    EXPECT_EQ(std::stoi(rows[i + 1][1]), i);
  }
  EXPECT_THROW(emit_report(Table{{"a"}, {}}, ReportFormat::csv, dir / "empty.csv"), ContractError);
  EXPECT_THROW(emit_report(t, ReportFormat::csv, dir / "missing" / "x.csv"), IoError);
  EXPECT_THROW(parse_report_format("xml"), ConfigError);
}

TEST(Report, AtomicWriteReplacesWholeFile) {
  const auto dir = testing_support::scratch_dir("atomic");
  write_file_atomic(dir / "f.txt", "a much longer first version\n");
  write_file_atomic(dir / "f.txt", "short\n");
  EXPECT_EQ(read_file(dir / "f.txt"), "short\n");
  EXPECT_THROW(read_file(dir / "nope.txt"), IoError);
}
