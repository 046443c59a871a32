// Apache License, Version 2.0, refer to LICENSE.txt

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

#include "cam/dataset_io.hpp"
#include "cam/error.hpp"
#include "cam/scenarios.hpp"
#include "cam/summary.hpp"

using namespace cam;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("cam_io_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_text(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

}  // namespace

TEST_CASE("scenario 1 shapes") {
  const Scenario a = gen_scenario1('A', 50, 1);
  REQUIRE(a.data.num_units() == 12);
  for (const auto& u : a.data.units) CHECK(u.size() == 50);
  CHECK(num_clusters(a.truth.dc) == 6);
  CHECK(a.truth.dc[0] == a.truth.dc[1]);
  CHECK(a.truth.dc[1] != a.truth.dc[2]);

  const Scenario b = gen_scenario1('B', 10, 1);
  CHECK(b.data.units[0].size() == 10);
  CHECK(b.data.units[11].size() == 60);
  std::set<int> labels;
  for (const auto& row : b.truth.oc) labels.insert(row.begin(), row.end());
  CHECK(labels.size() == 6);

  CHECK_THROWS_AS(gen_scenario1('C', 10, 1), ValidationError);
  CHECK_THROWS_AS(gen_scenario1('A', 0, 1), ValidationError);
  CHECK(parse_scenario1_weights("harmonic") == Scenario1Weights::harmonic);
  CHECK_THROWS_AS(parse_scenario1_weights("zipf"), ValidationError);
}

TEST_CASE("scenario 1 unit means follow the mixture weights") {
  const std::vector<double> m = {0, 5, 10, 13, 16, 20};
  const Scenario s = gen_scenario1('A', 20000, 4, Scenario1Weights::harmonic);
  for (int h = 1; h <= 6; ++h) {
    double hsum = 0.0;
    for (int g = 1; g <= h; ++g) hsum += 1.0 / g;
    double want = 0.0;
    for (int g = 1; g <= h; ++g) want += m[static_cast<std::size_t>(g - 1)] / g / hsum;
    CAPTURE(h);
    CHECK(std::abs(mean_of(s.data.units[static_cast<std::size_t>(2 * (h - 1))]) - want) < 0.3);
  }
}

TEST_CASE("scenario 2 and 3 shapes") {
  const Scenario s2 = gen_scenario2(3, 2);
  CHECK(s2.data.num_units() == 12);
  for (const auto& u : s2.data.units) CHECK(u.size() == 40);
  CHECK(num_clusters(s2.truth.dc) == 4);
  CHECK_THROWS_AS(gen_scenario2(0, 1), ValidationError);

  const Scenario s3 = gen_scenario3(30, 5);
  CHECK(s3.data.kind == DataKind::count);
  REQUIRE(s3.data.num_units() == 10);
  CHECK(num_clusters(s3.truth.dc) == 3);
  for (std::size_t j = 0; j < 10; ++j) {
    const auto& u = s3.data.units[j];
    REQUIRE(u.size() == 130);
    int zeros = 0;
    int ones = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      CHECK(u[i] == std::floor(u[i]));
      CHECK(s3.truth.oc[j][i] == scenario3_class(static_cast<long>(u[i])));
      zeros += u[i] == 0.0;
      ones += u[i] == 1.0;
    }
    CHECK(zeros >= 50);
    CHECK(ones >= 50);
  }
  CHECK(scenario3_class(0) == 0);
  CHECK(scenario3_class(10) == 1);
  CHECK(scenario3_class(11) == 2);
  CHECK(scenario3_class(51) == 3);
  CHECK_THROWS(scenario3_class(-1));
}

TEST_CASE("generators are reproducible") {
  CHECK(gen_scenario2(2, 7).data.units == gen_scenario2(2, 7).data.units);
  CHECK(gen_scenario2(2, 7).data.units != gen_scenario2(2, 8).data.units);
  CHECK(gen_scenario3(10, 1).data.units == gen_scenario3(10, 1).data.units);
}

TEST_CASE("dataset and truth round trips") {
  TempDir dir;
  Scenario s = gen_scenario3(5, 3);
  s.data.covariate.assign(s.data.num_units(), 0.25);
  write_dataset(dir.path / "data.csv", s.data, s.params);
  const DatasetFile back = read_dataset(dir.path / "data.csv");
  CHECK(back.data.kind == DataKind::count);
  CHECK(back.data.units == s.data.units);
  CHECK(back.data.covariate == s.data.covariate);
  CHECK(header_value(back.header, "scenario") == "3");
  CHECK(header_value(back.header, "missing").empty());

  const Scenario c = gen_scenario2(1, 4);
  write_dataset(dir.path / "c.csv", c.data);
  CHECK(read_dataset(dir.path / "c.csv").data.units == c.data.units);

  write_truth(dir.path / "truth.csv", s.truth, s.params);
  const Truth t = read_truth(dir.path / "truth.csv");
  CHECK(t.dc == s.truth.dc);
  CHECK(t.oc == s.truth.oc);

  CHECK_THROWS_AS(read_dataset(dir.path / "nope.csv"), IoError);
  const auto bad = write_text(dir.path, "bad.csv", "unit,index,value\n1,1,abc\n");
  CHECK_THROWS_AS(read_dataset(bad), ValidationError);
  const auto gap = write_text(dir.path, "gap.csv", "unit,index,dc,oc\n1,1,1,1\n1,3,1,1\n");
  CHECK_THROWS_AS(read_truth(gap), ValidationError);
}

TEST_CASE("abundance tables") {
  TempDir dir;
  SUBCASE("header and name column") {
    const auto p = write_text(dir.path, "t.csv", "taxon,s1,s2,s3\nA,0,3,1\nB,0,0,0\nC,7,2,5\n");
    const Dataset d = load_abundance_table(p);
    CHECK(d.kind == DataKind::count);
    REQUIRE(d.num_units() == 3);
    CHECK(d.units[0] == std::vector<double>{0, 0, 7});
    CHECK(d.units[2] == std::vector<double>{1, 0, 5});
    CHECK(d.unit_names == std::vector<std::string>{"s1", "s2", "s3"});
    CHECK(d.item_names == std::vector<std::string>{"A", "B", "C"});
  }
  SUBCASE("bare tab separated numbers") {
    const auto p = write_text(dir.path, "t.tsv", "1\t2\n3\t4\n");
    const Dataset d = load_abundance_table(p);
    REQUIRE(d.num_units() == 2);
    CHECK(d.units[1] == std::vector<double>{2, 4});
    CHECK(d.unit_names.empty());
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(load_abundance_table(write_text(dir.path, "r.csv", "1,2\n3\n")), ValidationError);
    CHECK_THROWS_AS(load_abundance_table(write_text(dir.path, "n.csv", "1,-2\n3,4\n")), ValidationError);
    CHECK_THROWS_AS(load_abundance_table(write_text(dir.path, "f.csv", "1,2.5\n3,4\n")), ValidationError);
    CHECK_THROWS_AS(load_abundance_table(write_text(dir.path, "e.csv", "")), ValidationError);
    CHECK_THROWS_AS(load_abundance_table(dir.path / "absent.csv"), IoError);
  }
}
