#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "mctrack/io.hpp"
#include "mctrack/stochastic_matrix.hpp"

using namespace mctrack;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "mctrack_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Run cli(const std::string& args, const fs::path& dir) {
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string(MCTRACK_CLI) + " " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, io::read_file(err.string())};
}

std::string data(const std::string& name) { return std::string(MCTRACK_DATA_DIR) + "/" + name; }

}  // namespace

TEST(Cli, MissingFileIsIoError) {
  const auto dir = scratch("missing");
  const auto r = cli("--out-dir " + dir.string() + " analyze --map " + (dir / "nope.json").string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope.json"), std::string::npos) << r.err;
}

TEST(Cli, InvalidMapIsValidationError) {
  const auto dir = scratch("invalid");
  io::write_file((dir / "m.json").string(), R"({"vertices": [{"id":0,"x":0,"y":0}], "edges": [[0,3]]})");
  EXPECT_EQ(cli("--out-dir " + dir.string() + " analyze --map " + (dir / "m.json").string(), dir).code, 1);
}

TEST(Cli, UsageErrorExitsOne) {
  const auto dir = scratch("usage");
  EXPECT_EQ(cli("analyze", dir).code, 1);
  EXPECT_EQ(cli("frobnicate", dir).code, 1);
  EXPECT_EQ(cli("--help", dir).code, 0);
}

TEST(Cli, DisconnectedMapWarnsWithoutStationary) {
  const auto dir = scratch("disconnected");
  io::write_file((dir / "m.json").string(), R"({"vertices": [{"id":0,"x":0,"y":0},{"id":1,"x":1,"y":0},
      {"id":2,"x":5,"y":0},{"id":3,"x":6,"y":0}], "edges": [[0,1],[2,3]]})");
  io::write_file((dir / "stationary.csv").string(), "stale\n");
  const auto r = cli("--out-dir " + dir.string() + " analyze --map " + (dir / "m.json").string(), dir);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "stationary.csv"));
  EXPECT_NE(io::read_file((dir / "summary.csv").string()).find("irreducible,false"), std::string::npos);
}

TEST(Cli, TriangleStationaryColumn) {
  const auto dir = scratch("triangle");
  io::write_file((dir / "m.json").string(), R"({"vertices": [{"id":0,"x":0,"y":0},{"id":1,"x":1,"y":0},
      {"id":2,"x":0,"y":1}], "edges": [[0,1],[1,2],[0,2]]})");
  ASSERT_EQ(cli("--out-dir " + dir.string() + " analyze --map " + (dir / "m.json").string(), dir).code, 0);
  const auto ls = io::lines(io::read_file((dir / "stationary.csv").string()));
  ASSERT_EQ(ls.size(), 4u);
  EXPECT_EQ(ls[0], "state,probability");
  for (int i = 1; i <= 3; ++i) EXPECT_NEAR(io::parse_double(io::split(ls[i], ',')[1], "p"), 1.0 / 3.0, 1e-12);
  const auto t = csv::read_matrix(io::read_file((dir / "transition.csv").string()));
  EXPECT_EQ(t(0, 1), 0.5);
  EXPECT_EQ(t(0, 0), 0.0);
}

TEST(Cli, EmptyDistancesGiveHeaderOnly) {
  const auto dir = scratch("empty_table");
  io::write_file((dir / "d.txt").string(), "");
  ASSERT_EQ(cli("--out-dir " + dir.string() + " table --distances " + (dir / "d.txt").string(), dir).code, 0);
  EXPECT_EQ(io::read_file((dir / "comparison.csv").string()), "distance_m,normal_time_s,blind_time_s\n");
}

TEST(Cli, MalformedDistanceIsParseError) {
  const auto dir = scratch("bad_table");
  io::write_file((dir / "d.txt").string(), "1.0\n2,5\n");
  const auto r = cli("--out-dir " + dir.string() + " table --distances " + (dir / "d.txt").string(), dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}

TEST(Cli, ReportRegeneratesTableFigure) {
  const auto dir = scratch("report");
  ASSERT_EQ(cli("--mode paper_rounded --out-dir " + (dir / "a").string() + " table --distances " +
                    data("table_distances.txt"),
                dir)
                .code,
            0);
  ASSERT_EQ(cli("--out-dir " + (dir / "b").string() + " report --table " + (dir / "a" / "comparison.csv").string(),
                dir)
                .code,
            0);
  EXPECT_EQ(io::read_file((dir / "a" / "comparison.svg").string()),
            io::read_file((dir / "b" / "comparison.svg").string()));
  EXPECT_TRUE(fs::exists(dir / "b" / "route_time.svg"));
}

TEST(Cli, TransientNeedsExactlyOneSource) {
  const auto dir = scratch("transient");
  EXPECT_EQ(cli("--out-dir " + dir.string() + " transient --rate 1 --time 1", dir).code, 1);
  io::write_file((dir / "p.csv").string(), "0,1\n1,0\n");
  ASSERT_EQ(cli("--out-dir " + dir.string() + " transient --matrix " + (dir / "p.csv").string() +
                    " --rate 1 --time 0.5",
                dir)
                .code,
            0);
  const auto pt = csv::read_matrix(io::read_file((dir / "transient.csv").string()));
  EXPECT_NEAR(pt(0, 0), 0.5 * (1.0 + std::exp(-1.0)), 1e-9);
}

TEST(Cli, TrackWritesArtifacts) {
  const auto dir = scratch("track");
  const auto r = cli("--out-dir " + dir.string() + " track --map " + data("campus_map.json") + " --obstacles " +
                         data("obstacles.json") + " --profile blind --steps 60 --safer-distance 8 --destination 11",
                     dir);
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"estimated_path.csv", "held_chain.csv", "summary.csv", "alerts.log", "delivery.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  ASSERT_EQ(cli("--out-dir " + (dir / "fig").string() + " report --path " + (dir / "estimated_path.csv").string(),
                dir)
                .code,
            0);
  EXPECT_TRUE(fs::exists(dir / "fig" / "error.svg"));
}
