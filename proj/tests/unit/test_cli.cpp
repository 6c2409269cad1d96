#include <gtest/gtest.h>

#include <httplib.h>
#include <signal.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include "helpers.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string output;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(GEOCON_CLI) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::string out;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) out += buf.data();
  const int status = pclose(pipe);
  return {WEXITSTATUS(status), out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, HelpListsStages) {
  const Result r = run("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* s : {"ingest", "graph", "train", "vote", "serve", "synth", "demo"}) {
    EXPECT_NE(r.output.find(s), std::string::npos) << s;
  }
}

TEST(Cli, SynthIsReproducibleAndVoteBeforeTrainFails) {
  const auto dir = geocon::testing::temp_dir("cli");
  const std::string common = " --counties 6 --timesteps 60 --members 2 --runs 2 --epochs 1 --hidden 2";
  ASSERT_EQ(run("synth --out " + (dir / "a").string() + common).code, 0);
  ASSERT_EQ(run("synth --out " + (dir / "b").string() + common).code, 0);
  for (const char* f : {"series.csv", "adjacency.txt", "socio.csv", "truth.json"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  const std::string cfg = " --config " + (dir / "a" / "config.json").string() + " --out " +
                          (dir / "out").string();
  const Result vote = run("vote" + cfg);
  EXPECT_EQ(vote.code, 1);
  EXPECT_NE(vote.output.find("error:"), std::string::npos);
  EXPECT_NE(vote.output.find("geocon ingest"), std::string::npos) << vote.output;
  ASSERT_EQ(run("ingest" + cfg).code, 0);
  ASSERT_EQ(run("graph" + cfg).code, 0);
  const Result v2 = run("vote" + cfg);
  EXPECT_EQ(v2.code, 1);
  EXPECT_NE(v2.output.find("geocon train"), std::string::npos) << v2.output;
  const Result bad = run("train --config " + (dir / "nope.json").string());
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.output.find("nope.json"), std::string::npos);
}

TEST(Cli, DemoThenServe) {
  const auto dir = geocon::testing::temp_dir("cli_demo");
  const Result demo = run("demo --out " + dir.string());
  ASSERT_EQ(demo.code, 0) << demo.output;
  EXPECT_TRUE(fs::exists(dir / "99" / "votes"));

  const int port = 18000 + static_cast<int>(::getpid() % 1000);
  const std::string cmd = std::string(GEOCON_CLI) + " serve --data " + dir.string() +
                          " --host 127.0.0.1 --port " + std::to_string(port) +
                          " > /dev/null 2>&1 & echo $!";
  FILE* pipe = popen(cmd.c_str(), "r");
  ASSERT_NE(pipe, nullptr);
  int pid = 0;
  ASSERT_EQ(std::fscanf(pipe, "%d", &pid), 1);
  pclose(pipe);

  httplib::Client cli("127.0.0.1", port);
  httplib::Result r;
  for (int attempt = 0; attempt < 100 && !r; ++attempt) {
    r = cli.Get("/api/states");
    if (!r) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_NE(r->body.find("\"99\""), std::string::npos);
  for (const char* path : {"/api/states/99/counties", "/api/states/99/network?kind=border",
                           "/api/states/99/network?kind=socio&threshold=2",
                           "/api/states/99/variables/aod",
                           "/api/states/99/votes?factor=aod&kind=socio",
                           "/api/states/99/scatter?x=aod&y=hospitalizations_per100k"}) {
    auto res = cli.Get(path);
    ASSERT_TRUE(res) << path;
    EXPECT_EQ(res->status, 200) << path << ": " << res->body;
  }
  auto missing = cli.Get("/api/states/99/votes?factor=pm25");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  ::kill(pid, SIGTERM);
}
