#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "efrlfn/media_io.hpp"
#include "efrlfn/synthetic.hpp"

namespace fs = std::filesystem;
using namespace efrlfn;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "efrlfn");
  std::ostringstream out, err;
  const int code = efrlfn::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("efrlfn_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help and usage errors") {
    const auto help = invoke({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("train") != std::string::npos);
    const auto bad = invoke({"train", "--steps", "x"});
    CHECK(bad.code != 0);
    CHECK_FALSE(bad.err.empty());
    CHECK(invoke({"frobnicate"}).code != 0);
    const auto missing = invoke({"infer", "--weights", "/nonexistent.efrw", "--input", "a.ppm", "--out", "b.ppm"});
    CHECK(missing.code == 1);
    CHECK(missing.err.rfind("error: ", 0) == 0);
  }

  TEST_CASE("train, infer, metrics and dump-features") {
    const auto dir = scratch("pipeline");
    const auto run = invoke({"train", "--synthetic", "2", "--synthetic-size", "16", "--channels", "4", "--blocks", "1",
                          "--steps", "3", "--batch", "2", "--patch", "8", "--out", (dir / "run").string(), "--seed", "5"});
    INFO(run.err);
    REQUIRE(run.code == 0);
    CHECK(fs::exists(dir / "run" / "model.efrw"));
    CHECK(fs::exists(dir / "run" / "last.state"));
    std::ifstream log(dir / "run" / "train.jsonl");
    std::string line;
    int lines = 0;
    while (std::getline(log, line)) ++lines;
    CHECK(lines == 3);

    const auto resumed = invoke({"train", "--synthetic", "2", "--synthetic-size", "16", "--channels", "4", "--blocks", "1",
                              "--steps", "5", "--batch", "2", "--patch", "8", "--out", (dir / "run").string(), "--seed",
                              "5", "--resume", (dir / "run" / "last").string()});
    INFO(resumed.err);
    CHECK(resumed.code == 0);
    CHECK(resumed.out.find("\"step\":5") != std::string::npos);

    fs::create_directories(dir / "lr");
    fs::create_directories(dir / "hr");
    const auto corpus = synthetic_corpus<float>(2, 16, 16, 9);
    const auto pairs = make_pairs<float>(corpus, 2, LrMode::synthetic);
    for (const auto& p : pairs) {
      write_image(p.lr, dir / "lr" / (p.id + ".ppm"));
      write_image(p.hr, dir / "hr" / (p.id + ".ppm"));
    }
    const auto weights = (dir / "run" / "model.efrw").string();
    const auto up = invoke({"infer", "--weights", weights, "--input", (dir / "lr").string(), "--out", (dir / "sr").string()});
    INFO(up.err);
    REQUIRE(up.code == 0);
    const auto sr = read_image<float>(dir / "sr" / "synth_000.ppm");
    CHECK(sr.shape() == Shape{1, 3, 16, 16});
    CHECK(invoke({"infer", "--weights", weights, "--input", (dir / "lr").string(), "--out", (dir / "sr4").string(),
               "--scale", "4"}).code == 1);

    const auto m = invoke({"metrics", "--sr", (dir / "sr").string(), "--hr", (dir / "hr").string(), "--out",
                        (dir / "metrics.csv").string()});
    INFO(m.err);
    CHECK(m.code == 0);
    CHECK(m.out.find("mean psnr") != std::string::npos);
    CHECK(fs::exists(dir / "metrics.csv"));

    const auto dump = invoke({"dump-features", "--weights", weights, "--input", (dir / "lr" / "synth_000.ppm").string(),
                           "--out", (dir / "dump").string(), "--blocks", "1"});
    INFO(dump.err);
    CHECK(dump.code == 0);
    CHECK(fs::exists(dir / "dump" / "block_1.ppm"));
    CHECK(invoke({"dump-features", "--weights", weights, "--input", (dir / "lr" / "synth_000.ppm").string(), "--out",
               (dir / "dump").string(), "--blocks", "4"}).code == 1);

    const auto bench = invoke({"bench", "--weights", weights, "--frames", "2", "--runs", "1", "--warmup", "0",
                            "--height", "8", "--width", "8", "--out", (dir / "bench").string()});
    INFO(bench.err);
    CHECK(bench.code == 0);
    CHECK(fs::exists(dir / "bench.csv"));
    CHECK(fs::exists(dir / "bench.json"));
  }

  TEST_CASE("rank") {
    const auto dir = scratch("rank");
    {
      std::ofstream f(dir / "r.csv");
      f << "worker,pair_left,pair_right,choice,verified\n";
      for (int i = 0; i < 6; ++i) f << "w" << i << ",a,b,left,1\n";
      for (int i = 0; i < 2; ++i) f << "v" << i << ",a,b,right,1\n";
      for (int i = 0; i < 3; ++i) f << "u" << i << ",b,c,left,1\nu" << i << ",c,a,right,1\n";
      f << "x,a,c,left,1\n";
      f << "x,c,b,left,0\n";
    }
    const auto r = invoke({"rank", "--responses", (dir / "r.csv").string(), "--out", (dir / "scores.csv").string(), "--boot", "50"});
    INFO(r.err);
    CHECK(r.code == 0);
    std::ifstream scores(dir / "scores.csv");
    std::string header;
    std::getline(scores, header);
    CHECK(header == "item,score,ci_low,ci_high");
  }

  TEST_CASE("dataset actions") {
    const auto dir = scratch("dataset");
    const Tensor<float> a(Shape{1, 3, 4, 4}, 0.5f), b(Shape{1, 3, 4, 4}, 0.9f);
    write_image(a, dir / "f1.ppm");
    write_image(a, dir / "f100.ppm");
    write_image(b, dir / "f150.ppm");
    const auto keep = invoke({"dataset", "filter", "--frames", (dir / "f1.ppm").string(), (dir / "f100.ppm").string(),
                           (dir / "f150.ppm").string()});
    CHECK(keep.code == 0);
    CHECK(keep.out == "keep\n");
    const auto drop = invoke({"dataset", "filter", "--frames", (dir / "f1.ppm").string(), (dir / "f100.ppm").string(),
                           (dir / "f100.ppm").string()});
    CHECK(drop.out == "discard\n");

    {
      std::ofstream f(dir / "features.csv");
      f << "id,si,ti,bitrate,quality,e0,e1\n";
      for (int i = 0; i < 12; ++i) f << "v" << i << "," << i % 3 << "," << i << ",100," << i * 0.1 << "," << i % 2 << ",0.5\n";
    }
    const auto cat = invoke({"dataset", "categorize", "--features", (dir / "features.csv").string(), "--clusters", "3",
                          "--out", (dir / "split.csv").string()});
    INFO(cat.err);
    CHECK(cat.code == 0);
    CHECK(cat.out.find("test 3") != std::string::npos);

    fs::create_directories(dir / "hr");
    write_image(synthetic_image<float>(8, 8, 1), dir / "hr" / "img.ppm");
    const auto deg = invoke({"dataset", "degrade", "--input", (dir / "hr").string(), "--out", (dir / "lr").string(),
                          "--scale", "2"});
    INFO(deg.err);
    CHECK(deg.code == 0);
    CHECK(read_image<float>(dir / "lr" / "img.ppm").shape() == Shape{1, 3, 4, 4});

    {
      std::ofstream f(dir / "s.csv");
      f << "id,split\nimg,val\n";
    }
    const auto sp = invoke({"dataset", "split", "--split", (dir / "s.csv").string(), "--input", (dir / "hr").string(),
                         "--out", (dir / "sorted").string()});
    INFO(sp.err);
    CHECK(sp.code == 0);
    CHECK(fs::exists(dir / "sorted" / "val" / "img.ppm"));
  }
}
