#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "../support.hpp"
#include "cli.hpp"
#include "histotile/eval.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "histotile");
  std::ostringstream out, err;
  const int code = histotile::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_files(const fs::path& dir, const std::string& prefix, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    n += name.rfind(prefix, 0) == 0 && e.path().extension() == ext ? 1 : 0;
  }
  return n;
}

const std::vector<std::string> kGrid = {"--grid-c", "1,2^4", "--grid-gamma", "2^-6,2^-3"};

std::vector<std::string> with_grid(std::vector<std::string> args) {
  args.insert(args.end(), kGrid.begin(), kGrid.end());
  return args;
}

// One small corpus with every magnification plus a crc corpus, shared by the run tests.
struct Fixture {
  testsupport::TempDir dir{"cli-fixture"};
  Fixture() {
    REQUIRE(cli({"synth", "--out", (dir / "bh").string(), "--patients-per-class", "4", "--images-per-patient", "1",
                 "--width", "300", "--height", "150", "--seed", "2"})
                .code == 0);
    REQUIRE(cli({"synth", "--out", (dir / "crc").string(), "--kind", "crc", "--images-per-structure", "12", "--side",
                 "48", "--seed", "2"})
                .code == 0);
  }
};

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"scan"}).code == 2);
  CHECK(cli({"train-filter", "--crc", "x", "--filter", "9"}).code == 2);
  CHECK(cli({"run", "--corpus", "x", "--filters", "0,8"}).code == 2);
}

TEST_CASE("scan") {
  testsupport::TempDir dir("cli-scan");
  fs::create_directories(dir / "empty");
  const Result empty = cli({"scan", (dir / "empty").string(), "--kind", "crc"});
  CHECK(empty.code == 2);
  CHECK(empty.err.find("error") != std::string::npos);

  REQUIRE(cli({"synth", "--out", (dir / "crc").string(), "--kind", "crc", "--images-per-structure", "3", "--side", "32"})
              .code == 0);
  const Result crc = cli({"scan", (dir / "crc").string(), "--kind", "crc"});
  CHECK(crc.code == 0);
  for (const char* s : {"tumor 3", "stroma 3", "complex 3", "lympho 3", "debris 3", "mucosa 3", "adipose 3", "empty 3"}) {
    CHECK(crc.out.find(s) != std::string::npos);
  }

  REQUIRE(cli({"synth", "--out", (dir / "bh").string(), "--patients-per-class", "2", "--images-per-patient", "2",
               "--width", "150", "--height", "150", "--mags", "40,400"})
              .code == 0);
  const Result bh = cli({"scan", (dir / "bh").string()});
  CHECK(bh.code == 0);
  CHECK(bh.out.find("images 16\n") != std::string::npos);
  CHECK(bh.out.find("40X 8\n") != std::string::npos);
  CHECK(bh.out.find("400X 8\n") != std::string::npos);
  CHECK(bh.out.find("patients 4\n") != std::string::npos);
}

TEST_CASE("synth is reproducible and honours size flags") {
  testsupport::TempDir dir("cli-synth");
  const std::vector<std::string> flags = {"--patients-per-class", "2", "--images-per-patient", "3", "--width", "200",
                                          "--height", "160", "--mags", "100", "--seed", "8"};
  auto a = flags, b = flags;
  a.insert(a.begin(), {"synth", "--out", (dir / "a").string()});
  b.insert(b.begin(), {"synth", "--out", (dir / "b").string()});
  const Result ra = cli(a);
  REQUIRE(ra.code == 0);
  CHECK(ra.out.find("images 12\n") != std::string::npos);
  CHECK(ra.out.find("patients 4\n") != std::string::npos);
  REQUIRE(cli(b).code == 0);
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    CHECK(slurp(e.path()) == slurp(dir / "b" / fs::relative(e.path(), dir / "a")));
  }
}

TEST_CASE("train-filter writes a reproducible model") {
  Fixture fx;
  const auto args = [&](const std::string& out) {
    return with_grid({"train-filter", "--crc", (fx.dir / "crc").string(), "--filter", "7", "--features", "pftas",
                      "--seed", "1", "--filter-scale", "0.016", "--out", out});
  };
  const Result r = cli(args((fx.dir / "f7.json").string()));
  CHECK(r.code == 0);
  CHECK(r.out.find("validation_accuracy") != std::string::npos);
  REQUIRE(cli(args((fx.dir / "again.json").string())).code == 0);
  CHECK(slurp(fx.dir / "f7.json") == slurp(fx.dir / "again.json"));

  const Result too_many = cli(with_grid({"train-filter", "--crc", (fx.dir / "crc").string(), "--filter", "4"}));
  CHECK(too_many.code == 2);
  CHECK(too_many.err.find("insufficient") != std::string::npos);
}

TEST_CASE("run, report, and the full experiment matrix") {
  Fixture fx;
  const std::string bh = (fx.dir / "bh").string(), crc = (fx.dir / "crc").string();

  const Result two = cli(with_grid({"run", "--corpus", bh, "--kind", "synthetic", "--filters", "0,7", "--mags",
                                    "40,100,200,400", "--crc", crc, "--filter-scale", "0.016", "--out",
                                    (fx.dir / "two").string(), "--seed", "1"}));
  REQUIRE(two.code == 0);
  CHECK(count_files(fx.dir / "two", "run_f", ".json") == 8);
  CHECK(count_files(fx.dir / "two", "run_f", ".csv") == 8);
  CHECK(fs::exists(fx.dir / "two" / "retention.csv"));
  CHECK(fs::exists(fx.dir / "two" / "folds.csv"));
  CHECK(fs::exists(fx.dir / "two" / "filter_7.json"));

  // Same flags, fresh directory: byte-identical reports.
  REQUIRE(cli(with_grid({"run", "--corpus", bh, "--kind", "synthetic", "--filters", "0,7", "--mags", "40,100,200,400",
                         "--filter-dir", (fx.dir / "two").string(), "--out", (fx.dir / "again").string(), "--seed",
                         "1", "--jobs", "3"}))
              .code == 0);
  for (int f : {0, 7}) {
    for (int m : {40, 100, 200, 400}) {
      const std::string name = "run_f" + std::to_string(f) + "_m" + std::to_string(m) + ".json";
      CHECK(slurp(fx.dir / "two" / name) == slurp(fx.dir / "again" / name));
    }
  }

  const Result rep = cli({"report", "--runs", (fx.dir / "two").string()});
  CHECK(rep.code == 0);
  CHECK(slurp(fx.dir / "two" / "summary.csv").rfind("filter,magnification,features,level,rule,mean,std,flagged\n", 0) == 0);
  CHECK(slurp(fx.dir / "two" / "winloss.csv").rfind("filter,magnification,level,rule,baseline,filtered,delta,outcome\n", 0) == 0);

  // Eight filter settings x four magnifications x five folds.
  const Result all = cli(with_grid({"run", "--corpus", bh, "--kind", "synthetic", "--filters", "0,1,2,3,4,5,6,7",
                                    "--crc", crc, "--filter-scale", "0.016", "--out", (fx.dir / "all").string(),
                                    "--seed", "1", "--jobs", "2"}));
  REQUIRE(all.code == 0);
  std::size_t fold_runs = 0;
  for (const auto& e : fs::directory_iterator(fx.dir / "all")) {
    if (e.path().extension() != ".json" || e.path().filename().string().rfind("run_f", 0) != 0) continue;
    fold_runs += histotile::RunReport::from_json(nlohmann::json::parse(slurp(e.path()))).folds.size();
  }
  CHECK(fold_runs == 160);
}

TEST_CASE("run argument errors") {
  Fixture fx;
  const std::string bh = (fx.dir / "bh").string();
  CHECK(cli({"run", "--corpus", bh, "--features", "deep", "--pca", "100"}).code == 2);
  CHECK(cli({"run", "--corpus", bh, "--pca", "10"}).code == 2);
  CHECK(cli({"run", "--corpus", bh, "--filters", "3"}).code == 2);
  CHECK(cli({"run", "--corpus", bh, "--mags", "40", "--grid-c", "abc"}).code == 2);
  CHECK(cli(with_grid({"run", "--corpus", bh, "--mags", "40", "--out", "/proc/histotile-no-such-dir"})).code == 1);
}

TEST_CASE("config file with flag overrides") {
  Fixture fx;
  {
    std::ofstream cfg(fx.dir / "run.toml");
    cfg << "[run]\ncorpus = \"" << (fx.dir / "bh").string() << "\"\nkind = \"synthetic\"\nmags = [100]\n"
        << "grid-c = [\"1\"]\ngrid-gamma = [\"2^-4\"]\nout = \"" << (fx.dir / "from-config").string() << "\"\n";
  }
  REQUIRE(cli({"--config", (fx.dir / "run.toml").string(), "run"}).code == 0);
  CHECK(fs::exists(fx.dir / "from-config" / "run_f0_m100.json"));
  REQUIRE(cli({"--config", (fx.dir / "run.toml").string(), "run", "--mags", "200"}).code == 0);
  CHECK(fs::exists(fx.dir / "from-config" / "run_f0_m200.json"));
}

TEST_CASE("extract-features, cache variable and import-deep") {
  Fixture fx;
  ::setenv("HISTOTILE_CACHE", (fx.dir / "cache").c_str(), 1);
  const Result ex = cli({"extract-features", "--corpus", (fx.dir / "bh").string(), "--kind", "synthetic", "--out",
                         (fx.dir / "pftas.csv").string()});
  ::unsetenv("HISTOTILE_CACHE");
  REQUIRE(ex.code == 0);
  CHECK(ex.out.find("cols 162") != std::string::npos);
  CHECK(!fs::is_empty(fx.dir / "cache"));

  // A 162-wide file is not a deep-feature file.
  CHECK(cli({"import-deep", (fx.dir / "pftas.csv").string()}).code == 2);
  CHECK(cli({"import-deep", (fx.dir / "missing.csv").string()}).code == 2);

  {
    std::ofstream out(fx.dir / "deep.csv");
    out << "patient_id,image_id,col,row";
    for (int j = 0; j < 2048; ++j) out << ",f" << j;
    out << "\n";
    for (int r = 0; r < 3; ++r) {
      out << "P" << r << ",i,0,0";
      for (int j = 0; j < 2048; ++j) out << "," << (r + j) % 7;
      out << "\n";
    }
  }
  const Result imp = cli({"import-deep", (fx.dir / "deep.csv").string(), "--out", (fx.dir / "deep2.csv").string()});
  CHECK(imp.code == 0);
  CHECK(imp.out.find("rows 3 cols 2048 patients 3") != std::string::npos);
}
