#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>
#include <sstream>

#include "doctest.h"

#include "autogmm/cli.hpp"

using namespace autogmm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("autogmm_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) { return read_text(p); }

}  // namespace

TEST_CASE("flag defaults equal library defaults") {
  const cli::Options o = cli::parse({"fit", "data.csv"});
  const SearchConfig def;
  const SearchConfig& s = o.hgmm.search;
  CHECK(o.subcommand == "fit");
  CHECK(o.input == "data.csv");
  CHECK(s.kmin == def.kmin);
  CHECK(s.kmax == def.kmax);
  CHECK(s.affinities == def.affinities);
  CHECK(s.linkages == def.linkages);
  CHECK(s.constraints == def.constraints);
  CHECK(s.criterion == def.criterion);
  CHECK(s.subset_cap == def.subset_cap);
  CHECK(s.kmeans_reps == def.kmeans_reps);
  CHECK(s.em.max_iter == def.em.max_iter);
  CHECK(s.em.tol == def.em.tol);
  CHECK(s.em.reg_covar == def.em.reg_covar);
  CHECK(s.seed == def.seed);
  CHECK(s.threads == def.threads);
  CHECK_FALSE(o.header);

  const cli::Options h = cli::parse({"hfit", "data.csv"});
  const HgmmConfig hdef;
  CHECK(h.hgmm.max_components == hdef.max_components);
  CHECK(h.hgmm.min_split == hdef.min_split);
  CHECK(h.hgmm.max_depth == hdef.max_depth);
}

TEST_CASE("flags map onto the search config") {
  const cli::Options o = cli::parse({"fit", "d.csv", "--kmin", "1", "--kmax", "5", "--affinities", "l2,none",
                                     "--linkages", "ward", "--constraints", "full,spherical", "--criterion",
                                     "aic", "--subset-cap", "50", "--kmeans-reps", "3", "--max-iter", "20",
                                     "--tol", "1e-5", "--seed", "9", "--threads", "2", "--header",
                                     "--out-dir", "res"});
  const SearchConfig& s = o.hgmm.search;
  CHECK(s.kmin == 1);
  CHECK(s.kmax == 5);
  CHECK(s.affinities == std::vector<Affinity>{Affinity::l2, Affinity::none});
  CHECK(s.linkages == std::vector<Linkage>{Linkage::ward});
  CHECK(s.constraint_set() == std::vector<CovarianceConstraint>{CovarianceConstraint::spherical,
                                                                CovarianceConstraint::full});
  CHECK(s.criterion == Criterion::aic);
  CHECK(s.subset_cap == 50);
  CHECK(s.kmeans_reps == 3);
  CHECK(s.em.max_iter == 20);
  CHECK(s.em.tol == 1e-5);
  CHECK(s.seed == 9);
  CHECK(s.threads == 2);
  CHECK(o.header);
  CHECK(o.out_dir == "res");
  const cli::Options h = cli::parse({"hfit", "d.csv", "--max-components", "3", "--min-split", "12"});
  CHECK(h.hgmm.max_components == 3);
  CHECK(h.hgmm.min_split == 12);
}

TEST_CASE("bad invocations are input errors") {
  CHECK(invoke({}).code == cli::kExitInput);
  CHECK(invoke({"fit"}).code == cli::kExitInput);
  CHECK(invoke({"fit", "d.csv", "--bogus"}).code == cli::kExitInput);
  CHECK(invoke({"fit", "d.csv", "--affinities", "l3"}).code == cli::kExitInput);
  CHECK(invoke({"fit", "d.csv", "--kmin", "5", "--kmax", "2"}).code == cli::kExitInput);
  CHECK(invoke({"hfit", "d.csv", "--max-components", "1"}).code == cli::kExitInput);
  CHECK(invoke({"synth", "--kind", "spiral", "--out", "x.csv"}).code == cli::kExitInput);
  CHECK(invoke({"frobnicate"}).code == cli::kExitInput);
  const Outcome missing = invoke({"fit", "missing.csv"});
  CHECK(missing.code == cli::kExitInput);
  CHECK(missing.err.find("missing.csv") != std::string::npos);
  CHECK(missing.out.empty());
  const Outcome help = invoke({"--help"});
  CHECK(help.code == cli::kExitOk);
  CHECK(help.out.find("fit") != std::string::npos);
}

TEST_CASE("synth then fit recovers the three spherical components") {
  const fs::path dir = scratch("fit");
  const std::string data = (dir / "d.csv").string();
  const Outcome s = invoke({"synth", "--kind", "three_component", "--seed", "7", "--out", data});
  REQUIRE(s.code == 0);
  CHECK(fs::exists(dir / "d.truth.csv"));
  const Outcome f = invoke({"fit", data, "--seed", "7", "--out-dir", (dir / "out").string()});
  REQUIRE(f.code == 0);
  CHECK(f.out.find("k=3 ") != std::string::npos);
  CHECK(f.out.find("constraint=spherical") != std::string::npos);
  CHECK(f.out.find("init=") != std::string::npos);
  CHECK(f.out.find("bic=") != std::string::npos);
  CHECK(f.out.find("reg_covar=") != std::string::npos);
  for (const char* name : {"labels.csv", "model.json", "grid.csv"}) CHECK(fs::exists(dir / "out" / name));
  const Labels labels = read_labels(dir / "out" / "labels.csv");
  CHECK(labels.size() == 100);
  const auto model = nlohmann::json::parse(slurp(dir / "out" / "model.json"));
  CHECK(model["k"] == 3);
  CHECK(model["constraint"] == "spherical");
  fs::remove_all(dir);
}

TEST_CASE("ari of a file with itself") {
  const fs::path dir = scratch("ari");
  write_labels(dir / "a.csv", {0, 0, 1, 2, 2});
  write_labels(dir / "b.csv", {0, 0, 1, 1, 1});
  const Outcome same = invoke({"ari", (dir / "a.csv").string(), (dir / "a.csv").string()});
  CHECK(same.code == 0);
  CHECK(same.out == "1.0\n");
  const Outcome other = invoke({"ari", (dir / "a.csv").string(), (dir / "b.csv").string()});
  CHECK(std::stod(other.out) == doctest::Approx(adjusted_rand_index({0, 0, 1, 2, 2}, {0, 0, 1, 1, 1})));
  write_labels(dir / "c.csv", {0, 1});
  CHECK(invoke({"ari", (dir / "a.csv").string(), (dir / "c.csv").string()}).code == cli::kExitInput);
  fs::remove_all(dir);
}

TEST_CASE("search failure exits with 2") {
  const fs::path dir = scratch("fail");
  DataMatrix tiny(3, 1);
  tiny << 0.0, 1.0, 9.0;
  write_matrix(dir / "t.csv", tiny);
  const Outcome o = invoke({"fit", (dir / "t.csv").string(), "--kmin", "2", "--kmax", "2", "--out-dir",
                            (dir / "o").string()});
  CHECK(o.code == cli::kExitSearch);
  CHECK(o.err.find("failed") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("hfit and bench write their outputs") {
  const fs::path dir = scratch("hfit");
  const std::string data = (dir / "h.csv").string();
  REQUIRE(invoke({"synth", "--kind", "hierarchy", "--seed", "2", "--out", data}).code == 0);
  for (const char* name : {"h.truth.csv", "h.truth2.csv", "h.truth4.csv", "h.truth8.csv"})
    CHECK(fs::exists(dir / name));
  const Outcome h = invoke({"hfit", data, "--seed", "2", "--threads", "1", "--out-dir", (dir / "o").string()});
  REQUIRE(h.code == 0);
  CHECK(h.out.find("leaves=") != std::string::npos);
  CHECK(fs::exists(dir / "o" / "dendrogram.json"));
  CHECK(fs::exists(dir / "o" / "cut_depth_1.csv"));
  CHECK(fs::exists(dir / "o" / "cut_depth_2.csv"));
  CHECK(read_labels(dir / "o" / "cut_depth_1.csv").size() == 800);
  const Outcome a = invoke({"ari", (dir / "h.truth2.csv").string(), (dir / "o" / "cut_depth_1.csv").string()});
  CHECK(a.out == "1.0\n");

  const fs::path three = dir / "t.csv";
  REQUIRE(invoke({"synth", "--seed", "3", "--out", three.string()}).code == 0);
  const Outcome b = invoke({"bench", three.string(), "--truth", (dir / "t.truth.csv").string(), "--reps", "3",
                            "--kmax", "4", "--variants", "all,none", "--exact", "--out-dir",
                            (dir / "b").string()});
  REQUIRE(b.code == 0);
  CHECK(b.out.find("all:median_ari=") != std::string::npos);
  CHECK(b.out.find("none:median_ari=") != std::string::npos);
  for (const char* name : {"bench.csv", "bench_ari.json", "bench_timing.csv", "bench_timing.json"})
    CHECK(fs::exists(dir / "b" / name));
  fs::remove_all(dir);
}

TEST_CASE("bench variants") {
  const auto configs = cli::bench_configs(SearchConfig{}, {"all", "l2-ward", "none"});
  REQUIRE(configs.size() == 3);
  CHECK(configs[0].config.methods().size() == 11);
  REQUIRE(configs[1].config.methods().size() == 1);
  CHECK(configs[1].config.methods()[0].name() == "l2-ward");
  REQUIRE(configs[2].config.methods().size() == 1);
  CHECK(configs[2].config.methods()[0].is_kmeans());
  CHECK_THROWS_AS(cli::bench_configs(SearchConfig{}, {"l1-ward"}), InputError);
  CHECK_THROWS_AS(cli::bench_configs(SearchConfig{}, {"all", "all"}), InputError);
}

TEST_CASE("repeated invocations write identical files") {
  const fs::path dir = scratch("det");
  const std::string data = (dir / "d.csv").string();
  REQUIRE(invoke({"synth", "--kind", "double_cigar", "--seed", "4", "--out", data}).code == 0);
  const std::vector<std::vector<std::string>> runs = {
      {"fit", data, "--seed", "4", "--kmax", "5", "--threads", "1"},
      {"fit", data, "--seed", "4", "--kmax", "5", "--threads", "8"},
      {"fit", data, "--seed", "4", "--kmax", "5", "--threads", "0"}};
  std::vector<std::string> outs;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    auto args = runs[r];
    args.push_back("--out-dir");
    args.push_back((dir / ("o" + std::to_string(r))).string());
    const Outcome o = invoke(args);
    REQUIRE(o.code == 0);
    outs.push_back(o.out);
  }
  for (const char* name : {"labels.csv", "model.json", "grid.csv"}) {
    CHECK(slurp(dir / "o0" / name) == slurp(dir / "o1" / name));
    CHECK(slurp(dir / "o0" / name) == slurp(dir / "o2" / name));
  }
  CHECK(outs[0] == outs[1]);
  fs::remove_all(dir);
}

#ifdef AUTOGMM_CLI_PATH
TEST_CASE("executable exit codes") {
  const fs::path dir = scratch("exe");
  const std::string exe = AUTOGMM_CLI_PATH;
  auto status = [](const std::string& cmd) {
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status(exe + " fit " + (dir / "missing.csv").string() + " 2>/dev/null") == 1);
  CHECK(status(exe + " synth --seed 1 --out " + (dir / "d.csv").string() + " >/dev/null") == 0);
  CHECK(status(exe + " ari " + (dir / "d.truth.csv").string() + " " + (dir / "d.truth.csv").string() +
               " > " + (dir / "ari.txt").string()) == 0);
  CHECK(slurp(dir / "ari.txt") == "1.0\n");
  fs::remove_all(dir);
}
#endif
