#include <doctest.h>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gramridge/cli.hpp"
#include "gramridge/cv.hpp"
#include "gramridge/io.hpp"
#include "gramridge/rng.hpp"
#include "gramridge/tune.hpp"
#include "oracles.hpp"

using namespace gramridge;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gramridge_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int counter;
};
int TempDir::counter = 0;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string strip_created(const std::string& s) {
  std::string out;
  std::istringstream in(s);
  std::string line;
  while (std::getline(in, line))
    if (line.find("\"created\"") == std::string::npos) out += line + "\n";
  return out;
}

// Three-sample fixture shared by several tests.
struct Fixture {
  TempDir dir;
  std::string config_path;
  Fixture() {
    write_file(dir.file("a.csv"),
               "id,a1,a2\n"
               "s1,1.0,2.0\n"
               "s2,0.5,-1.0\n"
               "s3,-2.0,0.25\n");
    write_file(dir.file("b.csv"),
               "id,b1\n"
               "s1,3.0\n"
               "s2,1.5\n"
               "s3,0.5\n");
    write_file(dir.file("y.csv"),
               "id,y\n"
               "s1,0.7\n"
               "s2,-0.2\n"
               "s3,1.1\n");
    config_path = dir.file("config.json");
    write_file(config_path, std::string(R"({
  "blocks": [
    {"name": "a", "path": ")") + dir.file("a.csv") + R"(", "role": "penalized"},
    {"name": "b", "path": ")" + dir.file("b.csv") + R"(", "role": "penalized"}
  ],
  "response": {"path": ")" + dir.file("y.csv") + R"(", "family": "linear"},
  "folds": {"k": 3, "repeats": 1, "seed": 4},
  "output_dir": ")" + dir.file("out") + R"("
})");
  }
};

}  // namespace

TEST_CASE("hand-written fixture ingests to the hand-typed matrices") {
  Fixture fx;
  const RunConfig cfg = RunConfig::from_file(fx.config_path);
  const IngestResult data = ingest(cfg);
  Matrix a(3, 2);
  a << 1.0, 2.0, 0.5, -1.0, -2.0, 0.25;
  Matrix b(3, 1);
  b << 3.0, 1.5, 0.5;
  Vector y(3);
  y << 0.7, -0.2, 1.1;
  CHECK((data.design.block(0) - a).cwiseAbs().maxCoeff() == 0.0);
  CHECK((data.design.block(1) - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((data.response.y() - y).cwiseAbs().maxCoeff() == 0.0);
  CHECK(data.sample_ids == std::vector<std::string>{"s1", "s2", "s3"});
}

TEST_CASE("blocks with permuted rows align by id") {
  Fixture fx;
  // Rewrite block b with rows out of order.
  write_file(fx.dir.file("b.csv"),
             "id,b1\n"
             "s3,0.5\n"
             "s1,3.0\n"
             "s2,1.5\n");
  const IngestResult data = ingest(RunConfig::from_file(fx.config_path));
  Matrix b(3, 1);
  b << 3.0, 1.5, 0.5;
  CHECK((data.design.block(1) - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a survival file becomes a cox response") {
  TempDir dir;
  write_file(dir.file("x.csv"), "id,x\ns1,1\ns2,2\ns3,3\ns4,4\n");
  write_file(dir.file("surv.csv"),
             "id,time,status\ns1,2.5,1\ns2,1.0,0\ns3,4.0,1\ns4,0.5,0\n");
  write_file(dir.file("c.json"), std::string(R"({
  "blocks": [{"name": "x", "path": ")") + dir.file("x.csv") + R"("}],
  "response": {"path": ")" + dir.file("surv.csv") + R"(", "family": "cox"}
})");
  const IngestResult data = ingest(RunConfig::from_file(dir.file("c.json")));
  CHECK(data.response.family() == Family::cox);
  CHECK(data.response.time()(0) == 2.5);
  CHECK(data.response.event()(3) == 0.0);
}

TEST_CASE("ingest errors are specific") {
  Fixture fx;
  SUBCASE("missing value") {
    write_file(fx.dir.file("b.csv"), "id,b1\ns1,3.0\ns2,\ns3,0.5\n");
    try {
      ingest(RunConfig::from_file(fx.config_path));
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("missing value") != std::string::npos);
    }
  }
  SUBCASE("non-numeric cell names row and column") {
    write_file(fx.dir.file("b.csv"), "id,b1\ns1,3.0\ns2,oops\ns3,0.5\n");
    try {
      ingest(RunConfig::from_file(fx.config_path));
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("b.csv:3") != std::string::npos);
      CHECK(msg.find("b1") != std::string::npos);
    }
  }
  SUBCASE("id mismatch lists the offenders") {
    write_file(fx.dir.file("b.csv"), "id,b1\ns1,3.0\ns2,1.5\nzz,0.5\n");
    try {
      ingest(RunConfig::from_file(fx.config_path));
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("zz") != std::string::npos);
    }
  }
}

TEST_CASE("config validation catches incompatible methods") {
  Fixture fx;
  RunConfig cfg = RunConfig::from_file(fx.config_path);
  cfg.method = "vb";  // vb needs a binary response
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.method = "nonsense";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("artifact round-trips losslessly") {
  Rng rng(7);
  FitArtifact art;
  art.config_fingerprint = "abc";
  art.family = Family::cox;
  art.method = "cv";
  art.block_names = {"a", "b"};
  art.lambdas = Vector(2);
  art.lambdas << 1.234567890123456789, 9.87e-7;
  art.beta_unpen = oracles::random_vector(rng, 2);
  art.beta_blocks = {oracles::random_vector(rng, 3),
                     oracles::random_vector(rng, 2)};
  art.eta = oracles::random_vector(rng, 4);
  BaselineHazard h;
  h.times = {1.0, 2.5};
  h.increments = {0.125, 0.4};
  h.cumulative = {0.125, 0.525};
  art.baseline = h;

  TempDir dir;
  art.save(dir.file("fit.json"));
  const FitArtifact back = FitArtifact::load(dir.file("fit.json"));

  const Matrix na = oracles::random_matrix(rng, 5, 3);
  const Matrix nb = oracles::random_matrix(rng, 5, 2);
  const Matrix nu = oracles::random_matrix(rng, 5, 2);
  const Vector before = art.predict({na, nb}, &nu);
  const Vector after = back.predict({na, nb}, &nu);
  CHECK((before - after).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.baseline->increments == art.baseline->increments);
}

TEST_CASE("the cli fits and predicts its own training data") {
  Fixture fx;
  const std::string out = fx.dir.file("out");
  const int rc = run_command({"fit", "--config", fx.config_path, "--folds", "3",
                              "--seed", "2"});
  REQUIRE(rc == 0);
  const int rc2 = run_command({"predict", "--artifact", out + "/fit.json",
                               "--config", fx.config_path, "--out",
                               fx.dir.file("pred.tsv")});
  REQUIRE(rc2 == 0);

  const FitArtifact art = FitArtifact::load(out + "/fit.json");
  const TableData pred = read_table(fx.dir.file("pred.tsv"));
  for (Index i = 0; i < 3; ++i)
    CHECK(pred.values(i, 0) ==
          doctest::Approx(art.eta(i)).epsilon(1e-8));
}

TEST_CASE("identical configs and seeds produce byte-identical artifacts") {
  Fixture fx;
  const std::string out = fx.dir.file("out");
  REQUIRE(run_command({"fit", "--config", fx.config_path, "--seed", "11"}) == 0);
  const std::string first = slurp(out + "/fit.json");
  const std::string first_trace = slurp(out + "/trace.tsv");
  REQUIRE(run_command({"fit", "--config", fx.config_path, "--seed", "11"}) == 0);
  const std::string second = slurp(out + "/fit.json");
  CHECK(strip_created(first) == strip_created(second));
  CHECK(first_trace == slurp(out + "/trace.tsv"));
}

TEST_CASE("cv and ml tuning agree with their oracles on the linear fixture") {
  TempDir dir;
  // A small planted single-block problem written to disk.
  Rng rng(55);
  const Index n = 20, p = 8;
  const Matrix x = oracles::random_matrix(rng, n, p);
  Vector beta(p);
  for (Index j = 0; j < p; ++j) beta(j) = rng.normal() * 0.6;
  Vector y = x * beta;
  for (Index i = 0; i < n; ++i) y(i) += rng.normal();

  TableData tx;
  tx.values = x;
  for (Index i = 0; i < n; ++i) tx.ids.push_back("s" + std::to_string(i));
  for (Index j = 0; j < p; ++j) tx.columns.push_back("x" + std::to_string(j));
  write_table(dir.file("x.tsv"), tx);
  TableData ty;
  ty.ids = tx.ids;
  ty.columns = {"y"};
  ty.values = y;
  write_table(dir.file("y.tsv"), ty);
  write_file(dir.file("c.json"), std::string(R"({
  "blocks": [{"name": "x", "path": ")") + dir.file("x.tsv") + R"("}],
  "response": {"path": ")" + dir.file("y.tsv") + R"(", "family": "linear"},
  "folds": {"k": 5, "repeats": 1, "seed": 9},
  "tuner": {"global_iters": 5, "local_iters": 30},
  "output_dir": ")" + dir.file("out") + R"("
})");

  REQUIRE(run_command({"tune", "--config", dir.file("c.json"), "--method",
                       "cv"}) == 0);
  nlohmann::json jcv;
  std::ifstream(dir.file("out") + "/penalties.json") >> jcv;
  const double lam_cv = jcv["lambdas"]["x"].get<double>();

  REQUIRE(run_command({"tune", "--config", dir.file("c.json"), "--method",
                       "ml"}) == 0);
  nlohmann::json jml;
  std::ifstream(dir.file("out") + "/penalties.json") >> jml;
  const double lam_ml = jml["lambdas"]["x"].get<double>();

  // CV oracle: dense grid of leave-k-out CVL by direct solves.
  const ResponseSpec r = ResponseSpec::linear(y);
  const FoldPlan plan = make_folds(r, 5, 1, 9);
  auto cvl = [&](double lambda) {
    double total = 0.0;
    for (int f = 0; f < 5; ++f) {
      const IndexList in = plan.in_indices(0, f), out_idx = plan.out_indices(0, f);
      const Vector bhat = oracles::direct_ridge(
          x(in, Eigen::all), Vector::Constant(p, lambda), y(in));
      const Vector eta_out = x(out_idx, Eigen::all) * bhat;
      for (Index i = 0; i < eta_out.size(); ++i) {
        const double resid = y(out_idx[static_cast<std::size_t>(i)]) - eta_out(i);
        total += -0.5 * std::log(2.0 * 3.14159265358979323846) -
                 0.5 * resid * resid;
      }
    }
    return total;
  };
  double best_cv = -1e300, best_cv_lam = 0.0;
  for (double lx = -6; lx <= 10; lx += 0.002) {
    const double u = cvl(std::exp(lx));
    if (u > best_cv) {
      best_cv = u;
      best_cv_lam = std::exp(lx);
    }
  }
  CHECK(std::abs(std::log(lam_cv) - std::log(best_cv_lam)) <= 0.05);

  double best_ml = -1e300, best_ml_lam = 0.0;
  for (double lx = -6; lx <= 10; lx += 0.002) {
    const double u =
        oracles::gaussian_evidence(y, Matrix(x * x.transpose() / std::exp(lx)));
    if (u > best_ml) {
      best_ml = u;
      best_ml_lam = std::exp(lx);
    }
  }
  CHECK(std::abs(std::log(lam_ml) - std::log(best_ml_lam)) <= 0.05);
}

TEST_CASE("the perf command reproduces a direct double-cv run bit for bit") {
  TempDir dir;
  Rng rng(66);
  const Index n = 18, p = 6;
  const Matrix x = oracles::random_matrix(rng, n, p);
  Vector y(n);
  for (Index i = 0; i < n; ++i)
    y(i) = rng.uniform01() < oracles::expit(x(i, 0)) ? 1.0 : 0.0;

  TableData tx;
  tx.values = x;
  for (Index i = 0; i < n; ++i) tx.ids.push_back("s" + std::to_string(i));
  for (Index j = 0; j < p; ++j) tx.columns.push_back("x" + std::to_string(j));
  write_table(dir.file("x.tsv"), tx);
  TableData ty;
  ty.ids = tx.ids;
  ty.columns = {"y"};
  ty.values = y;
  write_table(dir.file("y.tsv"), ty);
  write_file(dir.file("c.json"), std::string(R"({
  "blocks": [{"name": "x", "path": ")") + dir.file("x.tsv") + R"("}],
  "response": {"path": ")" + dir.file("y.tsv") + R"(", "family": "logistic"},
  "criterion": "auc",
  "folds": {"k": 3, "repeats": 1, "seed": 21},
  "outer_k": 3,
  "tuner": {"global_iters": 2, "local_iters": 5},
  "output_dir": ")" + dir.file("out") + R"("
})");
  REQUIRE(run_command({"perf", "--config", dir.file("c.json")}) == 0);

  const BlockedDesign design({x});
  const GramSet grams = precompute_grams(design);
  const ResponseSpec r = ResponseSpec::logistic(y);
  TunerConfig cfg;
  cfg.global_iters = 2;
  cfg.local_iters = 5;
  cfg.seed = 21;
  UtilitySpec u;
  u.criterion = Criterion::auc;
  const auto reports = double_cv(design, grams, r, 3, 3, 1, cfg, u, {}, 21);

  const TableData table = read_table(dir.file("out") + "/perf.tsv");
  REQUIRE(table.values.rows() == 3);
  for (int s = 0; s < 3; ++s) {
    CHECK(table.values(s, 0) == reports[static_cast<std::size_t>(s)].criterion_value);
    CHECK(table.values(s, 1) == reports[static_cast<std::size_t>(s)].lambdas(0));
  }
}

TEST_CASE("configuration failures exit with code 2") {
  TempDir dir;
  write_file(dir.file("bad.json"), "{\"blocks\": []}");
  CHECK(run_command({"tune", "--config", dir.file("bad.json")}) == 2);
  CHECK(run_command({"tune", "--config", dir.file("missing.json")}) == 2);
  CHECK(run_command({"definitely-not-a-subcommand"}) == 2);
}
