#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "sgid/config.hpp"
#include "sgid/errors.hpp"
#include "sgid/pipeline.hpp"

using namespace sgid;
namespace fs = std::filesystem;

namespace {

ObservationGrid short_grid() {
  ObservationGrid g;
  g.t_start = 0.1;
  g.t_end = 0.2;
  g.dt = 0.05;
  return g;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("sgid_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_SUITE("ensemble") {
  TEST_CASE("zero width gives nominal rows") {
    EnsembleSpec s;
    s.n_samples = 5;
    s.perturbation = 0.0;
    const Eigen::MatrixXd p = sample_ensemble(s);
    for (Eigen::Index r = 0; r < p.rows(); ++r) CHECK(params_from_row(p, r) == IndependentParams::nominal());
  }

  TEST_CASE("draws fill the box") {
    EnsembleSpec s;
    s.n_samples = 100000;
    s.seed = 11;
    const Eigen::MatrixXd p = sample_ensemble(s);
    const auto nominal = IndependentParams::nominal().to_array();
    for (std::size_t c = 0; c < kNumParams; ++c) {
      const Eigen::VectorXd rel = p.col(static_cast<Eigen::Index>(c)) / nominal[c];
      CHECK(rel.minCoeff() >= 0.9 - 1e-12);
      CHECK(rel.maxCoeff() <= 1.1 + 1e-12);
      CHECK(rel.minCoeff() <= 0.9 * 1.002);
      CHECK(rel.maxCoeff() >= 1.1 * 0.998);
    }
  }

  TEST_CASE("seeded") {
    EnsembleSpec s;
    s.n_samples = 20;
    const Eigen::MatrixXd a = sample_ensemble(s), b = sample_ensemble(s);
    CHECK(a == b);
    s.seed = 2;
    CHECK_FALSE(a == sample_ensemble(s));
  }

  TEST_CASE("spec validation") {
    EnsembleSpec s;
    s.n_samples = 1;
    CHECK_THROWS_AS(sample_ensemble(s), DomainError);
    s.n_samples = 10;
    s.perturbation = 1.0;
    CHECK_THROWS_AS(sample_ensemble(s), DomainError);
  }

  TEST_CASE("a nominal row matches the model map") {
    EnsembleSpec s;
    s.n_samples = 2;
    s.perturbation = 0.0;
    const EnsembleOutputs e = run_ensemble(sample_ensemble(s).topRows(1), ObservationGrid{}, LimitFlags::none(), 1);
    REQUIRE(e.outputs.rows() == 1);
    CHECK(e.outputs.row(0).transpose() ==
          model_map(IndependentParams::nominal(), LimitFlags::none(), ObservationGrid{}));
  }

  TEST_CASE("parallel evaluation is deterministic") {
    EnsembleSpec s;
    s.n_samples = 12;
    s.seed = 5;
    const Eigen::MatrixXd p = sample_ensemble(s);
    const EnsembleOutputs a = run_ensemble(p, ObservationGrid{}, LimitFlags::none(), 1);
    const EnsembleOutputs b = run_ensemble(p, ObservationGrid{}, LimitFlags::none(), 8);
    CHECK(a.outputs == b.outputs);
    CHECK(a.rows == b.rows);
  }

  TEST_CASE("failures are dropped up to one percent") {
    EnsembleSpec s;
    s.n_samples = 200;
    s.grid = short_grid();
    Eigen::MatrixXd p = sample_ensemble(s);
    p(17, 0) = -1.0;
    p(150, 3) = -1.0;
    const EnsembleOutputs e = run_ensemble(p, short_grid(), LimitFlags::none(), 2);
    CHECK(e.outputs.rows() == 198);
    REQUIRE(e.failures.size() == 2);
    CHECK(e.failures[0].row == 17);
    CHECK(e.failures[1].row == 150);
    CHECK(std::find(e.rows.begin(), e.rows.end(), 17) == e.rows.end());
    CHECK(e.warnings.size() == 2);
    p(18, 0) = -1.0;
    CHECK_THROWS_AS(run_ensemble(p, short_grid(), LimitFlags::none(), 2), NumericalError);
  }
}

TEST_SUITE("regression track") {
  TEST_CASE("split partitions the rows") {
    const Split s = train_test_split(100, 0.8, 3);
    CHECK(s.train.size() == 80);
    CHECK(s.test.size() == 20);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 100);
    CHECK(train_test_split(100, 0.8, 3).test == s.test);
    CHECK_FALSE(train_test_split(100, 0.8, 4).test == s.test);
    CHECK_THROWS_AS(train_test_split(100, 1.0, 3), DomainError);
  }

  TEST_CASE("column errors and the lowest set") {
    Eigen::MatrixXd a(2, 3), b(2, 3);
    a << 1, 2, 3, 4, 5, 6;
    b << 1, 2.5, 1, 4, 4.5, 2;
    const Eigen::VectorXd mae = mean_absolute_error(a, b);
    CHECK(mae[0] == 0.0);
    CHECK(mae[1] == doctest::Approx(0.5));
    CHECK(mae[2] == doctest::Approx(3.0));
    CHECK(lowest_error_set({"x", "y", "z"}, mae, 2) == std::vector<std::string>{"x", "y"});
    CHECK_THROWS_AS(mean_absolute_error(a, b.leftCols(2)), DomainError);
  }

  TEST_CASE("parameters carried by the coordinates have small error") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 500;
    Eigen::MatrixXd x(n, 2), p(n, 4);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = u(rng);
      x(i, 1) = u(rng);
      p.row(i) << u(rng), 2.0 + x(i, 1), u(rng), 1.0 + 3.0 * x(i, 0);
    }
    GhTrackOptions o;
    o.gh.retain = 100;
    const GhTrackResult r = gh_track(x, p, {"a", "b", "c", "d"}, o);
    CHECK(r.identifiable == std::vector<std::string>{"b", "d"});
    CHECK(r.identifiable_cols == std::vector<std::size_t>{1, 3});
    CHECK(r.mae[1] < 0.02);
    CHECK(r.mae[3] < 0.02);
    CHECK(r.mae[0] > 0.15);
    CHECK(r.mae[2] > 0.15);
    CHECK(r.forward.target_dim() == 2);
    CHECK(r.inverse.input_dim() == 2);
    CHECK(r.split.test.size() == 100);
  }

  TEST_CASE("orthogonal synthetic sensitivities agree") {
    FIMatrix info;
    info.entries = Eigen::Vector3d(4.0, 2.0, 1.0).asDiagonal();
    const InfoSpectrum s = spectrum(info, {"a", "b", "c"});
    const Eigen::Vector3d mae(0.01, 0.02, 0.005);
    const ComparisonReport r = compare_tracks(s, 1e-2, 0.8, 3, {"a", "b", "c"}, mae);
    CHECK(r.fim_effective_dim == 3);
    CHECK(r.agreement);
    const ComparisonReport q = compare_tracks(s, 1e-2, 0.8, 2, {"a", "b", "c"}, mae);
    CHECK_FALSE(q.agreement);
    std::stringstream js;
    write_comparison_json(js, r);
    CHECK(nlohmann::json::parse(js.str()).at("agreement") == true);
  }
}

TEST_SUITE("reduced model comparison") {
  TEST_CASE("reduced model stays close at nominal") {
    const ReducedComparison c = compare_reduced(IndependentParams::nominal());
    CHECK(c.times.front() == 3.0);
    CHECK(c.times.back() == doctest::Approx(5.0));
    CHECK(c.times.size() == 201);
    for (std::size_t s = 0; s < 4; ++s) CHECK(c.max_rel_error[s] <= 0.05);
    CHECK(c.max_rel_error[4] <= 0.15);
    CHECK(c.max_rel_error[5] <= 0.15);
    std::stringstream os;
    write_reduced_csv(os, c);
    std::string header;
    std::getline(os, header);
    CHECK(header.rfind("t,full_delta,", 0) == 0);
  }
}

TEST_SUITE("files and configuration") {
  TEST_CASE("matrix CSV round trip") {
    Eigen::MatrixXd a(3, 2);
    a << 1.0 / 3.0, -2e-17, 5, 6, 7e300, 0;
    std::stringstream ss;
    write_matrix_csv(ss, {"u", "v"}, a, true);
    std::vector<std::string> header;
    const Eigen::MatrixXd b = read_matrix_csv(ss, &header, true);
    CHECK(header == std::vector<std::string>{"u", "v"});
    CHECK(a == b);
    std::stringstream bad("a,b\n1,x\n");
    CHECK_THROWS_AS(read_matrix_csv(bad), DomainError);
    std::stringstream ragged("a,b\n1\n");
    CHECK_THROWS_AS(read_matrix_csv(ragged), DomainError);
  }

  TEST_CASE("parameter JSON round trip") {
    IndependentParams p;
    p.H = 3.0;
    p.Tqpp = 0.25;
    std::stringstream ss;
    write_params_json(ss, p);
    CHECK(read_params_json(ss) == p);
    std::stringstream unknown("{\"Q\": 1}");
    CHECK_THROWS_AS(read_params_json(unknown), DomainError);
    std::stringstream neg("{\"H\": -1}");
    CHECK_THROWS_AS(read_params_json(neg), DomainError);
  }

  TEST_CASE("config keys round trip through set") {
    PipelineConfig c;
    const nlohmann::json j = c.to_json();
    CHECK(j.size() == c.keys().size());
    CHECK(j.at("n_samples") == 2000);
    CHECK(j.at("gh.retain") == 250);
    PipelineConfig d;
    d.set("n_samples", "123");
    d.set("gh.delta_rule", "true");
    d.set("model.iq_form", "as_printed");
    d.set("geodesic.velocity_ratio", " 1e3 ");
    CHECK(d.n_samples == 123);
    CHECK(d.gh.gh.delta_rule);
    CHECK(d.iq_form == QAxisCurrent::as_printed);
    CHECK(d.geodesic.velocity_ratio == 1e3);
    CHECK_THROWS_AS(d.set("nope", "1"), DomainError);
    CHECK_THROWS_AS(d.set("n_samples", "-3"), DomainError);
    CHECK_THROWS_AS(d.set("fim.cutoff", "small"), DomainError);
  }

  TEST_CASE("config file") {
    const fs::path dir = scratch_dir("config");
    {
      std::ofstream f(dir / "run.cfg");
      f << "# desk run\nseed = 9\n\ndmaps.eigenpairs=30  # more\n";
    }
    PipelineConfig c;
    c.load(dir / "run.cfg");
    CHECK(c.seed == 9);
    CHECK(c.dmaps_eigenpairs == 30);
    {
      std::ofstream f(dir / "bad.cfg");
      f << "seed 9\n";
    }
    CHECK_THROWS_AS(c.load(dir / "bad.cfg"), DomainError);
    CHECK_THROWS_AS(c.load(dir / "missing.cfg"), DomainError);
  }

  TEST_CASE("file hashes and the manifest") {
    const fs::path dir = scratch_dir("manifest");
    {
      std::ofstream f(dir / "abc.txt", std::ios::binary);
      f << "abc";
    }
    CHECK(sha256_file(dir / "abc.txt") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    ManifestEntry e;
    e.stage = "sample";
    e.files = {dir / "abc.txt"};
    append_manifest(dir, e);
    e.stage = "ensemble";
    append_manifest(dir, e);
    std::ifstream in(dir / "manifest.jsonl");
    std::string line;
    std::vector<nlohmann::json> entries;
    while (std::getline(in, line)) entries.push_back(nlohmann::json::parse(line));
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].at("stage") == "sample");
    CHECK(entries[1].at("files")[0].at("path") == "abc.txt");
    CHECK(entries[1].at("files")[0].at("bytes") == 3);
    e.files = {dir / "gone.txt"};
    CHECK_THROWS_AS(append_manifest(dir, e), DomainError);
  }
}
