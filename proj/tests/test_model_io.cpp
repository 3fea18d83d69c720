#include <Eigen/Core>
#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <fstream>
#include <random>
#include <string>

#include "polyfm/model_io.hpp"
#include "support.hpp"

using namespace polyfm;

namespace {

struct TempFile {
  std::string path;
  TempFile() {
    char buf[L_tmpnam];
    REQUIRE(std::tmpnam(buf) != nullptr);
    path = buf;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

StoredModel trained_direct(std::uint64_t seed) {
  SparseDataset ds = testsupport::synth_regression(30, 6, 0.5, seed);
  TrainConfig config;
  config.rank = 3;
  config.beta = 0.1;
  config.epochs = 8;
  config.tol = 0.0;
  config.seed = seed;
  StoredModel stored;
  stored.model = train_direct(ds, config, Loss(LossKind::squared));
  stored.training = {config.beta, "squared", config.seed, 8};
  return stored;
}

StoredModel trained_lifted(std::uint64_t seed) {
  SparseDataset ds = testsupport::synth_regression(30, 6, 0.5, seed);
  TrainConfig config;
  config.rank = 2;
  config.degree = 3;
  config.epochs = 6;
  config.tol = 0.0;
  config.seed = seed;
  StoredModel stored;
  stored.model =
      train_lifted(ds, config, Loss(LossKind::squared), KernelFamily::homogeneous);
  stored.training = {0.0, "squared", config.seed, 6};
  return stored;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("direct models round-trip with bit-identical predictions") {
  StoredModel stored = trained_direct(7);
  TempFile f;
  save_model(stored, f.path);
  StoredModel back = load_model(f.path);
  REQUIRE(back.is_direct());
  const auto& a = std::get<DirectModel>(stored.model);
  const auto& b = std::get<DirectModel>(back.model);
  CHECK(a.P == b.P);
  CHECK(a.lambda == b.lambda);
  CHECK(a.kernel == b.kernel);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    Sample x =
        testsupport::to_sample(testsupport::random_dense(rng, 6, 1.0, 0.3));
    CHECK(stored.predict(x.view()) == back.predict(x.view()));
  }
}

TEST_CASE("lifted models round-trip with bit-identical predictions") {
  StoredModel stored = trained_lifted(9);
  TempFile f;
  save_model(stored, f.path);
  StoredModel back = load_model(f.path);
  REQUIRE(!back.is_direct());
  const auto& a = std::get<LiftedModel>(stored.model);
  const auto& b = std::get<LiftedModel>(back.model);
  REQUIRE(a.factors.size() == b.factors.size());
  for (std::size_t t = 0; t < a.factors.size(); ++t)
    CHECK(a.factors[t] == b.factors[t]);
  std::mt19937_64 rng(10);
  for (int t = 0; t < 20; ++t) {
    Sample x =
        testsupport::to_sample(testsupport::random_dense(rng, 6, 1.0, 0.3));
    CHECK(stored.predict(x.view()) == back.predict(x.view()));
  }
}

TEST_CASE("training metadata survives the round trip") {
  StoredModel stored = trained_direct(11);
  stored.training = {0.25, "logistic", 99, 42};
  TempFile f;
  save_model(stored, f.path);
  StoredModel back = load_model(f.path);
  CHECK(back.training.beta == 0.25);
  CHECK(back.training.loss == "logistic");
  CHECK(back.training.seed == 99);
  CHECK(back.training.epochs_run == 42);
}

TEST_CASE("augmented models re-apply the constant features on raw input") {
  SparseDataset raw = testsupport::synth_regression(25, 5, 0.5, 13);
  SparseDataset wide = augment(raw, 2);
  TrainConfig config;
  config.rank = 2;
  config.epochs = 5;
  config.tol = 0.0;
  StoredModel stored;
  stored.model = train_direct(wide, config, Loss(LossKind::squared));
  stored.augmented_count = 2;
  CHECK(stored.raw_features() == 5);

  const auto& m = std::get<DirectModel>(stored.model);
  for (Index i = 0; i < raw.n_samples(); ++i)
    CHECK(stored.predict(raw.row(i)) == predict_direct(m, wide.row(i)));

  Eigen::VectorXd all = predict_all(stored, raw);
  for (Index i = 0; i < raw.n_samples(); ++i)
    CHECK(all[i] == stored.predict(raw.row(i)));

  // survives a save/load cycle too
  TempFile f;
  save_model(stored, f.path);
  StoredModel back = load_model(f.path);
  CHECK(back.augmented_count == 2);
  CHECK(back.predict(raw.row(0)) == stored.predict(raw.row(0)));

  // out-of-range raw feature indices are rejected
  Sample bad{{5}, {1.0}};
  CHECK_THROWS_AS(stored.predict(bad.view()), DimensionError);
  SparseDataset too_wide = testsupport::synth_regression(5, 8, 0.5, 14);
  CHECK_THROWS_AS(predict_all(stored, too_wide), DimensionError);
}

TEST_CASE("loading rejects damaged files") {
  TempFile f;
  write_text(f.path, "{ \"format_version\": 1, ");
  CHECK_THROWS_AS(load_model(f.path), ParseError);
  write_text(f.path, "not json at all");
  CHECK_THROWS_AS(load_model(f.path), ParseError);
  CHECK_THROWS_AS(load_model("/nonexistent/path/model.fmjson"), Error);
}

TEST_CASE("loading rejects unknown format versions") {
  StoredModel stored = trained_direct(15);
  TempFile f;
  save_model(stored, f.path);
  std::ifstream in(f.path);
  nlohmann::json j;
  in >> j;
  in.close();
  j["format_version"] = 2;
  write_text(f.path, j.dump());
  CHECK_THROWS_WITH(load_model(f.path),
                    Catch::Matchers::ContainsSubstring("format_version"));
}

TEST_CASE("loading rejects missing fields and bad shapes") {
  StoredModel stored = trained_direct(17);
  TempFile f;
  save_model(stored, f.path);
  std::ifstream in(f.path);
  nlohmann::json good;
  in >> good;
  in.close();

  {
    nlohmann::json j = good;
    j.erase("kind");
    write_text(f.path, j.dump());
    CHECK_THROWS_AS(load_model(f.path), ParseError);
  }
  {
    nlohmann::json j = good;
    j.erase("P");
    write_text(f.path, j.dump());
    CHECK_THROWS_AS(load_model(f.path), ParseError);
  }
  {
    nlohmann::json j = good;
    j["P"].erase(0);  // one entry short
    write_text(f.path, j.dump());
    CHECK_THROWS_AS(load_model(f.path), DimensionError);
  }
  {
    nlohmann::json j = good;
    j["lambda"].push_back(1.0);
    write_text(f.path, j.dump());
    CHECK_THROWS_AS(load_model(f.path), DimensionError);
  }
  {
    nlohmann::json j = good;
    j["kind"] = "mystery";
    write_text(f.path, j.dump());
    CHECK_THROWS_AS(load_model(f.path), ParseError);
  }
  {
    nlohmann::json j = good;
    j["kernel"] = "rbf";
    write_text(f.path, j.dump());
    CHECK_THROWS_AS(load_model(f.path), ParseError);
  }
}

TEST_CASE("lifted files with a wrong factor count are rejected") {
  StoredModel stored = trained_lifted(19);
  TempFile f;
  save_model(stored, f.path);
  std::ifstream in(f.path);
  nlohmann::json j;
  in >> j;
  in.close();
  j["factors"].erase(0);
  write_text(f.path, j.dump());
  CHECK_THROWS_AS(load_model(f.path), DimensionError);
}

TEST_CASE("rmse and r2 compute the pinned examples") {
  Eigen::VectorXd pred(2), y(2);
  pred << 1.0, 2.0;
  y << 1.0, 4.0;
  CHECK(rmse(pred, y) == Catch::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(rmse(y, y) == 0.0);
  CHECK(r2(y, y) == 1.0);
  // r2 of the mean predictor is 0
  Eigen::VectorXd mean_pred = Eigen::VectorXd::Constant(2, y.mean());
  CHECK(r2(mean_pred, y) == Catch::Approx(0.0).margin(1e-15));

  Eigen::VectorXd y3(3);
  CHECK_THROWS_AS(rmse(pred, y3), DimensionError);
  CHECK_THROWS_AS(r2(pred, y3), DimensionError);
  Eigen::VectorXd empty;
  CHECK_THROWS_AS(rmse(empty, empty), DimensionError);
  Eigen::VectorXd constant = Eigen::VectorXd::Ones(4);
  Eigen::VectorXd any = Eigen::VectorXd::Zero(4);
  CHECK_THROWS_AS(r2(any, constant), Error);
}
