#include "doctest.h"

#include "spectraforge/cube.hpp"
#include "spectraforge/decoder.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace spectraforge;

namespace {

Eigen::MatrixXd random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

double frobenius_oracle(const Vertices& a, const Vertices& b) {
  double total = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index c = 0; c < 3; ++c) total += (a(i, c) - b(i, c)) * (a(i, c) - b(i, c));
  }
  return total;
}

double chamfer_oracle(const Vertices& a, const Vertices& b) {
  auto one_way = [](const Vertices& from, const Vertices& to) {
    double total = 0.0;
    for (Index i = 0; i < from.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < to.rows(); ++j) {
        double d = 0.0;
        for (Index c = 0; c < 3; ++c) d += (from(i, c) - to(j, c)) * (from(i, c) - to(j, c));
        best = std::min(best, d);
      }
      total += best;
    }
    return total / static_cast<double>(from.rows());
  };
  return one_way(a, b) + one_way(b, a);
}

// Max per-parameter relative error of backward() against central differences.
double gradient_check(LossKind kind, double dropout, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  DecoderShape shape{5, {7, 6, 5}, 4, dropout};
  Decoder<double> model(shape, seed);
  for (int h = 0; h < 3; ++h) {
    model.scale(h) = Eigen::VectorXd::Random(shape.hidden[h]).array() + 1.5;
    model.shift(h) = 0.3 * Eigen::VectorXd::Random(shape.hidden[h]);
  }
  const Eigen::MatrixXd inputs = random_matrix(5, 6, rng);
  const Eigen::MatrixXd targets = random_matrix(kind == LossKind::Chamfer ? 15 : 12, 6, rng);
  const std::mt19937_64 mask_rng(seed + 1);

  auto loss_at = [&](Decoder<double>& m, Eigen::MatrixXd* grad_out, Decoder<double>::Tape* tape) {
    Decoder<double>::Tape local;
    std::mt19937_64 r = mask_rng;
    const Eigen::MatrixXd out = m.forward_train(inputs, tape ? *tape : local, r, false);
    return batch_loss<double>(kind, out, targets, grad_out);
  };

  Decoder<double>::Tape tape;
  Eigen::MatrixXd grad_out;
  loss_at(model, &grad_out, &tape);
  const Eigen::VectorXd grad = model.backward(tape, grad_out);

  const double h = 1e-5;
  const double floor = 1e-4 * grad.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (Index p = 0; p < model.parameter_count(); ++p) {
    const double saved = model.parameters()(p);
    model.parameters()(p) = saved + h;
    const double up = loss_at(model, nullptr, nullptr);
    model.parameters()(p) = saved - h;
    const double down = loss_at(model, nullptr, nullptr);
    model.parameters()(p) = saved;
    const double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - grad(p)) / std::max({std::abs(fd), std::abs(grad(p)), floor}));
  }
  return worst;
}

TrainingData cube_samples(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TrainingData data;
  const int r = 8;
  const Index n = 6 * r * r + 2;
  data.inputs.resize(6, count);
  data.targets.resize(3 * n, count);
  const auto depths = depth_factors(kDepthCount);
  for (int i = 0; i < count; ++i) {
    const int pattern = static_cast<int>(rng() % kPatternCount);
    const double depth = depths[rng() % depths.size()];
    data.targets.col(i) = vertices_to_column(generate_cube({r, pattern, depth, 0.15}).vertices);
    data.inputs.col(i) << pattern / 125.0, depth, std::sin(pattern), std::cos(pattern), depth * depth, 1.0;
  }
  return data;
}

}  // namespace

TEST_CASE("layer sizes") {
  SUBCASE("cube configuration") {
    Decoder<float> model(DecoderShape{28, {258, 1024, 2048}, 7350, 0.0}, 0);
    CHECK(model.weight(0).rows() == 258);
    CHECK(model.weight(0).cols() == 28);
    CHECK(model.weight(2).rows() == 2048);
    CHECK(model.weight(3).rows() == 22050);
    CHECK(model.weight(3).cols() == 2048);
  }
  SUBCASE("human-body configuration") {
    Decoder<float> model(DecoderShape{28, {258, 512, 1536}, 6890, 0.1}, 0);
    CHECK(model.weight(3).rows() == 20670);
    CHECK(model.shape().dropout == 0.1);
  }
  CHECK_THROWS_AS(Decoder<float>(DecoderShape{0, {4, 4, 4}, 3, 0.0}, 0), Error);
  CHECK_THROWS_AS(Decoder<float>(DecoderShape{4, {4, 4, 4}, 3, 1.0}, 0), Error);
}

TEST_CASE("initialization is seeded and variance-scaled") {
  const DecoderShape shape{40, {300, 300, 300}, 10, 0.0};
  Decoder<double> a(shape, 5), b(shape, 5), c(shape, 6);
  CHECK(a.parameters() == b.parameters());
  CHECK(a.parameters() != c.parameters());
  const Eigen::MatrixXd w = a.weight(1);
  const double var = w.array().square().mean();
  CHECK(var == doctest::Approx(1.0 / 300.0).epsilon(0.05));
  CHECK(a.bias(1).isZero());
  CHECK(a.scale(0).isOnes());
  // float and double start from the same draws
  Decoder<float> f(shape, 5);
  CHECK((f.parameters().cast<double>() - a.parameters()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("eval-mode forward") {
  std::mt19937_64 rng(1);
  Decoder<double> model(DecoderShape{6, {16, 16, 16}, 5, 0.0}, 3);
  Eigen::MatrixXd x = random_matrix(6, 4, rng);
  SUBCASE("deterministic") { CHECK(model.predict(x) == model.predict(x)); }
  SUBCASE("identical rows give identical outputs") {
    Eigen::MatrixXd same(6, 3);
    same.colwise() = x.col(0);
    const Eigen::MatrixXd out = model.predict(same);
    CHECK(out.col(0) == out.col(1));
    CHECK(out.col(0) == out.col(2));
    CHECK(out.col(0) == model.predict(x.col(0)).col(0));
  }
  SUBCASE("zero final layer gives zero coordinates") {
    model.weight(3).setZero();
    model.bias(3).setZero();
    CHECK(model.predict(x).isZero(0.0));
  }
  SUBCASE("shape mismatch") { CHECK_THROWS_AS(model.predict(random_matrix(5, 2, rng)), Error); }
}

TEST_CASE("backpropagation matches central differences") {
  CHECK(gradient_check(LossKind::Frobenius, 0.0, 11) < 1e-4);
  CHECK(gradient_check(LossKind::Frobenius, 0.0, 12) < 1e-4);
  CHECK(gradient_check(LossKind::Chamfer, 0.0, 13) < 1e-4);
  CHECK(gradient_check(LossKind::Frobenius, 0.3, 14) < 1e-4);
}

TEST_CASE("Frobenius loss") {
  Vertices a = Vertices::Random(20, 3);
  CHECK(loss_frobenius(a, a) == 0.0);
  Vertices b = a;
  b(3, 0) += 1.0;
  CHECK(loss_frobenius(a, b) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(loss_frobenius(a, a.topRows(5)), Error);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 1 + static_cast<Index>(rng() % 60);
    const Vertices p = random_matrix(n, 3, rng), t = random_matrix(n, 3, rng);
    CHECK(std::abs(loss_frobenius(p, t) - frobenius_oracle(p, t)) <= 1e-10 * std::max(1.0, frobenius_oracle(p, t)));
  }
}

TEST_CASE("Chamfer loss") {
  Vertices one(1, 3), other(1, 3);
  one << 0, 0, 0;
  other << 0.3, -0.4, 0;
  CHECK(loss_chamfer(one, other) == doctest::Approx(2 * 0.25));
  CHECK_THROWS_AS(loss_chamfer(Vertices(0, 3), other), Error);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Vertices p = random_matrix(50, 3, rng), t = random_matrix(1 + static_cast<Index>(rng() % 70), 3, rng);
    const double oracle = chamfer_oracle(p, t);
    CHECK(std::abs(loss_chamfer(p, t) - oracle) <= 1e-10 * std::max(1.0, oracle));
    CHECK(loss_chamfer(p, t) == doctest::Approx(loss_chamfer(t, p)).epsilon(1e-14));
    CHECK(loss_chamfer(p, p) == 0.0);
  }
  // permuted copy of the same multiset is still zero; a moved point is not
  Vertices p = random_matrix(10, 3, rng);
  Vertices q = p.colwise().reverse();
  CHECK(loss_chamfer(p, q) == 0.0);
  q(0, 2) += 1e-3;
  CHECK(loss_chamfer(p, q) > 0.0);
}

TEST_CASE("batch loss agrees with the single-sample losses") {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd out = random_matrix(30, 5, rng), tgt = random_matrix(30, 5, rng);
  double fro = 0.0, cham = 0.0;
  for (Index j = 0; j < 5; ++j) {
    fro += loss_frobenius(column_to_vertices(out.col(j)), column_to_vertices(tgt.col(j)));
    cham += loss_chamfer(column_to_vertices(out.col(j)), column_to_vertices(tgt.col(j)));
  }
  CHECK(batch_loss<double>(LossKind::Frobenius, out, tgt, nullptr) == doctest::Approx(fro / 5).epsilon(1e-14));
  CHECK(batch_loss<double>(LossKind::Chamfer, out, tgt, nullptr) == doctest::Approx(cham / 5).epsilon(1e-14));
}

TEST_CASE("vertex column layout") {
  Vertices v(2, 3);
  v << 1, 2, 3, 4, 5, 6;
  const Eigen::VectorXd col = vertices_to_column(v);
  CHECK(col(3) == 4.0);
  CHECK(column_to_vertices(col) == v);
}

TEST_CASE("training memorizes a single sample") {
  TrainingData data = cube_samples(1, 9);
  Decoder<float> model(DecoderShape{6, {32, 32, 32}, static_cast<int>(data.targets.rows() / 3), 0.0}, 1);
  TrainConfig config;
  config.epochs = 200;
  config.batch_size = 1;
  const TrainingHistory history = train(model, data, nullptr, config);
  REQUIRE(history.epochs() == 200);
  CHECK_FALSE(history.diverged);
  MESSAGE("first " << history.train_loss.front() << " last " << history.train_loss.back());
  CHECK(history.train_loss.back() < 1e-6 * history.train_loss.front());
}

TEST_CASE("training is deterministic under a seed and learns the training set") {
  const TrainingData data = cube_samples(40, 2), test = cube_samples(8, 3);
  const DecoderShape shape{6, {24, 48, 64}, static_cast<int>(data.targets.rows() / 3), 0.1};
  TrainConfig config;
  config.epochs = 60;
  config.batch_size = 16;
  config.seed = 77;
  Decoder<float> a(shape, 4), b(shape, 4);
  int calls = 0;
  const auto ha = train(a, data, &test, config, [&](int, double, double) { ++calls; });
  const auto hb = train(b, data, &test, config);
  CHECK(calls == 60);
  CHECK(ha.train_loss == hb.train_loss);
  CHECK(ha.test_loss == hb.test_loss);
  CHECK(a.parameters() == b.parameters());
  CHECK(ha.train_loss.back() < 0.1 * ha.train_loss.front());

  config.seed = 78;
  Decoder<float> c(shape, 4);
  CHECK(train(c, data, &test, config).train_loss != ha.train_loss);

  // a training encoding reconstructs its own target well
  const double own = evaluate_loss(a, TrainingData{data.inputs.leftCols(1), data.targets.leftCols(1)}, LossKind::Frobenius);
  CHECK(own < 10.0 * ha.train_loss.back());
}

TEST_CASE("divergence guard restores the last finite parameters") {
  const TrainingData data = cube_samples(8, 5);
  Decoder<float> model(DecoderShape{6, {8, 8, 8}, static_cast<int>(data.targets.rows() / 3), 0.0}, 2);
  TrainConfig config;
  config.epochs = 50;
  config.learning_rate = config.late_learning_rate = 1e30;
  const TrainingHistory history = train(model, data, nullptr, config);
  CHECK(history.diverged);
  CHECK(history.epochs() < 50);
  CHECK(model.parameters().allFinite());
}

TEST_CASE("learning-rate schedule") {
  TrainConfig config;
  CHECK(config.learning_rate_at(0) == 2e-3);
  CHECK(config.learning_rate_at(999) == 2e-3);
  CHECK(config.learning_rate_at(1000) == 1.8e-3);
}

TEST_CASE("training input validation") {
  const TrainingData data = cube_samples(4, 6);
  Decoder<float> model(DecoderShape{5, {8, 8, 8}, 10, 0.0}, 2);
  TrainConfig config;
  config.epochs = 1;
  CHECK_THROWS_AS(train(model, data, nullptr, config), Error);
}
