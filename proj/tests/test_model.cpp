#include "doctest.h"

#include "spectraforge/model.hpp"

#include <filesystem>

using namespace spectraforge;

namespace {

struct Fixture {
  Dataset data;
  std::vector<SpectralEncoding> encodings;
  EncodingRecipe recipe;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture f;
    CubeDatasetOptions options;
    options.face_resolution = 8;
    options.pattern_count = 5;
    options.depth_count = 2;
    f.data = generate_cube_dataset(options, 11);
    f.recipe.local = LocalOperator::PAT;
    f.recipe.k = 6;
    f.recipe.h = 6;
    for (const auto& s : compute_dataset_spectra(f.data, f.recipe)) f.encodings.push_back(encode_spectra(s, 6, 6));
    return f;
  }();
  return f;
}

ShapeModel small_model(int epochs = 5) {
  const Fixture& f = fixture();
  ModelOptions options;
  options.hidden = {8, 16, 24};
  options.init_seed = 4;
  TrainConfig config;
  config.epochs = epochs;
  config.batch_size = 4;
  config.seed = 8;
  return fit_model(f.data, f.encodings, f.recipe, options, config);
}

}  // namespace

TEST_CASE("fit_model wires layout, statistics and connectivity") {
  const Fixture& f = fixture();
  const ShapeModel model = small_model();
  CHECK(model.history.epochs() == 5);
  CHECK(model.history.test_loss.size() == 5);
  CHECK(model.network.shape().input_len == 10);
  CHECK(model.network.shape().n_vertices == f.data.shapes[0].num_vertices());
  CHECK(model.faces == f.data.shapes[0].faces);
  CHECK(model.layout == f.encodings[0].layout);

  std::vector<SpectralEncoding> train;
  for (int i : f.data.split.train) train.push_back(f.encodings[static_cast<std::size_t>(i)]);
  const EncodingStats stats = dataset_stats(train);
  CHECK(model.stats.min == stats.min);
  CHECK(model.stats.max == stats.max);
  CHECK(model.stats.layout == stats.layout);
}

TEST_CASE("reconstruct") {
  const Fixture& f = fixture();
  const ShapeModel model = small_model();
  const SpectralEncoding& a = f.encodings[0];
  const SpectralEncoding& b = f.encodings[7];

  const Mesh out = reconstruct(model, a);
  CHECK(out.num_vertices() == f.data.shapes[0].num_vertices());
  CHECK(out.faces == model.faces);

  SUBCASE("swapped encoding gives a valid mesh") {
    const Mesh swapped = reconstruct(model, swap_segments(a, b, {b.layout[1].label}));
    CHECK_NOTHROW(make_mesh(swapped.vertices, swapped.faces));
  }
  SUBCASE("interpolation at t = 0 reproduces the first shape") {
    CHECK(reconstruct(model, interpolate(a, b, 0.0)).vertices == out.vertices);
  }
  SUBCASE("batched reconstruction matches single") {
    const Eigen::MatrixXd cols = reconstruct_columns(model, {a, b});
    CHECK(column_to_vertices(cols.col(0)) == out.vertices);
    CHECK(column_to_vertices(cols.col(1)) == reconstruct(model, b).vertices);
  }
  SUBCASE("layout mismatch") {
    SpectralEncoding wrong = a;
    std::swap(wrong.layout[0].label, wrong.layout[1].label);
    CHECK_THROWS_AS(reconstruct(model, wrong), Error);
    CHECK_THROWS_AS(reconstruct(model, build_encoding(Eigen::VectorXd::LinSpaced(11, 0, 1))), Error);
  }
  SUBCASE("non-finite values") {
    SpectralEncoding bad = a;
    bad.values(2) = std::nan("");
    CHECK_THROWS_AS(reconstruct(model, bad), Error);
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  const Fixture& f = fixture();
  const ShapeModel model = small_model();
  const std::string bytes = save_checkpoint(model);
  CHECK(bytes.compare(0, 6, "SFCKPT") == 0);
  const ShapeModel back = load_checkpoint(bytes);

  CHECK(back.network.shape() == model.network.shape());
  CHECK(back.network.parameters() == model.network.parameters());
  for (int h = 0; h < 3; ++h) {
    CHECK(back.network.running_mean(h) == model.network.running_mean(h));
    CHECK(back.network.running_var(h) == model.network.running_var(h));
  }
  CHECK(back.layout == model.layout);
  CHECK(back.stats.min == model.stats.min);
  CHECK(back.stats.max == model.stats.max);
  CHECK(back.faces == model.faces);
  CHECK(back.recipe == model.recipe);
  CHECK(back.history.train_loss == model.history.train_loss);
  CHECK(back.history.test_loss == model.history.test_loss);
  CHECK(back.train_config.seed == model.train_config.seed);
  CHECK(back.init_seed == model.init_seed);
  CHECK(back.fingerprint() == model.fingerprint());
  CHECK(save_checkpoint(back) == bytes);

  for (const auto& e : f.encodings) CHECK(reconstruct(back, e).vertices == reconstruct(model, e).vertices);

  const auto path = std::filesystem::temp_directory_path() / "spectraforge_model_test.ckpt";
  save_checkpoint(model, path);
  CHECK(load_checkpoint(path).fingerprint() == model.fingerprint());
  std::filesystem::remove(path);
}

TEST_CASE("damaged checkpoints are rejected") {
  const ShapeModel model = small_model(1);
  const std::string bytes = save_checkpoint(model);

  CHECK_THROWS_WITH_AS(load_checkpoint(bytes.substr(0, bytes.size() - 100)), doctest::Contains("checksum"),
                       CheckpointError);
  CHECK_THROWS_WITH_AS(load_checkpoint(bytes.substr(0, 20)), doctest::Contains("checksum"), CheckpointError);
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  CHECK_THROWS_WITH_AS(load_checkpoint(flipped), doctest::Contains("checksum"), CheckpointError);
  std::string version = bytes;
  version[8] = 7;
  CHECK_THROWS_WITH_AS(load_checkpoint(version), doctest::Contains("version 7"), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(std::string("not a checkpoint")), CheckpointError);
}

TEST_CASE("layout is re-validated on load") {
  ShapeModel model = small_model(1);
  SUBCASE("segments that do not cover the input") {
    model.layout[1].length += 1;
    model.stats.layout = model.layout;
    CHECK_THROWS_AS(load_checkpoint(save_checkpoint(model)), CheckpointError);
  }
  SUBCASE("statistics under another layout") {
    model.stats.layout[1].label = "elsewhere";
    CHECK_THROWS_AS(load_checkpoint(save_checkpoint(model)), CheckpointError);
  }
  SUBCASE("global segment first") {
    std::swap(model.layout[0].label, model.layout[1].label);
    model.stats.layout = model.layout;
    CHECK_THROWS_AS(load_checkpoint(save_checkpoint(model)), CheckpointError);
  }
}

TEST_CASE("loss history CSV") {
  TrainingHistory h;
  h.train_loss = {0.5, 0.25};
  h.test_loss = {1.0, 0.75};
  CHECK(history_csv(h) == "epoch,train_loss,test_loss\n1,0.5,1\n2,0.25,0.75\n");
  h.test_loss.clear();
  CHECK(history_csv(h) == "epoch,train_loss,test_loss\n1,0.5,\n2,0.25,\n");
}

TEST_CASE("point-cloud models carry no faces") {
  Fixture f = fixture();
  for (auto& s : f.data.shapes) s.faces.resize(0, 3);
  f.data.point_clouds = true;
  ModelOptions options;
  options.hidden = {4, 4, 4};
  TrainConfig config;
  config.epochs = 1;
  config.loss = LossKind::Chamfer;
  const ShapeModel model = fit_model(f.data, f.encodings, f.recipe, options, config);
  CHECK(model.faces.rows() == 0);
  const Mesh out = reconstruct(model, f.encodings[0]);
  CHECK(out.num_faces() == 0);
  CHECK(load_checkpoint(save_checkpoint(model)).train_config.loss == LossKind::Chamfer);
}
