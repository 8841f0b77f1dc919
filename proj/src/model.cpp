#include "spectraforge/model.hpp"

#include "spectraforge/io.hpp"

#include "fnv.hpp"
#include "json_support.hpp"

#include <bit>
#include <cstdio>
#include <cstring>

namespace spectraforge {
namespace {

constexpr char kMagic[8] = {'S', 'F', 'C', 'K', 'P', 'T', '\0', '\0'};

class Writer {
 public:
  void bytes(const void* data, std::size_t n) { out_.append(static_cast<const char*>(data), n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  template <typename Derived>
  void floats(const Eigen::DenseBase<Derived>& v) {
    for (Index i = 0; i < v.size(); ++i) u32(std::bit_cast<std::uint32_t>(static_cast<float>(v.derived().data()[i])));
  }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& data, std::size_t end) : data_(data), end_(end) {}
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw CheckpointError("checkpoint is truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename Derived>
  void floats(Eigen::DenseBase<Derived>& v) {
    need(4 * static_cast<std::size_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i) v.derived().data()[i] = std::bit_cast<float>(u32());
  }
  std::size_t position() const { return pos_; }

 private:
  const std::string& data_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint64_t read_u64_at(const std::string& data, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
  return v;
}

nlohmann::json shape_json(const DecoderShape& s) {
  return {{"input_len", s.input_len}, {"hidden", s.hidden}, {"n_vertices", s.n_vertices}, {"dropout", s.dropout}};
}

DecoderShape shape_from(const nlohmann::json& j) {
  DecoderShape s;
  j.at("input_len").get_to(s.input_len);
  j.at("hidden").get_to(s.hidden);
  j.at("n_vertices").get_to(s.n_vertices);
  j.at("dropout").get_to(s.dropout);
  return s;
}

nlohmann::json config_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"late_learning_rate", c.late_learning_rate},
          {"schedule_switch_epoch", c.schedule_switch_epoch},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"loss", to_string(c.loss)},
          {"seed", c.seed}};
}

TrainConfig config_from(const nlohmann::json& j) {
  TrainConfig c;
  j.at("epochs").get_to(c.epochs);
  j.at("batch_size").get_to(c.batch_size);
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("late_learning_rate").get_to(c.late_learning_rate);
  j.at("schedule_switch_epoch").get_to(c.schedule_switch_epoch);
  j.at("beta1").get_to(c.beta1);
  j.at("beta2").get_to(c.beta2);
  j.at("epsilon").get_to(c.epsilon);
  c.loss = parse_loss_kind(j.at("loss").get<std::string>());
  j.at("seed").get_to(c.seed);
  return c;
}

void check_model_layout(const ShapeModel& model) {
  validate_layout(model.layout, model.network.shape().input_len);
  if (model.layout.empty() || model.layout.front().label != kGlobalLabel) {
    throw CheckpointError("checkpoint layout must start with the global segment");
  }
  if (model.stats.layout != model.layout) throw CheckpointError("checkpoint statistics disagree with its layout");
  if (model.faces.size() > 0 && model.faces.maxCoeff() >= model.network.shape().n_vertices) {
    throw CheckpointError("checkpoint faces reference missing vertices");
  }
}

}  // namespace

std::string ShapeModel::fingerprint() const {
  std::uint64_t h = fnv1a64(network.parameters().data(), sizeof(float) * static_cast<std::size_t>(network.parameter_count()));
  for (int i = 0; i < Decoder<float>::kHidden; ++i) {
    h = fnv1a64(network.running_mean(i).data(), sizeof(float) * static_cast<std::size_t>(network.running_mean(i).size()), h);
    h = fnv1a64(network.running_var(i).data(), sizeof(float) * static_cast<std::size_t>(network.running_var(i).size()), h);
  }
  h = fnv1a64(describe_layout(layout), h);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Eigen::MatrixXd encoding_matrix(const std::vector<SpectralEncoding>& encodings, const std::vector<int>& indices) {
  if (indices.empty()) return {};
  const Layout& layout = encodings.at(static_cast<std::size_t>(indices.front())).layout;
  Eigen::MatrixXd out(layout_size(layout), static_cast<Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    const SpectralEncoding& e = encodings.at(static_cast<std::size_t>(indices[c]));
    require_same_layout(layout, e.layout, "encoding " + std::to_string(indices[c]));
    out.col(static_cast<Index>(c)) = e.values;
  }
  return out;
}

Mesh reconstruct(const ShapeModel& model, const SpectralEncoding& encoding) {
  require_same_layout(model.layout, encoding.layout, "reconstruct");
  if (!encoding.values.allFinite()) throw Error("encoding holds non-finite values");
  Mesh out;
  out.vertices = column_to_vertices(predict_columns(model.network, encoding.values).col(0));
  out.faces = model.faces;
  return out;
}

Eigen::MatrixXd reconstruct_columns(const ShapeModel& model, const std::vector<SpectralEncoding>& encodings) {
  Eigen::MatrixXd inputs(layout_size(model.layout), static_cast<Index>(encodings.size()));
  for (std::size_t i = 0; i < encodings.size(); ++i) {
    require_same_layout(model.layout, encodings[i].layout, "reconstruct");
    inputs.col(static_cast<Index>(i)) = encodings[i].values;
  }
  return predict_columns(model.network, inputs);
}

TrainingData make_training_data(const Dataset& dataset, const std::vector<SpectralEncoding>& encodings,
                                const std::vector<int>& indices) {
  if (encodings.size() != dataset.size()) throw Error("one encoding per shape is required");
  TrainingData data;
  data.inputs = encoding_matrix(encodings, indices);
  if (indices.empty()) return data;
  const Index n = dataset.shapes.at(static_cast<std::size_t>(indices.front())).num_vertices();
  data.targets.resize(3 * n, static_cast<Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    const Mesh& shape = dataset.shapes.at(static_cast<std::size_t>(indices[c]));
    if (shape.num_vertices() != n) {
      throw Error("shape " + std::to_string(indices[c]) + " has " + std::to_string(shape.num_vertices()) +
                  " vertices, expected " + std::to_string(n));
    }
    data.targets.col(static_cast<Index>(c)) = vertices_to_column(shape.vertices);
  }
  return data;
}

ShapeModel fit_model(const Dataset& dataset, const std::vector<SpectralEncoding>& encodings,
                     const EncodingRecipe& recipe, const ModelOptions& options, const TrainConfig& config,
                     const EpochCallback& on_epoch) {
  if (dataset.split.train.empty()) throw Error("the dataset has an empty training split");
  const TrainingData train_data = make_training_data(dataset, encodings, dataset.split.train);
  const TrainingData test_data = make_training_data(dataset, encodings, dataset.split.test);

  ShapeModel model;
  const SpectralEncoding& first = encodings.at(static_cast<std::size_t>(dataset.split.train.front()));
  model.layout = first.layout;
  std::vector<SpectralEncoding> train_encodings;
  for (int i : dataset.split.train) train_encodings.push_back(encodings[static_cast<std::size_t>(i)]);
  model.stats = dataset_stats(train_encodings);

  DecoderShape shape;
  shape.input_len = static_cast<int>(layout_size(model.layout));
  shape.hidden = options.hidden;
  shape.n_vertices = static_cast<int>(train_data.targets.rows() / 3);
  shape.dropout = options.dropout;
  model.network = Decoder<float>(shape, options.init_seed);
  if (!dataset.point_clouds) model.faces = dataset.shapes[static_cast<std::size_t>(dataset.split.train.front())].faces;
  model.recipe = recipe;
  model.train_config = config;
  model.init_seed = options.init_seed;
  model.history = train(model.network, train_data, test_data.size() > 0 ? &test_data : nullptr, config, on_epoch);
  return model;
}

std::string save_checkpoint(const ShapeModel& model) {
  const DecoderShape& shape = model.network.shape();
  nlohmann::json faces = nlohmann::json::array();
  for (Index i = 0; i < model.faces.size(); ++i) faces.push_back(model.faces.data()[i]);
  const nlohmann::json header = {
      {"shape", shape_json(shape)},
      {"layout", model.layout},
      {"stats", stats_json(model.stats)},
      {"faces", faces},
      {"recipe", model.recipe},
      {"train", config_json(model.train_config)},
      {"history",
       {{"train_loss", model.history.train_loss},
        {"test_loss", model.history.test_loss},
        {"diverged", model.history.diverged}}},
      {"init_seed", model.init_seed},
      {"parameter_count", model.network.parameter_count()},
  };
  const std::string text = header.dump();

  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  w.u64(text.size());
  w.bytes(text.data(), text.size());
  w.floats(model.network.parameters());
  for (int h = 0; h < Decoder<float>::kHidden; ++h) {
    w.floats(model.network.running_mean(h));
    w.floats(model.network.running_var(h));
  }
  w.u64(fnv1a64(w.str().data(), w.str().size()));
  return std::move(w.str());
}

ShapeModel load_checkpoint(const std::string& bytes) {
  constexpr std::size_t kPrefix = sizeof(kMagic) + 4;
  if (bytes.size() < kPrefix || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a spectraforge checkpoint");
  }
  Reader prefix(bytes, kPrefix);
  prefix.text(sizeof(kMagic));
  const std::uint32_t version = prefix.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < kPrefix + 16 ||
      fnv1a64(bytes.data(), bytes.size() - 8) != read_u64_at(bytes, bytes.size() - 8)) {
    throw CheckpointError("checkpoint checksum mismatch (file truncated or corrupted)");
  }

  Reader r(bytes, bytes.size() - 8);
  r.text(kPrefix);
  const std::uint64_t header_len = r.u64();
  r.need(header_len);
  ShapeModel model;
  try {
    const auto header = nlohmann::json::parse(r.text(header_len));
    const DecoderShape shape = shape_from(header.at("shape"));
    model.network = Decoder<float>(shape, 0);
    if (header.at("parameter_count").get<Index>() != model.network.parameter_count()) {
      throw CheckpointError("checkpoint parameter count disagrees with its layer sizes");
    }
    model.layout = header.at("layout").get<Layout>();
    model.stats = stats_from(header.at("stats"));
    const auto& faces = header.at("faces");
    if (faces.size() % 3 != 0) throw CheckpointError("checkpoint face list is not a multiple of 3");
    model.faces.resize(static_cast<Index>(faces.size() / 3), 3);
    for (std::size_t i = 0; i < faces.size(); ++i) model.faces.data()[i] = faces[i].get<int>();
    model.recipe = header.at("recipe").get<EncodingRecipe>();
    model.train_config = config_from(header.at("train"));
    const auto& history = header.at("history");
    history.at("train_loss").get_to(model.history.train_loss);
    history.at("test_loss").get_to(model.history.test_loss);
    history.at("diverged").get_to(model.history.diverged);
    header.at("init_seed").get_to(model.init_seed);
  } catch (const CheckpointError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header: ") + e.what());
  } catch (const Error& e) {
    throw CheckpointError(std::string("checkpoint header: ") + e.what());
  }
  r.floats(model.network.parameters());
  for (int h = 0; h < Decoder<float>::kHidden; ++h) {
    r.floats(model.network.running_mean(h));
    r.floats(model.network.running_var(h));
    if (!(model.network.running_var(h).array() > 0.0f).all()) {
      throw CheckpointError("checkpoint holds a non-positive running variance");
    }
  }
  if (r.position() != bytes.size() - 8) throw CheckpointError("checkpoint has trailing bytes");
  try {
    check_model_layout(model);
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError(std::string("checkpoint layout: ") + e.what());
  }
  return model;
}

void save_checkpoint(const ShapeModel& model, const std::filesystem::path& path) {
  write_text_file(path, save_checkpoint(model));
}

ShapeModel load_checkpoint(const std::filesystem::path& path) {
  try {
    return load_checkpoint(read_text_file(path));
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

std::string history_csv(const TrainingHistory& history) {
  std::string out = "epoch,train_loss,test_loss\n";
  char buf[96];
  for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
    if (e < history.test_loss.size()) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", e + 1, history.train_loss[e], history.test_loss[e]);
    } else {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,\n", e + 1, history.train_loss[e]);
    }
    out += buf;
  }
  return out;
}

}  // namespace spectraforge
