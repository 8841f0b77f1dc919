#include "spectraforge/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace spectraforge {
namespace {

template <typename Derived>
auto selu(const Eigen::ArrayBase<Derived>& y) {
  using S = typename Derived::Scalar;
  const S scale = static_cast<S>(kSeluScale), alpha = static_cast<S>(kSeluAlpha);
  return (y > S(0)).select(scale * y, scale * alpha * (y.exp() - S(1)));
}

template <typename Derived>
auto selu_derivative(const Eigen::ArrayBase<Derived>& y) {
  using S = typename Derived::Scalar;
  const S scale = static_cast<S>(kSeluScale), alpha = static_cast<S>(kSeluAlpha);
  return (y > S(0)).select(Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic>::Constant(y.rows(), y.cols(), scale),
                           scale * alpha * y.exp());
}

void validate_shape(const DecoderShape& shape) {
  if (shape.input_len < 1) throw Error("decoder input length must be at least 1");
  for (int h : shape.hidden) {
    if (h < 1) throw Error("decoder hidden layers must have at least one unit");
  }
  if (shape.n_vertices < 1) throw Error("decoder must output at least one vertex");
  if (!(shape.dropout >= 0.0 && shape.dropout < 1.0)) throw Error("dropout rate must lie in [0, 1)");
}

}  // namespace

std::string to_string(LossKind kind) { return kind == LossKind::Chamfer ? "chamfer" : "frobenius"; }

LossKind parse_loss_kind(const std::string& name) {
  if (name == "frobenius") return LossKind::Frobenius;
  if (name == "chamfer") return LossKind::Chamfer;
  throw Error("unknown loss '" + name + "' (expected frobenius or chamfer)");
}

template <typename Scalar>
Decoder<Scalar>::Decoder(const DecoderShape& shape, std::uint64_t seed) : shape_(shape) {
  validate_shape(shape);
  Index offset = 0;
  for (int l = 0; l < kLayers; ++l) {
    offsets_.weight[l] = offset;
    offset += layer_out(l) * layer_in(l);
    offsets_.bias[l] = offset;
    offset += layer_out(l);
  }
  for (int h = 0; h < kHidden; ++h) {
    offsets_.scale[h] = offset;
    offset += shape.hidden[h];
    offsets_.shift[h] = offset;
    offset += shape.hidden[h];
  }
  params_.setZero(offset);

  std::mt19937_64 rng(seed);
  for (int l = 0; l < kLayers; ++l) {
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(layer_in(l))));
    MatrixMap w = weight(l);
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(normal(rng));
  }
  for (int h = 0; h < kHidden; ++h) {
    scale(h).setOnes();
    running_mean_[h].setZero(shape.hidden[h]);
    running_var_[h].setOnes(shape.hidden[h]);
  }
}

template <typename Scalar>
typename Decoder<Scalar>::MatrixMap Decoder<Scalar>::weight(int layer) {
  return MatrixMap(params_.data() + offsets_.weight[layer], layer_out(layer), layer_in(layer));
}
template <typename Scalar>
typename Decoder<Scalar>::ConstMatrixMap Decoder<Scalar>::weight(int layer) const {
  return ConstMatrixMap(params_.data() + offsets_.weight[layer], layer_out(layer), layer_in(layer));
}
template <typename Scalar>
typename Decoder<Scalar>::VectorMap Decoder<Scalar>::bias(int layer) {
  return VectorMap(params_.data() + offsets_.bias[layer], layer_out(layer));
}
template <typename Scalar>
typename Decoder<Scalar>::ConstVectorMap Decoder<Scalar>::bias(int layer) const {
  return ConstVectorMap(params_.data() + offsets_.bias[layer], layer_out(layer));
}
template <typename Scalar>
typename Decoder<Scalar>::VectorMap Decoder<Scalar>::scale(int hidden) {
  return VectorMap(params_.data() + offsets_.scale[hidden], shape_.hidden[hidden]);
}
template <typename Scalar>
typename Decoder<Scalar>::ConstVectorMap Decoder<Scalar>::scale(int hidden) const {
  return ConstVectorMap(params_.data() + offsets_.scale[hidden], shape_.hidden[hidden]);
}
template <typename Scalar>
typename Decoder<Scalar>::VectorMap Decoder<Scalar>::shift(int hidden) {
  return VectorMap(params_.data() + offsets_.shift[hidden], shape_.hidden[hidden]);
}
template <typename Scalar>
typename Decoder<Scalar>::ConstVectorMap Decoder<Scalar>::shift(int hidden) const {
  return ConstVectorMap(params_.data() + offsets_.shift[hidden], shape_.hidden[hidden]);
}

template <typename Scalar>
void Decoder<Scalar>::check_input(const Matrix& inputs) const {
  if (params_.size() == 0) throw Error("decoder is not initialized");
  if (inputs.rows() != shape_.input_len) {
    throw Error("decoder expects inputs of length " + std::to_string(shape_.input_len) + ", got " +
                std::to_string(inputs.rows()));
  }
}

template <typename Scalar>
typename Decoder<Scalar>::Matrix Decoder<Scalar>::predict(const Matrix& inputs) const {
  check_input(inputs);
  Matrix x = inputs;
  for (int h = 0; h < kHidden; ++h) {
    Matrix z = weight(h) * x;
    z.colwise() += bias(h);
    const Vector inv_std = (running_var_[h].array() + Scalar(kBatchNormEpsilon)).rsqrt();
    const Vector gain = scale(h).cwiseProduct(inv_std);
    const Vector offset = shift(h) - gain.cwiseProduct(running_mean_[h]);
    z = gain.asDiagonal() * z;
    z.colwise() += offset;
    x = selu(z.array()).matrix();
  }
  Matrix out = weight(kLayers - 1) * x;
  out.colwise() += bias(kLayers - 1);
  return out;
}

template <typename Scalar>
typename Decoder<Scalar>::Matrix Decoder<Scalar>::forward_train(const Matrix& inputs, Tape& tape,
                                                                std::mt19937_64& rng, bool update_running) {
  check_input(inputs);
  const Index b = inputs.cols();
  tape.inputs[0] = inputs;
  for (int h = 0; h < kHidden; ++h) {
    Matrix z = weight(h) * tape.inputs[h];
    z.colwise() += bias(h);
    const Vector mean = z.rowwise().mean();
    z.colwise() -= mean;
    const Vector var = z.array().square().rowwise().mean();
    tape.inv_std[h] = (var.array() + Scalar(kBatchNormEpsilon)).rsqrt();
    tape.normalized[h] = tape.inv_std[h].asDiagonal() * z;
    tape.activated[h] = scale(h).asDiagonal() * tape.normalized[h];
    tape.activated[h].colwise() += shift(h);
    Matrix a = selu(tape.activated[h].array()).matrix();
    if (shape_.dropout > 0.0) {
      std::bernoulli_distribution keep(1.0 - shape_.dropout);
      const Scalar boost = static_cast<Scalar>(1.0 / (1.0 - shape_.dropout));
      tape.keep[h].resize(a.rows(), a.cols());
      for (Index i = 0; i < a.size(); ++i) tape.keep[h].data()[i] = keep(rng) ? boost : Scalar(0);
      a = a.cwiseProduct(tape.keep[h]);
    } else {
      tape.keep[h].resize(0, 0);
    }
    if (update_running) {
      const Scalar m = static_cast<Scalar>(kBatchNormMomentum);
      const Scalar unbias = b > 1 ? static_cast<Scalar>(b) / static_cast<Scalar>(b - 1) : Scalar(1);
      running_mean_[h] = (Scalar(1) - m) * running_mean_[h] + m * mean;
      running_var_[h] = (Scalar(1) - m) * running_var_[h] + (m * unbias) * var;
    }
    tape.inputs[h + 1] = std::move(a);
  }
  Matrix out = weight(kLayers - 1) * tape.inputs[kLayers - 1];
  out.colwise() += bias(kLayers - 1);
  return out;
}

template <typename Scalar>
typename Decoder<Scalar>::Vector Decoder<Scalar>::backward(const Tape& tape, const Matrix& output_grad) const {
  Vector grad;
  backward(tape, output_grad, grad);
  return grad;
}

template <typename Scalar>
void Decoder<Scalar>::backward(const Tape& tape, const Matrix& output_grad, Vector& grad) const {
  grad.resize(params_.size());
  const Index b = output_grad.cols();
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(b);

  Matrix upstream = output_grad;
  for (int l = kLayers - 1; l >= 0; --l) {
    if (l < kLayers - 1) {
      const int h = l;
      if (tape.keep[h].size() > 0) upstream = upstream.cwiseProduct(tape.keep[h]);
      const Matrix dy = upstream.cwiseProduct(selu_derivative(tape.activated[h].array()).matrix());
      VectorMap(grad.data() + offsets_.scale[h], shape_.hidden[h]) =
          dy.cwiseProduct(tape.normalized[h]).rowwise().sum();
      VectorMap(grad.data() + offsets_.shift[h], shape_.hidden[h]) = dy.rowwise().sum();
      const Matrix dxhat = scale(h).asDiagonal() * dy;
      const Vector sum_dxhat = dxhat.rowwise().sum();
      const Vector sum_dxhat_xhat = dxhat.cwiseProduct(tape.normalized[h]).rowwise().sum();
      Matrix dz = dxhat * static_cast<Scalar>(b);
      dz.colwise() -= sum_dxhat;
      dz -= sum_dxhat_xhat.asDiagonal() * tape.normalized[h];
      upstream = (inv_b * tape.inv_std[h]).asDiagonal() * dz;
    }
    MatrixMap(grad.data() + offsets_.weight[l], layer_out(l), layer_in(l)).noalias() =
        upstream * tape.inputs[l].transpose();
    VectorMap(grad.data() + offsets_.bias[l], layer_out(l)) = upstream.rowwise().sum();
    if (l > 0) upstream = weight(l).transpose() * upstream;
  }
}

template class Decoder<float>;
template class Decoder<double>;

double loss_frobenius(const Vertices& pred, const Vertices& target) {
  if (pred.rows() != target.rows()) {
    throw Error("Frobenius loss needs matching vertex counts (" + std::to_string(pred.rows()) + " vs " +
                std::to_string(target.rows()) + ")");
  }
  return (pred - target).squaredNorm();
}

namespace {

// Sum over p of min_t |p - t|^2, with argmins when requested.
template <typename Scalar>
double nearest_sum(const Eigen::Ref<const Eigen::Matrix<Scalar, 3, Eigen::Dynamic>>& from,
                   const Eigen::Ref<const Eigen::Matrix<Scalar, 3, Eigen::Dynamic>>& to, std::vector<Index>* argmin) {
  double total = 0.0;
  if (argmin) argmin->resize(static_cast<std::size_t>(from.cols()));
  for (Index i = 0; i < from.cols(); ++i) {
    Index best = 0;
    const Scalar d = (to.colwise() - from.col(i)).colwise().squaredNorm().minCoeff(&best);
    total += static_cast<double>(d);
    if (argmin) (*argmin)[static_cast<std::size_t>(i)] = best;
  }
  return total;
}

}  // namespace

double loss_chamfer(const Vertices& pred, const Vertices& target) {
  if (pred.rows() == 0 || target.rows() == 0) throw Error("Chamfer loss needs two non-empty point sets");
  const Eigen::Matrix3Xd p = pred.transpose(), t = target.transpose();
  return nearest_sum<double>(p, t, nullptr) / static_cast<double>(p.cols()) +
         nearest_sum<double>(t, p, nullptr) / static_cast<double>(t.cols());
}

template <typename Scalar>
double batch_loss(LossKind kind, const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& outputs,
                  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& targets,
                  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>* grad) {
  using Points = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;
  const Index b = outputs.cols();
  if (targets.cols() != b) throw Error("batch has " + std::to_string(b) + " outputs but " +
                                       std::to_string(targets.cols()) + " targets");
  if (b == 0) throw Error("empty batch");
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(b);
  double total = 0.0;

  if (kind == LossKind::Frobenius) {
    if (targets.rows() != outputs.rows()) throw Error("target length does not match the decoder output");
    for (Index j = 0; j < b; ++j) total += static_cast<double>((outputs.col(j) - targets.col(j)).squaredNorm());
    if (grad) *grad = (Scalar(2) * inv_b) * (outputs - targets);
    return total / static_cast<double>(b);
  }

  if (outputs.rows() % 3 != 0 || targets.rows() % 3 != 0 || targets.rows() == 0) {
    throw Error("Chamfer targets must be non-empty 3D point columns");
  }
  if (grad) grad->setZero(outputs.rows(), b);
  std::vector<Index> forward, reverse;
  for (Index j = 0; j < b; ++j) {
    const Eigen::Map<const Points> p(outputs.col(j).data(), 3, outputs.rows() / 3);
    const Eigen::Map<const Points> t(targets.col(j).data(), 3, targets.rows() / 3);
    const auto n = static_cast<Scalar>(p.cols()), m = static_cast<Scalar>(t.cols());
    total += nearest_sum<Scalar>(p, t, grad ? &forward : nullptr) / static_cast<double>(p.cols()) +
             nearest_sum<Scalar>(t, p, grad ? &reverse : nullptr) / static_cast<double>(t.cols());
    if (grad) {
      Eigen::Map<Points> g(grad->col(j).data(), 3, p.cols());
      for (Index i = 0; i < p.cols(); ++i) {
        g.col(i) += (Scalar(2) * inv_b / n) * (p.col(i) - t.col(forward[static_cast<std::size_t>(i)]));
      }
      for (Index i = 0; i < t.cols(); ++i) {
        const Index nearest = reverse[static_cast<std::size_t>(i)];
        g.col(nearest) += (Scalar(2) * inv_b / m) * (p.col(nearest) - t.col(i));
      }
    }
  }
  return total / static_cast<double>(b);
}

template double batch_loss<float>(LossKind, const Eigen::MatrixXf&, const Eigen::MatrixXf&, Eigen::MatrixXf*);
template double batch_loss<double>(LossKind, const Eigen::MatrixXd&, const Eigen::MatrixXd&, Eigen::MatrixXd*);

namespace {

template <typename Scalar>
void check_data(const Decoder<Scalar>& model, const TrainingData& data, LossKind kind, const std::string& what) {
  if (data.size() == 0) throw Error(what + " set is empty");
  if (data.targets.cols() != data.size()) throw Error(what + " set has mismatched input and target counts");
  if (data.inputs.rows() != model.shape().input_len) {
    throw Error(what + " encodings have length " + std::to_string(data.inputs.rows()) + " but the decoder expects " +
                std::to_string(model.shape().input_len));
  }
  if (kind == LossKind::Frobenius && data.targets.rows() != model.shape().output_len()) {
    throw Error(what + " targets have " + std::to_string(data.targets.rows() / 3) + " vertices but the decoder outputs " +
                std::to_string(model.shape().n_vertices));
  }
}

}  // namespace

namespace {

// One fused pass over parameters and both moment estimates.
template <typename Vector, typename Scalar>
void adam_update(Vector& params, Vector& m, Vector& v, const Vector& g, Scalar b1, Scalar b2, Scalar step_size,
                 Scalar inv_root_c2, Scalar eps) {
  constexpr Index kChunk = 4096;
  const Index n = params.size();
  for (Index start = 0; start < n; start += kChunk) {
    const Index len = std::min(kChunk, n - start);
    auto gs = g.segment(start, len).array();
    auto ms = m.segment(start, len).array();
    auto vs = v.segment(start, len).array();
    ms = b1 * ms + (Scalar(1) - b1) * gs;
    vs = b2 * vs + (Scalar(1) - b2) * gs.square();
    params.segment(start, len).array() -= step_size * ms / (vs.sqrt() * inv_root_c2 + eps);
  }
}

}  // namespace

template <typename Scalar>
double evaluate_loss(const Decoder<Scalar>& model, const TrainingData& data, LossKind kind) {
  using Matrix = typename Decoder<Scalar>::Matrix;
  check_data(model, data, kind, "evaluation");
  const Index chunk = 256;
  double total = 0.0;
  for (Index start = 0; start < data.size(); start += chunk) {
    const Index count = std::min(chunk, data.size() - start);
    const Matrix out = model.predict(data.inputs.middleCols(start, count).template cast<Scalar>());
    const Matrix tgt = data.targets.middleCols(start, count).template cast<Scalar>();
    total += batch_loss<Scalar>(kind, out, tgt, nullptr) * static_cast<double>(count);
  }
  return total / static_cast<double>(data.size());
}

template <typename Scalar>
Eigen::MatrixXd predict_columns(const Decoder<Scalar>& model, const Eigen::MatrixXd& inputs) {
  return model.predict(inputs.template cast<Scalar>()).template cast<double>();
}

template <typename Scalar>
TrainingHistory train(Decoder<Scalar>& model, const TrainingData& data, const TrainingData* test,
                      const TrainConfig& config, const EpochCallback& on_epoch) {
  using Matrix = typename Decoder<Scalar>::Matrix;
  using Vector = typename Decoder<Scalar>::Vector;
  if (config.epochs < 1) throw Error("training needs at least one epoch");
  if (config.batch_size < 1) throw Error("batch size must be at least 1");
  if (!(config.learning_rate > 0.0 && config.late_learning_rate > 0.0)) throw Error("learning rates must be positive");
  check_data(model, data, config.loss, "training");
  if (test) check_data(model, *test, config.loss, "test");

  const Matrix inputs = data.inputs.template cast<Scalar>();
  const Matrix targets = data.targets.template cast<Scalar>();
  const Index n = data.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  std::mt19937_64 shuffle_rng(config.seed);
  std::mt19937_64 dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  Vector first_moment = Vector::Zero(model.parameter_count());
  Vector second_moment = Vector::Zero(model.parameter_count());
  typename Decoder<Scalar>::Tape tape;
  Matrix batch_in, batch_target, grad_out;
  Vector grad;
  long step = 0;

  TrainingHistory history;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const Decoder<Scalar> snapshot = model;
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const auto lr = static_cast<Scalar>(config.learning_rate_at(epoch));
    double epoch_total = 0.0;
    bool finite = true;

    for (Index start = 0; start < n && finite; start += config.batch_size) {
      const Index count = std::min<Index>(config.batch_size, n - start);
      batch_in.resize(inputs.rows(), count);
      batch_target.resize(targets.rows(), count);
      for (Index c = 0; c < count; ++c) {
        const Index src = order[static_cast<std::size_t>(start + c)];
        batch_in.col(c) = inputs.col(src);
        batch_target.col(c) = targets.col(src);
      }
      const Matrix out = model.forward_train(batch_in, tape, dropout_rng);
      const double loss = batch_loss<Scalar>(config.loss, out, batch_target, &grad_out);
      if (!std::isfinite(loss)) {
        finite = false;
        break;
      }
      model.backward(tape, grad_out, grad);

      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      const auto b1 = static_cast<Scalar>(config.beta1), b2 = static_cast<Scalar>(config.beta2);
      const auto step_size = static_cast<Scalar>(static_cast<double>(lr) / c1);
      const auto inv_root_c2 = static_cast<Scalar>(1.0 / std::sqrt(c2));
      const auto eps = static_cast<Scalar>(config.epsilon);
      adam_update(model.parameters(), first_moment, second_moment, grad, b1, b2, step_size, inv_root_c2, eps);
      epoch_total += loss * static_cast<double>(count);
    }
    if (finite && !model.parameters().allFinite()) finite = false;
    if (!finite) {
      model = snapshot;
      history.diverged = true;
      break;
    }

    const double train_loss = epoch_total / static_cast<double>(n);
    history.train_loss.push_back(train_loss);
    double test_loss = std::numeric_limits<double>::quiet_NaN();
    if (test) {
      test_loss = evaluate_loss(model, *test, config.loss);
      history.test_loss.push_back(test_loss);
    }
    if (on_epoch) on_epoch(epoch, train_loss, test_loss);
  }
  return history;
}

template TrainingHistory train<float>(Decoder<float>&, const TrainingData&, const TrainingData*, const TrainConfig&,
                                      const EpochCallback&);
template TrainingHistory train<double>(Decoder<double>&, const TrainingData&, const TrainingData*, const TrainConfig&,
                                       const EpochCallback&);
template double evaluate_loss<float>(const Decoder<float>&, const TrainingData&, LossKind);
template double evaluate_loss<double>(const Decoder<double>&, const TrainingData&, LossKind);
template Eigen::MatrixXd predict_columns<float>(const Decoder<float>&, const Eigen::MatrixXd&);
template Eigen::MatrixXd predict_columns<double>(const Decoder<double>&, const Eigen::MatrixXd&);

Vertices column_to_vertices(const Eigen::VectorXd& column) {
  if (column.size() % 3 != 0) throw Error("coordinate column length is not a multiple of 3");
  return Eigen::Map<const Vertices>(column.data(), column.size() / 3, 3);
}

Eigen::VectorXd vertices_to_column(const Vertices& vertices) {
  return Eigen::Map<const Eigen::VectorXd>(vertices.data(), vertices.size());
}

}  // namespace spectraforge
