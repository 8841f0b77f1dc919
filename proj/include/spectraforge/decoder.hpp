#pragma once

#include "spectraforge/geometry.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace spectraforge {

enum class LossKind { Frobenius, Chamfer };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

/// Layer sizes of the decoder: input -> hidden[0] -> hidden[1] -> hidden[2] -> 3 n.
struct DecoderShape {
  int input_len = 0;
  std::array<int, 3> hidden{258, 1024, 2048};
  int n_vertices = 0;
  double dropout = 0.0;

  Index output_len() const { return 3 * static_cast<Index>(n_vertices); }
  bool operator==(const DecoderShape&) const = default;
};

inline constexpr double kBatchNormEpsilon = 1e-3;
inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kSeluScale = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

/// Four dense layers; the three hidden ones are followed by batch
/// normalization, SELU and (optionally) dropout. The last layer is linear.
///
/// Samples are columns: inputs are input_len x b, outputs 3n x b with the
/// coordinates of vertex i at rows 3i, 3i+1, 3i+2. All trainable parameters
/// live in one flat vector so the optimizer and the checkpoint see a single
/// tensor.
template <typename Scalar>
class Decoder {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;
  using VectorMap = Eigen::Map<Vector>;
  using ConstVectorMap = Eigen::Map<const Vector>;

  static constexpr int kLayers = 4;
  static constexpr int kHidden = 3;

  /// Activations of one train-mode pass, consumed by backward().
  struct Tape {
    std::array<Matrix, kLayers> inputs;      // input of each dense layer
    std::array<Matrix, kHidden> normalized;  // x_hat
    std::array<Vector, kHidden> inv_std;
    std::array<Matrix, kHidden> activated;   // SELU input (after scale/shift)
    std::array<Matrix, kHidden> keep;        // dropout mask scaled by 1/(1-p), empty when off
  };

  Decoder() = default;
  /// LeCun-normal weights (std 1/sqrt(fan_in)) from `seed`; zero biases,
  /// unit scales, zero shifts, running statistics (0, 1).
  Decoder(const DecoderShape& shape, std::uint64_t seed);

  const DecoderShape& shape() const { return shape_; }
  Index parameter_count() const { return params_.size(); }
  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }

  MatrixMap weight(int layer);
  ConstMatrixMap weight(int layer) const;
  VectorMap bias(int layer);
  ConstVectorMap bias(int layer) const;
  VectorMap scale(int hidden);
  ConstVectorMap scale(int hidden) const;
  VectorMap shift(int hidden);
  ConstVectorMap shift(int hidden) const;
  Vector& running_mean(int hidden) { return running_mean_[hidden]; }
  const Vector& running_mean(int hidden) const { return running_mean_[hidden]; }
  Vector& running_var(int hidden) { return running_var_[hidden]; }
  const Vector& running_var(int hidden) const { return running_var_[hidden]; }

  /// Eval mode: running statistics, no dropout. A pure function of the model.
  Matrix predict(const Matrix& inputs) const;

  /// Train mode: batch statistics, dropout masks drawn from `rng`. Updates
  /// the running statistics when `update_running` is set.
  Matrix forward_train(const Matrix& inputs, Tape& tape, std::mt19937_64& rng, bool update_running = true);

  /// Gradient (flat, parameters() order) of sum(output_grad .* output).
  Vector backward(const Tape& tape, const Matrix& output_grad) const;
  /// Same, into a caller-owned buffer that is resized if needed.
  void backward(const Tape& tape, const Matrix& output_grad, Vector& grad) const;

  template <typename Other>
  Decoder<Other> cast() const {
    Decoder<Other> out;
    out.shape_ = shape_;
    out.offsets_ = offsets_;
    out.params_ = params_.template cast<Other>();
    for (int h = 0; h < kHidden; ++h) {
      out.running_mean_[h] = running_mean_[h].template cast<Other>();
      out.running_var_[h] = running_var_[h].template cast<Other>();
    }
    return out;
  }

 private:
  template <typename>
  friend class Decoder;

  struct Offsets {
    std::array<Index, kLayers> weight{}, bias{};
    std::array<Index, kHidden> scale{}, shift{};
  };

  Index layer_in(int layer) const { return layer == 0 ? shape_.input_len : shape_.hidden[layer - 1]; }
  Index layer_out(int layer) const { return layer == kLayers - 1 ? shape_.output_len() : shape_.hidden[layer]; }
  void check_input(const Matrix& inputs) const;

  DecoderShape shape_;
  Offsets offsets_;
  Vector params_;
  std::array<Vector, kHidden> running_mean_, running_var_;
};

extern template class Decoder<float>;
extern template class Decoder<double>;

/// Squared Frobenius norm of the difference of two n x 3 coordinate sets.
double loss_frobenius(const Vertices& pred, const Vertices& target);
/// Mean squared nearest-neighbor distance from pred to target plus the
/// same from target to pred.
double loss_chamfer(const Vertices& pred, const Vertices& target);

/// Mean per-sample loss of a batch (columns). When `grad` is non-null it
/// receives d(mean loss)/d(outputs).
template <typename Scalar>
double batch_loss(LossKind kind, const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& outputs,
                  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& targets,
                  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>* grad);

struct TrainConfig {
  int epochs = 2000;
  int batch_size = 64;
  double learning_rate = 2e-3;
  double late_learning_rate = 1.8e-3;
  int schedule_switch_epoch = 1000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  LossKind loss = LossKind::Frobenius;
  std::uint64_t seed = 0;

  double learning_rate_at(int epoch) const { return epoch < schedule_switch_epoch ? learning_rate : late_learning_rate; }
};

/// One sample per column. Targets are 3n-long coordinate columns (Chamfer
/// targets may hold a different point count than the output).
struct TrainingData {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;

  Index size() const { return inputs.cols(); }
};

struct TrainingHistory {
  std::vector<double> train_loss;
  std::vector<double> test_loss;  // empty without a test set
  bool diverged = false;

  int epochs() const { return static_cast<int>(train_loss.size()); }
};

using EpochCallback = std::function<void(int epoch, double train_loss, double test_loss)>;

/// Adam on mini-batches of the mean per-sample loss. Batches are reshuffled
/// every epoch from the seed. If a loss turns non-finite the parameters are
/// restored to the start of that epoch, `diverged` is set and training stops.
template <typename Scalar>
TrainingHistory train(Decoder<Scalar>& model, const TrainingData& data, const TrainingData* test,
                      const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Mean per-sample loss in eval mode, evaluated in chunks.
template <typename Scalar>
double evaluate_loss(const Decoder<Scalar>& model, const TrainingData& data, LossKind kind);

/// Eval-mode output columns in double precision.
template <typename Scalar>
Eigen::MatrixXd predict_columns(const Decoder<Scalar>& model, const Eigen::MatrixXd& inputs);

/// Reshapes a 3n coordinate column into an n x 3 vertex matrix.
Vertices column_to_vertices(const Eigen::VectorXd& column);
Eigen::VectorXd vertices_to_column(const Vertices& vertices);

}  // namespace spectraforge
