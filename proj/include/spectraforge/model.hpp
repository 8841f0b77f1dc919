#pragma once

#include "spectraforge/cube.hpp"
#include "spectraforge/decoder.hpp"
#include "spectraforge/encoding.hpp"
#include "spectraforge/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace spectraforge {

/// A trained decoder together with everything needed to use it: the
/// encoding layout it expects, the training-set encoding ranges, and the
/// connectivity its outputs are wrapped with (empty for point clouds).
struct ShapeModel {
  Decoder<float> network;
  Layout layout;
  EncodingStats stats;
  Faces faces;
  EncodingRecipe recipe;
  TrainConfig train_config;
  TrainingHistory history;
  std::uint64_t init_seed = 0;

  /// 16 hex digits hashing the parameters, running statistics and layout.
  std::string fingerprint() const;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Eval-mode reconstruction wrapped with the training connectivity.
/// Throws when the encoding layout differs from the model's.
Mesh reconstruct(const ShapeModel& model, const SpectralEncoding& encoding);
/// Eval-mode outputs for many encodings, one 3n column each.
Eigen::MatrixXd reconstruct_columns(const ShapeModel& model, const std::vector<SpectralEncoding>& encodings);

/// Stacks encodings as columns after checking that they share a layout.
Eigen::MatrixXd encoding_matrix(const std::vector<SpectralEncoding>& encodings, const std::vector<int>& indices);

/// Inputs and 3n coordinate targets for the listed shapes.
TrainingData make_training_data(const Dataset& dataset, const std::vector<SpectralEncoding>& encodings,
                                const std::vector<int>& indices);

struct ModelOptions {
  std::array<int, 3> hidden{258, 1024, 2048};
  double dropout = 0.0;
  std::uint64_t init_seed = 0;
};

/// Trains a decoder on the dataset's train split, reporting the test split
/// loss per epoch. Range statistics come from the training encodings.
ShapeModel fit_model(const Dataset& dataset, const std::vector<SpectralEncoding>& encodings,
                     const EncodingRecipe& recipe, const ModelOptions& options, const TrainConfig& config,
                     const EpochCallback& on_epoch = {});

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary container: "SFCKPT\0\0", u32 version, u64 header length, JSON
/// header, float32 parameters and running statistics, FNV-1a 64 checksum.
/// Little-endian throughout.
std::string save_checkpoint(const ShapeModel& model);
ShapeModel load_checkpoint(const std::string& bytes);
void save_checkpoint(const ShapeModel& model, const std::filesystem::path& path);
ShapeModel load_checkpoint(const std::filesystem::path& path);

/// "epoch,train_loss,test_loss" rows, 1-based epochs; test column empty
/// without a test set.
std::string history_csv(const TrainingHistory& history);

}  // namespace spectraforge
