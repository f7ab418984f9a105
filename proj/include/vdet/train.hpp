#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "vdet/corpus.hpp"
#include "vdet/model.hpp"
#include "vdet/split.hpp"
#include "vdet/tokenizer.hpp"

namespace vdet {

enum class ClassWeightMode { none, inverse_freq };

/// Token stream a model consumes: the normalized code, or the structure
/// channel with bracket-depth tags (the second ensemble member).
enum class InputView { plain, structure };

std::string_view to_string(ClassWeightMode mode);
std::string_view to_string(InputView view);
ClassWeightMode parse_class_weight_mode(std::string_view name);
InputView parse_input_view(std::string_view name);

struct TrainConfig {
  int epochs = 10;
  int batch_size = 16;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip_norm = 1.0;
  double label_smoothing = 0.1;
  ClassWeightMode class_weight_mode = ClassWeightMode::inverse_freq;
  bool oversample = true;
  std::uint64_t seed = 0;
  int early_stop_patience = 3;  // 0 disables early stopping
  InputView view = InputView::plain;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainingMeta {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_f1 = 0.0;
  std::uint64_t seed = 0;
};

struct ModelCheckpoint {
  Parameters params;  // params.config is the model configuration
  std::string tokenizer_hash;
  TrainConfig train;
  TrainingMeta meta;
};

struct EpochLog {
  int epoch = 0;
  double avg_train_loss = 0.0;
  double val_f1 = 0.0;
};

struct TrainResult {
  ModelCheckpoint checkpoint;
  std::vector<EpochLog> epochs;
  std::vector<double> final_epoch_step_losses;
};

/// Normalizes, applies the view, and encodes one sample.
EncodeResult encode_sample(const CodeSample& sample, const BpeModel& bpe, InputView view,
                           int max_len);

/// w_k = N / (K * N_k) for inverse_freq, (1, 1) for none.
std::array<double, 2> compute_class_weights(std::array<std::size_t, 2> counts, ClassWeightMode mode);

/// Indices into `labels` after duplicating minority-class items until both
/// classes have equal counts, then shuffling with the seed.
std::vector<std::size_t> oversample_indices(const std::vector<int>& labels, std::uint64_t seed);
std::vector<CodeSample> oversample(const std::vector<CodeSample>& samples, std::uint64_t seed);

/// Model probabilities of class 1 for encoded sequences (dropout off).
std::vector<double> predict_sequences(const Parameters& params,
                                      const std::vector<std::vector<int>>& sequences,
                                      std::size_t batch_size = 32);

TrainResult train(const DatasetManifest& manifest, const SplitAssignment& assignment,
                  const BpeModel& bpe, const ModelConfig& model_config,
                  const TrainConfig& train_config);

/// loss_per_epoch.csv and loss_final_epoch.csv.
void write_loss_logs(const std::string& dir, const TrainResult& result,
                     const std::string& prefix = "");

std::string serialize_checkpoint(const ModelCheckpoint& checkpoint);
ModelCheckpoint deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const std::string& path, const ModelCheckpoint& checkpoint);
ModelCheckpoint load_checkpoint(const std::string& path);

}  // namespace vdet
