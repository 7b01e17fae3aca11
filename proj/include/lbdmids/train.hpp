#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lbdmids/data.hpp"
#include "lbdmids/linalg.hpp"
#include "lbdmids/nn.hpp"

namespace lbdmids {

struct ModelConfig {
    Variant variant = Variant::stacked;
    std::vector<std::size_t> layer_cells;
    std::size_t epochs = 1;
    double learning_rate = 0.001;
    std::size_t timesteps = 10;
    std::size_t batch_size = 256;
    std::uint64_t seed = 42;
    std::optional<double> clip_global_norm;            // disabled when unset
    std::optional<std::size_t> early_stop_patience = 5; // unset disables early stopping
};

// Hyperparameters per dataset/variant pair; batch_size, timesteps, patience
// and seed keep their defaults.
ModelConfig preset_config(const std::string& dataset, Variant variant);

// All violations at once, empty when valid.
std::vector<std::string> validate_config(const ModelConfig& config);
void require_valid(const ModelConfig& config); // throws ConfigError listing every violation

struct EpochStats {
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

using EpochHistory = std::vector<EpochStats>;

struct TrainedModel {
    LstmParams params;
    ModelConfig config;
    ColumnStats stats; // normalization applied to the training data
    std::vector<std::string> class_names;
    std::string schema_name;
    EpochHistory history;
};

// Minibatch Adam over seeded shuffles of the training windows, one history
// entry per completed epoch, early stopping on validation loss, and the
// best-validation-loss parameters in the returned model. Bitwise
// deterministic for a fixed config and seed, independent of LBDMIDS_THREADS.
TrainedModel train(const PreprocessedDataset& train_set, const PreprocessedDataset& val_set,
                   const ModelConfig& config);

struct Predictions {
    std::vector<std::size_t> labels;
    Matrix probabilities; // windows x classes, rows sum to 1
};

// `windows` must already carry the model's normalization (the preprocess
// stage writes normalized tensors).
Predictions predict(const TrainedModel& model, const Tensor3& windows);
// Same, but applies the model's stored ColumnStats to raw feature values first.
Predictions predict_raw(const TrainedModel& model, const Tensor3& raw_windows);

void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

std::string history_csv(const EpochHistory& history);

// LBDMIDS_THREADS when set, else hardware concurrency; at least 1.
std::size_t worker_threads();

} // namespace lbdmids
