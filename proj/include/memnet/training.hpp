#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "memnet/ad.hpp"
#include "memnet/corpus.hpp"
#include "memnet/models.hpp"

namespace memnet::train {

struct TrainConfig {
  double lr = 0.001;
  int epochs = 10;
  int batch_size = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<double> grid_lr = {0.01, 0.005, 0.001, 0.0005};
  std::vector<int> grid_dim = {50, 100, 200};
  std::vector<int> grid_hops = {1, 2, 3};
  std::uint64_t seed = 0;
  enum class Metric { kAccuracy, kF1 };
  Metric selection = Metric::kAccuracy;
  int min_count = 1;

  void validate() const;
};

std::string metric_name(TrainConfig::Metric m);
TrainConfig::Metric metric_from_name(const std::string& name);

struct AdamState {
  std::vector<ad::Matrix> m, v;
  long t = 0;
};

// Bias-corrected Adam update in place; state is created lazily on first use.
void adam_step(std::span<ad::Matrix* const> params, std::span<const ad::Matrix> grads,
               AdamState& state, double lr, double beta1 = 0.9, double beta2 = 0.999,
               double epsilon = 1e-8);

struct EpochStats {
  int epoch = 0;          // 1-based
  double train_loss = 0;  // mean instance loss
  double dev_score = 0;   // percent, per the selection metric
};

struct Checkpoint {
  models::MemNetConfig model;
  TrainConfig train;
  corpus::Vocabulary vocab;
  models::ModelParams params;
  std::string rng_state;
  int best_epoch = -1;
  double dev_score = 0.0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochStats> epochs;
  long pointer_disagreements = 0;  // sum-argmax vs window-argmax, over dev passes
};

// Shuffled mini-batches, cross-entropy loss, Adam; keeps the checkpoint with
// the best dev score (earlier epoch on ties).
TrainResult train(const models::MemNetConfig& mcfg, const TrainConfig& tcfg,
                  const corpus::Dataset& train_set, const corpus::Dataset& dev_set,
                  const corpus::EmbeddingTable* pretrained = nullptr,
                  bool pretrained_out = false);

struct GridRow {
  double lr = 0.0;
  int dim = 0;
  int hops = 0;
  double dev_score = 0.0;
  int best_epoch = -1;
};

struct GridResult {
  std::vector<GridRow> rows;  // sorted by dev score, best first
  GridRow best;
};

GridResult grid_search(const models::MemNetConfig& base, const TrainConfig& tcfg,
                       const corpus::Dataset& train_set, const corpus::Dataset& dev_set);

// Self-describing container: magic + version, JSON header (configs, vocab,
// tensor directory), then raw row-major little-endian float64 payloads.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace memnet::train
