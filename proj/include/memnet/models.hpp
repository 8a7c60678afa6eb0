#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "memnet/ad.hpp"
#include "memnet/corpus.hpp"
#include "memnet/util.hpp"

namespace memnet::models {

enum class Variant {
  kVanilla,
  kPointer,
  kAttentionFeat,
  kAttentionFeatOnly,
  kBestWindow,
  kQueryOnly,
};

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct MemNetConfig {
  Variant variant = Variant::kVanilla;
  bool anonymized = false;
  int hops = 1;
  int dim = 100;
  int radius = 2;
  int memory_size = 300;
  bool key_value = false;
  std::uint64_t seed = 0;

  void validate() const;
  bool needs_output_layer() const { return variant != Variant::kPointer; }
  // width of the output-layer input for this variant (0 for pointer)
  int feature_dim(int num_labels) const;
};

struct ModelParams {
  ad::Matrix embed_in;   // E, |V| x d
  ad::Matrix embed_out;  // E', |V| x d; distinct parameters from E
  ad::Matrix weights;    // W, C x feature_dim; empty for pointer
  ad::Matrix bias;       // b, C x 1; empty for pointer
};

// Embeddings U(-0.1, 0.1) unless pretrained vectors are supplied (E always;
// E' only when pretrained_out). W and b start at zero.
ModelParams init_params(const MemNetConfig& cfg, const corpus::Vocabulary& vocab, Rng& rng,
                        const corpus::EmbeddingTable* pretrained = nullptr,
                        bool pretrained_out = false);

struct ForwardTrace {
  std::vector<ad::Vector> q;      // query per hop
  std::vector<ad::Vector> alpha;  // attention per hop; each sums to 1
  std::vector<ad::Vector> o;      // aggregate per hop
  ad::Vector phi;                 // one-hot attention feature, when used
  ad::Vector logits;              // classifier variants
  std::vector<std::pair<std::string, double>> candidate_probs;  // pointer, sums to 1
  int predicted_label = -1;
  std::string predicted;
  double max_alpha = 0.0;  // final hop
  bool pointer_argmax_mismatch = false;
  bool phi_out_of_space = false;
};

struct Forward {
  ForwardTrace trace;
  ad::Var loss;  // invalid when no gold answer was supplied
};

// Runs one instance through the configured variant. `candidates`, when
// present, restricts the prediction (not the loss) to the listed entities.
// `gold_answer` turns on the training loss.
Forward forward(ad::Tape& tape, const ModelParams& params, const MemNetConfig& cfg,
                const corpus::WindowSet& ws, const corpus::Vocabulary& vocab,
                const std::optional<std::vector<std::string>>& candidates = std::nullopt,
                const std::string* gold_answer = nullptr);

// Building blocks, exposed for direct testing.
ad::Var encode_tokens(ad::Tape& tape, ad::Var embedding, std::span<const int> tokens);
ad::Var attend(ad::Tape& tape, ad::Var q, std::span<const ad::Var> window_encodings);
ad::Var aggregate(ad::Tape& tape, ad::Var alpha, std::span<const ad::Var> output_encodings);
ad::Var hop_update(ad::Tape& tape, ad::Var q, ad::Var o);
// [o; q; o+q; o*q]
ad::Var interaction_features(ad::Tape& tape, ad::Var o, ad::Var q);
// One-hot over the label space at the argmax-attention window's candidate;
// ties break to the lowest window index. All-zero only if that label is
// outside the output space.
ad::Vector attention_feature(const ad::Vector& alpha, std::span<const int> window_labels,
                             int num_labels);

// Non-neural baselines. All restrict to the candidate list when present.
std::string baseline_random(const corpus::ClozeInstance& inst, std::uint64_t seed);
std::string baseline_maxfreq(const corpus::ClozeInstance& inst);
std::string baseline_simwindow(const corpus::ClozeInstance& inst,
                               const corpus::EmbeddingTable& embeddings, int radius);

}  // namespace memnet::models
