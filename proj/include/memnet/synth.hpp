#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memnet/corpus.hpp"

namespace memnet::corpus {

// Desk-scale cloze-task generator. Each passage is a row of context windows,
// one holding the answer entity; the answer window's context shares `overlap`
// tokens with the query context. Test answers are drawn from a reserved
// entity pool at `unseen_rate`. `query_cue_rate` injects a query token derived
// from the answer, making the answer predictable from the query alone.
struct SyntheticConfig {
  int vocab_size = 200;          // content token pool
  int entity_pool = 100;         // distinct entity strings (shared + reserved-unseen)
  int entities_per_passage = 6;  // distinct entities per instance
  int radius = 2;                // window radius b
  int distractor_windows = 5;    // non-answer windows per passage
  int overlap = 4;               // shared query/answer-window context tokens, <= 2*radius
  double unseen_rate = 0.0;      // test-split answers outside the training entity set
  double noise_rate = 0.0;       // per-token context corruption
  double query_cue_rate = 0.0;   // query-answer correlation strength
  std::uint64_t seed = 0;
  int train_size = 100;
  int dev_size = 20;
  int test_size = 50;

  void validate() const;  // throws naming the offending field
};

struct SynthInstanceMeta {
  std::string id;
  int evidence_entity_index = 0;  // window holding the gold evidence, document order
  bool unseen_answer = false;
};

struct SynthOutput {
  Dataset train, dev, test;
  std::vector<SynthInstanceMeta> meta;     // generation order over all splits
  std::vector<std::string> unseen_answers; // distinct, sorted
};

SynthOutput generate_synthetic(const SyntheticConfig& config);

}  // namespace memnet::corpus
