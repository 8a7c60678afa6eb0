#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace memnet::corpus {

inline const std::string kPadToken = "<pad>";
inline const std::string kUnkToken = "<unk>";
inline const std::string kGapToken = "@gap";
inline const std::string kEntityPrefix = "@entity_";

// lowercase + whitespace collapse; the matching normalization used for
// answers, seen-filtering and frequency counting
std::string normalize(const std::string& s);
std::vector<std::string> tokenize(const std::string& s);

// inclusive token span
struct EntitySpan {
  int start = 0;
  int end = 0;
  std::string text;  // normalized entity string
};

struct ClozeInstance {
  std::string id;
  std::vector<std::string> passage;
  std::vector<EntitySpan> entities;  // sorted by start, non-overlapping
  std::vector<std::string> query;    // contains exactly one @gap
  std::string answer;
  std::optional<std::vector<std::string>> candidates;
  // anonymized symbol -> original string; empty unless the instance was anonymized
  std::map<std::string, std::string> entity_map;

  int gap_index() const;
};

using Dataset = std::vector<ClozeInstance>;

// Throws std::runtime_error naming the violated invariant.
void validate(const ClozeInstance& inst);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kGap = 2;

  Vocabulary();
  Vocabulary(std::vector<std::string> tokens, std::vector<std::int64_t> counts,
             std::vector<std::string> labels);

  int token_id(const std::string& tok) const;  // kUnk for unknown tokens
  const std::string& token_text(int id) const;
  int num_tokens() const { return static_cast<int>(tokens_.size()); }

  int label_id(const std::string& label) const;  // -1 for unknown labels
  const std::string& label_text(int id) const;
  int num_labels() const { return static_cast<int>(labels_.size()); }

  std::int64_t count(const std::string& tok) const;

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> tokens_;  // [0..2] reserved
  std::vector<std::int64_t> counts_;
  std::vector<std::string> labels_;
  std::map<std::string, int> token_ids_;
  std::map<std::string, int> label_ids_;
};

// Token vocabulary from passage+query tokens with count >= min_count; the
// answer-label space is every entity string occurring in a training passage.
Vocabulary build_vocab(const Dataset& train, int min_count = 1);

struct Window {
  std::vector<int> tokens;  // 2*radius + entity length, PAD where out of bounds
  int entity_offset = 0;    // position of the entity tokens (== radius)
  int entity_len = 1;
  std::string entity;  // normalized string identity of the candidate
  int label_id = -1;   // answer-space id, -1 if outside the output space
  int span_start = 0;
  int span_end = 0;
};

struct WindowSet {
  std::vector<Window> windows;    // document order, at most memory_size
  std::vector<int> query_tokens;  // radius tokens each side of the gap (gap excluded)
};

WindowSet extract_windows(const ClozeInstance& inst, int radius, int memory_size,
                          const Vocabulary& vocab);

// Entities become @entity_k by order of first occurrence; passage spans are
// rewritten to the single symbol token, query mentions are rewritten by
// longest match, and the symbol->original mapping is recorded on the instance.
ClozeInstance anonymize(const ClozeInstance& inst);

// Maps an anonymized prediction back through the instance's recorded mapping;
// identity for instances without one.
std::string deanonymize_prediction(const ClozeInstance& inst, const std::string& prediction);

// Candidate list = answer + (k-1) distinct non-answer passage entities sampled
// with seed ^ fnv1a(id); deterministic shuffle.
ClozeInstance cap_candidates(const ClozeInstance& inst, int k, std::uint64_t seed);

std::set<std::string> entity_string_set(const Dataset& data);
Dataset filter_seen(const Dataset& test, const Dataset& train);

struct EmbeddingTable {
  int dim = 0;
  std::map<std::string, Eigen::VectorXd> vectors;
  const Eigen::VectorXd* find(const std::string& word) const;
};

struct EmbeddingLoad {
  EmbeddingTable table;
  double coverage = 0.0;  // fraction of non-reserved vocab tokens present
};

// Text format: optional "<count> <dim>" first line, then word + floats.
EmbeddingLoad load_embeddings(const std::string& path, const Vocabulary& vocab);

Dataset read_canonical(const std::string& path);
void write_canonical(const Dataset& data, const std::string& path);

// CBT block format: 20 numbered sentences, line 21 = query TAB answer TAB
// candidates ('|'-separated); the xxxxx placeholder becomes @gap. Instances
// whose answer never occurs in the passage are dropped.
Dataset read_cbt(const std::string& path);

// Field mapping for foreign JSONL corpora. Passage and query fields may be
// token arrays or plain strings (tokenized on read).
// Without an entities field, entity spans are derived from candidate and
// answer occurrences. Instances whose answer never occurs are dropped.
struct AdapterConfig {
  std::string id_field = "id";
  std::string passage_field = "passage";
  std::string query_field = "query";
  std::string answer_field = "answer";
  std::string candidates_field;  // optional
  std::string entities_field;    // optional, [[start,end,string], ...]
  std::string gap_token = "@gap";

  static AdapterConfig from_file(const std::string& path);
};

Dataset read_json_adapted(const std::string& path, const AdapterConfig& adapter);

}  // namespace memnet::corpus
