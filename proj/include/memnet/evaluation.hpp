#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memnet/corpus.hpp"
#include "memnet/models.hpp"

namespace memnet::eval {

// Both metrics expect normalized strings (lowercase, collapsed whitespace).
int exact_match(const std::string& pred, const std::string& gold);
// SQuAD-style bag-of-tokens F1 against a single gold answer.
double token_f1(const std::string& pred, const std::string& gold);

struct SubsetMetrics {
  double em = 0.0;        // percent
  double f1 = 0.0;        // percent
  double accuracy = 0.0;  // percent; exact match for entity answers
  int count = 0;
};

struct InstanceScore {
  std::string id;
  std::string prediction;
  std::string gold;
  int em = 0;
  double f1 = 0.0;
};

struct AttentionStats {
  double mean_max_alpha = 0.0;
  // mean absolute deviation of the per-instance maxima around their mean
  double mean_abs_deviation = 0.0;
  int count = 0;
};

AttentionStats attention_stats_from_maxima(std::span<const double> maxima);
// Uses the final hop's attention of each trace; traces without windows are skipped.
AttentionStats attention_stats(std::span<const models::ForwardTrace> traces);

struct EvalReport {
  SubsetMetrics overall;
  std::optional<SubsetMetrics> seen, unseen;  // present when a train set was given
  std::optional<AttentionStats> attention;
  std::vector<InstanceScore> instances;  // dataset order
  long pointer_disagreements = -1;       // -1 when not a pointer run
};

// Scores predictions (id -> predicted entity) against the dataset; a missing
// prediction is an error listing the ids. With a train set, metrics are also
// reported on the seen/unseen answer subsets.
EvalReport evaluate(const std::map<std::string, std::string>& predictions,
                    const corpus::Dataset& dataset, const corpus::Dataset* train = nullptr);

struct MetricDelta {
  double em = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

struct CompareReport {
  MetricDelta overall;  // B minus A
  std::optional<MetricDelta> seen, unseen;
  std::vector<std::string> flips_a_to_b;  // A wrong, B right
  std::vector<std::string> flips_b_to_a;
};

// Requires identical instance id sets.
CompareReport compare_runs(const EvalReport& a, const EvalReport& b);

}  // namespace memnet::eval
