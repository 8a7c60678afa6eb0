#include "memnet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace memnet::eval {

int exact_match(const std::string& pred, const std::string& gold) {
  return corpus::normalize(pred) == corpus::normalize(gold) ? 1 : 0;
}

double token_f1(const std::string& pred, const std::string& gold) {
  const std::vector<std::string> p = corpus::tokenize(pred);
  const std::vector<std::string> g = corpus::tokenize(gold);
  if (p.empty() || g.empty()) return 0.0;
  std::map<std::string, int> gold_counts;
  for (const auto& t : g) ++gold_counts[t];
  int common = 0;
  for (const auto& t : p) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      ++common;
      --it->second;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

AttentionStats attention_stats_from_maxima(std::span<const double> maxima) {
  if (maxima.empty()) throw std::invalid_argument("attention_stats: no attention traces");
  AttentionStats stats;
  stats.count = static_cast<int>(maxima.size());
  double sum = 0.0;
  for (double m : maxima) sum += m;
  stats.mean_max_alpha = sum / static_cast<double>(maxima.size());
  double dev = 0.0;
  for (double m : maxima) dev += std::abs(m - stats.mean_max_alpha);
  stats.mean_abs_deviation = dev / static_cast<double>(maxima.size());
  return stats;
}

AttentionStats attention_stats(std::span<const models::ForwardTrace> traces) {
  std::vector<double> maxima;
  maxima.reserve(traces.size());
  for (const auto& t : traces)
    if (!t.alpha.empty()) maxima.push_back(t.max_alpha);
  return attention_stats_from_maxima(maxima);
}

namespace {

SubsetMetrics metrics_over(const std::vector<const InstanceScore*>& scores) {
  SubsetMetrics m;
  m.count = static_cast<int>(scores.size());
  if (scores.empty()) return m;
  double em = 0.0, f1 = 0.0;
  for (const InstanceScore* s : scores) {
    em += s->em;
    f1 += s->f1;
  }
  m.em = 100.0 * em / static_cast<double>(scores.size());
  m.f1 = 100.0 * f1 / static_cast<double>(scores.size());
  m.accuracy = m.em;
  return m;
}

}  // namespace

EvalReport evaluate(const std::map<std::string, std::string>& predictions,
                    const corpus::Dataset& dataset, const corpus::Dataset* train) {
  std::vector<std::string> missing;
  for (const auto& inst : dataset)
    if (!predictions.count(inst.id)) missing.push_back(inst.id);
  if (!missing.empty()) {
    std::string msg = "evaluate: missing predictions for";
    for (const auto& id : missing) msg += " " + id;
    throw std::runtime_error(msg);
  }

  EvalReport report;
  report.instances.reserve(dataset.size());
  for (const auto& inst : dataset) {
    InstanceScore s;
    s.id = inst.id;
    s.prediction = corpus::normalize(predictions.at(inst.id));
    s.gold = corpus::normalize(inst.answer);
    s.em = exact_match(s.prediction, s.gold);
    s.f1 = token_f1(s.prediction, s.gold);
    report.instances.push_back(std::move(s));
  }

  std::vector<const InstanceScore*> all;
  for (const auto& s : report.instances) all.push_back(&s);
  report.overall = metrics_over(all);

  if (train) {
    const std::set<std::string> seen_set = corpus::entity_string_set(*train);
    std::vector<const InstanceScore*> seen, unseen;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (seen_set.count(corpus::normalize(dataset[i].answer)))
        seen.push_back(&report.instances[i]);
      else
        unseen.push_back(&report.instances[i]);
    }
    report.seen = metrics_over(seen);
    report.unseen = metrics_over(unseen);
  }
  return report;
}

CompareReport compare_runs(const EvalReport& a, const EvalReport& b) {
  std::map<std::string, const InstanceScore*> by_id;
  for (const auto& s : a.instances) by_id[s.id] = &s;
  if (a.instances.size() != b.instances.size())
    throw std::runtime_error("compare_runs: reports cover different instance sets");
  CompareReport out;
  for (const auto& sb : b.instances) {
    auto it = by_id.find(sb.id);
    if (it == by_id.end())
      throw std::runtime_error("compare_runs: id '" + sb.id + "' missing from the other report");
    const InstanceScore& sa = *it->second;
    if (sa.em == 0 && sb.em == 1) out.flips_a_to_b.push_back(sb.id);
    if (sa.em == 1 && sb.em == 0) out.flips_b_to_a.push_back(sb.id);
  }
  auto delta = [](const SubsetMetrics& ma, const SubsetMetrics& mb) {
    return MetricDelta{mb.em - ma.em, mb.f1 - ma.f1, mb.accuracy - ma.accuracy};
  };
  out.overall = delta(a.overall, b.overall);
  if (a.seen && b.seen && a.seen->count == b.seen->count) out.seen = delta(*a.seen, *b.seen);
  if (a.unseen && b.unseen && a.unseen->count == b.unseen->count)
    out.unseen = delta(*a.unseen, *b.unseen);
  return out;
}

}  // namespace memnet::eval
