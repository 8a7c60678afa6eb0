#include "memnet/serialize.hpp"

namespace memnet::models {

void to_json(nlohmann::json& j, const MemNetConfig& c) {
  j = nlohmann::json{{"variant", variant_name(c.variant)},
                     {"anonymized", c.anonymized},
                     {"hops", c.hops},
                     {"dim", c.dim},
                     {"radius", c.radius},
                     {"memory_size", c.memory_size},
                     {"key_value", c.key_value},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, MemNetConfig& c) {
  if (j.contains("variant")) c.variant = variant_from_name(j.at("variant").get<std::string>());
  if (j.contains("anonymized")) c.anonymized = j.at("anonymized").get<bool>();
  if (j.contains("hops")) c.hops = j.at("hops").get<int>();
  if (j.contains("dim")) c.dim = j.at("dim").get<int>();
  if (j.contains("radius")) c.radius = j.at("radius").get<int>();
  if (j.contains("memory_size")) c.memory_size = j.at("memory_size").get<int>();
  if (j.contains("key_value")) c.key_value = j.at("key_value").get<bool>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace memnet::models

namespace memnet::train {

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"lr", c.lr},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"epsilon", c.epsilon},
                     {"grid_lr", c.grid_lr},
                     {"grid_dim", c.grid_dim},
                     {"grid_hops", c.grid_hops},
                     {"seed", c.seed},
                     {"selection", metric_name(c.selection)},
                     {"min_count", c.min_count}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("lr")) c.lr = j.at("lr").get<double>();
  if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
  if (j.contains("beta1")) c.beta1 = j.at("beta1").get<double>();
  if (j.contains("beta2")) c.beta2 = j.at("beta2").get<double>();
  if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
  if (j.contains("grid_lr")) c.grid_lr = j.at("grid_lr").get<std::vector<double>>();
  if (j.contains("grid_dim")) c.grid_dim = j.at("grid_dim").get<std::vector<int>>();
  if (j.contains("grid_hops")) c.grid_hops = j.at("grid_hops").get<std::vector<int>>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("selection")) c.selection = metric_from_name(j.at("selection").get<std::string>());
  if (j.contains("min_count")) c.min_count = j.at("min_count").get<int>();
}

}  // namespace memnet::train

namespace memnet::corpus {

void to_json(nlohmann::json& j, const SyntheticConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size},
                     {"entity_pool", c.entity_pool},
                     {"entities_per_passage", c.entities_per_passage},
                     {"radius", c.radius},
                     {"distractor_windows", c.distractor_windows},
                     {"overlap", c.overlap},
                     {"unseen_rate", c.unseen_rate},
                     {"noise_rate", c.noise_rate},
                     {"query_cue_rate", c.query_cue_rate},
                     {"seed", c.seed},
                     {"train_size", c.train_size},
                     {"dev_size", c.dev_size},
                     {"test_size", c.test_size}};
}

void from_json(const nlohmann::json& j, SyntheticConfig& c) {
  if (j.contains("vocab_size")) c.vocab_size = j.at("vocab_size").get<int>();
  if (j.contains("entity_pool")) c.entity_pool = j.at("entity_pool").get<int>();
  if (j.contains("entities_per_passage"))
    c.entities_per_passage = j.at("entities_per_passage").get<int>();
  if (j.contains("radius")) c.radius = j.at("radius").get<int>();
  if (j.contains("distractor_windows"))
    c.distractor_windows = j.at("distractor_windows").get<int>();
  if (j.contains("overlap")) c.overlap = j.at("overlap").get<int>();
  if (j.contains("unseen_rate")) c.unseen_rate = j.at("unseen_rate").get<double>();
  if (j.contains("noise_rate")) c.noise_rate = j.at("noise_rate").get<double>();
  if (j.contains("query_cue_rate")) c.query_cue_rate = j.at("query_cue_rate").get<double>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("train_size")) c.train_size = j.at("train_size").get<int>();
  if (j.contains("dev_size")) c.dev_size = j.at("dev_size").get<int>();
  if (j.contains("test_size")) c.test_size = j.at("test_size").get<int>();
}

}  // namespace memnet::corpus

namespace memnet::eval {

void to_json(nlohmann::json& j, const SubsetMetrics& m) {
  j = nlohmann::json{{"em", m.em}, {"f1", m.f1}, {"accuracy", m.accuracy}, {"count", m.count}};
}

void to_json(nlohmann::json& j, const AttentionStats& s) {
  j = nlohmann::json{{"mean_max_alpha", s.mean_max_alpha},
                     {"mean_abs_deviation", s.mean_abs_deviation},
                     {"count", s.count}};
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"overall", r.overall}};
  if (r.seen) j["seen"] = *r.seen;
  if (r.unseen) j["unseen"] = *r.unseen;
  if (r.attention) j["attention"] = *r.attention;
  if (r.pointer_disagreements >= 0) j["pointer_disagreements"] = r.pointer_disagreements;
  nlohmann::json instances = nlohmann::json::array();
  for (const auto& s : r.instances)
    instances.push_back(nlohmann::json{{"id", s.id},
                                       {"prediction", s.prediction},
                                       {"gold", s.gold},
                                       {"em", s.em},
                                       {"f1", s.f1}});
  j["instances"] = std::move(instances);
}

void to_json(nlohmann::json& j, const CompareReport& r) {
  auto delta = [](const MetricDelta& d) {
    return nlohmann::json{{"em", d.em}, {"f1", d.f1}, {"accuracy", d.accuracy}};
  };
  j = nlohmann::json{{"overall", delta(r.overall)},
                     {"flips_a_to_b", r.flips_a_to_b},
                     {"flips_b_to_a", r.flips_b_to_a}};
  if (r.seen) j["seen"] = delta(*r.seen);
  if (r.unseen) j["unseen"] = delta(*r.unseen);
}

}  // namespace memnet::eval
