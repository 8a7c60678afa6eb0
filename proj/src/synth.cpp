#include "memnet/synth.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "memnet/util.hpp"

namespace memnet::corpus {

namespace {

std::string padded(const std::string& prefix, int i, int width = 4) {
  std::string num = std::to_string(i);
  if (static_cast<int>(num.size()) < width) num.insert(0, static_cast<std::size_t>(width) - num.size(), '0');
  return prefix + num;
}

int reserved_unseen(const SyntheticConfig& c) {
  if (c.unseen_rate <= 0.0) return 0;
  return std::max(1, c.entity_pool / 4);
}

}  // namespace

void SyntheticConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("SyntheticConfig." + field + ": " + why);
  };
  if (vocab_size < 1) fail("vocab_size", "must be positive");
  if (entity_pool < 1) fail("entity_pool", "must be positive");
  if (entities_per_passage < 1) fail("entities_per_passage", "must be positive");
  if (radius < 1) fail("radius", "must be positive");
  if (distractor_windows < 0) fail("distractor_windows", "must be non-negative");
  if (entities_per_passage > 1 && distractor_windows < entities_per_passage - 1)
    fail("distractor_windows", "need at least entities_per_passage - 1 to place every entity");
  if (entities_per_passage == 1 && distractor_windows > 0)
    fail("distractor_windows", "no non-answer entities available to fill distractor windows");
  if (overlap < 0 || overlap > 2 * radius) fail("overlap", "must lie in [0, 2*radius]");
  if (unseen_rate < 0.0 || unseen_rate > 1.0) fail("unseen_rate", "must lie in [0,1]");
  if (noise_rate < 0.0 || noise_rate > 1.0) fail("noise_rate", "must lie in [0,1]");
  if (query_cue_rate < 0.0 || query_cue_rate > 1.0) fail("query_cue_rate", "must lie in [0,1]");
  if (train_size < 1) fail("train_size", "must be positive");
  if (dev_size < 1) fail("dev_size", "must be positive");
  if (test_size < 1) fail("test_size", "must be positive");
  const int shared = entity_pool - reserved_unseen(*this);
  if (entities_per_passage > shared)
    fail("entity_pool", "too small to satisfy distinctness constraints (" +
                            std::to_string(shared) + " usable entities, " +
                            std::to_string(entities_per_passage) + " needed per passage)");
}

SynthOutput generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  Rng rng(config.seed);

  std::vector<std::string> shared_pool, unseen_pool;
  const int unseen_n = reserved_unseen(config);
  for (int i = 0; i < config.entity_pool - unseen_n; ++i) shared_pool.push_back(padded("ent", i));
  for (int i = config.entity_pool - unseen_n; i < config.entity_pool; ++i)
    unseen_pool.push_back(padded("ent", i));

  std::vector<std::string> content;
  for (int i = 0; i < config.vocab_size; ++i) content.push_back(padded("w", i));

  auto random_content = [&]() {
    return content[static_cast<std::size_t>(rng.uniform_int(0, config.vocab_size - 1))];
  };

  SynthOutput out;
  std::set<std::string> unseen_used;
  const int b = config.radius;
  const int ctx = 2 * b;

  // answers for dev/test must occur in the generated train split, so the
  // seen/unseen bookkeeping is exact; filled after train generation
  std::vector<std::string> train_seen_pool;

  auto make_instance = [&](const std::string& split, int index, bool allow_unseen) {
    ClozeInstance inst;
    inst.id = "synth-" + split + "-" + padded("", index);

    const bool unseen = allow_unseen && rng.uniform() < config.unseen_rate;
    std::string answer;
    if (unseen) {
      answer = unseen_pool[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(unseen_pool.size()) - 1))];
      unseen_used.insert(answer);
    } else {
      const std::vector<std::string>& pool = train_seen_pool.empty() ? shared_pool : train_seen_pool;
      answer = pool[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
    }

    // distinct non-answer entities via partial shuffle of the shared pool
    std::vector<std::string> others;
    {
      std::vector<std::size_t> idx(shared_pool.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      const int need = config.entities_per_passage - 1;
      int taken = 0;
      for (std::size_t i = 0; i < idx.size() && taken < need; ++i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(
            static_cast<std::int64_t>(i), static_cast<std::int64_t>(idx.size()) - 1));
        std::swap(idx[i], idx[j]);
        if (shared_pool[idx[i]] == answer) continue;
        others.push_back(shared_pool[idx[i]]);
        ++taken;
      }
      if (taken < need)
        throw std::runtime_error("generate_synthetic: entity pool exhausted for " + inst.id);
    }

    const int groups = 1 + config.distractor_windows;
    const int answer_at = static_cast<int>(rng.uniform_int(0, groups - 1));

    std::vector<std::string> answer_ctx(static_cast<std::size_t>(ctx));
    for (auto& t : answer_ctx) t = random_content();

    auto noisy = [&](std::string t) {
      if (config.noise_rate > 0.0 && rng.uniform() < config.noise_rate) return random_content();
      return t;
    };

    int used_distractors = 0;
    for (int g = 0; g < groups; ++g) {
      std::vector<std::string> group_ctx(static_cast<std::size_t>(ctx));
      std::string entity;
      if (g == answer_at) {
        entity = answer;
        for (int i = 0; i < ctx; ++i) group_ctx[static_cast<std::size_t>(i)] = noisy(answer_ctx[static_cast<std::size_t>(i)]);
      } else {
        entity = others[static_cast<std::size_t>(used_distractors) % others.size()];
        ++used_distractors;
        for (auto& t : group_ctx) t = noisy(random_content());
      }
      for (int i = 0; i < b; ++i) inst.passage.push_back(group_ctx[static_cast<std::size_t>(i)]);
      const int at = static_cast<int>(inst.passage.size());
      inst.passage.push_back(entity);
      inst.entities.push_back(EntitySpan{at, at, entity});
      for (int i = b; i < ctx; ++i) inst.passage.push_back(group_ctx[static_cast<std::size_t>(i)]);
    }

    std::vector<std::string> query_ctx(static_cast<std::size_t>(ctx));
    for (int i = 0; i < ctx; ++i) {
      query_ctx[static_cast<std::size_t>(i)] =
          i < config.overlap ? answer_ctx[static_cast<std::size_t>(i)] : random_content();
    }
    if (config.query_cue_rate > 0.0 && rng.uniform() < config.query_cue_rate)
      query_ctx[static_cast<std::size_t>(std::min(config.overlap, ctx - 1))] = "cue_" + answer;
    for (auto& t : query_ctx) t = noisy(t);

    for (int i = 0; i < b; ++i) inst.query.push_back(query_ctx[static_cast<std::size_t>(i)]);
    inst.query.push_back(kGapToken);
    for (int i = b; i < ctx; ++i) inst.query.push_back(query_ctx[static_cast<std::size_t>(i)]);

    inst.answer = answer;
    out.meta.push_back(SynthInstanceMeta{inst.id, answer_at, unseen});
    return inst;
  };

  for (int i = 0; i < config.train_size; ++i) out.train.push_back(make_instance("train", i, false));
  {
    const std::set<std::string> used = entity_string_set(out.train);
    train_seen_pool.assign(used.begin(), used.end());
  }
  for (int i = 0; i < config.dev_size; ++i) out.dev.push_back(make_instance("dev", i, false));
  for (int i = 0; i < config.test_size; ++i) out.test.push_back(make_instance("test", i, true));

  out.unseen_answers.assign(unseen_used.begin(), unseen_used.end());
  return out;
}

}  // namespace memnet::corpus
