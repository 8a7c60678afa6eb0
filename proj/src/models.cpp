#include "memnet/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace memnet::models {

using ad::Matrix;
using ad::Tape;
using ad::Var;
using ad::Vector;
using corpus::ClozeInstance;
using corpus::EmbeddingTable;
using corpus::Vocabulary;
using corpus::WindowSet;

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kVanilla: return "vanilla";
    case Variant::kPointer: return "pointer";
    case Variant::kAttentionFeat: return "attention-feat";
    case Variant::kAttentionFeatOnly: return "attention-feat-only";
    case Variant::kBestWindow: return "best-window";
    case Variant::kQueryOnly: return "query-only";
  }
  throw std::logic_error("variant_name: bad variant");
}

Variant variant_from_name(const std::string& name) {
  for (Variant v : {Variant::kVanilla, Variant::kPointer, Variant::kAttentionFeat,
                    Variant::kAttentionFeatOnly, Variant::kBestWindow, Variant::kQueryOnly})
    if (variant_name(v) == name) return v;
  throw std::invalid_argument("unknown variant '" + name + "'");
}

void MemNetConfig::validate() const {
  if (hops < 1) throw std::invalid_argument("MemNetConfig.hops: must be >= 1");
  if (dim < 1) throw std::invalid_argument("MemNetConfig.dim: must be >= 1");
  if (radius < 0) throw std::invalid_argument("MemNetConfig.radius: must be >= 0");
  if (memory_size < 1) throw std::invalid_argument("MemNetConfig.memory_size: must be >= 1");
}

int MemNetConfig::feature_dim(int num_labels) const {
  switch (variant) {
    case Variant::kVanilla:
    case Variant::kBestWindow: return 4 * dim;
    case Variant::kAttentionFeat: return 4 * dim + num_labels;
    case Variant::kAttentionFeatOnly: return num_labels;
    case Variant::kQueryOnly: return dim;
    case Variant::kPointer: return 0;
  }
  throw std::logic_error("feature_dim: bad variant");
}

ModelParams init_params(const MemNetConfig& cfg, const Vocabulary& vocab, Rng& rng,
                        const EmbeddingTable* pretrained, bool pretrained_out) {
  cfg.validate();
  const int v = vocab.num_tokens();
  const int c = vocab.num_labels();
  const int d = cfg.dim;
  if (cfg.needs_output_layer() && c < 1)
    throw std::invalid_argument("init_params: classifier variants need a non-empty label space");
  if (pretrained && pretrained->dim != 0 && pretrained->dim != d)
    throw std::invalid_argument("init_params: pretrained dimension " +
                                std::to_string(pretrained->dim) + " does not match model dim " +
                                std::to_string(d));

  auto fill = [&](Matrix& m, const EmbeddingTable* table) {
    m.resize(v, d);
    for (int i = 0; i < v; ++i) {
      const Eigen::VectorXd* vec = table ? table->find(vocab.token_text(i)) : nullptr;
      if (vec) {
        m.row(i) = vec->transpose();
      } else {
        for (int j = 0; j < d; ++j) m(i, j) = rng.uniform(-0.1, 0.1);
      }
    }
  };

  ModelParams params;
  fill(params.embed_in, pretrained);
  fill(params.embed_out, pretrained_out ? pretrained : nullptr);
  if (cfg.needs_output_layer()) {
    params.weights = Matrix::Zero(c, cfg.feature_dim(c));
    params.bias = Matrix::Zero(c, 1);
  }
  return params;
}

Var encode_tokens(Tape& tape, Var embedding, std::span<const int> tokens) {
  std::vector<Var> rows;
  rows.reserve(tokens.size());
  for (int t : tokens) rows.push_back(tape.row(embedding, t));
  return tape.mean_rows(rows);
}

Var attend(Tape& tape, Var q, std::span<const Var> window_encodings) {
  std::vector<Var> sims;
  sims.reserve(window_encodings.size());
  for (Var p : window_encodings) sims.push_back(tape.cosine(q, p));
  return tape.softmax(tape.concat(sims));
}

Var aggregate(Tape& tape, Var alpha, std::span<const Var> output_encodings) {
  return tape.weighted_sum(alpha, output_encodings);
}

Var hop_update(Tape& tape, Var q, Var o) { return tape.add(q, o); }

Var interaction_features(Tape& tape, Var o, Var q) {
  return tape.concat(std::vector<Var>{o, q, tape.add(o, q), tape.hadamard(o, q)});
}

Vector attention_feature(const Vector& alpha, std::span<const int> window_labels, int num_labels) {
  if (alpha.size() == 0 || static_cast<std::size_t>(alpha.size()) != window_labels.size())
    throw std::invalid_argument("attention_feature: label/window count mismatch");
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < alpha.size(); ++j)
    if (alpha(j) > alpha(best)) best = j;
  Vector phi = Vector::Zero(num_labels);
  const int label = window_labels[static_cast<std::size_t>(best)];
  if (label >= 0 && label < num_labels) phi(label) = 1.0;
  return phi;
}

namespace {

Vector to_vector(const Matrix& m) { return m.col(0); }

Eigen::Index argmax_first(const Vector& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return best;
}

std::set<std::string> candidate_set(const std::optional<std::vector<std::string>>& candidates) {
  std::set<std::string> out;
  if (candidates)
    for (const auto& c : *candidates) out.insert(corpus::normalize(c));
  return out;
}

// argmax over logits, restricted to the candidate labels when any resolve;
// ties break to the lowest label id
void resolve_classifier_prediction(ForwardTrace& trace, const Vocabulary& vocab,
                                   const std::optional<std::vector<std::string>>& candidates) {
  const Vector& logits = trace.logits;
  std::vector<int> eligible;
  if (candidates) {
    std::set<int> ids;
    for (const auto& c : *candidates) {
      const int id = vocab.label_id(corpus::normalize(c));
      if (id >= 0) ids.insert(id);
    }
    eligible.assign(ids.begin(), ids.end());
  }
  if (eligible.empty()) {
    eligible.resize(static_cast<std::size_t>(logits.size()));
    for (std::size_t i = 0; i < eligible.size(); ++i) eligible[i] = static_cast<int>(i);
  }
  int best = eligible[0];
  for (int id : eligible)
    if (logits(id) > logits(best)) best = id;
  trace.predicted_label = best;
  trace.predicted = vocab.label_text(best);
}

}  // namespace

Forward forward(Tape& tape, const ModelParams& params, const MemNetConfig& cfg,
                const WindowSet& ws, const Vocabulary& vocab,
                const std::optional<std::vector<std::string>>& candidates,
                const std::string* gold_answer) {
  cfg.validate();
  Forward out;
  Var e_in = tape.param(params.embed_in);
  Var q = encode_tokens(tape, e_in, ws.query_tokens);

  auto classifier_loss = [&](Var probs) {
    if (!gold_answer) return;
    const int gold = vocab.label_id(corpus::normalize(*gold_answer));
    if (gold >= 0) out.loss = tape.cross_entropy(probs, gold);
  };

  if (cfg.variant == Variant::kQueryOnly) {
    Var logits = tape.linear(tape.param(params.weights), q, tape.param(params.bias));
    Var probs = tape.softmax(logits);
    out.trace.q.push_back(to_vector(tape.value(q)));
    out.trace.logits = to_vector(tape.value(logits));
    resolve_classifier_prediction(out.trace, vocab, candidates);
    classifier_loss(probs);
    return out;
  }

  if (ws.windows.empty()) throw std::runtime_error("no candidates");
  Var e_out = tape.param(params.embed_out);
  std::vector<Var> window_in, window_out;
  window_in.reserve(ws.windows.size());
  window_out.reserve(ws.windows.size());
  for (const auto& w : ws.windows) {
    window_in.push_back(encode_tokens(tape, e_in, w.tokens));
    if (cfg.key_value) {
      const std::span<const int> entity(w.tokens.data() + w.entity_offset,
                                        static_cast<std::size_t>(w.entity_len));
      window_out.push_back(encode_tokens(tape, e_out, entity));
    } else {
      window_out.push_back(encode_tokens(tape, e_out, w.tokens));
    }
  }

  Var query_h = q;
  Var alpha, o;
  for (int h = 0; h < cfg.hops; ++h) {
    alpha = attend(tape, query_h, window_in);
    o = aggregate(tape, alpha, window_out);
    out.trace.q.push_back(to_vector(tape.value(query_h)));
    out.trace.alpha.push_back(to_vector(tape.value(alpha)));
    out.trace.o.push_back(to_vector(tape.value(o)));
    if (h + 1 < cfg.hops) query_h = hop_update(tape, query_h, o);
  }
  const Vector& alpha_final = out.trace.alpha.back();
  const Eigen::Index best_window = argmax_first(alpha_final);
  out.trace.max_alpha = alpha_final(best_window);

  if (cfg.variant == Variant::kPointer) {
    // candidate groups by first occurrence; per-candidate probability is the
    // attention mass summed over that candidate's windows
    std::map<std::string, int> group_of;
    std::vector<std::string> group_entity;
    std::vector<int> window_group(ws.windows.size());
    for (std::size_t j = 0; j < ws.windows.size(); ++j) {
      auto [it, fresh] = group_of.try_emplace(ws.windows[j].entity,
                                              static_cast<int>(group_entity.size()));
      if (fresh) group_entity.push_back(ws.windows[j].entity);
      window_group[j] = it->second;
    }
    Var sums = tape.segment_sum(alpha, window_group, static_cast<int>(group_entity.size()));
    const Vector sum_values = to_vector(tape.value(sums));
    for (std::size_t g = 0; g < group_entity.size(); ++g)
      out.trace.candidate_probs.emplace_back(group_entity[g], sum_values(static_cast<Eigen::Index>(g)));

    // prediction follows the max-attention window, restricted to candidates
    const std::set<std::string> cands = candidate_set(candidates);
    Eigen::Index best_eligible = -1;
    for (std::size_t j = 0; j < ws.windows.size(); ++j) {
      if (!cands.empty() && !cands.count(ws.windows[j].entity)) continue;
      if (best_eligible < 0 || alpha_final(static_cast<Eigen::Index>(j)) > alpha_final(best_eligible))
        best_eligible = static_cast<Eigen::Index>(j);
    }
    if (best_eligible < 0) best_eligible = best_window;
    out.trace.predicted = ws.windows[static_cast<std::size_t>(best_eligible)].entity;
    out.trace.predicted_label = vocab.label_id(out.trace.predicted);
    out.trace.pointer_argmax_mismatch =
        group_entity[static_cast<std::size_t>(argmax_first(sum_values))] !=
        ws.windows[static_cast<std::size_t>(best_window)].entity;

    if (gold_answer) {
      auto it = group_of.find(corpus::normalize(*gold_answer));
      if (it != group_of.end()) out.loss = tape.cross_entropy(sums, it->second);
    }
    return out;
  }

  // classifier heads
  Var head_o = o;
  if (cfg.variant == Variant::kBestWindow) head_o = window_out[static_cast<std::size_t>(best_window)];

  Var features;
  if (cfg.variant == Variant::kAttentionFeat || cfg.variant == Variant::kAttentionFeatOnly) {
    std::vector<int> labels;
    labels.reserve(ws.windows.size());
    for (const auto& w : ws.windows) labels.push_back(w.label_id);
    out.trace.phi = attention_feature(alpha_final, labels, vocab.num_labels());
    out.trace.phi_out_of_space = out.trace.phi.isZero(0.0);
    Matrix phi_m(out.trace.phi.size(), 1);
    phi_m.col(0) = out.trace.phi;
    Var phi = tape.input(std::move(phi_m));
    if (cfg.variant == Variant::kAttentionFeat)
      features = tape.concat(std::vector<Var>{head_o, query_h, tape.add(head_o, query_h),
                                              tape.hadamard(head_o, query_h), phi});
    else
      features = phi;
  } else {
    features = interaction_features(tape, head_o, query_h);
  }

  Var logits = tape.linear(tape.param(params.weights), features, tape.param(params.bias));
  Var probs = tape.softmax(logits);
  out.trace.logits = to_vector(tape.value(logits));
  resolve_classifier_prediction(out.trace, vocab, candidates);
  classifier_loss(probs);
  return out;
}

namespace {

// distinct entity strings in first-occurrence order, restricted to the
// candidate list when present
std::vector<std::string> prediction_pool(const ClozeInstance& inst) {
  const std::set<std::string> cands = candidate_set(inst.candidates);
  std::vector<std::string> pool;
  std::set<std::string> seen;
  for (const auto& e : inst.entities) {
    if (!cands.empty() && !cands.count(e.text)) continue;
    if (seen.insert(e.text).second) pool.push_back(e.text);
  }
  if (pool.empty() && inst.candidates) {
    for (const auto& c : *inst.candidates) {
      const std::string cn = corpus::normalize(c);
      if (seen.insert(cn).second) pool.push_back(cn);
    }
  }
  return pool;
}

double cosine_or_zero(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace

std::string baseline_random(const ClozeInstance& inst, std::uint64_t seed) {
  const std::vector<std::string> pool = prediction_pool(inst);
  if (pool.empty()) throw std::runtime_error("baseline_random: instance has no entities");
  Rng rng(seed ^ fnv1a(inst.id));
  return pool[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
}

std::string baseline_maxfreq(const ClozeInstance& inst) {
  const std::vector<std::string> pool = prediction_pool(inst);
  if (pool.empty()) throw std::runtime_error("baseline_maxfreq: instance has no entities");
  std::map<std::string, int> freq;
  std::map<std::string, int> first_at;
  for (const auto& e : inst.entities) {
    ++freq[e.text];
    first_at.try_emplace(e.text, e.start);
  }
  std::string best;
  int best_count = -1, best_first = std::numeric_limits<int>::max();
  for (const auto& text : pool) {
    const int count = freq.count(text) ? freq.at(text) : 0;
    const int first = first_at.count(text) ? first_at.at(text) : std::numeric_limits<int>::max();
    if (count > best_count || (count == best_count && first < best_first)) {
      best = text;
      best_count = count;
      best_first = first;
    }
  }
  return best;
}

std::string baseline_simwindow(const ClozeInstance& inst, const EmbeddingTable& embeddings,
                               int radius) {
  if (inst.entities.empty()) throw std::runtime_error("baseline_simwindow: instance has no entities");
  const int dim = std::max(embeddings.dim, 1);
  auto span_vector = [&](const std::vector<std::string>& toks, int from, int to, int skip) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim);
    int n = 0;
    for (int pos = from; pos <= to; ++pos) {
      if (pos < 0 || pos >= static_cast<int>(toks.size()) || pos == skip) continue;
      ++n;
      if (const Eigen::VectorXd* v = embeddings.find(toks[static_cast<std::size_t>(pos)])) acc += *v;
    }
    if (n > 0) acc /= n;
    return acc;
  };

  const int gap = inst.gap_index();
  const Eigen::VectorXd query_vec = span_vector(inst.query, gap - radius, gap + radius, gap);

  const std::set<std::string> cands = candidate_set(inst.candidates);
  double best_sim = -std::numeric_limits<double>::infinity();
  const std::string* best_entity = nullptr;
  for (const auto& e : inst.entities) {
    if (!cands.empty() && !cands.count(e.text)) continue;
    const Eigen::VectorXd w = span_vector(inst.passage, e.start - radius, e.end + radius, -1);
    const double sim = cosine_or_zero(query_vec, w);
    if (sim > best_sim) {
      best_sim = sim;
      best_entity = &e.text;
    }
  }
  if (!best_entity) best_entity = &inst.entities.front().text;
  return *best_entity;
}

}  // namespace memnet::models
