#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "memnet/models.hpp"
#include "memnet/synth.hpp"

using namespace memnet;
using namespace memnet::models;
using ad::Matrix;
using ad::Tape;
using ad::Var;
using ad::Vector;
using corpus::ClozeInstance;
using corpus::EntitySpan;
using corpus::Vocabulary;
using corpus::WindowSet;

namespace {

// two windows with distinct contexts; entity strings are the labels
ClozeInstance toy_instance() {
  ClozeInstance inst;
  inst.id = "toy";
  inst.passage = {"l2", "l1", "apple", "r1", "r2", "m2", "m1", "pear", "s1", "s2"};
  inst.entities = {EntitySpan{2, 2, "apple"}, EntitySpan{7, 7, "pear"}};
  inst.query = {"l2", "l1", corpus::kGapToken, "r1", "r2"};
  inst.answer = "apple";
  return inst;
}

ClozeInstance identical_windows_instance(int n) {
  ClozeInstance inst;
  inst.id = "uniform";
  for (int i = 0; i < n; ++i)
    for (const char* t : {"x", "y", "e", "y", "x"}) inst.passage.push_back(t);
  for (int i = 0; i < n; ++i) {
    const int at = 5 * i + 2;
    inst.entities.push_back(EntitySpan{at, at, "e"});
  }
  inst.query = {"x", "y", corpus::kGapToken, "y", "x"};
  inst.answer = "e";
  return inst;
}

struct Fixture {
  ClozeInstance inst;
  Vocabulary vocab;
  MemNetConfig cfg;
  ModelParams params;
  WindowSet ws;

  explicit Fixture(ClozeInstance i, Variant variant = Variant::kVanilla, int hops = 1,
                   bool key_value = false, std::uint64_t seed = 42, int dim = 4,
                   int memory_size = 300)
      : inst(std::move(i)), vocab(corpus::build_vocab({inst}, 1)) {
    cfg.variant = variant;
    cfg.hops = hops;
    cfg.dim = dim;
    cfg.radius = 2;
    cfg.memory_size = memory_size;
    cfg.key_value = key_value;
    cfg.seed = seed;
    Rng rng(seed);
    params = init_params(cfg, vocab, rng);
    ws = corpus::extract_windows(inst, cfg.radius, cfg.memory_size, vocab);
  }
};

}  // namespace

TEST_CASE("encode_tokens") {
  Fixture f(toy_instance());
  Tape tape;
  Var e = tape.param(f.params.embed_in);
  SUBCASE("single token is its embedding row") {
    const int id = f.vocab.token_id("apple");
    const int toks[] = {id};
    Var q = encode_tokens(tape, e, toks);
    CHECK((tape.value(q).col(0).transpose() - f.params.embed_in.row(id)).norm() == 0.0);
  }
  SUBCASE("two tokens average") {
    f.params.embed_in.row(3) << 1, 0, 0, 0;
    f.params.embed_in.row(4) << 0, 1, 0, 0;
    const int toks[] = {3, 4};
    Var q = encode_tokens(tape, e, toks);
    CHECK(tape.value(q)(0, 0) == doctest::Approx(0.5));
    CHECK(tape.value(q)(1, 0) == doctest::Approx(0.5));
  }
  SUBCASE("all unk query maps to the unk embedding") {
    const int toks[] = {Vocabulary::kUnk, Vocabulary::kUnk};
    Var q = encode_tokens(tape, e, toks);
    CHECK((tape.value(q).col(0).transpose() - f.params.embed_in.row(Vocabulary::kUnk)).norm() ==
          0.0);
  }
}

TEST_CASE("encode_windows key_value") {
  Fixture f(toy_instance(), Variant::kVanilla, 1, true);
  Tape tape;
  Forward fwd = forward(tape, f.params, f.cfg, f.ws, f.vocab);
  // with key_value, p' of a single-token entity is that token's E' row; check
  // via best-window equivalence: aggregate over identical p' rows is untested
  // here, instead recompute by hand
  const int apple = f.vocab.token_id("apple");
  Tape t2;
  Var ep = t2.param(f.params.embed_out);
  const int toks[] = {apple};
  Var enc = encode_tokens(t2, ep, toks);
  CHECK((t2.value(enc).col(0).transpose() - f.params.embed_out.row(apple)).norm() == 0.0);
}

TEST_CASE("attend") {
  SUBCASE("two identical windows split attention") {
    Fixture f(identical_windows_instance(2));
    Tape tape;
    Forward fwd = forward(tape, f.params, f.cfg, f.ws, f.vocab);
    REQUIRE(fwd.trace.alpha.size() == 1);
    CHECK(fwd.trace.alpha[0](0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fwd.trace.alpha[0](1) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("cosines 1 and -1") {
    Tape tape;
    Matrix q(2, 1), a(2, 1), b(2, 1);
    q << 1, 0;
    a << 2, 0;
    b << -3, 0;
    Var vq = tape.input(q), va = tape.input(a), vb = tape.input(b);
    Var alpha = attend(tape, vq, std::vector<Var>{va, vb});
    const double e1 = std::exp(1.0), em1 = std::exp(-1.0);
    CHECK(tape.value(alpha)(0, 0) == doctest::Approx(e1 / (e1 + em1)).epsilon(1e-9));
    CHECK(tape.value(alpha)(1, 0) == doctest::Approx(em1 / (e1 + em1)).epsilon(1e-9));
  }
  SUBCASE("n identical windows give max alpha 1/n") {
    for (int n : {3, 300}) {
      Fixture f(identical_windows_instance(n));
      Tape tape;
      Forward fwd = forward(tape, f.params, f.cfg, f.ws, f.vocab);
      CHECK(fwd.trace.max_alpha == doctest::Approx(1.0 / n).epsilon(1e-9));
    }
  }
}

TEST_CASE("hop_update and multi-hop trace") {
  SUBCASE("zero aggregate leaves the query unchanged") {
    Tape tape;
    Matrix q(3, 1), z(3, 1);
    q << 1, 2, 3;
    z.setZero();
    Var next = hop_update(tape, tape.input(q), tape.input(z));
    CHECK((tape.value(next) - q).norm() == 0.0);
  }
  SUBCASE("one hop records a single attention vector") {
    Fixture f(toy_instance(), Variant::kVanilla, 1);
    Tape tape;
    Forward fwd = forward(tape, f.params, f.cfg, f.ws, f.vocab);
    CHECK(fwd.trace.alpha.size() == 1);
    CHECK(fwd.trace.q.size() == 1);
  }
  SUBCASE("two hops match a hand-unrolled computation") {
    Fixture f(toy_instance(), Variant::kVanilla, 2);
    Tape tape;
    Forward fwd = forward(tape, f.params, f.cfg, f.ws, f.vocab);
    REQUIRE(fwd.trace.alpha.size() == 2);

    // hand unroll with plain Eigen
    auto mean_embed = [&](const Matrix& table, const std::vector<int>& toks) {
      Vector acc = Vector::Zero(f.cfg.dim);
      for (int t : toks) acc += table.row(t).transpose();
      return Vector(acc / static_cast<double>(toks.size()));
    };
    auto cos = [](const Vector& a, const Vector& b) {
      const double na = a.norm(), nb = b.norm();
      return (na == 0.0 || nb == 0.0) ? 0.0 : a.dot(b) / (na * nb);
    };
    Vector q0 = mean_embed(f.params.embed_in, f.ws.query_tokens);
    std::vector<Vector> p, pp;
    for (const auto& w : f.ws.windows) {
      p.push_back(mean_embed(f.params.embed_in, w.tokens));
      pp.push_back(mean_embed(f.params.embed_out, w.tokens));
    }
    auto softmax_of = [&](const Vector& x) {
      Vector e = (x.array() - x.maxCoeff()).exp();
      return Vector(e / e.sum());
    };
    Vector sims0(2);
    sims0 << cos(q0, p[0]), cos(q0, p[1]);
    Vector a0 = softmax_of(sims0);
    Vector o0 = a0(0) * pp[0] + a0(1) * pp[1];
    Vector q1 = q0 + o0;
    Vector sims1(2);
    sims1 << cos(q1, p[0]), cos(q1, p[1]);
    Vector a1 = softmax_of(sims1);
    Vector o1 = a1(0) * pp[0] + a1(1) * pp[1];

    CHECK((fwd.trace.q[1] - q1).norm() < 1e-14);
    CHECK((fwd.trace.alpha[1] - a1).norm() < 1e-14);
    CHECK((fwd.trace.o[1] - o1).norm() < 1e-14);
  }
}

TEST_CASE("vanilla output head") {
  SUBCASE("zero weights give a uniform prediction distribution") {
    Fixture f(toy_instance());
    Tape tape;
    Forward fwd = forward(tape, f.params, f.cfg, f.ws, f.vocab);
    REQUIRE(fwd.trace.logits.size() == f.vocab.num_labels());
    CHECK(fwd.trace.logits.isZero(0.0));  // W=0, b=0
  }
  SUBCASE("interaction features for d=1") {
    Tape tape;
    Matrix o(1, 1), q(1, 1);
    o << 2;
    q << 3;
    Var feats = interaction_features(tape, tape.input(o), tape.input(q));
    REQUIRE(tape.value(feats).rows() == 4);
    CHECK(tape.value(feats)(0, 0) == 2.0);
    CHECK(tape.value(feats)(1, 0) == 3.0);
    CHECK(tape.value(feats)(2, 0) == 5.0);
    CHECK(tape.value(feats)(3, 0) == 6.0);
  }
  SUBCASE("argmax invariant to a constant bias shift") {
    Fixture f(toy_instance(), Variant::kVanilla, 1, false, 7);
    Rng rng(99);
    for (int i = 0; i < f.params.weights.size(); ++i)
      f.params.weights.data()[i] = rng.uniform(-1, 1);
    Tape tape;
    Forward a = forward(tape, f.params, f.cfg, f.ws, f.vocab);
    f.params.bias.array() += 3.25;
    Tape tape2;
    Forward b = forward(tape2, f.params, f.cfg, f.ws, f.vocab);
    CHECK(a.trace.predicted_label == b.trace.predicted_label);
  }
}

TEST_CASE("attention_feature") {
  SUBCASE("one hot at the argmax window's label") {
    Vector alpha(3);
    alpha << 0.1, 0.7, 0.2;
    const int labels[] = {0, 2, 0};
    Vector phi = attention_feature(alpha, labels, 4);
    REQUIRE(phi.size() == 4);
    CHECK(phi(2) == 1.0);
    CHECK(phi.sum() == 1.0);
  }
  SUBCASE("single window") {
    Vector alpha(1);
    alpha << 1.0;
    const int labels[] = {3};
    Vector phi = attention_feature(alpha, labels, 5);
    CHECK(phi(3) == 1.0);
  }
  SUBCASE("exact tie goes to the lowest window index") {
    Vector alpha(4);
    alpha << 0.25, 0.25, 0.25, 0.25;
    const int labels[] = {1, 2, 3, 0};
    Vector phi = attention_feature(alpha, labels, 4);
    CHECK(phi(1) == 1.0);
  }
  SUBCASE("out of space label gives a zero feature") {
    Vector alpha(2);
    alpha << 0.9, 0.1;
    const int labels[] = {-1, 0};
    Vector phi = attention_feature(alpha, labels, 2);
    CHECK(phi.isZero(0.0));
  }
}

TEST_CASE("attention-feat variants") {
  SUBCASE("feature width is 4d plus C") {
    Fixture f(toy_instance(), Variant::kAttentionFeat, 1, false, 1, 1);
    CHECK(f.cfg.feature_dim(f.vocab.num_labels()) == 4 * 1 + 2);
    CHECK(f.params.weights.cols() == 6);
    Tape tape;
    CHECK_NOTHROW(forward(tape, f.params, f.cfg, f.ws, f.vocab));
  }
  SUBCASE("feat-only with identity weights reduces to the attention argmax") {
    Fixture f(toy_instance(), Variant::kAttentionFeatOnly);
    const int c = f.vocab.num_labels();
    f.params.weights = Matrix::Identity(c, c);
    Tape tape;
    Forward fwd = forward(tape, f.params, f.cfg, f.ws, f.vocab);
    Eigen::Index best = 0;
    fwd.trace.alpha[0].maxCoeff(&best);
    CHECK(fwd.trace.predicted == f.ws.windows[static_cast<std::size_t>(best)].entity);
  }
  SUBCASE("phi is never all-zero when labels resolve") {
    Fixture f(toy_instance(), Variant::kAttentionFeat);
    Tape tape;
    Forward fwd = forward(tape, f.params, f.cfg, f.ws, f.vocab);
    CHECK_FALSE(fwd.trace.phi_out_of_space);
    CHECK(fwd.trace.phi.sum() == 1.0);
  }
}

TEST_CASE("best_window") {
  Fixture f(toy_instance(), Variant::kBestWindow, 1, false, 3);
  Tape tape;
  Forward fwd = forward(tape, f.params, f.cfg, f.ws, f.vocab);
  // equals aggregate(onehot(argmax alpha), p') exactly: recompute p' and compare
  Eigen::Index best = 0;
  fwd.trace.alpha[0].maxCoeff(&best);
  Tape t2;
  Var ep = t2.param(f.params.embed_out);
  Var sel = encode_tokens(t2, ep, f.ws.windows[static_cast<std::size_t>(best)].tokens);
  // the head consumed p'_best; verify via logits equality with a manual head
  Vector feats(4 * f.cfg.dim);
  const Vector o = t2.value(sel).col(0);
  const Vector q = fwd.trace.q.back();
  feats << o, q, o + q, o.cwiseProduct(q);
  Vector logits = f.params.weights * feats + f.params.bias.col(0);
  CHECK((logits - fwd.trace.logits).norm() < 1e-14);
}

TEST_CASE("pointer") {
  SUBCASE("hand summation") {
    // craft attention by making window 1's context equal the query context
    ClozeInstance inst;
    inst.id = "p";
    inst.passage = {"a", "b", "dog", "c", "d", "q1", "q2", "cat", "q3", "q4",
                    "e", "f", "dog", "g", "h"};
    inst.entities = {EntitySpan{2, 2, "dog"}, EntitySpan{7, 7, "cat"}, EntitySpan{12, 12, "dog"}};
    inst.query = {"q1", "q2", corpus::kGapToken, "q3", "q4"};
    inst.answer = "cat";
    Fixture f(inst, Variant::kPointer, 1, false, 42, 32);
    Tape tape;
    Forward fwd = forward(tape, f.params, f.cfg, f.ws, f.vocab, std::nullopt, &inst.answer);
    REQUIRE(fwd.trace.candidate_probs.size() == 2);  // dog, cat
    double total = 0.0;
    for (const auto& [entity, prob] : fwd.trace.candidate_probs) {
      total += prob;
      CHECK(prob >= 0.0);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fwd.trace.predicted == "cat");  // its window context matches the query
    CHECK(fwd.loss.valid());
    // candidate probability of the prediction = sum over its windows
    const Vector& alpha = fwd.trace.alpha[0];
    double cat_mass = alpha(1);
    for (const auto& [entity, prob] : fwd.trace.candidate_probs)
      if (entity == "cat") CHECK(prob == doctest::Approx(cat_mass).epsilon(1e-12));
  }
  SUBCASE("all windows share one candidate") {
    Fixture f(identical_windows_instance(4), Variant::kPointer);
    Tape tape;
    Forward fwd = forward(tape, f.params, f.cfg, f.ws, f.vocab);
    REQUIRE(fwd.trace.candidate_probs.size() == 1);
    CHECK(fwd.trace.candidate_probs[0].second == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fwd.trace.predicted == "e");
  }
  SUBCASE("prediction is always a passage entity, even when unseen") {
    ClozeInstance inst = toy_instance();
    Vocabulary train_vocab = corpus::build_vocab({identical_windows_instance(2)}, 1);
    // neither apple nor pear is in the label space
    CHECK(train_vocab.label_id("apple") == -1);
    MemNetConfig cfg;
    cfg.variant = Variant::kPointer;
    cfg.dim = 4;
    Rng rng(5);
    ModelParams params = init_params(cfg, train_vocab, rng);
    WindowSet ws = corpus::extract_windows(inst, 2, 300, train_vocab);
    Tape tape;
    Forward fwd = forward(tape, params, cfg, ws, train_vocab);
    CHECK((fwd.trace.predicted == "apple" || fwd.trace.predicted == "pear"));
  }
  SUBCASE("phi argmax agrees with the pointer prediction") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      corpus::SyntheticConfig scfg;
      scfg.train_size = 4;
      scfg.dev_size = 1;
      scfg.test_size = 1;
      scfg.seed = seed;
      corpus::SynthOutput synth = corpus::generate_synthetic(scfg);
      Vocabulary vocab = corpus::build_vocab(synth.train, 1);
      MemNetConfig pointer_cfg, feat_cfg;
      pointer_cfg.variant = Variant::kPointer;
      pointer_cfg.dim = feat_cfg.dim = 8;
      feat_cfg.variant = Variant::kAttentionFeat;
      Rng rng(seed);
      ModelParams pparams = init_params(pointer_cfg, vocab, rng);
      ModelParams fparams = init_params(feat_cfg, vocab, rng);
      fparams.embed_in = pparams.embed_in;  // same attention path
      for (const auto& inst : synth.train) {
        WindowSet ws = corpus::extract_windows(inst, 2, 300, vocab);
        Tape t1, t2;
        Forward pf = forward(t1, pparams, pointer_cfg, ws, vocab);
        fparams.embed_in = pparams.embed_in;
        Forward ff = forward(t2, fparams, feat_cfg, ws, vocab);
        Eigen::Index arg = 0;
        ff.trace.phi.maxCoeff(&arg);
        CHECK(vocab.label_text(static_cast<int>(arg)) == pf.trace.predicted);
      }
    }
  }
}

TEST_CASE("query_only") {
  Fixture f(toy_instance(), Variant::kQueryOnly);
  SUBCASE("identical queries give identical logits") {
    Tape t1, t2;
    Forward a = forward(t1, f.params, f.cfg, f.ws, f.vocab);
    Forward b = forward(t2, f.params, f.cfg, f.ws, f.vocab);
    CHECK((a.trace.logits - b.trace.logits).norm() == 0.0);
    CHECK(a.trace.alpha.empty());
  }
  SUBCASE("zero weights give uniform logits") {
    Tape tape;
    Forward fwd = forward(tape, f.params, f.cfg, f.ws, f.vocab);
    CHECK(fwd.trace.logits.isZero(0.0));
  }
}

TEST_CASE("classifier variants never predict outside the label space") {
  // label space from a different corpus; answer "apple" is unseen
  ClozeInstance inst = toy_instance();
  ClozeInstance other = identical_windows_instance(2);
  Vocabulary vocab = corpus::build_vocab({other}, 1);
  MemNetConfig cfg;
  cfg.dim = 4;
  Rng rng(5);
  ModelParams params = init_params(cfg, vocab, rng);
  WindowSet ws = corpus::extract_windows(inst, 2, 300, vocab);
  Tape tape;
  Forward fwd = forward(tape, params, cfg, ws, vocab);
  CHECK(fwd.trace.predicted == "e");  // the only label
  CHECK_FALSE(fwd.loss.valid());      // even with gold supplied there is no target
}

TEST_CASE("alpha sums to one across variants and hops") {
  corpus::SyntheticConfig scfg;
  scfg.train_size = 6;
  scfg.dev_size = 1;
  scfg.test_size = 1;
  scfg.seed = 77;
  corpus::SynthOutput synth = corpus::generate_synthetic(scfg);
  Vocabulary vocab = corpus::build_vocab(synth.train, 1);
  for (Variant v : {Variant::kVanilla, Variant::kPointer, Variant::kAttentionFeat,
                    Variant::kBestWindow}) {
    for (int hops : {1, 2, 3}) {
      MemNetConfig cfg;
      cfg.variant = v;
      cfg.hops = hops;
      cfg.dim = 6;
      Rng rng(13);
      ModelParams params = init_params(cfg, vocab, rng);
      for (const auto& inst : synth.train) {
        WindowSet ws = corpus::extract_windows(inst, 2, 300, vocab);
        Tape tape;
        Forward fwd = forward(tape, params, cfg, ws, vocab);
        REQUIRE(fwd.trace.alpha.size() == static_cast<std::size_t>(hops));
        for (const auto& alpha : fwd.trace.alpha)
          CHECK(std::abs(alpha.sum() - 1.0) < 1e-9);
      }
    }
  }
}

TEST_CASE("full model gradients pass finite differences") {
  ClozeInstance inst = toy_instance();
  for (Variant v : {Variant::kVanilla, Variant::kPointer, Variant::kAttentionFeat,
                    Variant::kAttentionFeatOnly, Variant::kBestWindow, Variant::kQueryOnly}) {
    Fixture f(inst, v, 2, false, 11);
    // generic nonzero weights, scaled so every live gradient clears the
    // central-difference noise floor
    Rng wr(17);
    for (int i = 0; i < f.params.embed_in.size(); ++i)
      f.params.embed_in.data()[i] = wr.uniform(-0.6, 0.6);
    for (int i = 0; i < f.params.embed_out.size(); ++i)
      f.params.embed_out.data()[i] = wr.uniform(-0.6, 0.6);
    for (int i = 0; i < f.params.weights.size(); ++i)
      f.params.weights.data()[i] = wr.uniform(-0.3, 0.3);

    std::vector<Matrix*> params = {&f.params.embed_in};
    if (v != Variant::kQueryOnly) params.push_back(&f.params.embed_out);
    if (f.cfg.needs_output_layer()) {
      params.push_back(&f.params.weights);
      params.push_back(&f.params.bias);
    }
    auto loss_of = [&]() {
      Tape tape;
      Forward fwd = forward(tape, f.params, f.cfg, f.ws, f.vocab, std::nullopt, &inst.answer);
      REQUIRE(fwd.loss.valid());
      return tape.scalar(fwd.loss);
    };
    Tape tape;
    Forward fwd = forward(tape, f.params, f.cfg, f.ws, f.vocab, std::nullopt, &inst.answer);
    REQUIRE(fwd.loss.valid());
    tape.backward(fwd.loss);
    std::vector<Matrix> analytic;
    for (Matrix* p : params) analytic.push_back(tape.grad(tape.param(*p)));
    const ad::GradCheckReport r = ad::grad_check(loss_of, params, analytic, 1e-5, 23);
    CHECK(r.max_rel_error < 1e-5);
  }
}

TEST_CASE("init_params with pretrained embeddings") {
  ClozeInstance inst = toy_instance();
  Vocabulary vocab = corpus::build_vocab({inst}, 1);
  corpus::EmbeddingTable table;
  table.dim = 4;
  Eigen::VectorXd v(4);
  v << 1, 2, 3, 4;
  table.vectors["apple"] = v;
  MemNetConfig cfg;
  cfg.dim = 4;
  SUBCASE("covered words copy, the rest stay random") {
    Rng rng(3);
    ModelParams p = init_params(cfg, vocab, rng, &table);
    const int apple = vocab.token_id("apple");
    CHECK((p.embed_in.row(apple).transpose() - v).norm() == 0.0);
    CHECK(p.embed_in.row(vocab.token_id("pear")).cwiseAbs().maxCoeff() <= 0.1);
    // E' stays random unless requested
    CHECK((p.embed_out.row(apple).transpose() - v).norm() != 0.0);
    Rng rng2(3);
    ModelParams q = init_params(cfg, vocab, rng2, &table, true);
    CHECK((q.embed_out.row(apple).transpose() - v).norm() == 0.0);
  }
  SUBCASE("dimension mismatch is rejected") {
    cfg.dim = 7;
    Rng rng(3);
    CHECK_THROWS(init_params(cfg, vocab, rng, &table));
  }
}

TEST_CASE("baseline_random") {
  ClozeInstance inst = toy_instance();
  SUBCASE("single entity") {
    ClozeInstance one = identical_windows_instance(3);
    CHECK(baseline_random(one, 5) == "e");
  }
  SUBCASE("deterministic per seed") {
    CHECK(baseline_random(inst, 5) == baseline_random(inst, 5));
  }
  SUBCASE("roughly uniform accuracy over candidates") {
    corpus::SyntheticConfig scfg;
    scfg.entities_per_passage = 10;
    scfg.distractor_windows = 9;
    scfg.train_size = 400;
    scfg.dev_size = 1;
    scfg.test_size = 1;
    scfg.seed = 3;
    corpus::SynthOutput synth = corpus::generate_synthetic(scfg);
    int hits = 0;
    for (const auto& i : synth.train)
      if (baseline_random(i, 123) == corpus::normalize(i.answer)) ++hits;
    const double acc = static_cast<double>(hits) / 400.0;
    CHECK(acc > 0.04);
    CHECK(acc < 0.18);
  }
}

TEST_CASE("baseline_maxfreq") {
  ClozeInstance inst;
  inst.id = "mf";
  inst.passage = {"a", "x", "a", "y", "b", "z", "a", "b", "q", "r"};
  inst.entities = {EntitySpan{0, 0, "a"}, EntitySpan{2, 2, "a"}, EntitySpan{4, 4, "b"},
                   EntitySpan{6, 6, "a"}, EntitySpan{7, 7, "b"}};
  inst.query = {corpus::kGapToken, "x"};
  inst.answer = "b";
  SUBCASE("most frequent wins") { CHECK(baseline_maxfreq(inst) == "a"); }
  SUBCASE("tie broken by first occurrence") {
    ClozeInstance tie;
    tie.id = "tie";
    tie.passage = {"b", "x", "a", "y", "b", "z", "a"};
    tie.entities = {EntitySpan{0, 0, "b"}, EntitySpan{2, 2, "a"}, EntitySpan{4, 4, "b"},
                    EntitySpan{6, 6, "a"}};
    tie.query = {corpus::kGapToken};
    tie.answer = "a";
    CHECK(baseline_maxfreq(tie) == "b");
  }
  SUBCASE("restricted to candidates, cross-checked against brute force") {
    corpus::SyntheticConfig scfg;
    scfg.entities_per_passage = 5;
    scfg.distractor_windows = 12;
    scfg.train_size = 20;
    scfg.dev_size = 1;
    scfg.test_size = 1;
    scfg.seed = 8;
    corpus::SynthOutput synth = corpus::generate_synthetic(scfg);
    for (const auto& raw : synth.train) {
      ClozeInstance capped = corpus::cap_candidates(raw, 3, 4);
      const std::string got = baseline_maxfreq(capped);
      // brute force: count occurrences of each candidate, first occurrence breaks ties
      int best_count = -1, best_first = 1 << 30;
      std::string want;
      for (const auto& cand : *capped.candidates) {
        int count = 0, first = 1 << 30;
        for (const auto& e : capped.entities)
          if (e.text == cand) {
            ++count;
            first = std::min(first, e.start);
          }
        if (count > best_count || (count == best_count && first < best_first)) {
          best_count = count;
          best_first = first;
          want = cand;
        }
      }
      CHECK(got == want);
    }
  }
}

TEST_CASE("baseline_simwindow") {
  corpus::EmbeddingTable table;
  table.dim = 3;
  SUBCASE("window textually identical to the query context wins") {
    ClozeInstance inst;
    inst.id = "sw";
    inst.passage = {"u", "v", "dog", "w", "x", "q1", "q2", "cat", "q3", "q4"};
    inst.entities = {EntitySpan{2, 2, "dog"}, EntitySpan{7, 7, "cat"}};
    inst.query = {"q1", "q2", corpus::kGapToken, "q3", "q4"};
    inst.answer = "cat";
    Rng rng(5);
    for (const auto& w : {"u", "v", "w", "x", "q1", "q2", "q3", "q4", "dog", "cat"}) {
      Eigen::VectorXd v(3);
      for (int i = 0; i < 3; ++i) v(i) = rng.uniform(-1, 1);
      table.vectors[w] = v;
    }
    CHECK(baseline_simwindow(inst, table, 2) == "cat");
  }
  SUBCASE("all-zero embeddings tie and the first window wins") {
    ClozeInstance inst = toy_instance();
    corpus::EmbeddingTable zeros;
    zeros.dim = 3;
    CHECK(baseline_simwindow(inst, zeros, 2) == "apple");
  }
  SUBCASE("full query-window overlap solves the synthetic task outright") {
    corpus::SyntheticConfig scfg;
    scfg.radius = 2;
    scfg.overlap = 4;  // the whole query context
    scfg.entities_per_passage = 2;
    scfg.distractor_windows = 1;
    scfg.train_size = 100;
    scfg.dev_size = 1;
    scfg.test_size = 1;
    scfg.seed = 12;
    corpus::SynthOutput synth = corpus::generate_synthetic(scfg);
    corpus::Vocabulary vocab = corpus::build_vocab(synth.train, 1);
    corpus::EmbeddingTable random_table;
    random_table.dim = 16;
    Rng rng(7);
    for (int id = 3; id < vocab.num_tokens(); ++id) {
      Eigen::VectorXd v(16);
      for (int i = 0; i < 16; ++i) v(i) = rng.uniform(-1, 1);
      random_table.vectors[vocab.token_text(id)] = v;
    }
    int correct = 0;
    for (const auto& inst : synth.train)
      if (baseline_simwindow(inst, random_table, scfg.radius) == inst.answer) ++correct;
    CHECK(correct == 100);
  }
}
