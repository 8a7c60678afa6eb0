#include "memnet/training.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "memnet/evaluation.hpp"
#include "memnet/serialize.hpp"
#include "memnet/util.hpp"

namespace memnet::train {

using ad::Matrix;
using ad::Tape;
using ad::Var;
using corpus::Dataset;
using corpus::Vocabulary;
using corpus::WindowSet;
using models::MemNetConfig;
using models::ModelParams;

void TrainConfig::validate() const {
  if (lr < 0) throw std::invalid_argument("TrainConfig.lr: must be non-negative");
  if (epochs < 1) throw std::invalid_argument("TrainConfig.epochs: must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig.batch_size: must be >= 1");
  if (min_count < 1) throw std::invalid_argument("TrainConfig.min_count: must be >= 1");
}

std::string metric_name(TrainConfig::Metric m) {
  return m == TrainConfig::Metric::kAccuracy ? "accuracy" : "f1";
}

TrainConfig::Metric metric_from_name(const std::string& name) {
  if (name == "accuracy") return TrainConfig::Metric::kAccuracy;
  if (name == "f1") return TrainConfig::Metric::kF1;
  throw std::invalid_argument("unknown selection metric '" + name + "'");
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
               double lr, double beta1, double beta2, double epsilon) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: params/grads size mismatch");
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: state does not match parameter count");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& theta = *params[i];
    const Matrix& g = grads[i];
    if (theta.rows() != g.rows() || theta.cols() != g.cols())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    theta.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + epsilon);
  }
}

namespace {

std::vector<Matrix*> parameter_list(ModelParams& p, const MemNetConfig& cfg) {
  std::vector<Matrix*> out = {&p.embed_in};
  if (cfg.variant != models::Variant::kQueryOnly) out.push_back(&p.embed_out);
  if (cfg.needs_output_layer()) {
    out.push_back(&p.weights);
    out.push_back(&p.bias);
  }
  return out;
}

double dev_metric(const models::ForwardTrace& trace, const corpus::ClozeInstance& inst,
                  TrainConfig::Metric metric) {
  if (metric == TrainConfig::Metric::kAccuracy)
    return eval::exact_match(trace.predicted, inst.answer);
  return eval::token_f1(trace.predicted, inst.answer);
}

}  // namespace

TrainResult train(const MemNetConfig& mcfg, const TrainConfig& tcfg, const Dataset& train_set,
                  const Dataset& dev_set, const corpus::EmbeddingTable* pretrained,
                  bool pretrained_out) {
  mcfg.validate();
  tcfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (dev_set.empty()) throw std::invalid_argument("train: empty dev set");

  const Vocabulary vocab = corpus::build_vocab(train_set, tcfg.min_count);
  Rng rng(tcfg.seed);
  ModelParams params = models::init_params(mcfg, vocab, rng, pretrained, pretrained_out);
  std::vector<Matrix*> param_ptrs = parameter_list(params, mcfg);

  std::vector<WindowSet> train_ws, dev_ws;
  train_ws.reserve(train_set.size());
  for (const auto& inst : train_set)
    train_ws.push_back(corpus::extract_windows(inst, mcfg.radius, mcfg.memory_size, vocab));
  dev_ws.reserve(dev_set.size());
  for (const auto& inst : dev_set)
    dev_ws.push_back(corpus::extract_windows(inst, mcfg.radius, mcfg.memory_size, vocab));

  TrainResult result;
  AdamState adam;
  Tape tape;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  ModelParams best_params = params;
  double best_score = -1.0;
  int best_epoch = -1;

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tcfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(tcfg.batch_size));
      tape.clear();
      std::vector<Var> losses;
      losses.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        models::Forward fwd = models::forward(tape, params, mcfg, train_ws[i], vocab,
                                              std::nullopt, &train_set[i].answer);
        if (!fwd.loss.valid())
          throw std::runtime_error("train: gold answer of '" + train_set[i].id +
                                   "' is not representable by this variant");
        losses.push_back(fwd.loss);
      }
      Var batch_loss = tape.mean_rows(losses);
      const double loss_value = tape.scalar(batch_loss);
      if (!std::isfinite(loss_value))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batch_index));
      loss_sum += loss_value * static_cast<double>(stop - start);
      tape.backward(batch_loss);
      std::vector<Matrix> grads;
      grads.reserve(param_ptrs.size());
      for (Matrix* p : param_ptrs) grads.push_back(tape.grad(tape.param(*p)));
      adam_step(param_ptrs, grads, adam, tcfg.lr, tcfg.beta1, tcfg.beta2, tcfg.epsilon);
      ++batch_index;
    }

    double score_sum = 0.0;
    Tape eval_tape;
    for (std::size_t i = 0; i < dev_set.size(); ++i) {
      eval_tape.clear();
      models::Forward fwd =
          models::forward(eval_tape, params, mcfg, dev_ws[i], vocab, dev_set[i].candidates);
      score_sum += dev_metric(fwd.trace, dev_set[i], tcfg.selection);
      if (fwd.trace.pointer_argmax_mismatch) ++result.pointer_disagreements;
    }
    const double dev_score = 100.0 * score_sum / static_cast<double>(dev_set.size());
    result.epochs.push_back(
        EpochStats{epoch, loss_sum / static_cast<double>(train_set.size()), dev_score});
    if (dev_score > best_score) {
      best_score = dev_score;
      best_epoch = epoch;
      best_params = params;
    }
  }

  result.best.model = mcfg;
  result.best.train = tcfg;
  result.best.vocab = vocab;
  result.best.params = std::move(best_params);
  result.best.rng_state = rng.serialize();
  result.best.best_epoch = best_epoch;
  result.best.dev_score = best_score;
  return result;
}

GridResult grid_search(const MemNetConfig& base, const TrainConfig& tcfg,
                       const Dataset& train_set, const Dataset& dev_set) {
  if (tcfg.grid_lr.empty() || tcfg.grid_dim.empty() || tcfg.grid_hops.empty())
    throw std::invalid_argument("grid_search: empty grid");
  GridResult out;
  for (double lr : tcfg.grid_lr) {
    for (int dim : tcfg.grid_dim) {
      for (int hops : tcfg.grid_hops) {
        MemNetConfig mcfg = base;
        mcfg.dim = dim;
        mcfg.hops = hops;
        TrainConfig run = tcfg;
        run.lr = lr;
        TrainResult r = train(mcfg, run, train_set, dev_set);
        out.rows.push_back(GridRow{lr, dim, hops, r.best.dev_score, r.best.best_epoch});
      }
    }
  }
  std::stable_sort(out.rows.begin(), out.rows.end(),
                   [](const GridRow& a, const GridRow& b) { return a.dev_score > b.dev_score; });
  out.best = out.rows.front();
  return out;
}

namespace {

constexpr char kMagic[8] = {'M', 'N', 'E', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_bytes(std::ofstream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& in, void* data, std::size_t n, const char* what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n))
    throw std::runtime_error(std::string("load_checkpoint: truncated file while reading ") + what);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);

  nlohmann::json header;
  header["model"] = ckpt.model;
  header["train"] = ckpt.train;
  header["vocab"] = {{"tokens", ckpt.vocab.tokens()},
                     {"counts", ckpt.vocab.counts()},
                     {"labels", ckpt.vocab.labels()}};
  header["rng_state"] = ckpt.rng_state;
  header["best_epoch"] = ckpt.best_epoch;
  header["dev_score"] = ckpt.dev_score;

  std::vector<std::pair<std::string, const Matrix*>> tensors = {
      {"embed_in", &ckpt.params.embed_in},
      {"embed_out", &ckpt.params.embed_out},
      {"weights", &ckpt.params.weights},
      {"bias", &ckpt.params.bias}};
  nlohmann::json dir = nlohmann::json::array();
  for (const auto& [name, m] : tensors) {
    if (m->size() == 0) continue;
    dir.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}});
  }
  header["tensors"] = dir;

  const std::string header_text = header.dump();
  write_bytes(out, kMagic, sizeof(kMagic));
  write_bytes(out, &kVersion, sizeof(kVersion));
  const std::uint64_t header_len = header_text.size();
  write_bytes(out, &header_len, sizeof(header_len));
  write_bytes(out, header_text.data(), header_text.size());
  for (const auto& [name, m] : tensors) {
    if (m->size() == 0) continue;
    write_bytes(out, m->data(), sizeof(double) * static_cast<std::size_t>(m->size()));
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);

  char magic[8];
  read_bytes(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_checkpoint: not a checkpoint file");
  std::uint32_t version = 0;
  read_bytes(in, &version, sizeof(version), "version");
  if (version != kVersion)
    throw std::runtime_error("load_checkpoint: version mismatch (file has " +
                             std::to_string(version) + ", expected " + std::to_string(kVersion) +
                             ")");
  std::uint64_t header_len = 0;
  read_bytes(in, &header_len, sizeof(header_len), "header length");
  std::string header_text(header_len, '\0');
  read_bytes(in, header_text.data(), header_len, "header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("load_checkpoint: bad header: ") + e.what());
  }

  Checkpoint ckpt;
  ckpt.model = header.at("model").get<MemNetConfig>();
  ckpt.train = header.at("train").get<TrainConfig>();
  ckpt.vocab = Vocabulary(header.at("vocab").at("tokens").get<std::vector<std::string>>(),
                          header.at("vocab").at("counts").get<std::vector<std::int64_t>>(),
                          header.at("vocab").at("labels").get<std::vector<std::string>>());
  ckpt.rng_state = header.at("rng_state").get<std::string>();
  ckpt.best_epoch = header.at("best_epoch").get<int>();
  ckpt.dev_score = header.at("dev_score").get<double>();

  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const Eigen::Index rows = entry.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = entry.at("cols").get<Eigen::Index>();
    Matrix m(rows, cols);
    read_bytes(in, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()), name.c_str());
    if (name == "embed_in")
      ckpt.params.embed_in = std::move(m);
    else if (name == "embed_out")
      ckpt.params.embed_out = std::move(m);
    else if (name == "weights")
      ckpt.params.weights = std::move(m);
    else if (name == "bias")
      ckpt.params.bias = std::move(m);
    else
      throw std::runtime_error("load_checkpoint: unknown tensor '" + name + "'");
  }

  if (ckpt.params.embed_in.rows() != ckpt.vocab.num_tokens())
    throw std::runtime_error("load_checkpoint: vocabulary mismatch (embedding rows " +
                             std::to_string(ckpt.params.embed_in.rows()) + ", vocab tokens " +
                             std::to_string(ckpt.vocab.num_tokens()) + ")");
  return ckpt;
}

}  // namespace memnet::train
