#include "memnet/ad.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

#include "memnet/util.hpp"

namespace memnet::ad {

namespace {

std::uint32_t next_serial() {
  static std::atomic<std::uint32_t> counter{1};
  return counter.fetch_add(1);
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

bool is_vector(const Matrix& m) { return m.cols() == 1 && m.rows() >= 1; }

}  // namespace

Tape::Tape() : serial_(next_serial()) {}

void Tape::clear() {
  nodes_.clear();
  param_ids_.clear();
  grads_ready_ = false;
  serial_ = next_serial();
}

Var Tape::push(Node node) {
  grads_ready_ = false;
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::int32_t>(nodes_.size() - 1), serial_};
}

void Tape::check_owned(Var v, const char* who) const {
  if (!v.valid() || v.tape != serial_ || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw std::invalid_argument(std::string(who) + ": var not on this tape");
}

const Tape::Node& Tape::node(Var v) const {
  check_owned(v, "Tape");
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Matrix& Tape::val(std::int32_t id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.ext ? *n.ext : n.value;
}

const Matrix& Tape::value(Var v) const {
  const Node& n = node(v);
  return n.ext ? *n.ext : n.value;
}

Scalar Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  require(m.size() == 1, "Tape::scalar: not a scalar");
  return m(0, 0);
}

const Matrix& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!grads_ready_) throw std::logic_error("Tape::grad: backward has not run");
  return n.grad;
}

Var Tape::input(Matrix value) {
  Node n;
  n.op = Op::kInput;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(const Matrix& storage) {
  auto it = param_ids_.find(&storage);
  if (it != param_ids_.end()) return Var{it->second, serial_};
  Node n;
  n.op = Op::kParam;
  n.ext = &storage;
  Var v = push(std::move(n));
  param_ids_[&storage] = v.id;
  return v;
}

Var Tape::row(Var matrix, Eigen::Index i) {
  check_owned(matrix, "row");
  const Matrix& m = value(matrix);
  require(i >= 0 && i < m.rows(), "row: index out of range");
  Node n;
  n.op = Op::kRow;
  n.inputs = {matrix.id};
  n.aux = {static_cast<int>(i)};
  n.value = m.row(i).transpose();
  return push(std::move(n));
}

Var Tape::mean_rows(std::span<const Var> rows) {
  if (rows.empty()) throw std::invalid_argument("empty window/query");
  Node n;
  n.op = Op::kMeanRows;
  const Matrix& first = value(rows[0]);
  require(is_vector(first), "mean_rows: inputs must be vectors");
  Matrix acc = first;
  n.inputs.push_back(rows[0].id);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const Matrix& r = value(rows[k]);
    require(r.rows() == first.rows() && r.cols() == 1, "mean_rows: dimension mismatch");
    acc += r;
    n.inputs.push_back(rows[k].id);
  }
  n.value = acc / static_cast<Scalar>(rows.size());
  return push(std::move(n));
}

Var Tape::cosine(Var a, Var b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  require(is_vector(va) && is_vector(vb) && va.rows() == vb.rows(),
          "cosine: inputs must be vectors of equal dimension");
  Node n;
  n.op = Op::kCosine;
  n.inputs = {a.id, b.id};
  const Scalar na = va.norm();
  const Scalar nb = vb.norm();
  Matrix out(1, 1);
  // zero-norm similarity is defined as 0
  out(0, 0) = (na == 0.0 || nb == 0.0) ? 0.0 : va.col(0).dot(vb.col(0)) / (na * nb);
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::softmax(Var x) {
  const Matrix& vx = value(x);
  require(is_vector(vx), "softmax: input must be a non-empty vector");
  Node n;
  n.op = Op::kSoftmax;
  n.inputs = {x.id};
  const Scalar mx = vx.maxCoeff();
  Matrix e = (vx.array() - mx).exp().matrix();
  n.value = e / e.sum();
  return push(std::move(n));
}

Var Tape::linear(Var w, Var x, Var b) {
  const Matrix& vw = value(w);
  const Matrix& vx = value(x);
  const Matrix& vb = value(b);
  require(is_vector(vx) && is_vector(vb) && vw.cols() == vx.rows() && vw.rows() == vb.rows(),
          "linear: shape mismatch");
  Node n;
  n.op = Op::kLinear;
  n.inputs = {w.id, x.id, b.id};
  n.value = vw * vx + vb;
  return push(std::move(n));
}

Var Tape::concat(std::span<const Var> parts) {
  require(!parts.empty(), "concat: empty part list");
  Node n;
  n.op = Op::kConcat;
  Eigen::Index total = 0;
  for (Var p : parts) {
    const Matrix& v = value(p);
    require(is_vector(v), "concat: parts must be vectors");
    total += v.rows();
    n.inputs.push_back(p.id);
  }
  Matrix out(total, 1);
  Eigen::Index off = 0;
  for (Var p : parts) {
    const Matrix& v = value(p);
    out.block(off, 0, v.rows(), 1) = v;
    off += v.rows();
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  require(va.rows() == vb.rows() && va.cols() == vb.cols(), "add: shape mismatch");
  Node n;
  n.op = Op::kAdd;
  n.inputs = {a.id, b.id};
  n.value = va + vb;
  return push(std::move(n));
}

Var Tape::hadamard(Var a, Var b) {
  const Matrix& va = value(a);
  const Matrix& vb = value(b);
  require(va.rows() == vb.rows() && va.cols() == vb.cols(), "hadamard: shape mismatch");
  Node n;
  n.op = Op::kHadamard;
  n.inputs = {a.id, b.id};
  n.value = va.cwiseProduct(vb);
  return push(std::move(n));
}

Var Tape::weighted_sum(Var weights, std::span<const Var> vectors) {
  const Matrix& vw = value(weights);
  require(is_vector(vw), "weighted_sum: weights must be a vector");
  require(static_cast<std::size_t>(vw.rows()) == vectors.size(),
          "weighted_sum: weight/vector count mismatch");
  Node n;
  n.op = Op::kWeightedSum;
  n.inputs.push_back(weights.id);
  const Matrix& first = value(vectors[0]);
  require(is_vector(first), "weighted_sum: inputs must be vectors");
  Matrix acc = Matrix::Zero(first.rows(), 1);
  for (std::size_t j = 0; j < vectors.size(); ++j) {
    const Matrix& v = value(vectors[j]);
    require(v.rows() == first.rows() && v.cols() == 1, "weighted_sum: dimension mismatch");
    acc += vw(static_cast<Eigen::Index>(j), 0) * v;
    n.inputs.push_back(vectors[j].id);
  }
  n.value = std::move(acc);
  return push(std::move(n));
}

Var Tape::segment_sum(Var x, std::span<const int> segment_of, int num_segments) {
  const Matrix& vx = value(x);
  require(is_vector(vx), "segment_sum: input must be a vector");
  require(static_cast<std::size_t>(vx.rows()) == segment_of.size(),
          "segment_sum: label count mismatch");
  require(num_segments >= 1, "segment_sum: need at least one segment");
  Node n;
  n.op = Op::kSegmentSum;
  n.inputs = {x.id};
  Matrix out = Matrix::Zero(num_segments, 1);
  for (std::size_t i = 0; i < segment_of.size(); ++i) {
    const int s = segment_of[i];
    require(s >= 0 && s < num_segments, "segment_sum: segment id out of range");
    out(s, 0) += vx(static_cast<Eigen::Index>(i), 0);
    n.aux.push_back(s);
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::cross_entropy(Var probs, Eigen::Index target) {
  const Matrix& vp = value(probs);
  require(is_vector(vp), "cross_entropy: probs must be a vector");
  if (target < 0 || target >= vp.rows())
    throw std::invalid_argument("cross_entropy: target out of range");
  Node n;
  n.op = Op::kCrossEntropy;
  n.inputs = {probs.id};
  n.aux = {static_cast<int>(target)};
  Matrix out(1, 1);
  out(0, 0) = -std::log(std::max(vp(target, 0), kProbFloor));
  n.value = std::move(out);
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  check_owned(loss, "backward");
  const Node& ln = nodes_[static_cast<std::size_t>(loss.id)];
  const Matrix& lv = ln.ext ? *ln.ext : ln.value;
  if (lv.size() != 1) throw std::invalid_argument("backward: loss must be a scalar");

  for (Node& n : nodes_) {
    const Matrix& v = n.ext ? *n.ext : n.value;
    if (n.grad.rows() != v.rows() || n.grad.cols() != v.cols())
      n.grad = Matrix::Zero(v.rows(), v.cols());
    else
      n.grad.setZero();
  }
  nodes_[static_cast<std::size_t>(loss.id)].grad(0, 0) = 1.0;

  for (std::int32_t id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.op == Op::kInput || n.op == Op::kParam) continue;
    const Matrix& g = n.grad;
    if (g.isZero(0.0)) continue;
    switch (n.op) {
      case Op::kRow: {
        Node& in = nodes_[static_cast<std::size_t>(n.inputs[0])];
        in.grad.row(n.aux[0]) += g.transpose();
        break;
      }
      case Op::kMeanRows: {
        const Scalar inv = 1.0 / static_cast<Scalar>(n.inputs.size());
        for (std::int32_t in_id : n.inputs) nodes_[static_cast<std::size_t>(in_id)].grad += inv * g;
        break;
      }
      case Op::kCosine: {
        const Matrix& a = val(n.inputs[0]);
        const Matrix& b = val(n.inputs[1]);
        const Scalar na = a.norm();
        const Scalar nb = b.norm();
        if (na == 0.0 || nb == 0.0) break;  // constant-zero branch
        const Scalar dot = a.col(0).dot(b.col(0));
        const Scalar g0 = g(0, 0);
        nodes_[static_cast<std::size_t>(n.inputs[0])].grad +=
            g0 * (b / (na * nb) - (dot / (na * na * na * nb)) * a);
        nodes_[static_cast<std::size_t>(n.inputs[1])].grad +=
            g0 * (a / (na * nb) - (dot / (na * nb * nb * nb)) * b);
        break;
      }
      case Op::kSoftmax: {
        const Matrix& s = n.value;
        const Scalar dot = s.col(0).dot(g.col(0));
        nodes_[static_cast<std::size_t>(n.inputs[0])].grad +=
            s.cwiseProduct(g - Matrix::Constant(g.rows(), 1, dot));
        break;
      }
      case Op::kLinear: {
        const Matrix& w = val(n.inputs[0]);
        const Matrix& x = val(n.inputs[1]);
        nodes_[static_cast<std::size_t>(n.inputs[0])].grad.noalias() += g * x.transpose();
        nodes_[static_cast<std::size_t>(n.inputs[1])].grad.noalias() += w.transpose() * g;
        nodes_[static_cast<std::size_t>(n.inputs[2])].grad += g;
        break;
      }
      case Op::kConcat: {
        Eigen::Index off = 0;
        for (std::int32_t in_id : n.inputs) {
          Node& in = nodes_[static_cast<std::size_t>(in_id)];
          const Eigen::Index len = (in.ext ? *in.ext : in.value).rows();
          in.grad += g.block(off, 0, len, 1);
          off += len;
        }
        break;
      }
      case Op::kAdd: {
        nodes_[static_cast<std::size_t>(n.inputs[0])].grad += g;
        nodes_[static_cast<std::size_t>(n.inputs[1])].grad += g;
        break;
      }
      case Op::kHadamard: {
        nodes_[static_cast<std::size_t>(n.inputs[0])].grad += g.cwiseProduct(val(n.inputs[1]));
        nodes_[static_cast<std::size_t>(n.inputs[1])].grad += g.cwiseProduct(val(n.inputs[0]));
        break;
      }
      case Op::kWeightedSum: {
        const Matrix& w = val(n.inputs[0]);
        Node& wnode = nodes_[static_cast<std::size_t>(n.inputs[0])];
        for (std::size_t j = 1; j < n.inputs.size(); ++j) {
          const Matrix& v = val(n.inputs[j]);
          wnode.grad(static_cast<Eigen::Index>(j - 1), 0) += v.col(0).dot(g.col(0));
          nodes_[static_cast<std::size_t>(n.inputs[j])].grad +=
              w(static_cast<Eigen::Index>(j - 1), 0) * g;
        }
        break;
      }
      case Op::kSegmentSum: {
        Node& in = nodes_[static_cast<std::size_t>(n.inputs[0])];
        for (std::size_t i = 0; i < n.aux.size(); ++i)
          in.grad(static_cast<Eigen::Index>(i), 0) += g(n.aux[i], 0);
        break;
      }
      case Op::kCrossEntropy: {
        const Matrix& p = val(n.inputs[0]);
        const Scalar pt = p(n.aux[0], 0);
        if (pt > kProbFloor)
          nodes_[static_cast<std::size_t>(n.inputs[0])].grad(n.aux[0], 0) -= g(0, 0) / pt;
        break;
      }
      default:
        throw std::logic_error("backward: unknown op");
    }
  }
  grads_ready_ = true;
}

GradCheckReport grad_check(const std::function<Scalar()>& f, std::span<Matrix* const> params,
                           std::span<const Matrix> analytic, Scalar eps, std::uint64_t seed,
                           std::size_t max_coords_per_param) {
  if (params.size() != analytic.size())
    throw std::invalid_argument("grad_check: params/analytic size mismatch");
  if (eps <= 0) throw std::invalid_argument("grad_check: eps must be positive");

  Rng rng(seed);
  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& theta = *params[p];
    const Matrix& a = analytic[p];
    if (theta.rows() != a.rows() || theta.cols() != a.cols())
      throw std::invalid_argument("grad_check: gradient shape mismatch");
    const std::size_t n = static_cast<std::size_t>(theta.size());
    std::vector<std::size_t> coords(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    if (n > max_coords_per_param) {
      // partial Fisher-Yates: first max_coords entries form the sample
      for (std::size_t i = 0; i < max_coords_per_param; ++i) {
        const auto j = static_cast<std::size_t>(
            rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(n) - 1));
        std::swap(coords[i], coords[j]);
      }
      coords.resize(max_coords_per_param);
    }
    Scalar* data = theta.data();
    const Scalar* adata = a.data();
    for (std::size_t c : coords) {
      const Scalar saved = data[c];
      data[c] = saved + eps;
      const Scalar up = f();
      data[c] = saved - eps;
      const Scalar down = f();
      data[c] = saved;
      const Scalar numeric = (up - down) / (2.0 * eps);
      const Scalar exact = adata[c];
      ++report.coords_checked;
      if (std::abs(numeric) < 1e-8 && std::abs(exact) < 1e-8) continue;
      const Scalar rel = std::abs(numeric - exact) / std::max(std::abs(numeric), std::abs(exact));
      if (rel > report.max_rel_error) report.max_rel_error = rel;
    }
  }
  return report;
}

}  // namespace memnet::ad
