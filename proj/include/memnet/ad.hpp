#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

namespace memnet::ad {

using Scalar = double;
// Row-major so that embedding-row access and raw serialization are contiguous.
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Handle to a tensor recorded on a Tape.
struct Var {
  std::int32_t id = -1;
  std::uint32_t tape = 0;
  bool valid() const { return id >= 0; }
};

// Probability floor applied before log in cross_entropy.
inline constexpr Scalar kProbFloor = 1e-12;

// Eager tape: each op computes its value on record and remembers enough to
// replay the exact reverse order in backward(). Vectors are n-by-1 values,
// scalars 1-by-1. A Tape is single-owner; independent tapes may run in
// parallel.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf owning a copy of `value`.
  Var input(Matrix value);
  // Leaf referencing external parameter storage; caller keeps it alive and
  // unchanged until backward() has run. Registering the same storage again
  // returns the existing node, so gradients accumulate across a mini-batch.
  Var param(const Matrix& storage);

  Var row(Var matrix, Eigen::Index i);
  Var mean_rows(std::span<const Var> rows);
  Var cosine(Var a, Var b);
  Var softmax(Var x);
  Var linear(Var w, Var x, Var b);
  Var concat(std::span<const Var> parts);
  Var add(Var a, Var b);
  Var hadamard(Var a, Var b);
  // weights is n-by-1, one vector per weight; result = sum_j weights[j] * vectors[j]
  Var weighted_sum(Var weights, std::span<const Var> vectors);
  // out[s] = sum of x[i] with segment_of[i] == s
  Var segment_sum(Var x, std::span<const int> segment_of, int num_segments);
  Var cross_entropy(Var probs, Eigen::Index target);

  const Matrix& value(Var v) const;
  Scalar scalar(Var v) const;
  // Gradient of the last backward() loss w.r.t. v; zero matrix for unused vars.
  const Matrix& grad(Var v) const;

  // Reverse pass from `loss` (must be a scalar recorded on this tape).
  // Resets all gradients first, so repeated calls are bit-identical.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  enum class Op : std::uint8_t {
    kInput,
    kParam,
    kRow,
    kMeanRows,
    kCosine,
    kSoftmax,
    kLinear,
    kConcat,
    kAdd,
    kHadamard,
    kWeightedSum,
    kSegmentSum,
    kCrossEntropy,
  };

  struct Node {
    Op op;
    Matrix value;
    const Matrix* ext = nullptr;  // set for kParam
    Matrix grad;
    std::vector<std::int32_t> inputs;
    std::vector<int> aux;  // row index / CE target / segment labels
  };

  Var push(Node node);
  const Node& node(Var v) const;
  const Matrix& val(std::int32_t id) const;
  void check_owned(Var v, const char* who) const;

  std::vector<Node> nodes_;
  std::map<const Matrix*, std::int32_t> param_ids_;
  std::uint32_t serial_;
  bool grads_ready_ = false;
};

struct GradCheckReport {
  Scalar max_rel_error = 0.0;
  std::size_t coords_checked = 0;
};

// Central differences of `f` against `analytic` on a seeded sample of at most
// `max_coords_per_param` coordinates per tensor. `f` must recompute the loss
// from the current contents of `params`. Coordinates where both gradients are
// below 1e-8 in magnitude are skipped.
GradCheckReport grad_check(const std::function<Scalar()>& f, std::span<Matrix* const> params,
                           std::span<const Matrix> analytic, Scalar eps = 1e-5,
                           std::uint64_t seed = 0, std::size_t max_coords_per_param = 200);

}  // namespace memnet::ad
