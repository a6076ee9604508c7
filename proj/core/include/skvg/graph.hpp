#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "skvg/error.hpp"
#include "skvg/rng.hpp"

namespace skvg {

using Mat = Eigen::MatrixXd;

/// Named trainable tensor with its gradient accumulator and optimizer state.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;
  double lr = 1.0;            // per-group base learning rate
  bool trainable = true;
  bool weight_decay = true;   // false for biases / norm gains / embeddings

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Owning registry of model parameters, looked up by name.
class ParamStore {
 public:
  Parameter& create(const std::string& name, int rows, int cols);
  Parameter& create_xavier(const std::string& name, int rows, int cols,
                           Rng& rng);
  Parameter& create_constant(const std::string& name, int rows, int cols,
                             double fill);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;

  void zero_grads();
  std::size_t scalar_count() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

/// Handle to a node in a Graph.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Dynamic computation tape over dense double matrices. Build a fresh graph
/// per forward pass; backward() accumulates into bound Parameter::grad.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var input(Mat value);
  Var param(Parameter& p);

  /// Embedding lookup: gathers rows of `table.value` by id. Gradients
  /// scatter-add back into the table.
  Var gather_rows(Parameter& table, std::vector<int> ids);

  Var matmul(Var a, Var b);
  /// a * b^T
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul_elem(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double c);
  /// Adds a 1 x cols row vector to every row of a.
  Var add_row_broadcast(Var a, Var row);

  /// Row-wise softmax. When key_mask is given (size == cols), masked-out
  /// columns get zero probability; each row must keep at least one valid key.
  Var softmax_rows(Var a, const std::vector<std::uint8_t>* key_mask = nullptr);

  /// Per-row layer normalization with learnable gain/offset (both 1 x cols).
  Var layer_norm_rows(Var x, Var gain, Var offset, double eps = 1e-5);

  Var relu(Var a);
  Var sigmoid(Var a);

  Var slice_rows(Var a, int r0, int n);
  Var slice_cols(Var a, int c0, int n);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  /// Mean of rows [r0, r0+n) -> 1 x cols.
  Var mean_rows(Var a, int r0, int n);

  /// Mean element-wise binary cross entropy with logits vs fixed targets.
  Var bce_with_logits_mean(Var logits, Mat targets);
  /// Mean smooth-L1 between a row vector and a fixed target row.
  Var smooth_l1_mean(Var pred, Mat target, double beta = 1.0);
  /// Generalized IoU between a predicted center-size 1x4 row (normalized)
  /// and a fixed ground-truth center-size 1x4 row. Output is 1x1.
  Var giou_value(Var pred_center_size, Mat gt_center_size);
  Var sum_all(Var a);

  const Mat& value(Var v) const;
  double scalar(Var v) const;

  /// Reverse pass from a 1x1 root. Accumulates parameter gradients.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool grad_ready = false;
    std::function<void(Graph&, Node&)> back;
  };

  Var emplace(Mat value, std::function<void(Graph&, Node&)> back);
  Mat& grad_of(int id);
  const Mat& val_of(int id) const { return nodes_[id].value; }
  void check_id(Var v) const;

  std::vector<Node> nodes_;
};

/// AdamW with decoupled weight decay. Learning rates are per parameter
/// (Parameter::lr) scaled by a schedule multiplier at each step.
class AdamW {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };

  explicit AdamW(ParamStore& params, Options opts = {});

  /// One update from the accumulated gradients; lr_scale multiplies every
  /// parameter group's base rate (schedule decay hook).
  void step(double lr_scale = 1.0);

  std::int64_t steps_taken() const { return t_; }

 private:
  ParamStore& params_;
  Options opts_;
  std::int64_t t_ = 0;
};

struct GradCheckOptions {
  double epsilon = 1e-4;
  /// 0 = check every entry of every trainable parameter; otherwise a seeded
  /// sample of at most this many entries per parameter.
  int max_entries_per_param = 0;
  std::uint64_t seed = 0;
  double denom_floor = 1e-8;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  int worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Central finite differences vs analytic gradients over every trainable
/// parameter. loss_fn(with_grad) must rebuild the forward pass on the current
/// parameter values, returning the scalar loss; when with_grad is true it
/// must also run backward so gradients land in Parameter::grad.
GradCheckReport grad_check(ParamStore& params,
                           const std::function<double(bool)>& loss_fn,
                           const GradCheckOptions& opts = {});

}  // namespace skvg
