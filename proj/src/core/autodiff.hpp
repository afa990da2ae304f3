// Small define-by-run reverse-mode engine over Eigen matrices. One Tape per
// training sample; parameters live outside the tape and accumulate
// gradients across samples within a mini-batch.
#pragma once

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace tdg::ad {

using Mat = Eigen::MatrixXd;

struct Parameter {
  std::string name;
  Mat val;
  Mat grad;
  // Adaptive-moment optimizer state.
  Mat m, v;

  explicit Parameter(std::string n, Mat init);
  void zero_grad();
};

struct Node {
  Mat val;
  Mat grad;
  std::function<void()> back;  // pushes this->grad into parents / params
  bool requires_grad = false;
};

class Tape {
 public:
  using V = Node*;

  V constant(Mat val);
  V param(Parameter& p);
  // Rows of an embedding table selected by index; backward scatter-adds.
  V gather_rows(Parameter& emb, const std::vector<int>& idx);

  V matmul(V a, V b, bool trans_a = false, bool trans_b = false);
  V add(V a, V b);                 // same shape
  V sub(V a, V b);
  V add_rowvec(V a, V row);        // broadcast a 1xN row over all rows
  V add_const(V a, const Mat& c);
  V scale(V a, double s);
  V cwise_mul(V a, V b);
  V cwise_mul_const(V a, const Mat& c);
  V relu(V a);                     // also the hinge max(0, x)
  V log(V a);                      // elementwise, caller ensures positivity
  V softmax_rows(V a);
  V log_softmax_rows(V a);
  V layernorm_rows(V x, V gain, V bias, double eps = 1e-5);
  V cols(V a, int from, int n);
  V rows(V a, int from, int n);
  V concat_cols(const std::vector<V>& parts);
  V sum_all(V a);                  // 1x1

  void backward(V scalar_node);

  std::size_t size() const { return nodes_.size(); }

 private:
  V make(Mat val, bool requires_grad);
  std::deque<Node> nodes_;
};

// In-place adaptive-moment update (bias-corrected first/second moments).
struct AdamOptimizer {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;

  void step(std::vector<Parameter*>& params);
};

}  // namespace tdg::ad
