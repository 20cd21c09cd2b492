#pragma once

// Discriminative objective on a batch: a class-balanced positive (pull) term
// and a prototype repulsion term over the high-confidence samples, plus an
// instance consistency term over the whole batch.
//
// All gradients are taken w.r.t. online-branch quantities only (z_o and the
// predictor output); target-branch inputs are constants.

#include <span>
#include <string_view>
#include <vector>

#include "dcboost/feature_store.hpp"
#include "dcboost/matrix.hpp"

namespace dcboost {

enum class WeightMode {
  w0_off,       // w_c = 1
  w1_constant,  // w_c applied, treated as a constant in the gradient
  w_ours_flow,  // w_c applied, gradient flows through its z_o dependence
};

WeightMode parse_weight_mode(std::string_view name);
std::string_view to_string(WeightMode mode);

struct ClassGroup {
  int label = 0;
  std::vector<std::size_t> members;  // batch row positions
};

// Groups the selected positions by label, ordered by label.
std::vector<ClassGroup> make_groups(std::span<const std::size_t> selected, const LabelVector& labels);

struct LossTerm {
  double value = 0.0;
  Matrix grad;  // same shape as the online-branch input it differentiates
};

/// 1 / (|sum z_o| * |sum z_t|) over the group. Throws DegenerateClassError if
/// either summed norm is below 1e-12.
double class_weight(const ClassGroup& group, const Matrix& z_o, const Matrix& z_t);

/// (1 / 2c_B) sum_c sum_{i,j in c} w_c (2 - 2 z_o[i].z_t[j]), all ordered
/// pairs including i == j. Gradient w.r.t. z_o.
LossTerm positive_loss(const Matrix& z_o, const Matrix& z_t, std::span<const ClassGroup> groups,
                       WeightMode mode);

struct Prototype {
  int label = 0;
  std::vector<double> v_o;
  std::vector<double> v_t;
  double sum_norm_o = 0.0;  // |sum z_o| before normalization
  std::vector<std::size_t> members;
};

struct PrototypeSet {
  std::vector<Prototype> prototypes;
  std::vector<int> dropped;  // labels whose summed feature vanished
};

PrototypeSet compute_prototypes(std::span<const ClassGroup> groups, const Matrix& z_o,
                                const Matrix& z_t);

/// sum over ordered pairs c1 != c2 of (-2 + 2 v_o[c1].v_t[c2]). Gradient is
/// w.r.t. the (rows x cols) z_o matrix the prototypes were built from.
LossTerm negative_loss(const PrototypeSet& protos, std::size_t rows, std::size_t cols);

/// mean_i |pred_i - target_i|^2, gradient w.r.t. pred.
LossTerm instance_loss(const Matrix& pred, const Matrix& target);

struct LossBreakdown {
  double l_pos = 0.0;
  double l_neg = 0.0;
  double l_ins = 0.0;
  double total = 0.0;
  Matrix grad_z_o;   // from l_pos + l_neg
  Matrix grad_pred;  // from l_ins
  std::vector<int> dropped_classes;
  std::size_t num_groups = 0;  // c_B after dropping degenerate classes
};

/// Sum of the three terms. `groups` index rows of z_o/z_t and carry the
/// high-confidence samples; an empty group list reduces to the instance term.
LossBreakdown total_loss(const Matrix& z_o, const Matrix& z_t, const Matrix& pred_out,
                         const Matrix& target_out, std::span<const ClassGroup> groups,
                         WeightMode mode);

}  // namespace dcboost
