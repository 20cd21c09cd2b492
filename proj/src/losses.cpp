#include "dcboost/losses.hpp"

#include <cmath>
#include <map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "dcboost/error.hpp"

namespace dcboost {

namespace {

constexpr double kDegenerateNorm = 1e-12;

std::vector<double> column_sum(const Matrix& z, std::span<const std::size_t> rows) {
  std::vector<double> s(z.cols(), 0.0);
  for (auto r : rows) {
    auto zr = z.row(r);
    for (std::size_t k = 0; k < s.size(); ++k) s[k] += zr[k];
  }
  return s;
}

void check_pair(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(fmt::format("shape mismatch: {}x{} vs {}x{}", a.rows(), a.cols(), b.rows(), b.cols()));
  }
}

}  // namespace

WeightMode parse_weight_mode(std::string_view name) {
  if (name == "w0_off" || name == "w0") return WeightMode::w0_off;
  if (name == "w1_constant" || name == "w1") return WeightMode::w1_constant;
  if (name == "w_ours_flow" || name == "w_ours") return WeightMode::w_ours_flow;
  throw ConfigError(fmt::format("unknown weight mode '{}'", name));
}

std::string_view to_string(WeightMode mode) {
  switch (mode) {
    case WeightMode::w0_off: return "w0_off";
    case WeightMode::w1_constant: return "w1_constant";
    case WeightMode::w_ours_flow: return "w_ours_flow";
  }
  return "?";
}

std::vector<ClassGroup> make_groups(std::span<const std::size_t> selected, const LabelVector& labels) {
  std::map<int, std::vector<std::size_t>> by_label;
  for (auto p : selected) by_label[labels[p]].push_back(p);
  std::vector<ClassGroup> groups;
  groups.reserve(by_label.size());
  for (auto& [label, members] : by_label) groups.push_back({label, std::move(members)});
  return groups;
}

double class_weight(const ClassGroup& group, const Matrix& z_o, const Matrix& z_t) {
  if (group.members.empty()) throw ValueError("class group is empty");
  const double no = std::sqrt(squared_norm(column_sum(z_o, group.members)));
  const double nt = std::sqrt(squared_norm(column_sum(z_t, group.members)));
  if (no < kDegenerateNorm || nt < kDegenerateNorm) {
    throw DegenerateClassError(fmt::format("class {} has a vanishing summed feature", group.label));
  }
  return 1.0 / (no * nt);
}

LossTerm positive_loss(const Matrix& z_o, const Matrix& z_t, std::span<const ClassGroup> groups,
                       WeightMode mode) {
  check_pair(z_o, z_t);
  if (groups.empty()) throw ValueError("positive_loss needs at least one class group");
  const std::size_t d = z_o.cols();
  const double c_b = static_cast<double>(groups.size());
  LossTerm out{0.0, Matrix(z_o.rows(), d)};
  std::vector<double> g(d);

  for (const auto& group : groups) {
    const auto so = column_sum(z_o, group.members);
    const auto st = column_sum(z_t, group.members);
    const double n_c = static_cast<double>(group.members.size());
    // sum over ordered pairs of 2 - 2 z_o[i].z_t[j] = 2 n^2 - 2 So.St
    const double pair_sum = 2.0 * n_c * n_c - 2.0 * dot(so, st);

    double w = 1.0;
    double so_sq = 0.0;
    if (mode != WeightMode::w0_off) {
      w = class_weight(group, z_o, z_t);
      so_sq = squared_norm(so);
    }
    out.value += w * pair_sum / (2.0 * c_b);

    // d/dz_o[i] is identical for every member of the group.
    for (std::size_t k = 0; k < d; ++k) {
      g[k] = -2.0 * w * st[k];
      if (mode == WeightMode::w_ours_flow) g[k] -= pair_sum * w * so[k] / so_sq;
      g[k] /= 2.0 * c_b;
    }
    for (auto r : group.members) {
      auto gr = out.grad.row(r);
      for (std::size_t k = 0; k < d; ++k) gr[k] += g[k];
    }
  }
  return out;
}

PrototypeSet compute_prototypes(std::span<const ClassGroup> groups, const Matrix& z_o,
                                const Matrix& z_t) {
  check_pair(z_o, z_t);
  PrototypeSet set;
  for (const auto& group : groups) {
    auto so = column_sum(z_o, group.members);
    auto st = column_sum(z_t, group.members);
    const double no = std::sqrt(squared_norm(so));
    const double nt = std::sqrt(squared_norm(st));
    if (no < kDegenerateNorm || nt < kDegenerateNorm) {
      spdlog::warn("class {} dropped: summed feature vanishes", group.label);
      set.dropped.push_back(group.label);
      continue;
    }
    for (double& v : so) v /= no;
    for (double& v : st) v /= nt;
    set.prototypes.push_back({group.label, std::move(so), std::move(st), no, group.members});
  }
  return set;
}

LossTerm negative_loss(const PrototypeSet& protos, std::size_t rows, std::size_t cols) {
  LossTerm out{0.0, Matrix(rows, cols)};
  const auto& p = protos.prototypes;
  if (p.size() < 2) return out;

  std::vector<double> sum_t(cols, 0.0);
  for (const auto& q : p) {
    for (std::size_t k = 0; k < cols; ++k) sum_t[k] += q.v_t[k];
  }
  std::vector<double> g(cols);
  for (std::size_t a = 0; a < p.size(); ++a) {
    for (std::size_t b = 0; b < p.size(); ++b) {
      if (a != b) out.value += -2.0 + 2.0 * dot(p[a].v_o, p[b].v_t);
    }
    // dL/dv_o[a] = 2 * sum_{b != a} v_t[b]; project through v = s / |s|.
    for (std::size_t k = 0; k < cols; ++k) g[k] = 2.0 * (sum_t[k] - p[a].v_t[k]);
    const double radial = dot(p[a].v_o, g);
    for (std::size_t k = 0; k < cols; ++k) {
      g[k] = (g[k] - radial * p[a].v_o[k]) / p[a].sum_norm_o;
    }
    for (auto r : p[a].members) {
      auto gr = out.grad.row(r);
      for (std::size_t k = 0; k < cols; ++k) gr[k] += g[k];
    }
  }
  return out;
}

LossTerm instance_loss(const Matrix& pred, const Matrix& target) {
  check_pair(pred, target);
  if (pred.rows() == 0) throw ShapeError("instance_loss on an empty batch");
  const double n = static_cast<double>(pred.rows());
  LossTerm out{0.0, Matrix(pred.rows(), pred.cols())};
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    auto p = pred.row(i);
    auto t = target.row(i);
    auto g = out.grad.row(i);
    for (std::size_t k = 0; k < pred.cols(); ++k) {
      const double diff = p[k] - t[k];
      out.value += diff * diff;
      g[k] = 2.0 * diff / n;
    }
  }
  out.value /= n;
  return out;
}

LossBreakdown total_loss(const Matrix& z_o, const Matrix& z_t, const Matrix& pred_out,
                         const Matrix& target_out, std::span<const ClassGroup> groups,
                         WeightMode mode) {
  check_pair(z_o, z_t);
  LossBreakdown out;
  auto ins = instance_loss(pred_out, target_out);
  out.l_ins = ins.value;
  out.grad_pred = std::move(ins.grad);
  out.grad_z_o = Matrix(z_o.rows(), z_o.cols());

  // Prototype construction doubles as the degenerate-class screen for both
  // selection-based terms.
  PrototypeSet protos = compute_prototypes(groups, z_o, z_t);
  out.dropped_classes = protos.dropped;
  std::vector<ClassGroup> kept;
  kept.reserve(protos.prototypes.size());
  for (const auto& p : protos.prototypes) kept.push_back({p.label, p.members});
  out.num_groups = kept.size();

  if (!kept.empty()) {
    auto pos = positive_loss(z_o, z_t, kept, mode);
    auto neg = negative_loss(protos, z_o.rows(), z_o.cols());
    out.l_pos = pos.value;
    out.l_neg = neg.value;
    for (std::size_t k = 0; k < out.grad_z_o.size(); ++k) {
      out.grad_z_o.values()[k] = pos.grad.values()[k] + neg.grad.values()[k];
    }
  }
  out.total = out.l_pos + out.l_neg + out.l_ins;
  return out;
}

}  // namespace dcboost
