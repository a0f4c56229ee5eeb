#include "l2h/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace l2h {

namespace {
constexpr double kLogEps = 1e-12;

template <typename T>
void check_labels(const Tensor<T>& cp, const LabelPatch& labels, const char* what) {
  if (cp.width != labels.width || cp.height != labels.height ||
      labels.labels.size() != cp.plane_size())
    throw ShapeError(std::string(what) + ": label patch does not match the CP map");
  for (auto v : labels.labels)
    if (v > cp.channels) throw UnknownClassError(v);
}
}  // namespace

void LossConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
}

template <typename T>
ConfidenceMask cas_select(const Tensor<T>& cp, const LabelPatch& labels, const LossConfig& cfg) {
  check_labels(cp, labels, "cas_select");
  const int L = cp.channels;
  const std::size_t HW = cp.plane_size();
  ConfidenceMask m;
  m.width = cp.width;
  m.height = cp.height;
  m.tau = cfg.tau;
  m.area.assign(HW, Area::Excluded);
  m.assigned.assign(HW, 0);
  for (std::size_t p = 0; p < HW; ++p) {
    const int label = labels.labels[p];
    if (label == 0) continue;
    int best = 0;
    T peak = cp.data[p];
    for (int l = 1; l < L; ++l)
      if (cp.data[l * HW + p] > peak) {
        peak = cp.data[l * HW + p];
        best = l;
      }
    const bool agrees = !cfg.require_agreement || best + 1 == label;
    if (static_cast<double>(peak) >= cfg.tau && agrees) {
      m.area[p] = Area::Confident;
      m.assigned[p] = static_cast<std::uint8_t>(label);
      ++m.confident;
    } else {
      m.area[p] = Area::Vague;
      m.assigned[p] = static_cast<std::uint8_t>(
          cfg.vague_assignment == VagueAssignment::Predicted ? best + 1 : label);
      ++m.vague;
    }
  }
  return m;
}

ConfidenceMask all_labeled(const LabelPatch& labels) {
  ConfidenceMask m;
  m.width = labels.width;
  m.height = labels.height;
  m.area.assign(labels.size(), Area::Excluded);
  m.assigned.assign(labels.size(), 0);
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels.labels[p] == 0) continue;
    m.area[p] = Area::Confident;
    m.assigned[p] = labels.labels[p];
    ++m.confident;
  }
  return m;
}

template <typename T>
CeResult<T> masked_ce(const Tensor<T>& cp, const LabelPatch& labels, const ConfidenceMask& mask) {
  check_labels(cp, labels, "masked_ce");
  if (mask.area.size() != cp.plane_size()) throw ShapeError("masked_ce: mask does not match");
  const int L = cp.channels;
  const std::size_t HW = cp.plane_size();
  CeResult<T> r;
  r.grad_logits = Tensor<T>(L, cp.height, cp.width);
  if (mask.confident == 0) return r;
  const double inv = 1.0 / static_cast<double>(mask.confident);
  double sum = 0.0;
  for (std::size_t p = 0; p < HW; ++p) {
    if (!mask.g(p)) continue;
    const int c = labels.labels[p] - 1;
    sum += std::log(std::max(static_cast<double>(cp.data[c * HW + p]), kLogEps));
    for (int l = 0; l < L; ++l) {
      const double target = l == c ? 1.0 : 0.0;
      r.grad_logits.data[l * HW + p] = static_cast<T>((static_cast<double>(cp.data[l * HW + p]) - target) * inv);
    }
  }
  r.loss = -sum * inv;
  return r;
}

template <typename T>
DvaResult<T> dva_loss(const std::vector<Tensor<T>>& features, const ConfidenceMask& mask,
                      int num_classes, const LossConfig& cfg) {
  DvaResult<T> r;
  const std::size_t HW = mask.area.size();
  std::vector<std::size_t> n_ca(num_classes + 1, 0), n_va(num_classes + 1, 0);
  for (std::size_t p = 0; p < HW; ++p) {
    if (mask.area[p] == Area::Excluded) continue;
    const int l = mask.assigned[p];
    if (l < 1 || l > num_classes) throw UnknownClassError(l);
    (mask.area[p] == Area::Confident ? n_ca : n_va)[l]++;
  }
  for (const auto& f : features) {
    if (f.plane_size() != HW || f.width != mask.width)
      throw ShapeError("dva_loss: feature map does not match the mask");
    Tensor<T> grad(f.channels, f.height, f.width);
    const int C = f.channels;
    if (cfg.gamma > 0.0) {
      // Per-class feature sums over CA and VA.
      std::vector<double> sum_ca(static_cast<std::size_t>(num_classes + 1) * C, 0.0);
      std::vector<double> sum_va(sum_ca.size(), 0.0);
      for (int c = 0; c < C; ++c) {
        const T* plane = f.data.data() + c * HW;
        for (std::size_t p = 0; p < HW; ++p) {
          if (mask.area[p] == Area::Excluded) continue;
          auto& s = mask.area[p] == Area::Confident ? sum_ca : sum_va;
          s[static_cast<std::size_t>(mask.assigned[p]) * C + c] += plane[p];
        }
      }
      // coef[l][c]: gradient of the (l, b) term w.r.t. one CA pixel's
      // feature c; VA pixels get the opposite sign with their own count.
      std::vector<double> coef_ca(sum_ca.size(), 0.0), coef_va(sum_ca.size(), 0.0);
      for (int l = 1; l <= num_classes; ++l) {
        if (n_ca[l] == 0 || n_va[l] == 0) continue;
        double sq = 0.0;
        std::vector<double> diff(C);
        for (int c = 0; c < C; ++c) {
          const std::size_t i = static_cast<std::size_t>(l) * C + c;
          diff[c] = sum_ca[i] / static_cast<double>(n_ca[l]) - sum_va[i] / static_cast<double>(n_va[l]);
          sq += diff[c] * diff[c];
        }
        double scale = 0.0;
        if (cfg.variance_form == VarianceForm::SquaredNorm) {
          r.loss += cfg.gamma * sq;
          scale = 2.0 * cfg.gamma;
        } else {
          const double norm = std::sqrt(sq);
          r.loss += cfg.gamma * norm;
          scale = norm > 0.0 ? cfg.gamma / norm : 0.0;
        }
        for (int c = 0; c < C; ++c) {
          const std::size_t i = static_cast<std::size_t>(l) * C + c;
          coef_ca[i] = scale * diff[c] / static_cast<double>(n_ca[l]);
          coef_va[i] = -scale * diff[c] / static_cast<double>(n_va[l]);
        }
      }
      for (int c = 0; c < C; ++c) {
        T* g = grad.data.data() + c * HW;
        for (std::size_t p = 0; p < HW; ++p) {
          if (mask.area[p] == Area::Excluded) continue;
          const std::size_t i = static_cast<std::size_t>(mask.assigned[p]) * C + c;
          g[p] = static_cast<T>(mask.area[p] == Area::Confident ? coef_ca[i] : coef_va[i]);
        }
      }
    }
    r.grad_features.push_back(std::move(grad));
  }
  return r;
}

template <typename T>
L2hResult<T> l2h_loss_masked(const Tensor<T>& cp, const std::vector<Tensor<T>>& features,
                             const LabelPatch& labels, const ConfidenceMask& mask,
                             const LossConfig& cfg) {
  auto ce = masked_ce(cp, labels, mask);
  auto dva = dva_loss(features, mask, cp.channels, cfg);
  L2hResult<T> r;
  r.ce = ce.loss;
  r.dva = dva.loss;
  r.loss = ce.loss + dva.loss;
  r.grad_logits = std::move(ce.grad_logits);
  r.grad_features = std::move(dva.grad_features);
  r.mask = mask;
  return r;
}

template <typename T>
L2hResult<T> l2h_loss(const Tensor<T>& cp, const std::vector<Tensor<T>>& features,
                      const LabelPatch& labels, const LossConfig& cfg) {
  cfg.validate();
  return l2h_loss_masked(cp, features, labels, cas_select(cp, labels, cfg), cfg);
}

#define L2H_INSTANTIATE(T)                                                                          \
  template ConfidenceMask cas_select<T>(const Tensor<T>&, const LabelPatch&, const LossConfig&);    \
  template CeResult<T> masked_ce<T>(const Tensor<T>&, const LabelPatch&, const ConfidenceMask&);    \
  template DvaResult<T> dva_loss<T>(const std::vector<Tensor<T>>&, const ConfidenceMask&, int,      \
                                    const LossConfig&);                                             \
  template L2hResult<T> l2h_loss<T>(const Tensor<T>&, const std::vector<Tensor<T>>&,                \
                                    const LabelPatch&, const LossConfig&);                          \
  template L2hResult<T> l2h_loss_masked<T>(const Tensor<T>&, const std::vector<Tensor<T>>&,         \
                                           const LabelPatch&, const ConfidenceMask&, const LossConfig&);
L2H_INSTANTIATE(float)
L2H_INSTANTIATE(double)
#undef L2H_INSTANTIATE

}  // namespace l2h
