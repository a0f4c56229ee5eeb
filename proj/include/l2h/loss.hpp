#pragma once

#include <cstdint>
#include <vector>

#include "l2h/tensor.hpp"

namespace l2h {

enum class VarianceForm { SquaredNorm, Norm };
enum class VagueAssignment { Predicted, Label };

struct LossConfig {
  double tau = 0.7;
  double gamma = 0.05;
  VarianceForm variance_form = VarianceForm::SquaredNorm;
  VagueAssignment vague_assignment = VagueAssignment::Predicted;
  // When false, CAS only thresholds confidence and skips the
  // prediction/label agreement test.
  bool require_agreement = true;

  void validate() const;
};

// Label IDs on the 1-m grid: 0 = UNLABELED, 1..L map to channel l - 1.
struct LabelPatch {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
};

enum class Area : std::uint8_t { Excluded = 0, Confident = 1, Vague = 2 };

// CAS output. `assigned` holds the class each CA/VA pixel contributes to in
// the DVA term (label for CA; prediction or label for VA). Within one step
// the mask is a constant: no gradient flows through the selection.
struct ConfidenceMask {
  int width = 0;
  int height = 0;
  double tau = 0.0;
  std::vector<Area> area;
  std::vector<std::uint8_t> assigned;
  std::size_t confident = 0;
  std::size_t vague = 0;

  bool g(std::size_t i) const { return area[i] == Area::Confident; }
};

template <typename T>
ConfidenceMask cas_select(const Tensor<T>& cp, const LabelPatch& labels, const LossConfig& cfg);

// Every labeled pixel confident; used for warm-up steps.
ConfidenceMask all_labeled(const LabelPatch& labels);

template <typename T>
struct CeResult {
  double loss = 0.0;
  Tensor<T> grad_logits;
};

// -(1/|CA|) sum over CA of log cp[label]; gradient is taken w.r.t. logits.
template <typename T>
CeResult<T> masked_ce(const Tensor<T>& cp, const LabelPatch& labels, const ConfidenceMask& mask);

template <typename T>
struct DvaResult {
  double loss = 0.0;
  std::vector<Tensor<T>> grad_features;
};

// gamma * sum_b sum_l ||mean_CA(l, b) - mean_VA(l, b)||^2, skipping (l, b)
// where either set is empty.
template <typename T>
DvaResult<T> dva_loss(const std::vector<Tensor<T>>& features, const ConfidenceMask& mask,
                      int num_classes, const LossConfig& cfg);

template <typename T>
struct L2hResult {
  double loss = 0.0;
  double ce = 0.0;
  double dva = 0.0;
  Tensor<T> grad_logits;
  std::vector<Tensor<T>> grad_features;
  ConfidenceMask mask;
};

template <typename T>
L2hResult<T> l2h_loss(const Tensor<T>& cp, const std::vector<Tensor<T>>& features,
                      const LabelPatch& labels, const LossConfig& cfg);

// Same as l2h_loss with a caller-supplied (frozen) mask.
template <typename T>
L2hResult<T> l2h_loss_masked(const Tensor<T>& cp, const std::vector<Tensor<T>>& features,
                             const LabelPatch& labels, const ConfidenceMask& mask,
                             const LossConfig& cfg);

}  // namespace l2h
