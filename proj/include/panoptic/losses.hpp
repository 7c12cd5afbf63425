#pragma once

#include "panoptic/core.hpp"

#include <span>
#include <vector>

namespace panoptic {

/// Loss value and its gradient, flattened row-major like the input.
struct LossValue {
    double value = 0.0;
    std::vector<double> gradient;
};

/// Mean of −log softmax(logits)[label] over the N rows of an N×C matrix.
/// The gradient is taken w.r.t. the pre-softmax logits: (softmax − onehot) / N.
LossValue cross_entropy(std::span<const double> logits, std::size_t num_classes, std::span<const ClassId> labels);

struct OffsetLossWeights {
    double l1 = 1.0;
    double cosine = 1.0;
};

/// Mean L1 distance between offset endpoints plus mean cosine distance over
/// the points whose true and predicted offsets both exceed 1e-6 in norm.
/// Gradient w.r.t. `pred`.
LossValue offset_loss(std::span<const Vec3> pred, std::span<const Vec3> gt, OffsetLossWeights weights = {});

struct DiscriminativeParams {
    double delta_v = 0.5;
    double delta_d = 1.5;
    double var_weight = 1.0;
    double dist_weight = 1.0;
    double reg_weight = 0.001;
};

/// Pull / push / regulariser loss over instance embeddings; points with
/// instance −1 are ignored. Gradient w.r.t. `embeddings`. Throws
/// InvalidArgument when no instance is present.
LossValue discriminative_loss(std::span<const Vec5> embeddings, std::span<const InstanceId> instances,
                              const DiscriminativeParams& params = {});

inline constexpr double kCosineNormCutoff = 1e-6;

} // namespace panoptic
