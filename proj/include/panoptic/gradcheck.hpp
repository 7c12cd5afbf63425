#pragma once

#include "panoptic/losses.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace panoptic {

/// max_k |analytic_k − numeric_k| / max(max_k |analytic_k|, max_k |numeric_k|)
double relative_gradient_error(std::span<const double> analytic, std::span<const double> numeric);

/// Central differences of `f` at `x` with step `h`.
std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h);

enum class LossKind { CrossEntropy, Offset, Discriminative };

const char* to_string(LossKind kind) noexcept;

struct GradcheckResult {
    LossKind loss;
    std::size_t trials = 0;
    std::size_t rejected = 0;  // draws discarded for sitting near a kink
    double max_relative_error = 0.0;
};

/// Compares analytic gradients with central differences on `trials` seeded
/// random inputs. Inputs with any hinge / norm / |x| activation within
/// `kink_margin` of its kink are redrawn.
GradcheckResult run_gradcheck(LossKind kind, std::size_t trials, std::uint64_t seed, double h = 1e-5,
                              double kink_margin = 1e-4);

} // namespace panoptic
