#include "panoptic/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace panoptic {

LossValue cross_entropy(std::span<const double> logits, std::size_t num_classes, std::span<const ClassId> labels)
{
    if (num_classes == 0 || logits.size() != labels.size() * num_classes) {
        throw InvalidArgument("logits must be N×C with N = number of labels");
    }
    const std::size_t n = labels.size();
    LossValue out;
    out.gradient.assign(logits.size(), 0.0);
    if (n == 0) return out;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto label = labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
            throw InvalidArgument("label " + std::to_string(label) + " outside [0, C)");
        }
        const double* row = logits.data() + i * num_classes;
        const double peak = *std::max_element(row, row + num_classes);
        double z = 0.0;
        for (std::size_t c = 0; c < num_classes; ++c) z += std::exp(row[c] - peak);
        const double log_z = peak + std::log(z);
        out.value += (log_z - row[label]) * inv_n;
        for (std::size_t c = 0; c < num_classes; ++c) {
            const double p = std::exp(row[c] - log_z);
            out.gradient[i * num_classes + c] = (p - (static_cast<ClassId>(c) == label ? 1.0 : 0.0)) * inv_n;
        }
    }
    return out;
}

namespace {

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

} // namespace

LossValue offset_loss(std::span<const Vec3> pred, std::span<const Vec3> gt, OffsetLossWeights weights)
{
    if (pred.size() != gt.size()) throw InvalidArgument("pred and gt offsets differ in length");
    const std::size_t n = pred.size();
    LossValue out;
    out.gradient.assign(3 * n, 0.0);
    if (n == 0) return out;

    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int a = 0; a < 3; ++a) {
            const double d = pred[i][a] - gt[i][a];
            out.value += weights.l1 * std::abs(d) * inv_n;
            out.gradient[3 * i + a] += weights.l1 * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) * inv_n;
        }
    }

    std::size_t counted = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (norm(pred[i]) > kCosineNormCutoff && norm(gt[i]) > kCosineNormCutoff) ++counted;
    }
    if (counted == 0) return out;
    const double inv_m = 1.0 / static_cast<double>(counted);
    for (std::size_t i = 0; i < n; ++i) {
        const double np = norm(pred[i]), ng = norm(gt[i]);
        if (np <= kCosineNormCutoff || ng <= kCosineNormCutoff) continue;
        const double pg = dot(pred[i], gt[i]);
        const double cosine = pg / (np * ng);
        out.value += weights.cosine * (1.0 - cosine) * inv_m;
        // d cos / d p = g / (|p||g|) − (p·g) p / (|p|³|g|)
        for (int a = 0; a < 3; ++a) {
            const double dcos = gt[i][a] / (np * ng) - pg * pred[i][a] / (np * np * np * ng);
            out.gradient[3 * i + a] -= weights.cosine * dcos * inv_m;
        }
    }
    return out;
}

LossValue discriminative_loss(std::span<const Vec5> embeddings, std::span<const InstanceId> instances,
                              const DiscriminativeParams& params)
{
    constexpr std::size_t D = 5;
    if (embeddings.size() != instances.size()) throw InvalidArgument("embeddings and instance ids differ in length");

    std::map<InstanceId, std::size_t> slot;
    for (InstanceId id : instances) {
        if (id >= 0) slot.try_emplace(id, 0);
    }
    const std::size_t k = slot.size();
    if (k == 0) throw InvalidArgument("discriminative loss needs at least one instance");
    {
        std::size_t s = 0;
        for (auto& [id, index] : slot) index = s++;
    }

    std::vector<std::size_t> cluster_of(instances.size(), k);
    std::vector<std::size_t> count(k, 0);
    std::vector<Vec5> mean(k, Vec5{});
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (instances[i] < 0) continue;
        const std::size_t c = slot[instances[i]];
        cluster_of[i] = c;
        ++count[c];
        for (std::size_t d = 0; d < D; ++d) mean[c][d] += embeddings[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
        for (double& v : mean[c]) v /= static_cast<double>(count[c]);
    }

    LossValue out;
    out.gradient.assign(D * embeddings.size(), 0.0);
    std::vector<Vec5> grad_mean(k, Vec5{});
    const double inv_k = 1.0 / static_cast<double>(k);

    // pull: each point within delta_v of its instance mean
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const std::size_t c = cluster_of[i];
        if (c == k) continue;
        Vec5 diff{};
        double dist2 = 0.0;
        for (std::size_t d = 0; d < D; ++d) {
            diff[d] = mean[c][d] - embeddings[i][d];
            dist2 += diff[d] * diff[d];
        }
        const double dist = std::sqrt(dist2);
        const double hinge = dist - params.delta_v;
        if (hinge <= 0.0) continue;
        const double coef = params.var_weight * inv_k / static_cast<double>(count[c]);
        out.value += coef * hinge * hinge;
        for (std::size_t d = 0; d < D; ++d) {
            const double g = coef * 2.0 * hinge * diff[d] / dist;  // d/d mean
            grad_mean[c][d] += g;
            out.gradient[D * i + d] -= g;
        }
    }

    // push: instance means at least 2·delta_d apart
    if (k > 1) {
        const double coef = params.dist_weight / static_cast<double>(k * (k - 1));
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = 0; b < k; ++b) {
                if (a == b) continue;
                Vec5 diff{};
                double dist2 = 0.0;
                for (std::size_t d = 0; d < D; ++d) {
                    diff[d] = mean[a][d] - mean[b][d];
                    dist2 += diff[d] * diff[d];
                }
                const double dist = std::sqrt(dist2);
                const double hinge = 2.0 * params.delta_d - dist;
                if (hinge <= 0.0) continue;
                out.value += coef * hinge * hinge;
                if (dist == 0.0) continue;
                for (std::size_t d = 0; d < D; ++d) {
                    const double g = -coef * 2.0 * hinge * diff[d] / dist;
                    grad_mean[a][d] += g;
                    grad_mean[b][d] -= g;
                }
            }
        }
    }

    // regulariser on mean norms
    for (std::size_t c = 0; c < k; ++c) {
        double n2 = 0.0;
        for (double v : mean[c]) n2 += v * v;
        const double nrm = std::sqrt(n2);
        out.value += params.reg_weight * inv_k * nrm;
        if (nrm == 0.0) continue;
        for (std::size_t d = 0; d < D; ++d) grad_mean[c][d] += params.reg_weight * inv_k * mean[c][d] / nrm;
    }

    for (std::size_t i = 0; i < instances.size(); ++i) {
        const std::size_t c = cluster_of[i];
        if (c == k) continue;
        const double inv = 1.0 / static_cast<double>(count[c]);
        for (std::size_t d = 0; d < D; ++d) out.gradient[D * i + d] += grad_mean[c][d] * inv;
    }
    return out;
}

} // namespace panoptic
