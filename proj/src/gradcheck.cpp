#include "panoptic/gradcheck.hpp"
#include "panoptic/random.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace panoptic {

double relative_gradient_error(std::span<const double> analytic, std::span<const double> numeric)
{
    if (analytic.size() != numeric.size()) throw InvalidArgument("gradient sizes differ");
    double diff = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
        diff = std::max(diff, std::abs(analytic[k] - numeric[k]));
        scale = std::max({scale, std::abs(analytic[k]), std::abs(numeric[k])});
    }
    if (scale == 0.0) return 0.0;
    return diff / scale;
}

std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h)
{
    std::vector<double> probe(x.begin(), x.end());
    std::vector<double> grad(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double saved = probe[k];
        probe[k] = saved + h;
        const double up = f(probe);
        probe[k] = saved - h;
        const double down = f(probe);
        probe[k] = saved;
        grad[k] = (up - down) / (2.0 * h);
    }
    return grad;
}

const char* to_string(LossKind kind) noexcept
{
    switch (kind) {
    case LossKind::CrossEntropy: return "cross_entropy";
    case LossKind::Offset: return "offset_loss";
    case LossKind::Discriminative: return "discriminative_loss";
    }
    return "?";
}

namespace {

template <std::size_t D>
std::vector<std::array<double, D>> unflatten(std::span<const double> flat)
{
    std::vector<std::array<double, D>> rows(flat.size() / D);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t d = 0; d < D; ++d) rows[i][d] = flat[D * i + d];
    }
    return rows;
}

double check_cross_entropy(Rng& rng, double h)
{
    const std::size_t n = 1 + rng.index(8), c = 2 + rng.index(6);
    std::vector<double> logits(n * c);
    for (double& v : logits) v = rng.normal(2.0);
    std::vector<ClassId> labels(n);
    for (auto& l : labels) l = static_cast<ClassId>(rng.index(c));
    const auto analytic = cross_entropy(logits, c, labels).gradient;
    const auto numeric = numeric_gradient([&](std::span<const double> x) { return cross_entropy(x, c, labels).value; },
                                          logits, h);
    return relative_gradient_error(analytic, numeric);
}

// returns a negative value when the draw sits near a kink
double check_offset(Rng& rng, double h, double margin)
{
    const std::size_t n = 1 + rng.index(10);
    std::vector<double> pred(3 * n), gt(3 * n);
    for (std::size_t k = 0; k < 3 * n; ++k) {
        gt[k] = rng.normal(1.0);
        pred[k] = gt[k] + rng.normal(0.7);
        if (std::abs(pred[k] - gt[k]) < margin) return -1.0;
    }
    for (const auto* v : {&pred, &gt}) {
        for (std::size_t i = 0; i < n; ++i) {
            const double nrm = std::hypot((*v)[3 * i], (*v)[3 * i + 1], (*v)[3 * i + 2]);
            if (std::abs(nrm - kCosineNormCutoff) < margin) return -1.0;
        }
    }
    const auto gt_rows = unflatten<3>(gt);
    const auto analytic = offset_loss(unflatten<3>(pred), gt_rows).gradient;
    const auto numeric = numeric_gradient(
        [&](std::span<const double> x) { return offset_loss(unflatten<3>(x), gt_rows).value; }, pred, h);
    return relative_gradient_error(analytic, numeric);
}

double check_discriminative(Rng& rng, double h, double margin)
{
    const DiscriminativeParams params;
    const std::size_t k = 1 + rng.index(4);
    const std::size_t n = k + rng.index(12);
    std::vector<InstanceId> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = i < k ? static_cast<InstanceId>(i) : static_cast<InstanceId>(rng.index(k + 1)) - 1;
    std::vector<std::array<double, 5>> centers(k);
    for (auto& c : centers) {
        for (double& v : c) v = rng.normal(1.2);
    }
    std::vector<double> emb(5 * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < 5; ++d) {
            emb[5 * i + d] = (ids[i] >= 0 ? centers[static_cast<std::size_t>(ids[i])][d] : 0.0) + rng.normal(0.5);
        }
    }

    // kink screen on the actual activations
    std::map<InstanceId, std::pair<std::array<double, 5>, std::size_t>> acc;
    for (std::size_t i = 0; i < n; ++i) {
        if (ids[i] < 0) continue;
        auto& [sum, cnt] = acc[ids[i]];
        for (std::size_t d = 0; d < 5; ++d) sum[d] += emb[5 * i + d];
        ++cnt;
    }
    std::map<InstanceId, std::array<double, 5>> mean;
    for (auto& [id, sc] : acc) {
        for (std::size_t d = 0; d < 5; ++d) mean[id][d] = sc.first[d] / static_cast<double>(sc.second);
    }
    auto dist = [](const std::array<double, 5>& a, const std::array<double, 5>& b) {
        double s = 0.0;
        for (std::size_t d = 0; d < 5; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
        return std::sqrt(s);
    };
    for (std::size_t i = 0; i < n; ++i) {
        if (ids[i] < 0) continue;
        std::array<double, 5> e{};
        for (std::size_t d = 0; d < 5; ++d) e[d] = emb[5 * i + d];
        const double r = dist(mean[ids[i]], e);
        if (std::abs(r - params.delta_v) < margin) return -1.0;
    }
    for (const auto& [a, ma] : mean) {
        if (dist(ma, std::array<double, 5>{}) < margin) return -1.0;
        for (const auto& [b, mb] : mean) {
            if (a == b) continue;
            const double d = dist(ma, mb);
            if (std::abs(d - 2.0 * params.delta_d) < margin || d < margin) return -1.0;
        }
    }

    const auto analytic = discriminative_loss(unflatten<5>(emb), ids, params).gradient;
    const auto numeric = numeric_gradient(
        [&](std::span<const double> x) { return discriminative_loss(unflatten<5>(x), ids, params).value; }, emb, h);
    return relative_gradient_error(analytic, numeric);
}

} // namespace

GradcheckResult run_gradcheck(LossKind kind, std::size_t trials, std::uint64_t seed, double h, double kink_margin)
{
    GradcheckResult result{kind};
    Rng rng(seed, static_cast<std::uint64_t>(kind));
    while (result.trials < trials) {
        double err = 0.0;
        switch (kind) {
        case LossKind::CrossEntropy: err = check_cross_entropy(rng, h); break;
        case LossKind::Offset: err = check_offset(rng, h, kink_margin); break;
        case LossKind::Discriminative: err = check_discriminative(rng, h, kink_margin); break;
        }
        if (err < 0.0) {
            if (++result.rejected > 10 * trials) throw CapacityError("too many gradient-check draws near a kink");
            continue;
        }
        ++result.trials;
        result.max_relative_error = std::max(result.max_relative_error, err);
    }
    return result;
}

} // namespace panoptic
