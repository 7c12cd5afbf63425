#include "doctest.h"

#include "panoptic/gradcheck.hpp"
#include "panoptic/losses.hpp"
#include "panoptic/random.hpp"

#include <cmath>
#include <map>

using namespace panoptic;

namespace {

// Straightforward re-statement of the pull/push/regulariser loss, used to
// cross-check the optimised implementation.
double naive_discriminative(const std::vector<Vec5>& e, const std::vector<InstanceId>& ids, double dv, double dd)
{
    std::map<InstanceId, std::vector<Vec5>> groups;
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (ids[i] >= 0) groups[ids[i]].push_back(e[i]);
    }
    std::vector<Vec5> mu;
    double pull = 0;
    for (const auto& [id, pts] : groups) {
        Vec5 m{};
        for (const auto& p : pts) {
            for (int k = 0; k < 5; ++k) m[k] += p[k] / static_cast<double>(pts.size());
        }
        mu.push_back(m);
        double s = 0;
        for (const auto& p : pts) {
            double d = 0;
            for (int k = 0; k < 5; ++k) d += (p[k] - m[k]) * (p[k] - m[k]);
            const double h = std::max(0.0, std::sqrt(d) - dv);
            s += h * h;
        }
        pull += s / static_cast<double>(pts.size());
    }
    const double kk = static_cast<double>(mu.size());
    double push = 0, reg = 0;
    for (std::size_t a = 0; a < mu.size(); ++a) {
        double n2 = 0;
        for (int k = 0; k < 5; ++k) n2 += mu[a][k] * mu[a][k];
        reg += std::sqrt(n2);
        for (std::size_t b = 0; b < mu.size(); ++b) {
            if (a == b) continue;
            double d = 0;
            for (int k = 0; k < 5; ++k) d += (mu[a][k] - mu[b][k]) * (mu[a][k] - mu[b][k]);
            const double h = std::max(0.0, 2 * dd - std::sqrt(d));
            push += h * h;
        }
    }
    return pull / kk + (mu.size() > 1 ? push / (kk * (kk - 1)) : 0.0) + 0.001 * reg / kk;
}

} // namespace

TEST_CASE("cross entropy examples")
{
    const std::vector<double> uniform(3 * 10, 0.7);
    const std::vector<ClassId> labels{0, 4, 9};
    const LossValue l = cross_entropy(uniform, 10, labels);
    CHECK(l.value == doctest::Approx(std::log(10.0)).epsilon(1e-14));
    CHECK(l.value == doctest::Approx(2.302585093).epsilon(1e-9));
    // gradient rows sum to zero: (softmax - onehot) / N
    for (std::size_t i = 0; i < 3; ++i) {
        double s = 0;
        for (std::size_t c = 0; c < 10; ++c) s += l.gradient[i * 10 + c];
        CHECK(s == doctest::Approx(0.0).epsilon(1e-15));
    }
    CHECK(l.gradient[0] == doctest::Approx((0.1 - 1.0) / 3.0));

    double previous = INFINITY;
    for (double margin : {1.0, 5.0, 20.0, 80.0}) {
        const std::vector<double> peaked{margin, 0.0, 0.0};
        const double v = cross_entropy(peaked, 3, std::vector<ClassId>{0}).value;
        CHECK(v < previous);
        previous = v;
    }
    CHECK(previous < 1e-30);

    // large logits stay finite
    const std::vector<double> huge{1000.0, -1000.0};
    CHECK(std::isfinite(cross_entropy(huge, 2, std::vector<ClassId>{1}).value));
}

TEST_CASE("offset loss examples")
{
    const std::vector<Vec3> gt{{1, -2, 0.5}, {0, 0, 0}};
    CHECK(offset_loss(gt, gt).value == 0.0);

    const std::vector<Vec3> g1{{1, -2, 0.5}}, p1{{-1, 2, -0.5}};
    CHECK(offset_loss(p1, g1).value == doctest::Approx(2 * 3.5 + 2.0).epsilon(1e-14));

    // zero gt offsets skip the cosine term but keep the L1 term
    const std::vector<Vec3> g2{{0, 0, 0}}, p2{{0.1, 0, 0}};
    CHECK(offset_loss(p2, g2).value == doctest::Approx(0.1));

    const LossValue w = offset_loss(p1, g1, {0.5, 0.0});
    CHECK(w.value == doctest::Approx(3.5));
}

TEST_CASE("discriminative loss examples")
{
    // one instance, every point at the same place: only the regulariser remains
    const std::vector<Vec5> same(4, Vec5{3, 0, 4, 0, 0});
    const std::vector<InstanceId> one(4, 2);
    CHECK(discriminative_loss(same, one).value == doctest::Approx(0.001 * 5.0).epsilon(1e-14));

    // two instances exactly 2 * delta_d apart: pull and push are both zero
    const std::vector<Vec5> two{{0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, {3, 0, 0, 0, 0}};
    const std::vector<InstanceId> ids{1, 1, 4};
    CHECK(discriminative_loss(two, ids).value == doctest::Approx(0.001 * 3.0 / 2.0).epsilon(1e-14));

    // unlabeled points are ignored
    std::vector<Vec5> with_noise = two;
    with_noise.push_back({100, 100, 100, 100, 100});
    std::vector<InstanceId> noise_ids = ids;
    noise_ids.push_back(-1);
    const LossValue l = discriminative_loss(with_noise, noise_ids);
    CHECK(l.value == discriminative_loss(two, ids).value);
    for (std::size_t k = 15; k < 20; ++k) CHECK(l.gradient[k] == 0.0);

    CHECK_THROWS_AS(discriminative_loss(two, std::vector<InstanceId>{-1, -1, -1}), InvalidArgument);
}

TEST_CASE("discriminative loss agrees with a direct evaluation")
{
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.index(30);
        std::vector<Vec5> e(n);
        std::vector<InstanceId> ids(n);
        for (std::size_t i = 0; i < n; ++i) {
            ids[i] = static_cast<InstanceId>(rng.index(5)) - 1;
            for (double& v : e[i]) v = rng.normal(1.5);
        }
        if (std::all_of(ids.begin(), ids.end(), [](InstanceId id) { return id < 0; })) ids[0] = 0;
        CHECK(discriminative_loss(e, ids).value == doctest::Approx(naive_discriminative(e, ids, 0.5, 1.5)).epsilon(1e-12));
    }
}

TEST_CASE("losses are non-negative")
{
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> logits(12);
        for (double& v : logits) v = rng.normal(3);
        CHECK(cross_entropy(logits, 4, std::vector<ClassId>{0, 1, 3}).value >= 0.0);
        std::vector<Vec3> p(4), g(4);
        for (auto& v : p) v = {rng.normal(1), rng.normal(1), rng.normal(1)};
        for (auto& v : g) v = {rng.normal(1), rng.normal(1), rng.normal(1)};
        CHECK(offset_loss(p, g).value >= 0.0);
    }
}

TEST_CASE("analytic gradients match central differences")
{
    for (LossKind kind : {LossKind::CrossEntropy, LossKind::Offset, LossKind::Discriminative}) {
        const GradcheckResult r = run_gradcheck(kind, 30, 99);
        INFO(to_string(kind));
        CHECK(r.trials == 30);
        CHECK(r.max_relative_error < 1e-5);
    }
}

TEST_CASE("relative gradient error")
{
    const std::vector<double> a{1.0, -2.0}, b{1.0, -2.0 + 1e-6};
    CHECK(relative_gradient_error(a, b) == doctest::Approx(5e-7));
    CHECK(relative_gradient_error(std::vector<double>{0.0}, std::vector<double>{0.0}) == 0.0);
    const auto g = numeric_gradient([](std::span<const double> x) { return x[0] * x[0] + 3 * x[1]; },
                                    std::vector<double>{2.0, 1.0}, 1e-5);
    CHECK(g[0] == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(g[1] == doctest::Approx(3.0).epsilon(1e-9));
}
