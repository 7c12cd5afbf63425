// Times the parallel kernels against their serial reference versions.
//   bench_kernels [repeats]

#include "panoptic/clustering.hpp"
#include "panoptic/merge.hpp"
#include "panoptic/random.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>

using namespace panoptic;

namespace {

double best_of(int repeats, const std::function<void()>& body)
{
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        body();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void report(const char* name, std::size_t n, double reference, double kernel, bool agree)
{
    std::printf("%-16s n=%-7zu reference %9.4f s  kernel %9.4f s  speedup %6.1fx  %s\n", name, n, reference, kernel,
                reference / kernel, agree ? "same result" : "RESULTS DIFFER");
}

} // namespace

int main(int argc, char** argv)
{
    const int repeats = argc > 1 ? std::max(1, std::atoi(argv[1])) : 3;
    std::printf("threads: %d\n", omp_get_max_threads());
    Rng rng(1);

    {
        // dense surface patches, one class per patch
        std::vector<Vec3> pts;
        std::vector<ClassId> cls;
        for (int patch = 0; patch < 20; ++patch) {
            const double ox = rng.uniform(0, 10), oy = rng.uniform(0, 10);
            for (int i = 0; i < 1000; ++i) {
                pts.push_back({ox + rng.uniform(0, 0.5), oy + rng.uniform(0, 0.5), rng.uniform(0, 0.05)});
                cls.push_back(patch % 3);
            }
        }
        std::vector<IndexSet> a, b;
        const double tr = best_of(repeats, [&] { a = reference::region_grow(pts, cls, 0.03); });
        const double tk = best_of(repeats, [&] { b = region_grow(pts, cls, 0.03); });
        report("region_grow", pts.size(), tr, tk, a == b);
    }
    {
        std::vector<Vec5> e;
        for (int c = 0; c < 10; ++c) {
            Vec5 centre;
            for (double& x : centre) x = rng.uniform(-5, 5);
            for (int i = 0; i < 300; ++i) {
                Vec5 v = centre;
                for (double& x : v) x += rng.normal(0.15);
                e.push_back(v);
            }
        }
        std::vector<IndexSet> a, b;
        const double tr = best_of(repeats, [&] { a = reference::mean_shift(e, {}); });
        const double tk = best_of(repeats, [&] { b = mean_shift(e, {}); });
        // summation order differs, so compare the cluster count only
        report("mean_shift", e.size(), tr, tk, a.size() == b.size());
    }
    {
        PointCloud orig, sub;
        for (int i = 0; i < 20000; ++i) orig.positions.push_back({rng.uniform(0, 20), rng.uniform(0, 20), rng.uniform(0, 3)});
        for (int i = 0; i < 4000; ++i) sub.positions.push_back({rng.uniform(0, 20), rng.uniform(0, 20), rng.uniform(0, 3)});
        std::vector<std::size_t> a, b;
        const double tr = best_of(repeats, [&] { a = reference::nearest_indices(orig, sub); });
        const double tk = best_of(repeats, [&] { b = nearest_indices(orig, sub); });
        report("nearest_indices", orig.size(), tr, tk, a == b);
    }
    return 0;
}
