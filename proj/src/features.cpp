#include "panoptic/features.hpp"
#include "panoptic/random.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace panoptic {

ClassId FeatureSet::predicted_class(std::size_t i) const
{
    const auto row = probs(i);
    return static_cast<ClassId>(std::max_element(row.begin(), row.end()) - row.begin());
}

void FeatureSet::validate() const
{
    const std::size_t n = offsets.size();
    if (embeddings.size() != n || sem_probs.size() != n * num_classes || num_classes == 0) {
        throw ContractError("feature set arrays disagree in size");
    }
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (double p : probs(i)) {
            if (!std::isfinite(p) || p < 0.0) throw ContractError("probability row " + std::to_string(i) + " invalid");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-6) throw ContractError("probability row " + std::to_string(i) + " does not sum to 1");
        for (double v : offsets[i]) {
            if (!std::isfinite(v)) throw ContractError("non-finite offset at " + std::to_string(i));
        }
        for (double v : embeddings[i]) {
            if (!std::isfinite(v)) throw ContractError("non-finite embedding at " + std::to_string(i));
        }
    }
}

namespace {

Vec5 sphere_point(Rng& rng, double radius)
{
    Vec5 v{};
    double norm2 = 0.0;
    while (norm2 < 1e-12) {
        norm2 = 0.0;
        for (double& x : v) {
            x = rng.normal(1.0);
            norm2 += x * x;
        }
    }
    const double scale = radius / std::sqrt(norm2);
    for (double& x : v) x *= scale;
    return v;
}

double distance(const Vec5& a, const Vec5& b)
{
    double d2 = 0.0;
    for (std::size_t k = 0; k < kEmbeddingDim; ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(d2);
}

} // namespace

Codebook make_codebook(std::span<const InstanceId> ids, double min_distance)
{
    std::vector<InstanceId> sorted(ids.begin(), ids.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    constexpr int kAttempts = 2000;
    double radius = min_distance;
    for (;;) {
        Codebook book;
        bool complete = true;
        for (InstanceId id : sorted) {
            Rng rng(static_cast<std::uint64_t>(id), 0x636f6465ULL);
            bool placed = false;
            for (int attempt = 0; attempt < kAttempts && !placed; ++attempt) {
                const Vec5 v = sphere_point(rng, radius);
                placed = std::all_of(book.begin(), book.end(),
                                     [&](const auto& entry) { return distance(entry.second, v) >= min_distance; });
                if (placed) book.emplace(id, v);
            }
            if (!placed) {
                complete = false;
                break;
            }
        }
        if (complete) return book;
        radius *= 1.25;
    }
}

FeatureSet oracle_provide(const Block& block, const Labeling& gt, const SemanticTaxonomy& taxonomy,
                          const OracleNoise& noise, std::uint64_t seed)
{
    const std::size_t n = block.size();
    const std::size_t classes = taxonomy.size();
    for (PointId g : block.global_ids) {
        if (g >= gt.semantic.size() || g >= gt.instance.size()) {
            throw ContractError("oracle provider needs ground-truth labels for every block point");
        }
    }

    // instance centroids over the block's own points
    std::unordered_map<InstanceId, std::pair<Vec3, std::size_t>> sums;
    std::vector<InstanceId> ids;
    for (std::size_t i = 0; i < n; ++i) {
        const PointId g = block.global_ids[i];
        const InstanceId id = gt.instance[g];
        if (id < 0 || !taxonomy.is_thing(gt.semantic[g])) continue;
        auto [it, inserted] = sums.try_emplace(id, Vec3{0.0, 0.0, 0.0}, 0);
        if (inserted) ids.push_back(id);
        for (int a = 0; a < 3; ++a) it->second.first[a] += block.local[i][a];
        ++it->second.second;
    }
    std::unordered_map<InstanceId, Vec3> centroid;
    for (const auto& [id, acc] : sums) {
        const double inv = 1.0 / static_cast<double>(acc.second);
        centroid[id] = {acc.first[0] * inv, acc.first[1] * inv, acc.first[2] * inv};
    }
    const Codebook codebook = make_codebook(ids);

    FeatureSet f;
    f.num_classes = classes;
    f.sem_probs.assign(n * classes, 0.0);
    f.offsets.resize(n);
    f.embeddings.resize(n);
    Rng sem_rng(seed, 10), off_rng(seed, 11), emb_rng(seed, 12);
    for (std::size_t i = 0; i < n; ++i) {
        const PointId g = block.global_ids[i];
        ClassId c = gt.semantic[g];
        if (!taxonomy.contains(c)) throw ContractError("ground-truth class outside the taxonomy");
        // the flip draw is consumed for every point so streams stay aligned
        const double u = sem_rng.uniform();
        if (classes > 1 && u < noise.sem_flip_prob) {
            const auto other = static_cast<ClassId>(sem_rng.index(classes - 1));
            c = other >= c ? other + 1 : other;
        }
        f.sem_probs[i * classes + static_cast<std::size_t>(c)] = 1.0;

        const InstanceId id = gt.instance[g];
        const bool thing = id >= 0 && taxonomy.is_thing(gt.semantic[g]);
        Vec3 off{0.0, 0.0, 0.0};
        if (thing) {
            const Vec3& ctr = centroid[id];
            for (int a = 0; a < 3; ++a) off[a] = ctr[a] - block.local[i][a];
        }
        for (double& v : off) v += off_rng.normal(noise.offset_sigma);
        f.offsets[i] = off;

        Vec5 emb{};
        if (thing) emb = codebook.at(id);
        for (double& v : emb) v += emb_rng.normal(noise.embedding_sigma);
        f.embeddings[i] = emb;
    }
    return f;
}

namespace {

const std::vector<double>& require_column(const FeatureColumns& columns, const std::string& name, std::size_t max_id)
{
    const auto it = columns.find(name);
    if (it == columns.end()) throw FormatError("missing feature column '" + name + "'");
    if (it->second.size() <= max_id) throw FormatError("feature column '" + name + "' is shorter than the cloud");
    return it->second;
}

} // namespace

FeatureSet file_provide(const Block& block, const FeatureColumns& columns, std::size_t num_classes)
{
    if (num_classes == 0) throw InvalidArgument("need at least one class");
    const std::size_t n = block.size();
    const std::size_t max_id = n == 0 ? 0 : block.global_ids.back();

    std::vector<const std::vector<double>*> off, emb, prob;
    for (const char* name : {"off_x", "off_y", "off_z"}) off.push_back(&require_column(columns, name, max_id));
    for (std::size_t k = 0; k < kEmbeddingDim; ++k) {
        emb.push_back(&require_column(columns, "emb_" + std::to_string(k), max_id));
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        prob.push_back(&require_column(columns, "p_" + std::to_string(c), max_id));
    }

    FeatureSet f;
    f.num_classes = num_classes;
    f.sem_probs.resize(n * num_classes);
    f.offsets.resize(n);
    f.embeddings.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const PointId g = block.global_ids[i];
        for (int a = 0; a < 3; ++a) f.offsets[i][a] = (*off[a])[g];
        for (std::size_t k = 0; k < kEmbeddingDim; ++k) f.embeddings[i][k] = (*emb[k])[g];
        double sum = 0.0;
        for (std::size_t c = 0; c < num_classes; ++c) {
            const double p = (*prob[c])[g];
            if (p < 0.0) throw DataError("negative probability at point " + std::to_string(g));
            f.sem_probs[i * num_classes + c] = p;
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-3) {
            throw DataError("probabilities of point " + std::to_string(g) + " sum to " + format_real(sum));
        }
        for (std::size_t c = 0; c < num_classes; ++c) f.sem_probs[i * num_classes + c] /= sum;
    }
    return f;
}

FeatureColumns to_feature_columns(const FeatureSet& f)
{
    FeatureColumns cols;
    const std::size_t n = f.size();
    const char* off_names[] = {"off_x", "off_y", "off_z"};
    for (int a = 0; a < 3; ++a) {
        auto& col = cols[off_names[a]];
        col.resize(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = f.offsets[i][a];
    }
    for (std::size_t k = 0; k < kEmbeddingDim; ++k) {
        auto& col = cols["emb_" + std::to_string(k)];
        col.resize(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = f.embeddings[i][k];
    }
    for (std::size_t c = 0; c < f.num_classes; ++c) {
        auto& col = cols["p_" + std::to_string(c)];
        col.resize(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = f.sem_probs[i * f.num_classes + c];
    }
    return cols;
}

} // namespace panoptic
