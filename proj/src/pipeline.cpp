#include "panoptic/pipeline.hpp"
#include "panoptic/clustering.hpp"
#include "panoptic/features.hpp"
#include "panoptic/random.hpp"
#include "panoptic/selection.hpp"

#include <chrono>
#include <exception>
#include <ostream>

namespace panoptic {

ProviderKind provider_from_string(const std::string& name)
{
    if (name == "oracle") return ProviderKind::Oracle;
    if (name == "file") return ProviderKind::File;
    throw ConfigError("provider", "unknown provider '" + name + "' (expected oracle or file)");
}

ScorerKind scorer_from_string(const std::string& name)
{
    if (name == "oracle") return ScorerKind::Oracle;
    if (name == "consensus") return ScorerKind::Consensus;
    throw ConfigError("scorer", "unknown scorer '" + name + "' (expected oracle or consensus)");
}

FeatureColumns average_columns(const FeatureColumns& columns, const VoxelMap& voxels)
{
    FeatureColumns out;
    for (const auto& [name, values] : columns) {
        std::vector<double>& avg = out[name];
        avg.resize(voxels.members.size());
        for (std::size_t v = 0; v < voxels.members.size(); ++v) {
            double sum = 0.0;
            for (PointId p : voxels.members[v]) sum += values.at(p);
            avg[v] = sum / static_cast<double>(voxels.members[v].size());
        }
    }
    return out;
}

std::vector<Block> make_blocks(const PointCloud& cloud, const PipelineConfig& config, std::size_t* grid_size)
{
    std::vector<Block> blocks;
    if (cloud.empty()) {
        if (grid_size) *grid_size = 0;
        return blocks;
    }
    const auto centers = grid_centers(xy_bounds(cloud), config.effective_grid_step());
    if (grid_size) *grid_size = centers.size();
    const CylinderIndex index(cloud);
    for (const Vec2& c : centers) {
        Block b = index.cut(c, config.cylinder_radius);
        if (!b.empty()) blocks.push_back(std::move(b));
    }
    return blocks;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct BlockOutput {
    BlockResult result;
    std::vector<InstanceCandidate> kept;
    std::array<std::size_t, 3> by_origin{};
    std::size_t candidates = 0, after_size = 0, after_nms = 0, after_score = 0;
    double t_provide = 0, t_cluster = 0, t_score = 0, t_prune = 0;
    std::exception_ptr error;
};

template <class F>
auto in_stage(const char* stage, F&& f)
{
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(stage, e.what());
    }
}

} // namespace

SegmentResult segment(const PointCloud& cloud, const Labeling* gt, const FeatureColumns* features,
                      const SemanticTaxonomy& taxonomy, const PipelineConfig& config, const SegmentOptions& options)
{
    in_stage("config", [&] {
        config.validate();
        if (options.workers < 1) throw ConfigError("workers", "must be at least 1");
        const bool needs_gt = options.provider == ProviderKind::Oracle || options.scorer == ScorerKind::Oracle;
        if (needs_gt && !gt) throw ContractError("the oracle provider and scorer need ground-truth labels");
        if (gt && gt->size() != cloud.size()) throw ContractError("labels do not match the cloud");
        if (options.provider == ProviderKind::File && !features) throw ContractError("the file provider needs feature columns");
        return 0;
    });

    SegmentResult out;
    out.counts.input_points = cloud.size();
    if (cloud.empty()) return out;

    auto start = Clock::now();
    const SubsampleResult sub = in_stage("subsample", [&] { return voxel_subsample(cloud, gt, config.voxel_size); });
    FeatureColumns sub_features;
    if (options.provider == ProviderKind::File) sub_features = average_columns(*features, sub.voxels);
    out.counts.subsampled_points = sub.cloud.size();
    out.timings.emplace_back("subsample", seconds_since(start));

    start = Clock::now();
    const std::vector<Block> blocks =
        in_stage("blocks", [&] { return make_blocks(sub.cloud, config, &out.counts.grid_centers); });
    out.counts.blocks = blocks.size();
    out.timings.emplace_back("blocks", seconds_since(start));

    const ClusterParams cluster = ClusterParams::from(config);
    const PruneParams prune_params{config.min_cluster_size, config.score_threshold, config.nms_iou_threshold};
    const OracleNoise noise{config.sem_flip_prob, config.offset_sigma, config.embedding_sigma};
    std::optional<OracleScorer> oracle;
    if (options.scorer == ScorerKind::Oracle) oracle.emplace(*sub.labels);

    std::vector<BlockOutput> outputs(blocks.size());
    const auto nblocks = static_cast<std::ptrdiff_t>(blocks.size());
#pragma omp parallel for schedule(dynamic) num_threads(options.workers)
    for (std::ptrdiff_t b = 0; b < nblocks; ++b) {
        const Block& block = blocks[static_cast<std::size_t>(b)];
        BlockOutput& o = outputs[static_cast<std::size_t>(b)];
        const char* stage = "provide";
        try {
            auto t = Clock::now();
            const FeatureSet fs =
                options.provider == ProviderKind::Oracle
                    ? oracle_provide(block, *sub.labels, taxonomy, noise, mix_seed(config.seed, static_cast<std::uint64_t>(b)))
                    : file_provide(block, sub_features, taxonomy.size());
            o.t_provide = seconds_since(t);

            stage = "cluster";
            t = Clock::now();
            std::vector<InstanceCandidate> cands = generate_candidates(block, fs, taxonomy, cluster);
            o.t_cluster = seconds_since(t);
            o.candidates = cands.size();
            for (const auto& c : cands) ++o.by_origin[static_cast<std::size_t>(c.origin)];

            stage = "score";
            t = Clock::now();
            if (oracle) {
                for (auto& c : cands) c.score = oracle->score(c);
            } else {
                const auto scores = consensus_scores(cands);
                for (std::size_t k = 0; k < cands.size(); ++k) cands[k].score = scores[k];
            }
            o.t_score = seconds_since(t);

            stage = "prune";
            t = Clock::now();
            PruneResult pr = prune(std::move(cands), prune_params);
            o.after_size = pr.after_size;
            o.after_nms = pr.after_nms;
            o.after_score = pr.after_score;
            o.result.center = block.center;
            for (auto& inst : resolve_ownership(pr.kept)) o.result.instances.push_back(std::move(inst.points));
            o.result.semantics.global_ids = block.global_ids;
            o.result.semantics.predicted.resize(block.size());
            o.result.semantics.confidence.resize(block.size());
            for (std::size_t i = 0; i < block.size(); ++i) {
                const ClassId c = fs.predicted_class(i);
                o.result.semantics.predicted[i] = c;
                o.result.semantics.confidence[i] = fs.probs(i)[static_cast<std::size_t>(c)];
            }
            if (options.keep_candidates) o.kept = std::move(pr.kept);
            o.t_prune = seconds_since(t);
        } catch (const Error& e) {
            o.error = std::make_exception_ptr(StageError(stage, e.what()));
        } catch (...) {
            o.error = std::current_exception();
        }
    }

    std::vector<BlockResult> results;
    results.reserve(outputs.size());
    double t_provide = 0, t_cluster = 0, t_score = 0, t_prune = 0;
    for (auto& o : outputs) {
        if (o.error) std::rethrow_exception(o.error);
        for (std::size_t k = 0; k < 3; ++k) out.counts.candidates_by_origin[k] += o.by_origin[k];
        out.counts.candidates += o.candidates;
        out.counts.after_size += o.after_size;
        out.counts.after_nms += o.after_nms;
        out.counts.after_score += o.after_score;
        out.counts.block_instances += o.result.instances.size();
        t_provide += o.t_provide;
        t_cluster += o.t_cluster;
        t_score += o.t_score;
        t_prune += o.t_prune;
        if (options.keep_candidates) out.kept.push_back({o.result.center[0], o.result.center[1], std::move(o.kept)});
        results.push_back(std::move(o.result));
    }
    out.timings.emplace_back("provide", t_provide);
    out.timings.emplace_back("cluster", t_cluster);
    out.timings.emplace_back("score", t_score);
    out.timings.emplace_back("prune", t_prune);

    start = Clock::now();
    const GlobalPanoptic merged =
        in_stage("merge", [&] { return block_merge(results, sub.cloud.size(), config.merge_iou_threshold, taxonomy); });
    InstanceId top = 0;
    for (InstanceId id : merged.instance) top = std::max(top, id);
    out.counts.merged_instances = static_cast<std::size_t>(top);
    out.timings.emplace_back("merge", seconds_since(start));

    start = Clock::now();
    out.labels = in_stage("upsample", [&] { return upsample_labels(cloud, sub.cloud, merged, taxonomy); });
    out.timings.emplace_back("upsample", seconds_since(start));
    return out;
}

void write_counts(std::ostream& out, const StageCounts& c)
{
    out << "points " << c.input_points << '\n'
        << "subsampled " << c.subsampled_points << '\n'
        << "grid_centers " << c.grid_centers << '\n'
        << "blocks " << c.blocks << '\n'
        << "candidates " << c.candidates << '\n';
    for (Origin o : {Origin::Embedding, Origin::Offset, Origin::Raw}) {
        out << "candidates." << to_string(o) << ' ' << c.candidates_by_origin[static_cast<std::size_t>(o)] << '\n';
    }
    out << "after_size " << c.after_size << '\n'
        << "after_nms " << c.after_nms << '\n'
        << "after_score " << c.after_score << '\n'
        << "block_instances " << c.block_instances << '\n'
        << "merged_instances " << c.merged_instances << '\n';
}

} // namespace panoptic
