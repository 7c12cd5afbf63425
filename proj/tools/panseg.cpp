// panseg: command-line front end for the panoptic point cloud pipeline.

#include "panoptic/clustering.hpp"
#include "panoptic/gradcheck.hpp"
#include "panoptic/merge.hpp"
#include "panoptic/metrics.hpp"
#include "panoptic/pcio.hpp"
#include "panoptic/pipeline.hpp"
#include "panoptic/selection.hpp"
#include "panoptic/synthgen.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

using namespace panoptic;

namespace {

const char* const kConfigKeys[] = {
    "voxel_size",       "cylinder_radius",     "grid_step",       "region_growing_radius", "meanshift_bandwidth",
    "meanshift_max_iter", "meanshift_tol",     "min_cluster_size", "score_threshold",      "nms_iou_threshold",
    "merge_iou_threshold", "match_iou_threshold", "jitter_sigma",  "sem_flip_prob",        "offset_sigma",
    "embedding_sigma",  "offset_l1_weight",    "offset_cosine_weight", "delta_v",          "delta_d",
    "disc_var_weight",  "disc_dist_weight",    "disc_reg_weight", "setting",
};

// Options every subcommand shares. Precedence: flags, then the config file,
// then the profile defaults.
struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> profile;
    std::string taxonomy_path;
    std::map<std::string, std::string> overrides;

    void attach(CLI::App* app)
    {
        app->add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
        app->add_option("--seed", seed, "random seed");
        app->add_option("--profile", profile, "parameter profile")->check(CLI::IsMember({"npm3d", "forest"}));
        app->add_option("--taxonomy", taxonomy_path, "class list file (default: synthetic classes)")
            ->check(CLI::ExistingFile);
        for (const char* key : kConfigKeys) {
            std::string flag = std::string("--") + key;
            std::replace(flag.begin(), flag.end(), '_', '-');
            app->add_option_function<std::string>(flag, [this, key](const std::string& v) { overrides[key] = v; },
                                                  std::string("override ") + key);
        }
    }

    PipelineConfig config() const
    {
        std::optional<KeyValueFile> file;
        if (!config_path.empty()) file = read_key_values(config_path);
        Profile p = Profile::Npm3d;
        if (profile) {
            p = profile_from_string(*profile);
        } else if (file) {
            for (const auto& e : file->entries) {
                if (e.key == "profile") p = profile_from_string(e.value);
            }
        }
        PipelineConfig c = PipelineConfig::defaults(p);
        if (file) {
            for (const auto& e : file->entries) {
                if (e.key != "profile") apply_config_entry(c, e.key, e.value);
            }
        }
        for (const auto& [k, v] : overrides) apply_config_entry(c, k, v);
        if (seed) c.seed = *seed;
        c.validate();
        return c;
    }

    SemanticTaxonomy taxonomy() const
    {
        return taxonomy_path.empty() ? SemanticTaxonomy::synthetic() : SemanticTaxonomy::load(taxonomy_path);
    }
};

const Labeling& require_labels(const CloudData& data, const std::string& what)
{
    if (!data.labels) throw ContractError(what + " has no sem/ins columns");
    return *data.labels;
}

int run_synth(const Common& common, const std::string& spec_path, const std::string& out_path)
{
    SceneSpec spec = spec_path.empty() ? SceneSpec{} : read_scene_spec(spec_path);
    if (common.seed) spec.seed = *common.seed;
    const Scene scene = generate_scene(spec);
    write_cloud(out_path, CloudData{scene.cloud, scene.labels, {}});
    std::cout << "points " << scene.cloud.size() << "\ninstances " << scene.objects.size() << '\n';
    return 0;
}

int run_subsample(const Common& common, const std::string& in_path, const std::string& out_path)
{
    const PipelineConfig config = common.config();
    const CloudData in = read_cloud(in_path);
    const SubsampleResult sub = voxel_subsample(in.cloud, in.labels ? &*in.labels : nullptr, config.voxel_size);
    write_cloud(out_path, CloudData{sub.cloud, sub.labels, average_columns(in.features, sub.voxels)});
    std::cout << "points " << in.cloud.size() << "\nsubsampled " << sub.cloud.size() << '\n';
    return 0;
}

int run_blocks(const Common& common, const std::string& in_path, const std::string& out_path)
{
    const PipelineConfig config = common.config();
    const CloudData in = read_cloud(in_path);
    std::size_t grid = 0;
    const auto blocks = make_blocks(in.cloud, config, &grid);
    std::ofstream out(out_path);
    if (!out) throw Error("cannot write " + out_path);
    out << "center_x center_y radius points\n";
    for (const auto& b : blocks) {
        out << format_real(b.center[0]) << ' ' << format_real(b.center[1]) << ' ' << format_real(b.radius) << ' '
            << b.size() << '\n';
    }
    std::cout << "grid_centers " << grid << "\nblocks " << blocks.size() << '\n';
    return 0;
}

struct SegmentArgs {
    std::string in, out, features, dump;
    std::string provider = "oracle", scorer = "oracle";
    int workers = 1;
};

int run_segment(const Common& common, const SegmentArgs& args)
{
    const PipelineConfig config = common.config();
    const SemanticTaxonomy taxonomy = common.taxonomy();
    SegmentOptions options;
    options.provider = provider_from_string(args.provider);
    options.scorer = scorer_from_string(args.scorer);
    options.workers = args.workers;
    options.keep_candidates = !args.dump.empty();

    const CloudData in = read_cloud(args.in);
    FeatureColumns features = in.features;
    if (!args.features.empty()) features = read_cloud(args.features).features;

    const SegmentResult r = segment(in.cloud, in.labels ? &*in.labels : nullptr, &features, taxonomy, config, options);
    write_cloud(args.out, CloudData{in.cloud, r.labels, {}});
    if (options.keep_candidates) {
        std::ofstream dump(args.dump);
        if (!dump) throw Error("cannot write " + args.dump);
        write_candidates(dump, r.kept);
    }
    write_counts(std::cout, r.counts);
    for (const auto& [stage, seconds] : r.timings) std::cout << "time." << stage << ' ' << seconds << '\n';
    return 0;
}

int run_merge(const Common& common, const std::string& in_path, const std::string& candidates_path,
              const std::string& out_path)
{
    const PipelineConfig config = common.config();
    const SemanticTaxonomy taxonomy = common.taxonomy();
    const CloudData in = read_cloud(in_path);
    const Labeling& labels = require_labels(in, in_path);
    std::ifstream cin(candidates_path);
    if (!cin) throw Error("cannot read " + candidates_path);
    std::vector<BlockInstances> blocks;
    for (const auto& bc : read_candidates(cin)) {
        BlockInstances b{{bc.center_x, bc.center_y}, {}};
        for (auto& inst : resolve_ownership(bc.candidates)) b.instances.push_back(std::move(inst.points));
        blocks.push_back(std::move(b));
    }
    Labeling out;
    out.semantic = labels.semantic;
    out.instance = merge_instances(std::move(blocks), in.cloud.size(), config.merge_iou_threshold);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (taxonomy.is_stuff(out.semantic[i])) out.instance[i] = kNoInstance;
    }
    write_cloud(out_path, CloudData{in.cloud, out, {}});
    InstanceId top = 0;
    for (InstanceId id : out.instance) top = std::max(top, id);
    std::cout << "merged_instances " << top << '\n';
    return 0;
}

int run_eval(const Common& common, const std::string& pred_path, const std::string& gt_path,
             const std::string& report_path, const std::string& table_path)
{
    const PipelineConfig config = common.config();
    const SemanticTaxonomy taxonomy = common.taxonomy();
    const CloudData pred = read_cloud(pred_path);
    const CloudData gt = read_cloud(gt_path);
    const MetricsReport report =
        evaluate(require_labels(pred, pred_path), require_labels(gt, gt_path), taxonomy, config.match_iou_threshold);
    write_report(std::cout, report, taxonomy);
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) throw Error("cannot write " + report_path);
        write_report(out, report, taxonomy);
    }
    if (!table_path.empty()) {
        std::ofstream out(table_path);
        if (!out) throw Error("cannot write " + table_path);
        write_table(out, report, taxonomy);
    }
    return 0;
}

int run_gradcheck(const Common& common, std::size_t trials)
{
    const std::uint64_t seed = common.seed.value_or(0);
    bool ok = true;
    for (LossKind kind : {LossKind::CrossEntropy, LossKind::Offset, LossKind::Discriminative}) {
        const GradcheckResult r = run_gradcheck(kind, trials, seed);
        std::cout << to_string(kind) << " max_relative_error " << r.max_relative_error << " trials " << r.trials
                  << " redrawn " << r.rejected << '\n';
        ok = ok && r.max_relative_error < 1e-5;
    }
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Panoptic segmentation of 3D point clouds"};
    app.require_subcommand(1);

    Common common;
    std::string in, out, spec, candidates, pred, gt, report, table;
    SegmentArgs seg;
    std::size_t trials = 100;

    auto* synth = app.add_subcommand("synth", "generate a labeled synthetic scene");
    common.attach(synth);
    synth->add_option("--spec", spec, "scene description file")->check(CLI::ExistingFile);
    synth->add_option("--out", out, "output cloud")->required();

    auto* subsample = app.add_subcommand("subsample", "voxel-grid subsampling");
    common.attach(subsample);
    subsample->add_option("--in", in, "input cloud")->required()->check(CLI::ExistingFile);
    subsample->add_option("--out", out, "output cloud")->required();

    auto* blocks = app.add_subcommand("blocks", "list the cylinder blocks covering a (subsampled) cloud");
    common.attach(blocks);
    blocks->add_option("--in", in, "input cloud")->required()->check(CLI::ExistingFile);
    blocks->add_option("--out", out, "block table")->required();

    auto* segment = app.add_subcommand("segment", "run the full pipeline");
    common.attach(segment);
    segment->add_option("--in", seg.in, "input cloud")->required()->check(CLI::ExistingFile);
    segment->add_option("--out", seg.out, "output cloud with sem/ins")->required();
    segment->add_option("--features", seg.features, "cloud file holding feature columns")->check(CLI::ExistingFile);
    segment->add_option("--provider", seg.provider, "feature provider")->check(CLI::IsMember({"oracle", "file"}));
    segment->add_option("--scorer", seg.scorer, "candidate scorer")->check(CLI::IsMember({"oracle", "consensus"}));
    segment->add_option("--workers", seg.workers, "parallel block workers")->check(CLI::PositiveNumber);
    segment->add_option("--dump-candidates", seg.dump, "write kept per-block candidates here");

    auto* merge = app.add_subcommand("merge", "merge per-block candidates on a subsampled cloud");
    common.attach(merge);
    merge->add_option("--in", in, "subsampled cloud with sem")->required()->check(CLI::ExistingFile);
    merge->add_option("--candidates", candidates, "candidate file")->required()->check(CLI::ExistingFile);
    merge->add_option("--out", out, "output cloud")->required();

    auto* eval = app.add_subcommand("eval", "score a prediction against ground truth");
    common.attach(eval);
    eval->add_option("--pred", pred, "predicted cloud")->required()->check(CLI::ExistingFile);
    eval->add_option("--gt", gt, "ground-truth cloud")->required()->check(CLI::ExistingFile);
    eval->add_option("--report", report, "report file");
    eval->add_option("--table", table, "metric table file");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the loss gradients");
    common.attach(gradcheck);
    gradcheck->add_option("--trials", trials, "random inputs per loss")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*synth) return run_synth(common, spec, out);
        if (*subsample) return run_subsample(common, in, out);
        if (*blocks) return run_blocks(common, in, out);
        if (*segment) return run_segment(common, seg);
        if (*merge) return run_merge(common, in, candidates, out);
        if (*eval) return run_eval(common, pred, gt, report, table);
        if (*gradcheck) return run_gradcheck(common, trials);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
