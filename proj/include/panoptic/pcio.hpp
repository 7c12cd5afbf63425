#pragma once

#include "panoptic/core.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace panoptic {

/// Feature columns (off_*, emb_*, p_*) exactly as they appear in a cloud file.
using FeatureColumns = std::map<std::string, std::vector<double>>;

struct CloudData {
    PointCloud cloud;
    std::optional<Labeling> labels;
    FeatureColumns features;
};

/// Text cloud format: a header line of column names, then one point per line.
/// Required columns: x y z. Optional: sem ins, off_x off_y off_z, emb_0..emb_4,
/// p_0..p_{C-1}. Any other column is kept as a passthrough attribute.
CloudData read_cloud(std::istream& in);
CloudData read_cloud(const std::string& path);

/// Columns are written as x y z, attributes (by name), sem ins, offsets,
/// embeddings, probabilities. Reals use 9 significant digits.
void write_cloud(std::ostream& out, const CloudData& data);
void write_cloud(const std::string& path, const CloudData& data);

std::string format_real(double value);

bool is_feature_column(const std::string& name);

// ---------------------------------------------------------------------------
// `key = value` files

/// Ordered key/value pairs with the line each came from.
struct KeyValueFile {
    struct Entry {
        std::string key;
        std::string value;
        std::size_t line;
    };
    std::vector<Entry> entries;
};

/// Blank lines and `#` comments are skipped; duplicate keys are a parse error.
KeyValueFile parse_key_values(std::istream& in);
KeyValueFile read_key_values(const std::string& path);

double parse_real(const std::string& key, const std::string& value);
long long parse_integer(const std::string& key, const std::string& value);

// ---------------------------------------------------------------------------
// Pipeline configuration

enum class Profile { Npm3d, Forest };

Profile profile_from_string(const std::string& name);
const char* to_string(Profile profile) noexcept;

/// Which instance generators feed the candidate pool.
enum class Setting { I = 1, II, III, IV, V };

Setting setting_from_string(const std::string& name);
const char* to_string(Setting setting) noexcept;

struct PipelineConfig {
    Profile profile = Profile::Npm3d;

    double voxel_size = 0.12;
    double cylinder_radius = 16.0;
    double grid_step = 0.0;  // 0 = same as cylinder_radius
    double region_growing_radius = 0.03;
    double meanshift_bandwidth = 0.6;
    int meanshift_max_iter = 300;
    double meanshift_tol = 1e-4;
    std::size_t min_cluster_size = 10;
    double score_threshold = 0.6;
    double nms_iou_threshold = 0.3;
    double merge_iou_threshold = 0.01;
    double match_iou_threshold = 0.5;
    double jitter_sigma = 0.01;

    // oracle provider noise
    double sem_flip_prob = 0.0;
    double offset_sigma = 0.0;
    double embedding_sigma = 0.0;

    // loss weights and margins
    double offset_l1_weight = 1.0;
    double offset_cosine_weight = 1.0;
    double delta_v = 0.5;
    double delta_d = 1.5;
    double disc_var_weight = 1.0;
    double disc_dist_weight = 1.0;
    double disc_reg_weight = 0.001;

    std::uint64_t seed = 0;
    Setting setting = Setting::IV;

    double effective_grid_step() const noexcept { return grid_step > 0.0 ? grid_step : cylinder_radius; }

    /// Throws ConfigError on out-of-range values.
    void validate() const;

    static PipelineConfig defaults(Profile profile);
};

/// Applies `key = value` overrides onto `config`; unknown keys are rejected.
void apply_config(PipelineConfig& config, const KeyValueFile& file);
void apply_config_entry(PipelineConfig& config, const std::string& key, const std::string& value);

/// Profile defaults overridden by the file at `path` (empty path = defaults).
PipelineConfig read_config(const std::string& path, Profile profile);

void write_config(std::ostream& out, const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Candidate lines: `class score origin id_count ids...`, grouped under
// `block <center_x> <center_y>` headers.

struct BlockCandidates {
    double center_x = 0.0;
    double center_y = 0.0;
    std::vector<InstanceCandidate> candidates;
};

void write_candidates(std::ostream& out, const std::vector<BlockCandidates>& blocks);
std::vector<BlockCandidates> read_candidates(std::istream& in);

} // namespace panoptic
