#include "panoptic/pcio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace panoptic {

namespace {

std::vector<std::string_view> split_fields(std::string_view line)
{
    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        if (i >= line.size()) break;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        fields.push_back(line.substr(i, j - i));
        i = j;
    }
    return fields;
}

bool parse_double_field(std::string_view text, double& value)
{
    const char* first = text.data();
    const char* last = first + text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    return ec == std::errc() && ptr == last;
}

bool parse_int_field(std::string_view text, long long& value)
{
    const char* first = text.data();
    const char* last = first + text.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    return ec == std::errc() && ptr == last;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_suffix_index(const std::string& name, const std::string& prefix, std::size_t& index)
{
    if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return false;
    const std::string rest = name.substr(prefix.size());
    if (rest.size() > 1 && rest[0] == '0') return false;
    unsigned long long v = 0;
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), v);
    if (ec != std::errc() || ptr != rest.data() + rest.size()) return false;
    index = static_cast<std::size_t>(v);
    return true;
}

// (group, index) sort key for canonical feature column order
std::pair<int, std::size_t> feature_order(const std::string& name)
{
    if (name == "off_x") return {0, 0};
    if (name == "off_y") return {0, 1};
    if (name == "off_z") return {0, 2};
    std::size_t index = 0;
    if (parse_suffix_index(name, "emb_", index)) return {1, index};
    if (parse_suffix_index(name, "p_", index)) return {2, index};
    return {3, 0};
}

} // namespace

bool is_feature_column(const std::string& name)
{
    return feature_order(name).first < 3;
}

std::string format_real(double value)
{
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.9g", value);
    return buffer;
}

CloudData read_cloud(std::istream& in)
{
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        for (auto field : split_fields(line)) header.emplace_back(field);
        if (!header.empty()) break;
    }
    if (header.empty()) throw FormatError("cloud file has no header line");

    std::set<std::string> seen;
    for (const auto& name : header) {
        if (!seen.insert(name).second) throw FormatError("duplicate column '" + name + "'");
    }
    for (const char* required : {"x", "y", "z"}) {
        if (!seen.count(required)) throw FormatError(std::string("missing required column '") + required + "'");
    }
    if (seen.count("sem") != seen.count("ins")) throw FormatError("columns 'sem' and 'ins' must appear together");

    enum class Kind { X, Y, Z, Sem, Ins, Feature, Attribute };
    std::vector<Kind> kinds;
    for (const auto& name : header) {
        if (name == "x") kinds.push_back(Kind::X);
        else if (name == "y") kinds.push_back(Kind::Y);
        else if (name == "z") kinds.push_back(Kind::Z);
        else if (name == "sem") kinds.push_back(Kind::Sem);
        else if (name == "ins") kinds.push_back(Kind::Ins);
        else if (is_feature_column(name)) kinds.push_back(Kind::Feature);
        else kinds.push_back(Kind::Attribute);
    }

    CloudData data;
    const bool has_labels = seen.count("sem") > 0;
    if (has_labels) data.labels.emplace();
    std::vector<std::vector<double>*> real_columns(header.size(), nullptr);
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (kinds[c] == Kind::Feature) real_columns[c] = &data.features[header[c]];
        if (kinds[c] == Kind::Attribute) real_columns[c] = &data.cloud.attributes[header[c]];
    }

    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = split_fields(line);
        if (fields.empty()) continue;
        if (fields.size() != header.size()) {
            throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                          std::to_string(fields.size()));
        }
        Vec3 p{};
        for (std::size_t c = 0; c < fields.size(); ++c) {
            if (kinds[c] == Kind::Sem || kinds[c] == Kind::Ins) {
                long long v = 0;
                if (!parse_int_field(fields[c], v)) {
                    throw ParseError(line_no, "column '" + header[c] + "' needs an integer, got '" +
                                                  std::string(fields[c]) + "'");
                }
                if (kinds[c] == Kind::Sem) data.labels->semantic.push_back(static_cast<ClassId>(v));
                else data.labels->instance.push_back(static_cast<InstanceId>(v));
                continue;
            }
            double v = 0.0;
            if (!parse_double_field(fields[c], v) || !std::isfinite(v)) {
                throw ParseError(line_no, "column '" + header[c] + "' needs a finite number, got '" +
                                              std::string(fields[c]) + "'");
            }
            switch (kinds[c]) {
            case Kind::X: p[0] = v; break;
            case Kind::Y: p[1] = v; break;
            case Kind::Z: p[2] = v; break;
            default: real_columns[c]->push_back(v); break;
            }
        }
        data.cloud.positions.push_back(p);
    }
    return data;
}

CloudData read_cloud(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open cloud file '" + path + "'");
    return read_cloud(in);
}

void write_cloud(std::ostream& out, const CloudData& data)
{
    const std::size_t n = data.cloud.size();
    if (data.labels && (data.labels->semantic.size() != n || data.labels->instance.size() != n)) {
        throw ContractError("labels do not match the cloud size");
    }
    std::vector<std::pair<std::string, const std::vector<double>*>> extra;
    for (const auto& [name, column] : data.cloud.attributes) extra.emplace_back(name, &column);
    std::vector<std::pair<std::string, const std::vector<double>*>> features;
    for (const auto& [name, column] : data.features) features.emplace_back(name, &column);
    std::sort(features.begin(), features.end(),
              [](const auto& a, const auto& b) { return feature_order(a.first) < feature_order(b.first); });
    for (const auto* group : {&extra, &features}) {
        for (const auto& [name, column] : *group) {
            if (column->size() != n) throw ContractError("column '" + name + "' does not match the cloud size");
        }
    }

    std::string buffer = "x y z";
    for (const auto& [name, column] : extra) buffer += " " + name;
    if (data.labels) buffer += " sem ins";
    for (const auto& [name, column] : features) buffer += " " + name;
    buffer += '\n';
    out << buffer;

    for (std::size_t i = 0; i < n; ++i) {
        buffer.clear();
        const Vec3& p = data.cloud.positions[i];
        buffer += format_real(p[0]);
        buffer += ' ';
        buffer += format_real(p[1]);
        buffer += ' ';
        buffer += format_real(p[2]);
        for (const auto& [name, column] : extra) {
            buffer += ' ';
            buffer += format_real((*column)[i]);
        }
        if (data.labels) {
            buffer += ' ';
            buffer += std::to_string(data.labels->semantic[i]);
            buffer += ' ';
            buffer += std::to_string(data.labels->instance[i]);
        }
        for (const auto& [name, column] : features) {
            buffer += ' ';
            buffer += format_real((*column)[i]);
        }
        buffer += '\n';
        out << buffer;
    }
}

void write_cloud(const std::string& path, const CloudData& data)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write cloud file '" + path + "'");
    write_cloud(out, data);
    if (!out) throw FormatError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------

KeyValueFile parse_key_values(std::istream& in)
{
    KeyValueFile file;
    std::set<std::string> keys;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string text = trim(line);
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw ParseError(line_no, "expected `key = value`");
        std::string key = trim(text.substr(0, eq));
        std::string value = trim(text.substr(eq + 1));
        if (key.empty()) throw ParseError(line_no, "empty key");
        if (!keys.insert(key).second) throw ParseError(line_no, "duplicate key '" + key + "'");
        file.entries.push_back({std::move(key), std::move(value), line_no});
    }
    return file;
}

KeyValueFile read_key_values(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config file '" + path + "'");
    return parse_key_values(in);
}

double parse_real(const std::string& key, const std::string& value)
{
    double v = 0.0;
    if (!parse_double_field(value, v) || !std::isfinite(v)) throw ConfigError(key, "not a number: '" + value + "'");
    return v;
}

long long parse_integer(const std::string& key, const std::string& value)
{
    long long v = 0;
    if (!parse_int_field(value, v)) throw ConfigError(key, "not an integer: '" + value + "'");
    return v;
}

Profile profile_from_string(const std::string& name)
{
    if (name == "npm3d") return Profile::Npm3d;
    if (name == "forest") return Profile::Forest;
    throw ConfigError("profile", "unknown profile '" + name + "' (npm3d|forest)");
}

const char* to_string(Profile profile) noexcept
{
    return profile == Profile::Forest ? "forest" : "npm3d";
}

Setting setting_from_string(const std::string& name)
{
    static const char* names[] = {"I", "II", "III", "IV", "V"};
    for (int i = 0; i < 5; ++i) {
        if (name == names[i]) return static_cast<Setting>(i + 1);
    }
    throw ConfigError("setting", "unknown setting '" + name + "' (I..V)");
}

const char* to_string(Setting setting) noexcept
{
    static const char* names[] = {"I", "II", "III", "IV", "V"};
    return names[static_cast<int>(setting) - 1];
}

PipelineConfig PipelineConfig::defaults(Profile profile)
{
    PipelineConfig c;
    c.profile = profile;
    if (profile == Profile::Forest) {
        c.voxel_size = 0.2;
        c.cylinder_radius = 4.0;
        c.score_threshold = 0.5;
    }
    return c;
}

void PipelineConfig::validate() const
{
    auto positive = [](const char* key, double v) {
        if (!(v > 0.0)) throw ConfigError(key, "must be > 0");
    };
    auto unit = [](const char* key, double v) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(key, "must lie in [0,1]");
    };
    auto non_negative = [](const char* key, double v) {
        if (!(v >= 0.0)) throw ConfigError(key, "must be >= 0");
    };
    positive("voxel_size", voxel_size);
    positive("cylinder_radius", cylinder_radius);
    non_negative("grid_step", grid_step);
    if (effective_grid_step() > cylinder_radius * std::sqrt(2.0)) {
        throw ConfigError("grid_step", "must not exceed cylinder_radius * sqrt(2), or blocks leave gaps");
    }
    positive("region_growing_radius", region_growing_radius);
    positive("meanshift_bandwidth", meanshift_bandwidth);
    if (meanshift_max_iter <= 0) throw ConfigError("meanshift_max_iter", "must be > 0");
    positive("meanshift_tol", meanshift_tol);
    if (min_cluster_size == 0) throw ConfigError("min_cluster_size", "must be > 0");
    unit("score_threshold", score_threshold);
    unit("nms_iou_threshold", nms_iou_threshold);
    unit("merge_iou_threshold", merge_iou_threshold);
    unit("match_iou_threshold", match_iou_threshold);
    non_negative("jitter_sigma", jitter_sigma);
    unit("sem_flip_prob", sem_flip_prob);
    non_negative("offset_sigma", offset_sigma);
    non_negative("embedding_sigma", embedding_sigma);
    non_negative("offset_l1_weight", offset_l1_weight);
    non_negative("offset_cosine_weight", offset_cosine_weight);
    positive("delta_v", delta_v);
    positive("delta_d", delta_d);
    non_negative("disc_var_weight", disc_var_weight);
    non_negative("disc_dist_weight", disc_dist_weight);
    non_negative("disc_reg_weight", disc_reg_weight);
}

void apply_config_entry(PipelineConfig& c, const std::string& key, const std::string& value)
{
    auto real = [&](double& field) { field = parse_real(key, value); };

    if (key == "profile") {
        // switching profile resets the profile-dependent defaults only
        const PipelineConfig d = PipelineConfig::defaults(profile_from_string(value));
        c.profile = d.profile;
        c.voxel_size = d.voxel_size;
        c.cylinder_radius = d.cylinder_radius;
        c.score_threshold = d.score_threshold;
    } else if (key == "voxel_size") real(c.voxel_size);
    else if (key == "cylinder_radius") real(c.cylinder_radius);
    else if (key == "grid_step") real(c.grid_step);
    else if (key == "region_growing_radius") real(c.region_growing_radius);
    else if (key == "meanshift_bandwidth") real(c.meanshift_bandwidth);
    else if (key == "meanshift_max_iter") {
        const long long v = parse_integer(key, value);
        if (v <= 0 || v > 1000000) throw ConfigError(key, "must lie in [1, 1000000]");
        c.meanshift_max_iter = static_cast<int>(v);
    } else if (key == "meanshift_tol") real(c.meanshift_tol);
    else if (key == "min_cluster_size") {
        const long long v = parse_integer(key, value);
        if (v <= 0) throw ConfigError(key, "must be > 0");
        c.min_cluster_size = static_cast<std::size_t>(v);
    } else if (key == "score_threshold") real(c.score_threshold);
    else if (key == "nms_iou_threshold") real(c.nms_iou_threshold);
    else if (key == "merge_iou_threshold") real(c.merge_iou_threshold);
    else if (key == "match_iou_threshold") real(c.match_iou_threshold);
    else if (key == "jitter_sigma") real(c.jitter_sigma);
    else if (key == "sem_flip_prob") real(c.sem_flip_prob);
    else if (key == "offset_sigma") real(c.offset_sigma);
    else if (key == "embedding_sigma") real(c.embedding_sigma);
    else if (key == "offset_l1_weight") real(c.offset_l1_weight);
    else if (key == "offset_cosine_weight") real(c.offset_cosine_weight);
    else if (key == "delta_v") real(c.delta_v);
    else if (key == "delta_d") real(c.delta_d);
    else if (key == "disc_var_weight") real(c.disc_var_weight);
    else if (key == "disc_dist_weight") real(c.disc_dist_weight);
    else if (key == "disc_reg_weight") real(c.disc_reg_weight);
    else if (key == "seed") {
        const long long v = parse_integer(key, value);
        if (v < 0) throw ConfigError(key, "must be >= 0");
        c.seed = static_cast<std::uint64_t>(v);
    } else if (key == "setting") {
        c.setting = setting_from_string(value);
    } else {
        throw ConfigError(key, "unknown key");
    }
}

void apply_config(PipelineConfig& config, const KeyValueFile& file)
{
    // profile first so explicit keys in the same file win regardless of order
    for (const auto& e : file.entries) {
        if (e.key == "profile") apply_config_entry(config, e.key, e.value);
    }
    for (const auto& e : file.entries) {
        if (e.key != "profile") apply_config_entry(config, e.key, e.value);
    }
}

PipelineConfig read_config(const std::string& path, Profile profile)
{
    PipelineConfig config = PipelineConfig::defaults(profile);
    if (!path.empty()) apply_config(config, read_key_values(path));
    config.validate();
    return config;
}

void write_config(std::ostream& out, const PipelineConfig& c)
{
    out << "profile = " << to_string(c.profile) << '\n'
        << "voxel_size = " << format_real(c.voxel_size) << '\n'
        << "cylinder_radius = " << format_real(c.cylinder_radius) << '\n'
        << "grid_step = " << format_real(c.effective_grid_step()) << '\n'
        << "region_growing_radius = " << format_real(c.region_growing_radius) << '\n'
        << "meanshift_bandwidth = " << format_real(c.meanshift_bandwidth) << '\n'
        << "meanshift_max_iter = " << c.meanshift_max_iter << '\n'
        << "meanshift_tol = " << format_real(c.meanshift_tol) << '\n'
        << "min_cluster_size = " << c.min_cluster_size << '\n'
        << "score_threshold = " << format_real(c.score_threshold) << '\n'
        << "nms_iou_threshold = " << format_real(c.nms_iou_threshold) << '\n'
        << "merge_iou_threshold = " << format_real(c.merge_iou_threshold) << '\n'
        << "match_iou_threshold = " << format_real(c.match_iou_threshold) << '\n'
        << "jitter_sigma = " << format_real(c.jitter_sigma) << '\n'
        << "sem_flip_prob = " << format_real(c.sem_flip_prob) << '\n'
        << "offset_sigma = " << format_real(c.offset_sigma) << '\n'
        << "embedding_sigma = " << format_real(c.embedding_sigma) << '\n'
        << "offset_l1_weight = " << format_real(c.offset_l1_weight) << '\n'
        << "offset_cosine_weight = " << format_real(c.offset_cosine_weight) << '\n'
        << "delta_v = " << format_real(c.delta_v) << '\n'
        << "delta_d = " << format_real(c.delta_d) << '\n'
        << "disc_var_weight = " << format_real(c.disc_var_weight) << '\n'
        << "disc_dist_weight = " << format_real(c.disc_dist_weight) << '\n'
        << "disc_reg_weight = " << format_real(c.disc_reg_weight) << '\n'
        << "seed = " << c.seed << '\n'
        << "setting = " << to_string(c.setting) << '\n';
}

// ---------------------------------------------------------------------------

void write_candidates(std::ostream& out, const std::vector<BlockCandidates>& blocks)
{
    std::string buffer;
    for (const auto& block : blocks) {
        out << "block " << format_real(block.center_x) << ' ' << format_real(block.center_y) << '\n';
        for (const auto& c : block.candidates) {
            buffer.clear();
            buffer += std::to_string(c.class_id);
            buffer += ' ';
            buffer += format_real(c.score);
            buffer += ' ';
            buffer += to_string(c.origin);
            buffer += ' ';
            buffer += std::to_string(c.point_ids.size());
            for (PointId id : c.point_ids) {
                buffer += ' ';
                buffer += std::to_string(id);
            }
            buffer += '\n';
            out << buffer;
        }
    }
}

std::vector<BlockCandidates> read_candidates(std::istream& in)
{
    std::vector<BlockCandidates> blocks;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = split_fields(line);
        if (fields.empty()) continue;
        if (fields[0] == "block") {
            BlockCandidates block;
            if (fields.size() != 3 || !parse_double_field(fields[1], block.center_x) ||
                !parse_double_field(fields[2], block.center_y)) {
                throw ParseError(line_no, "expected `block <center_x> <center_y>`");
            }
            blocks.push_back(std::move(block));
            continue;
        }
        if (blocks.empty()) throw ParseError(line_no, "candidate line before any `block` header");
        if (fields.size() < 4) throw ParseError(line_no, "expected `class score origin id_count ids...`");
        InstanceCandidate c;
        long long cls = 0, count = 0;
        if (!parse_int_field(fields[0], cls)) throw ParseError(line_no, "bad class id");
        if (!parse_double_field(fields[1], c.score) || c.score < 0.0 || c.score > 1.0) {
            throw ParseError(line_no, "score must be a number in [0,1]");
        }
        try {
            c.origin = origin_from_string(std::string(fields[2]));
        } catch (const FormatError& e) {
            throw ParseError(line_no, e.what());
        }
        if (!parse_int_field(fields[3], count) || count < 0 ||
            static_cast<std::size_t>(count) != fields.size() - 4) {
            throw ParseError(line_no, "id_count does not match the number of ids");
        }
        c.class_id = static_cast<ClassId>(cls);
        for (std::size_t k = 4; k < fields.size(); ++k) {
            long long id = 0;
            if (!parse_int_field(fields[k], id) || id < 0) throw ParseError(line_no, "bad point id");
            c.point_ids.push_back(static_cast<PointId>(id));
        }
        if (c.point_ids.empty() || !is_strictly_sorted(c.point_ids)) {
            throw ParseError(line_no, "point ids must be non-empty and strictly increasing");
        }
        blocks.back().candidates.push_back(std::move(c));
    }
    return blocks;
}

} // namespace panoptic
