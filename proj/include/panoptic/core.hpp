#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace panoptic {

using Vec3 = std::array<double, 3>;
using Vec5 = std::array<double, 5>;

using ClassId = int;
using InstanceId = std::int64_t;
using PointId = std::size_t;

/// Sorted, duplicate-free list of point indices.
using IndexSet = std::vector<PointId>;

inline constexpr InstanceId kNoInstance = -1;

// ---------------------------------------------------------------------------
// Errors. Every error thrown by the library derives from panoptic::Error so
// the CLI can map it to exit code 2.

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
  public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

class FormatError : public Error {
    using Error::Error;
};

class ConfigError : public Error {
  public:
    ConfigError(std::string key, const std::string& what)
        : Error("config key '" + key + "': " + what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

  private:
    std::string key_;
};

class ContractError : public Error {
    using Error::Error;
};

class DataError : public Error {
    using Error::Error;
};

class CapacityError : public Error {
    using Error::Error;
};

class InvalidArgument : public Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------

struct PointCloud {
    std::vector<Vec3> positions;
    // passthrough columns, each of length size()
    std::map<std::string, std::vector<double>> attributes;

    std::size_t size() const noexcept { return positions.size(); }
    bool empty() const noexcept { return positions.empty(); }

    /// Throws ContractError on non-finite coordinates or ragged attributes.
    void validate() const;
};

enum class ClassKind { Thing, Stuff };

struct ClassInfo {
    ClassId id;
    std::string name;
    ClassKind kind;
};

class SemanticTaxonomy {
  public:
    explicit SemanticTaxonomy(std::vector<ClassInfo> classes);

    std::size_t size() const noexcept { return classes_.size(); }
    const std::vector<ClassInfo>& classes() const noexcept { return classes_; }
    bool contains(ClassId c) const noexcept { return c >= 0 && static_cast<std::size_t>(c) < classes_.size(); }
    bool is_thing(ClassId c) const { return contains(c) && classes_[static_cast<std::size_t>(c)].kind == ClassKind::Thing; }
    bool is_stuff(ClassId c) const { return contains(c) && classes_[static_cast<std::size_t>(c)].kind == ClassKind::Stuff; }
    const std::string& name(ClassId c) const { return classes_.at(static_cast<std::size_t>(c)).name; }

    /// ground (stuff), tree, car, pole.
    static SemanticTaxonomy synthetic();

    /// Lines of `id name thing|stuff`; blank lines and `#` comments skipped.
    static SemanticTaxonomy parse(const std::string& text);
    static SemanticTaxonomy load(const std::string& path);

  private:
    std::vector<ClassInfo> classes_;
};

struct Labeling {
    std::vector<ClassId> semantic;
    std::vector<InstanceId> instance;

    std::size_t size() const noexcept { return semantic.size(); }

    /// Lengths agree and every semantic id is in the taxonomy.
    void validate(const SemanticTaxonomy& taxonomy) const;
};

enum class Origin { Raw, Offset, Embedding };

const char* to_string(Origin origin) noexcept;
Origin origin_from_string(const std::string& text);

struct InstanceCandidate {
    IndexSet point_ids;
    ClassId class_id = 0;
    double score = 0.0;
    Origin origin = Origin::Raw;
};

struct ExtractedInstance {
    InstanceId id;
    IndexSet points;
    ClassId majority_class;
};

/// |a ∩ b| / |a ∪ b| over sorted sets. Both empty is an InvalidArgument.
double instance_iou(std::span<const PointId> a, std::span<const PointId> b);

/// Size of the intersection of two sorted sets.
std::size_t intersection_size(std::span<const PointId> a, std::span<const PointId> b) noexcept;

/// One entry per distinct non-negative instance id, ordered by id.
std::vector<ExtractedInstance> extract_instances(const Labeling& labeling);

/// Modal value; ties go to the smaller value. `values` must be non-empty.
template <typename T>
T majority_vote(std::span<const T> values)
{
    std::map<T, std::size_t> counts;
    for (const T& v : values) ++counts[v];
    T best = counts.begin()->first;
    std::size_t best_count = 0;
    for (const auto& [value, count] : counts) {
        if (count > best_count) {
            best = value;
            best_count = count;
        }
    }
    return best;
}

bool is_strictly_sorted(std::span<const PointId> ids) noexcept;

} // namespace panoptic
