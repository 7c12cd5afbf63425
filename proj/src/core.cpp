#include "panoptic/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace panoptic {

void PointCloud::validate() const
{
    for (std::size_t i = 0; i < positions.size(); ++i) {
        for (double v : positions[i]) {
            if (!std::isfinite(v)) {
                throw ContractError("point " + std::to_string(i) + " has a non-finite coordinate");
            }
        }
    }
    for (const auto& [name, column] : attributes) {
        if (column.size() != positions.size()) {
            throw ContractError("attribute '" + name + "' has " + std::to_string(column.size()) +
                                " values for " + std::to_string(positions.size()) + " points");
        }
    }
}

SemanticTaxonomy::SemanticTaxonomy(std::vector<ClassInfo> classes) : classes_(std::move(classes))
{
    if (classes_.empty()) {
        throw InvalidArgument("taxonomy needs at least one class");
    }
    std::sort(classes_.begin(), classes_.end(), [](const ClassInfo& a, const ClassInfo& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        if (classes_[i].id != static_cast<ClassId>(i)) {
            throw InvalidArgument("taxonomy class ids must be unique and contiguous from 0");
        }
    }
}

SemanticTaxonomy SemanticTaxonomy::synthetic()
{
    return SemanticTaxonomy({
        {0, "ground", ClassKind::Stuff},
        {1, "tree", ClassKind::Thing},
        {2, "car", ClassKind::Thing},
        {3, "pole", ClassKind::Thing},
    });
}

SemanticTaxonomy SemanticTaxonomy::parse(const std::string& text)
{
    std::vector<ClassInfo> classes;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        ClassInfo info{};
        std::string kind;
        if (!(fields >> info.id)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            throw ParseError(line_no, "expected class id");
        }
        if (!(fields >> info.name >> kind)) {
            throw ParseError(line_no, "expected `id name thing|stuff`");
        }
        if (kind == "thing") {
            info.kind = ClassKind::Thing;
        } else if (kind == "stuff") {
            info.kind = ClassKind::Stuff;
        } else {
            throw ParseError(line_no, "class kind must be thing or stuff, got '" + kind + "'");
        }
        classes.push_back(std::move(info));
    }
    return SemanticTaxonomy(std::move(classes));
}

SemanticTaxonomy SemanticTaxonomy::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open taxonomy file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

void Labeling::validate(const SemanticTaxonomy& taxonomy) const
{
    if (semantic.size() != instance.size()) {
        throw ContractError("labeling has " + std::to_string(semantic.size()) + " semantic and " +
                            std::to_string(instance.size()) + " instance labels");
    }
    for (std::size_t i = 0; i < semantic.size(); ++i) {
        if (!taxonomy.contains(semantic[i])) {
            throw ContractError("point " + std::to_string(i) + " has unknown class " + std::to_string(semantic[i]));
        }
        if (instance[i] < kNoInstance) {
            throw ContractError("point " + std::to_string(i) + " has negative instance id other than -1");
        }
    }
}

const char* to_string(Origin origin) noexcept
{
    switch (origin) {
    case Origin::Raw: return "raw";
    case Origin::Offset: return "offset";
    case Origin::Embedding: return "embedding";
    }
    return "raw";
}

Origin origin_from_string(const std::string& text)
{
    if (text == "raw") return Origin::Raw;
    if (text == "offset") return Origin::Offset;
    if (text == "embedding") return Origin::Embedding;
    throw FormatError("unknown candidate origin '" + text + "'");
}

std::size_t intersection_size(std::span<const PointId> a, std::span<const PointId> b) noexcept
{
    std::size_t i = 0, j = 0, common = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) {
            ++i;
        } else if (b[j] < a[i]) {
            ++j;
        } else {
            ++common;
            ++i;
            ++j;
        }
    }
    return common;
}

double instance_iou(std::span<const PointId> a, std::span<const PointId> b)
{
    if (a.empty() && b.empty()) {
        throw InvalidArgument("IoU of two empty sets is undefined");
    }
    const std::size_t common = intersection_size(a, b);
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

std::vector<ExtractedInstance> extract_instances(const Labeling& labeling)
{
    std::map<InstanceId, std::size_t> slot;
    std::vector<ExtractedInstance> out;
    for (std::size_t i = 0; i < labeling.instance.size(); ++i) {
        const InstanceId id = labeling.instance[i];
        if (id < 0) continue;
        slot.try_emplace(id, 0);
    }
    out.reserve(slot.size());
    for (auto& [id, index] : slot) {
        index = out.size();
        out.push_back({id, {}, 0});
    }
    for (std::size_t i = 0; i < labeling.instance.size(); ++i) {
        const InstanceId id = labeling.instance[i];
        if (id < 0) continue;
        out[slot[id]].points.push_back(i);
    }
    std::vector<ClassId> classes;
    for (auto& inst : out) {
        classes.clear();
        for (PointId p : inst.points) classes.push_back(labeling.semantic[p]);
        inst.majority_class = majority_vote<ClassId>(classes);
    }
    return out;
}

bool is_strictly_sorted(std::span<const PointId> ids) noexcept
{
    return std::adjacent_find(ids.begin(), ids.end(), [](PointId a, PointId b) { return a >= b; }) == ids.end();
}

} // namespace panoptic
