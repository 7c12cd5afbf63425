#pragma once

#include "panoptic/core.hpp"
#include "panoptic/pcio.hpp"

#include <cstdint>
#include <string>

namespace panoptic {

/// One family of synthetic objects. `size_min`/`size_max` bound the
/// characteristic size: crown radius for trees, length for cars, height for
/// poles.
struct PrototypeSpec {
    std::size_t count = 0;
    double size_min = 1.0;
    double size_max = 1.0;
    double density = 50.0;  // surface points per m²
};

struct SceneSpec {
    double extent = 40.0;          // square side length, metres
    double ground_density = 20.0;  // points per m²
    PrototypeSpec trees{};
    PrototypeSpec cars{};
    PrototypeSpec poles{};
    double min_gap = 1.0;       // between horizontal footprints; negative allows overlap
    double base_height = 0.0;   // object bottoms sit this far above the ground plane
    double surface_noise = 0.0; // Gaussian sigma applied to object points
    std::uint64_t seed = 0;

    std::size_t object_count() const noexcept { return trees.count + cars.count + poles.count; }
    void validate() const;
};

/// Keys: extent ground_density min_gap base_height surface_noise seed and
/// {tree,car,pole}_{count,size_min,size_max,density}.
SceneSpec parse_scene_spec(const KeyValueFile& file);
SceneSpec read_scene_spec(const std::string& path);

struct PlacedObject {
    ClassId class_id;
    double center_x, center_y;
    double footprint_radius;
};

struct Scene {
    PointCloud cloud;
    Labeling labels;
    SemanticTaxonomy taxonomy = SemanticTaxonomy::synthetic();
    std::vector<PlacedObject> objects;  // indexed by instance id
};

/// Ground is stuff class 0 with instance -1; object k is instance k of class
/// tree (1), car (2) or pole (3). Bit-identical for equal specs. Throws
/// CapacityError when placement needs more than 10 × object_count rejections.
Scene generate_scene(const SceneSpec& spec);

} // namespace panoptic
