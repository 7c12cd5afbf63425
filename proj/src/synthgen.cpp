#include "panoptic/synthgen.hpp"
#include "panoptic/random.hpp"

#include <cmath>
#include <numbers>

namespace panoptic {

namespace {

constexpr ClassId kGround = 0;
constexpr ClassId kTree = 1;
constexpr ClassId kCar = 2;
constexpr ClassId kPole = 3;

// Thomsen's approximation, within ~1% for any ellipsoid.
double ellipsoid_area(double a, double b, double c)
{
    constexpr double p = 1.6075;
    const double ap = std::pow(a, p), bp = std::pow(b, p), cp = std::pow(c, p);
    return 4.0 * std::numbers::pi * std::pow((ap * bp + ap * cp + bp * cp) / 3.0, 1.0 / p);
}

std::size_t point_count(double density, double area)
{
    return static_cast<std::size_t>(std::llround(density * area));
}

Vec3 unit_direction(Rng& rng)
{
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {s * std::cos(phi), s * std::sin(phi), z};
}

struct Shape {
    ClassId class_id;
    double size;
    double footprint;
};

Shape draw_shape(ClassId class_id, const PrototypeSpec& proto, Rng& rng)
{
    const double size = rng.uniform(proto.size_min, proto.size_max);
    switch (class_id) {
    case kTree: return {class_id, size, size};
    case kCar: {
        const double width = 0.45 * size;
        return {class_id, size, 0.5 * std::hypot(size, width)};
    }
    default: {
        const double radius = std::max(0.1, 0.02 * size);
        return {class_id, size, radius};
    }
    }
}

void sample_tree(const Shape& shape, double cx, double cy, double base, const PrototypeSpec& proto, Rng& rng,
                 std::vector<Vec3>& out)
{
    const double a = shape.size, c = 1.5 * shape.size;
    const double cz = base + c;
    const std::size_t n = point_count(proto.density, ellipsoid_area(a, a, c));
    // area-weighted rejection on the sphere parameterisation gives a uniform surface density
    const double g_max = std::max(a * c, a * a);
    std::size_t made = 0;
    while (made < n) {
        const Vec3 u = unit_direction(rng);
        const double g = std::sqrt((a * c * u[0]) * (a * c * u[0]) + (a * c * u[1]) * (a * c * u[1]) +
                                   (a * a * u[2]) * (a * a * u[2]));
        if (rng.uniform() * g_max > g) continue;
        out.push_back({cx + a * u[0], cy + a * u[1], cz + c * u[2]});
        ++made;
    }
}

void sample_car(const Shape& shape, double cx, double cy, double base, const PrototypeSpec& proto, Rng& rng,
                std::vector<Vec3>& out)
{
    const double length = shape.size, width = 0.45 * shape.size, height = 0.35 * shape.size;
    const double yaw = rng.uniform(0.0, std::numbers::pi);
    const double cs = std::cos(yaw), sn = std::sin(yaw);
    // faces: top, ±x, ±y (no bottom)
    const double areas[5] = {length * width, width * height, width * height, length * height, length * height};
    const double total = areas[0] + areas[1] + areas[2] + areas[3] + areas[4];
    const std::size_t n = point_count(proto.density, total);
    for (std::size_t i = 0; i < n; ++i) {
        double pick = rng.uniform() * total;
        int face = 0;
        while (face < 4 && pick >= areas[face]) {
            pick -= areas[face];
            ++face;
        }
        const double s = rng.uniform(), t = rng.uniform();
        double lx = 0, ly = 0, lz = 0;
        switch (face) {
        case 0: lx = (s - 0.5) * length; ly = (t - 0.5) * width; lz = height; break;
        case 1: lx = 0.5 * length; ly = (s - 0.5) * width; lz = t * height; break;
        case 2: lx = -0.5 * length; ly = (s - 0.5) * width; lz = t * height; break;
        case 3: lx = (s - 0.5) * length; ly = 0.5 * width; lz = t * height; break;
        default: lx = (s - 0.5) * length; ly = -0.5 * width; lz = t * height; break;
        }
        out.push_back({cx + cs * lx - sn * ly, cy + sn * lx + cs * ly, base + lz});
    }
}

void sample_pole(const Shape& shape, double cx, double cy, double base, const PrototypeSpec& proto, Rng& rng,
                 std::vector<Vec3>& out)
{
    const double height = shape.size, radius = shape.footprint;
    const double lateral = 2.0 * std::numbers::pi * radius * height;
    const double top = std::numbers::pi * radius * radius;
    const std::size_t n = point_count(proto.density, lateral + top);
    for (std::size_t i = 0; i < n; ++i) {
        const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        if (rng.uniform() * (lateral + top) < lateral) {
            const double z = rng.uniform(0.0, height);
            out.push_back({cx + radius * std::cos(phi), cy + radius * std::sin(phi), base + z});
        } else {
            const double rr = radius * std::sqrt(rng.uniform());
            out.push_back({cx + rr * std::cos(phi), cy + rr * std::sin(phi), base + height});
        }
    }
}

void check_proto(const char* name, const PrototypeSpec& p)
{
    const std::string prefix(name);
    if (!(p.density > 0.0)) throw ConfigError(prefix + "_density", "must be > 0");
    if (!(p.size_min > 0.0) || !(p.size_max >= p.size_min)) {
        throw ConfigError(prefix + "_size_min", "need 0 < size_min <= size_max");
    }
}

} // namespace

void SceneSpec::validate() const
{
    if (!(extent > 0.0)) throw ConfigError("extent", "must be > 0");
    if (!(ground_density > 0.0)) throw ConfigError("ground_density", "must be > 0");
    check_proto("tree", trees);
    check_proto("car", cars);
    check_proto("pole", poles);
    if (!std::isfinite(min_gap)) throw ConfigError("min_gap", "must be finite");
    if (!(base_height >= 0.0)) throw ConfigError("base_height", "must be >= 0");
    if (!(surface_noise >= 0.0)) throw ConfigError("surface_noise", "must be >= 0");
}

SceneSpec parse_scene_spec(const KeyValueFile& file)
{
    SceneSpec spec;
    for (const auto& e : file.entries) {
        const std::string& k = e.key;
        auto count = [&](std::size_t& field) {
            const long long v = parse_integer(k, e.value);
            if (v < 0) throw ConfigError(k, "must be >= 0");
            field = static_cast<std::size_t>(v);
        };
        bool matched = false;
        for (auto [name, proto] : {std::pair<const char*, PrototypeSpec*>{"tree", &spec.trees},
                                   {"car", &spec.cars}, {"pole", &spec.poles}}) {
            const std::string p(name);
            if (k == p + "_count") count(proto->count);
            else if (k == p + "_size_min") proto->size_min = parse_real(k, e.value);
            else if (k == p + "_size_max") proto->size_max = parse_real(k, e.value);
            else if (k == p + "_density") proto->density = parse_real(k, e.value);
            else continue;
            matched = true;
        }
        if (matched) continue;
        if (k == "extent") spec.extent = parse_real(k, e.value);
        else if (k == "ground_density") spec.ground_density = parse_real(k, e.value);
        else if (k == "min_gap") spec.min_gap = parse_real(k, e.value);
        else if (k == "base_height") spec.base_height = parse_real(k, e.value);
        else if (k == "surface_noise") spec.surface_noise = parse_real(k, e.value);
        else if (k == "seed") {
            const long long v = parse_integer(k, e.value);
            if (v < 0) throw ConfigError(k, "must be >= 0");
            spec.seed = static_cast<std::uint64_t>(v);
        } else {
            throw ConfigError(k, "unknown key");
        }
    }
    spec.validate();
    return spec;
}

SceneSpec read_scene_spec(const std::string& path)
{
    return parse_scene_spec(read_key_values(path));
}

Scene generate_scene(const SceneSpec& spec)
{
    spec.validate();
    Scene scene;
    Rng place_rng(spec.seed, 0);

    // placement: sizes first, then rejection sampling of footprint centres
    std::vector<Shape> shapes;
    for (auto [class_id, proto] : {std::pair<ClassId, const PrototypeSpec*>{kTree, &spec.trees},
                                   {kCar, &spec.cars}, {kPole, &spec.poles}}) {
        for (std::size_t i = 0; i < proto->count; ++i) shapes.push_back(draw_shape(class_id, *proto, place_rng));
    }
    const std::size_t budget = 10 * shapes.size();
    std::size_t rejections = 0;
    for (const Shape& shape : shapes) {
        const double lo = std::min(shape.footprint, 0.5 * spec.extent);
        const double hi = std::max(lo, spec.extent - shape.footprint);
        for (;;) {
            const double x = place_rng.uniform(lo, hi), y = place_rng.uniform(lo, hi);
            bool ok = true;
            for (const auto& other : scene.objects) {
                const double gap = std::hypot(x - other.center_x, y - other.center_y) - shape.footprint -
                                   other.footprint_radius;
                if (gap < spec.min_gap) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                scene.objects.push_back({shape.class_id, x, y, shape.footprint});
                break;
            }
            if (++rejections > budget) {
                throw CapacityError("could not place " + std::to_string(shapes.size()) + " objects with min_gap " +
                                    format_real(spec.min_gap) + " in a " + format_real(spec.extent) +
                                    " m square after " + std::to_string(budget) + " rejections");
            }
        }
    }

    auto& positions = scene.cloud.positions;
    auto& labels = scene.labels;
    Rng ground_rng(spec.seed, 1);
    const std::size_t n_ground = point_count(spec.ground_density, spec.extent * spec.extent);
    for (std::size_t i = 0; i < n_ground; ++i) {
        const double x = ground_rng.uniform(0.0, spec.extent);
        const double y = ground_rng.uniform(0.0, spec.extent);
        positions.push_back({x, y, 0.0});
    }
    labels.semantic.assign(n_ground, kGround);
    labels.instance.assign(n_ground, kNoInstance);

    for (std::size_t k = 0; k < scene.objects.size(); ++k) {
        const auto& obj = scene.objects[k];
        Rng rng(spec.seed, 100 + k);
        const std::size_t first = positions.size();
        const PrototypeSpec& proto =
            obj.class_id == kTree ? spec.trees : (obj.class_id == kCar ? spec.cars : spec.poles);
        const Shape shape = shapes[k];
        switch (obj.class_id) {
        case kTree: sample_tree(shape, obj.center_x, obj.center_y, spec.base_height, proto, rng, positions); break;
        case kCar: sample_car(shape, obj.center_x, obj.center_y, spec.base_height, proto, rng, positions); break;
        default: sample_pole(shape, obj.center_x, obj.center_y, spec.base_height, proto, rng, positions); break;
        }
        if (spec.surface_noise > 0.0) {
            for (std::size_t i = first; i < positions.size(); ++i) {
                for (double& v : positions[i]) v += rng.normal(spec.surface_noise);
            }
        }
        labels.semantic.resize(positions.size(), obj.class_id);
        labels.instance.resize(positions.size(), static_cast<InstanceId>(k));
    }
    return scene;
}

} // namespace panoptic
