#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ngd/core/rng.hpp"
#include "ngd/lang/language.hpp"
#include "ngd/nn/tensor.hpp"

namespace ngd::world {

using lang::Relation;

inline constexpr double kTableWidth = 60.0;  // cm, x extent
inline constexpr double kTableDepth = 60.0;  // cm, y extent (away from viewer)
inline constexpr double kPredicateMargin = 0.5;
inline constexpr double kStepSize = 5.0;
inline constexpr std::size_t kRasterSize = 72;

using Color = std::array<double, 3>;

struct ObjectInstance {
  int id = 0;
  std::string category;
  double cx = 0, cy = 0;  // box center, cm
  double w = 0, h = 0;    // full extents, cm
  bool is_container = false;
  Color color{1.0, 1.0, 1.0};
  double orientation = 0.0;  // degrees; recorded only, boxes stay axis-aligned

  double area() const { return w * h; }
  friend bool operator==(const ObjectInstance&, const ObjectInstance&) = default;
};

struct Scene {
  double width = kTableWidth;
  double depth = kTableDepth;
  std::vector<ObjectInstance> objects;
  std::optional<int> held;

  const ObjectInstance& get(int id) const;
  ObjectInstance& get(int id);
  bool contains(int id) const;
  int next_id() const;

  friend bool operator==(const Scene&, const Scene&) = default;
};

// (cx/W, cy/D, w/W, h/D)
struct SpatialFeatures {
  std::array<double, 4> v{};

  double cx() const { return v[0]; }
  double cy() const { return v[1]; }
  double w() const { return v[2]; }
  double h() const { return v[3]; }
  friend bool operator==(const SpatialFeatures&, const SpatialFeatures&) = default;
};

enum class Action { Forward, Backward, Right, Left };
inline constexpr std::array<Action, 4> kAllActions = {
    Action::Forward, Action::Backward, Action::Right, Action::Left};
std::string_view action_name(Action a);

// Ground-truth spatial predicates on two boxes (margin kPredicateMargin).
bool relation_holds(const ObjectInstance& subject, const ObjectInstance& object,
                    Relation relation);
// Throws UnknownId / SelfRelation.
bool predicate_holds(const Scene& scene, int subject_id, int object_id,
                     Relation relation);

SpatialFeatures features_of(const ObjectInstance& o, double width = kTableWidth,
                            double depth = kTableDepth);
SpatialFeatures normalized_features(const Scene& scene, int id);
// Inverse of features_of: returns (cx, cy, w, h) in cm.
std::array<double, 4> denormalize(const SpatialFeatures& f,
                                  double width = kTableWidth,
                                  double depth = kTableDepth);

// 3 x size x size top-down raster; row 0 is the far edge of the table.
nn::Tensor rasterize(const Scene& scene, std::size_t size = kRasterSize);
// Pixel (row, col) containing the table point (x, y).
std::array<std::size_t, 2> pixel_of(const Scene& scene, double x, double y,
                                    std::size_t size = kRasterSize);

// Moves the held object; the box is clamped to stay on the table.
Scene apply_action(Scene scene, Action action, double step = kStepSize);
Scene release_object(Scene scene);
Scene mirror_scene(Scene scene);
Scene translate_scene(Scene scene, double dx, double dy);

struct DetectionNoise {
  double jitter_cm = 0.0;
  double p_miss = 0.0;
};

// Largest-area object of the category (lowest id on ties).
const ObjectInstance& find_category(const Scene& scene, std::string_view category);
// Noisy oracle detector; nullopt means the detection was missed.
std::optional<SpatialFeatures> oracle_detect(const Scene& scene,
                                             std::string_view category,
                                             const DetectionNoise& noise,
                                             Rng& rng);

void to_json(nlohmann::json& j, const ObjectInstance& o);
void from_json(const nlohmann::json& j, ObjectInstance& o);
void to_json(nlohmann::json& j, const Scene& s);
void from_json(const nlohmann::json& j, Scene& s);

}  // namespace ngd::world
