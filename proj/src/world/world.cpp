#include "ngd/world/world.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "ngd/core/error.hpp"

namespace ngd::world {

std::string_view action_name(Action a) {
  switch (a) {
    case Action::Forward: return "forward";
    case Action::Backward: return "backward";
    case Action::Right: return "right";
    case Action::Left: return "left";
  }
  return "?";
}

const ObjectInstance& Scene::get(int id) const {
  for (const auto& o : objects)
    if (o.id == id) return o;
  throw UnknownId("no object with id " + std::to_string(id));
}

ObjectInstance& Scene::get(int id) {
  for (auto& o : objects)
    if (o.id == id) return o;
  throw UnknownId("no object with id " + std::to_string(id));
}

bool Scene::contains(int id) const {
  return std::any_of(objects.begin(), objects.end(),
                     [id](const ObjectInstance& o) { return o.id == id; });
}

int Scene::next_id() const {
  int id = 0;
  for (const auto& o : objects) id = std::max(id, o.id + 1);
  return id;
}

bool relation_holds(const ObjectInstance& s, const ObjectInstance& o,
                    Relation relation) {
  constexpr double d = kPredicateMargin;
  switch (relation) {
    case Relation::LeftOf:
      return s.cx + s.w / 2 + d <= o.cx - o.w / 2;
    case Relation::RightOf:
      return s.cx - s.w / 2 >= o.cx + o.w / 2 + d;
    case Relation::Behind:
      return s.cy - s.h / 2 >= o.cy + o.h / 2 + d;
    case Relation::In:
      return o.is_container && std::abs(s.cx - o.cx) <= o.w / 2 &&
             std::abs(s.cy - o.cy) <= o.h / 2 && s.w <= o.w && s.h <= o.h;
  }
  return false;
}

bool predicate_holds(const Scene& scene, int subject_id, int object_id,
                     Relation relation) {
  if (subject_id == object_id)
    throw SelfRelation("subject and object are both id " +
                       std::to_string(subject_id));
  return relation_holds(scene.get(subject_id), scene.get(object_id), relation);
}

SpatialFeatures features_of(const ObjectInstance& o, double width,
                            double depth) {
  return {{o.cx / width, o.cy / depth, o.w / width, o.h / depth}};
}

SpatialFeatures normalized_features(const Scene& scene, int id) {
  return features_of(scene.get(id), scene.width, scene.depth);
}

std::array<double, 4> denormalize(const SpatialFeatures& f, double width,
                                  double depth) {
  return {f.v[0] * width, f.v[1] * depth, f.v[2] * width, f.v[3] * depth};
}

std::array<std::size_t, 2> pixel_of(const Scene& scene, double x, double y,
                                    std::size_t size) {
  const double n = static_cast<double>(size);
  auto col = static_cast<long>(std::floor(x / scene.width * n));
  auto row = static_cast<long>(std::floor((scene.depth - y) / scene.depth * n));
  col = std::clamp(col, 0L, static_cast<long>(size) - 1);
  row = std::clamp(row, 0L, static_cast<long>(size) - 1);
  return {static_cast<std::size_t>(row), static_cast<std::size_t>(col)};
}

nn::Tensor rasterize(const Scene& scene, std::size_t size) {
  nn::Tensor img({3, size, size});
  const double n = static_cast<double>(size);
  const double px = scene.width / n;
  const double py = scene.depth / n;

  auto paint = [&](const ObjectInstance& o) {
    for (std::size_t r = 0; r < size; ++r) {
      const double y = scene.depth - (static_cast<double>(r) + 0.5) * py;
      if (std::abs(y - o.cy) > o.h / 2) continue;
      for (std::size_t c = 0; c < size; ++c) {
        const double x = (static_cast<double>(c) + 0.5) * px;
        if (std::abs(x - o.cx) > o.w / 2) continue;
        for (std::size_t ch = 0; ch < 3; ++ch)
          img[(ch * size + r) * size + c] = o.color[ch];
      }
    }
  };
  for (const auto& o : scene.objects)
    if (!scene.held || o.id != *scene.held) paint(o);
  if (scene.held) paint(scene.get(*scene.held));
  return img;
}

Scene apply_action(Scene scene, Action action, double step) {
  if (!scene.held) throw NothingHeld("apply_action: no object is held");
  ObjectInstance& o = scene.get(*scene.held);
  switch (action) {
    case Action::Forward: o.cy += step; break;
    case Action::Backward: o.cy -= step; break;
    case Action::Right: o.cx += step; break;
    case Action::Left: o.cx -= step; break;
  }
  o.cx = std::clamp(o.cx, o.w / 2, scene.width - o.w / 2);
  o.cy = std::clamp(o.cy, o.h / 2, scene.depth - o.h / 2);
  return scene;
}

Scene release_object(Scene scene) {
  if (!scene.held) throw NothingHeld("release_object: no object is held");
  scene.held.reset();
  return scene;
}

Scene mirror_scene(Scene scene) {
  for (auto& o : scene.objects) o.cx = scene.width - o.cx;
  return scene;
}

Scene translate_scene(Scene scene, double dx, double dy) {
  for (auto& o : scene.objects) {
    o.cx += dx;
    o.cy += dy;
  }
  return scene;
}

const ObjectInstance& find_category(const Scene& scene,
                                    std::string_view category) {
  const ObjectInstance* best = nullptr;
  for (const auto& o : scene.objects) {
    if (o.category != category) continue;
    if (!best || o.area() > best->area() ||
        (o.area() == best->area() && o.id < best->id))
      best = &o;
  }
  if (!best)
    throw UnknownCategory("no '" + std::string(category) + "' in the scene");
  return *best;
}

std::optional<SpatialFeatures> oracle_detect(const Scene& scene,
                                             std::string_view category,
                                             const DetectionNoise& noise,
                                             Rng& rng) {
  const ObjectInstance& found = find_category(scene, category);
  if (noise.p_miss > 0.0 && bernoulli(rng, noise.p_miss)) return std::nullopt;
  ObjectInstance o = found;
  if (noise.jitter_cm > 0.0) {
    std::normal_distribution<double> jitter(0.0, noise.jitter_cm);
    o.cx = std::clamp(o.cx + jitter(rng), 0.0, scene.width);
    o.cy = std::clamp(o.cy + jitter(rng), 0.0, scene.depth);
  }
  return features_of(o, scene.width, scene.depth);
}

// ---- JSON ----------------------------------------------------------------

void to_json(nlohmann::json& j, const ObjectInstance& o) {
  j = nlohmann::json{{"id", o.id},   {"category", o.category},
                     {"cx", o.cx},   {"cy", o.cy},
                     {"w", o.w},     {"h", o.h},
                     {"container", o.is_container},
                     {"color", o.color}};
  if (o.orientation != 0.0) j["orientation"] = o.orientation;
}

void from_json(const nlohmann::json& j, ObjectInstance& o) {
  try {
    j.at("id").get_to(o.id);
    j.at("category").get_to(o.category);
    j.at("cx").get_to(o.cx);
    j.at("cy").get_to(o.cy);
    j.at("w").get_to(o.w);
    j.at("h").get_to(o.h);
    j.at("container").get_to(o.is_container);
    j.at("color").get_to(o.color);
    o.orientation = j.value("orientation", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("object: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const Scene& s) {
  j = nlohmann::json{{"objects", s.objects}};
  j["held"] = s.held ? nlohmann::json(*s.held) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, Scene& s) {
  try {
    s = Scene{};
    j.at("objects").get_to(s.objects);
    const auto& held = j.at("held");
    if (!held.is_null()) s.held = held.get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("scene: ") + e.what());
  }
  if (s.held && !s.contains(*s.held))
    throw FormatError("scene: held id " + std::to_string(*s.held) +
                      " is not an object");
}

}  // namespace ngd::world
