#include "ngd/narrate/objects.hpp"

#include <algorithm>

namespace ngd::narrate {

const ObjectLibrary& ObjectLibrary::standard() {
  static const ObjectLibrary lib{
      // seen
      {
          {"orange", false, 3.0, 4.5, {1.00, 0.55, 0.00}},
          {"apple", false, 3.0, 4.5, {0.85, 0.10, 0.10}},
          {"mug", false, 3.0, 4.5, {0.20, 0.40, 0.90}},
          {"cup", false, 3.0, 4.5, {0.95, 0.95, 0.95}},
          {"lemon", false, 3.0, 4.5, {0.95, 0.90, 0.20}},
          {"ball", false, 3.0, 4.5, {0.10, 0.75, 0.30}},
          {"block", false, 3.0, 4.5, {0.60, 0.30, 0.70}},
          {"can", false, 3.0, 4.5, {0.75, 0.75, 0.80}},
          {"bowl", true, 5.0, 5.5, {0.55, 0.35, 0.20}},
          {"box", true, 5.0, 5.5, {0.80, 0.65, 0.40}},
          {"basket", true, 5.0, 5.5, {0.45, 0.55, 0.25}},
          {"tray", true, 5.0, 5.5, {0.35, 0.35, 0.40}},
      },
      // unseen
      {
          {"peach", false, 2.5, 3.0, {1.00, 0.70, 0.60}},
          {"plum", false, 2.5, 3.0, {0.40, 0.05, 0.35}},
          {"egg", false, 2.5, 3.0, {0.98, 0.92, 0.80}},
          {"cube", false, 2.5, 3.0, {0.00, 0.80, 0.80}},
          {"pot", true, 5.5, 6.0, {0.15, 0.15, 0.15}},
          {"bin", true, 5.5, 6.0, {0.20, 0.60, 0.55}},
      },
  };
  return lib;
}

const CategorySpec* ObjectLibrary::find(const std::string& name) const {
  for (const auto* set : {&seen, &unseen})
    for (const auto& c : *set)
      if (c.name == name) return &c;
  return nullptr;
}

std::vector<const CategorySpec*> containers(const std::vector<CategorySpec>& set) {
  std::vector<const CategorySpec*> out;
  for (const auto& c : set)
    if (c.container) out.push_back(&c);
  return out;
}

std::vector<const CategorySpec*> non_containers(const std::vector<CategorySpec>& set) {
  std::vector<const CategorySpec*> out;
  for (const auto& c : set)
    if (!c.container) out.push_back(&c);
  return out;
}

world::ObjectInstance make_instance(const CategorySpec& spec, int id, double cx,
                                    double cy, Rng& rng) {
  world::ObjectInstance o;
  o.id = id;
  o.category = spec.name;
  o.is_container = spec.container;
  o.w = uniform(rng, spec.min_size, spec.max_size);
  o.h = spec.container ? o.w : uniform(rng, spec.min_size, spec.max_size);
  o.cx = cx;
  o.cy = cy;
  for (std::size_t c = 0; c < 3; ++c)
    o.color[c] = std::clamp(spec.color[c] + uniform(rng, -0.05, 0.05), 0.0, 1.0);
  if (spec.container) o.orientation = uniform(rng, 0.0, 360.0);
  return o;
}

}  // namespace ngd::narrate
