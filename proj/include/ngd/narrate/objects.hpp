#pragma once

#include <string>
#include <vector>

#include "ngd/core/rng.hpp"
#include "ngd/world/world.hpp"

namespace ngd::narrate {

struct CategorySpec {
  std::string name;
  bool container = false;
  double min_size = 3.0;  // cm, side length range
  double max_size = 4.5;
  world::Color color{1, 1, 1};
};

// Object categories split into those used for training and held-out ones
// (novel categories, colors and sizes).
struct ObjectLibrary {
  std::vector<CategorySpec> seen;
  std::vector<CategorySpec> unseen;

  static const ObjectLibrary& standard();

  const std::vector<CategorySpec>& pick(bool use_unseen) const {
    return use_unseen ? unseen : seen;
  }
  const CategorySpec* find(const std::string& name) const;
};

std::vector<const CategorySpec*> containers(const std::vector<CategorySpec>& set);
std::vector<const CategorySpec*> non_containers(const std::vector<CategorySpec>& set);

// Samples an instance of `spec` centered at (cx, cy).
world::ObjectInstance make_instance(const CategorySpec& spec, int id, double cx,
                                    double cy, Rng& rng);

}  // namespace ngd::narrate
