#pragma once

// Small instances shared by the unit and acceptance tests.

#include <string>

#include "msddp/instances.hpp"

namespace fixtures {

inline msddp::NodeSpec spec(std::string id, std::string parent, double prob, msddp::NodeData data,
                            std::string cls = "") {
  msddp::NodeSpec s;
  s.id = std::move(id);
  s.parent = std::move(parent);
  s.prob = prob;
  s.eq_class = std::move(cls);
  s.data = std::move(data);
  return s;
}

inline msddp::NodeData stateless(msddp::CostPtr cost) {
  msddp::NodeData d;
  d.cost = std::move(cost);
  d.state_space = msddp::StateSpace::none();
  d.penalty = {msddp::NormKind::L1, 1.0};
  d.dual_bounds = {0.0, 1.0};
  return d;
}

/// Root with states {0, 1, 2} and zero cost; three equiprobable leaves with
/// cost (z - k)^2 on z in {0, 1, 2}.
inline msddp::Instance three_leaf_instance() {
  using msddp::Json;
  msddp::NodeData root;
  root.cost = msddp::make_cost("zero", Json::object());
  root.state_space = msddp::StateSpace::finite({{0.0}, {1.0}, {2.0}});
  root.penalty = {msddp::NormKind::L1, 1.0};
  root.dual_bounds = {0.0, 1.0};
  std::vector<msddp::NodeSpec> specs{spec("r", "", 1.0, root)};
  for (int k = 0; k < 3; ++k) {
    Json values = Json::array();
    for (int z = 0; z < 3; ++z) values.push_back(Json::array({double((z - k) * (z - k))}));
    const auto cost = msddp::make_cost(
        "table", {{"z", {{0.0}, {1.0}, {2.0}}}, {"x", Json::array({Json::array()})}, {"values", values}});
    specs.push_back(spec("c" + std::to_string(k), "r", 1.0 / 3.0, stateless(cost)));
  }
  msddp::InstanceMeta meta;
  meta.name = "three_leaf";
  return msddp::make_instance(std::move(specs), meta);
}

}  // namespace fixtures
