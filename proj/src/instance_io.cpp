#include "msddp/instance_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "msddp/error.hpp"

namespace msddp {

namespace {

[[noreturn]] void schema(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::SchemaError, path + ": " + what);
}

/// Strict view of one JSON object: every key must be consumed or listed.
class Obj {
 public:
  Obj(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) schema(path_, "expected an object");
  }
  void allow(std::initializer_list<std::string_view> keys) const {
    for (const auto& [key, value] : j_.items()) {
      bool ok = false;
      for (auto k : keys) ok = ok || key == k;
      if (!ok) schema(sub(key), "unknown field");
    }
  }
  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const Json& at(const std::string& key) const {
    if (!j_.contains(key)) schema(sub(key), "missing");
    return j_.at(key);
  }
  std::string sub(std::string_view key) const { return path_.empty() ? std::string(key) : path_ + "." + std::string(key); }
  double number(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_number()) schema(sub(key), "expected a number");
    return v.get<double>();
  }
  double number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }
  bool boolean(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_boolean()) schema(sub(key), "expected true or false");
    return v.get<bool>();
  }
  bool boolean_or(const std::string& key, bool fallback) const { return has(key) ? boolean(key) : fallback; }
  std::string string(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_string()) schema(sub(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string_or(const std::string& key, std::string fallback) const {
    return has(key) ? string(key) : fallback;
  }
  const std::string& path() const { return path_; }

 private:
  const Json& j_;
  std::string path_;
};

Vec vec_at(const Json& v, const std::string& path) {
  if (!v.is_array()) schema(path, "expected an array of numbers");
  Vec out;
  for (const auto& c : v) {
    if (!c.is_number()) schema(path, "expected an array of numbers");
    out.push_back(c.get<double>());
  }
  return out;
}

std::vector<Vec> points_at(const Json& v, const std::string& path) {
  if (!v.is_array()) schema(path, "expected an array of points");
  std::vector<Vec> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(vec_at(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

StateSpace space_from_json(const Json& j, const std::string& path) {
  Obj o(j, path);
  const std::string kind = o.string("kind");
  if (kind == "none") {
    o.allow({"kind"});
    return StateSpace::none();
  }
  if (kind == "box") {
    o.allow({"kind", "lo", "hi", "h"});
    return StateSpace::box(vec_at(o.at("lo"), o.sub("lo")), vec_at(o.at("hi"), o.sub("hi")), o.number("h"));
  }
  if (kind == "ball") {
    o.allow({"kind", "center", "radius", "h", "extra"});
    std::vector<Vec> extra;
    if (o.has("extra")) extra = points_at(o.at("extra"), o.sub("extra"));
    return StateSpace::ball(vec_at(o.at("center"), o.sub("center")), o.number("radius"), o.number("h"),
                            std::move(extra));
  }
  if (kind == "finite") {
    o.allow({"kind", "points"});
    return StateSpace::finite(points_at(o.at("points"), o.sub("points")));
  }
  schema(o.sub("kind"), "expected box, ball, finite or none");
}

Json space_to_json(const StateSpace& s) {
  switch (s.kind()) {
    case SetKind::None:
      return {{"kind", "none"}};
    case SetKind::Box:
      return {{"kind", "box"}, {"lo", s.lo()}, {"hi", s.hi()}, {"h", s.resolution()}};
    case SetKind::Ball: {
      Json j = {{"kind", "ball"}, {"center", s.center()}, {"radius", s.radius()}, {"h", s.resolution()}};
      if (!s.points().empty()) j["extra"] = s.points();
      return j;
    }
    case SetKind::Finite:
      return {{"kind", "finite"}, {"points", s.points()}};
  }
  return nullptr;
}

NodeData data_from_json(const Json& j, const std::string& path) {
  Obj o(j, path);
  o.allow({"cost", "state_space", "internal", "penalty", "dual_bounds", "convex"});
  NodeData data;
  {
    Obj c(o.at("cost"), o.sub("cost"));
    c.allow({"family", "params"});
    const std::string family = c.string("family");
    try {
      data.cost = make_cost(family, c.has("params") ? c.at("params") : Json::object());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SchemaError) throw;
      // cost errors carry paths relative to the cost object
      throw Error(ErrorCode::SchemaError, path + "." + e.message());
    }
  }
  data.state_space = space_from_json(o.at("state_space"), o.sub("state_space"));
  if (o.has("internal")) data.internal = space_from_json(o.at("internal"), o.sub("internal"));
  {
    Obj p(o.at("penalty"), o.sub("penalty"));
    p.allow({"norm", "sigma"});
    try {
      data.penalty.norm = norm_from_string(p.string("norm"));
    } catch (const Error&) {
      schema(p.sub("norm"), "expected l1, l2 or linf");
    }
    data.penalty.sigma = p.number("sigma");
    if (!(data.penalty.sigma > 0.0)) schema(p.sub("sigma"), "must be positive");
  }
  {
    Obj b(o.at("dual_bounds"), o.sub("dual_bounds"));
    b.allow({"l_lambda", "l_rho"});
    data.dual_bounds.l_lambda = b.number("l_lambda");
    data.dual_bounds.l_rho = b.number("l_rho");
    if (data.dual_bounds.l_lambda < 0.0 || data.dual_bounds.l_rho < 0.0) {
      schema(b.path(), "dual bounds must be nonnegative");
    }
  }
  data.convex = o.boolean("convex");
  return data;
}

Json data_to_json(const NodeData& d) {
  Json j;
  j["cost"] = {{"family", d.cost->family()}, {"params", d.cost->params()}};
  j["state_space"] = space_to_json(d.state_space);
  if (d.internal.kind() != SetKind::None) j["internal"] = space_to_json(d.internal);
  j["penalty"] = {{"norm", to_string(d.penalty.norm)}, {"sigma", d.penalty.sigma}};
  j["dual_bounds"] = {{"l_lambda", d.dual_bounds.l_lambda}, {"l_rho", d.dual_bounds.l_rho}};
  j["convex"] = d.convex;
  return j;
}

InstanceMeta meta_from_json(const Json& j) {
  Obj o(j, "meta");
  o.allow({"name", "convex", "shift", "known_optimum", "optimum_source", "certified_sigma", "adversarial", "grid_h",
           "extra"});
  InstanceMeta m;
  m.name = o.string("name");
  m.convex = o.boolean("convex");
  m.shift = o.number_or("shift", 0.0);
  if (o.has("known_optimum")) m.known_optimum = o.number("known_optimum");
  m.optimum_source = o.string_or("optimum_source", "");
  if (o.has("certified_sigma")) m.certified_sigma = o.number("certified_sigma");
  m.adversarial = o.boolean_or("adversarial", false);
  m.grid_h = o.number_or("grid_h", 0.0);
  if (o.has("extra")) {
    if (!o.at("extra").is_object()) schema("meta.extra", "expected an object");
    m.extra = o.at("extra");
  }
  return m;
}

Json meta_to_json(const InstanceMeta& m) {
  Json j = {{"name", m.name}, {"convex", m.convex}, {"shift", m.shift}};
  j["known_optimum"] = m.known_optimum ? Json(*m.known_optimum) : Json(nullptr);
  if (!m.optimum_source.empty()) j["optimum_source"] = m.optimum_source;
  j["certified_sigma"] = m.certified_sigma ? Json(*m.certified_sigma) : Json(nullptr);
  j["adversarial"] = m.adversarial;
  j["grid_h"] = m.grid_h;
  j["extra"] = m.extra;
  return j;
}

OracleSpec oracle_from_json(const Json& j) {
  Obj o(j, "oracle");
  o.allow({"kind", "adversarial", "seed"});
  OracleSpec spec;
  const std::string kind = o.string_or("kind", "grid");
  if (kind == "grid") {
    spec.kind = "grid";
  } else if (kind.rfind("analytic:", 0) == 0 && kind.size() > 9) {
    spec.kind = "analytic";
    spec.analytic = kind.substr(9);
  } else {
    schema("oracle.kind", "expected grid or analytic:<name>");
  }
  spec.adversarial = o.boolean_or("adversarial", false);
  if (o.has("seed")) {
    const Json& s = o.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
      schema("oracle.seed", "expected a nonnegative integer");
    }
    spec.seed = s.get<std::uint64_t>();
  }
  return spec;
}

}  // namespace

InstanceDescription describe(Instance instance) {
  InstanceDescription desc;
  desc.oracle.adversarial = instance.meta.adversarial;
  desc.instance = std::move(instance);
  return desc;
}

InstanceDescription instance_from_json(const Json& doc) {
  Obj top(doc, "");
  top.allow({"version", "meta", "tree", "node_data", "oracle"});
  const Json& version = top.at("version");
  if (!version.is_number_integer()) schema("version", "expected an integer");
  if (version.get<int>() != kInstanceFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "instance format version " + std::to_string(version.get<int>()) +
                                                " (supported: " + std::to_string(kInstanceFormatVersion) + ")");
  }
  InstanceMeta meta = meta_from_json(top.at("meta"));

  std::map<std::string, NodeData> named;
  {
    const Json& nd = top.at("node_data");
    if (!nd.is_object()) schema("node_data", "expected an object");
    for (const auto& [name, value] : nd.items()) named.emplace(name, data_from_json(value, "node_data." + name));
  }

  Obj tree(top.at("tree"), "tree");
  tree.allow({"nodes"});
  const Json& nodes = tree.at("nodes");
  if (!nodes.is_array()) schema("tree.nodes", "expected an array");
  std::vector<NodeSpec> specs;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Obj n(nodes[i], "tree.nodes[" + std::to_string(i) + "]");
    n.allow({"id", "parent", "prob", "class", "data"});
    NodeSpec spec;
    spec.id = n.string("id");
    spec.parent = n.string_or("parent", "");
    spec.prob = n.number_or("prob", 1.0);
    spec.eq_class = n.string_or("class", "");
    const std::string data = n.string("data");
    const auto it = named.find(data);
    if (it == named.end()) schema(n.sub("data"), "unknown node_data entry '" + data + "'");
    spec.data = it->second;
    specs.push_back(std::move(spec));
  }

  InstanceDescription desc;
  desc.instance = make_instance(std::move(specs), std::move(meta));
  if (top.has("oracle")) desc.oracle = oracle_from_json(top.at("oracle"));
  return desc;
}

InstanceDescription parse_instance(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("parse error: ") + e.what());
  }
  return instance_from_json(doc);
}

Json instance_to_json(const InstanceDescription& desc) {
  Json doc;
  doc["version"] = kInstanceFormatVersion;
  doc["meta"] = meta_to_json(desc.instance.meta);

  std::vector<const NodeData*> distinct;
  Json nodes = Json::array();
  Json node_data = Json::object();
  for (const auto& spec : desc.instance.specs) {
    std::size_t k = 0;
    while (k < distinct.size() && !same_data(*distinct[k], spec.data)) ++k;
    if (k == distinct.size()) {
      distinct.push_back(&spec.data);
      node_data["d" + std::to_string(k)] = data_to_json(spec.data);
    }
    Json n = {{"id", spec.id}};
    n["parent"] = spec.parent.empty() ? Json(nullptr) : Json(spec.parent);
    n["prob"] = spec.prob;
    if (!spec.eq_class.empty()) n["class"] = spec.eq_class;
    n["data"] = "d" + std::to_string(k);
    nodes.push_back(std::move(n));
  }
  doc["tree"] = {{"nodes", std::move(nodes)}};
  doc["node_data"] = std::move(node_data);
  const OracleSpec& o = desc.oracle;
  doc["oracle"] = {{"kind", o.kind == "analytic" ? "analytic:" + o.analytic : std::string("grid")},
                   {"adversarial", o.adversarial},
                   {"seed", o.seed}};
  return doc;
}

std::string emit_instance(const InstanceDescription& desc) { return instance_to_json(desc).dump(2) + "\n"; }

bool same_description(const InstanceDescription& a, const InstanceDescription& b) {
  const auto& sa = a.instance.specs;
  const auto& sb = b.instance.specs;
  if (sa.size() != sb.size()) return false;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const auto cls = [](const NodeSpec& s) { return s.eq_class.empty() ? s.id : s.eq_class; };
    if (sa[i].id != sb[i].id || sa[i].parent != sb[i].parent || cls(sa[i]) != cls(sb[i]) ||
        (!sa[i].parent.empty() && sa[i].prob != sb[i].prob) || !same_data(sa[i].data, sb[i].data)) {
      return false;
    }
  }
  const InstanceMeta& ma = a.instance.meta;
  const InstanceMeta& mb = b.instance.meta;
  return ma.name == mb.name && ma.convex == mb.convex && ma.shift == mb.shift &&
         ma.known_optimum == mb.known_optimum && ma.optimum_source == mb.optimum_source &&
         ma.certified_sigma == mb.certified_sigma && ma.adversarial == mb.adversarial && ma.grid_h == mb.grid_h &&
         ma.extra == mb.extra && a.oracle.kind == b.oracle.kind && a.oracle.analytic == b.oracle.analytic &&
         a.oracle.adversarial == b.oracle.adversarial && a.oracle.seed == b.oracle.seed;
}

OracleSet make_oracles(const InstanceDescription& desc, bool force_adversarial) {
  GridOracleOptions options;
  options.adversarial = force_adversarial || desc.oracle.adversarial;
  if (desc.oracle.kind == "analytic") return make_analytic_oracles(*desc.instance.tree, desc.oracle.analytic, options);
  return make_grid_oracles(*desc.instance.tree, options);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view contents) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename into '" + path + "': " + ec.message());
}

}  // namespace msddp
