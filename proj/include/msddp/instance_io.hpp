#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "msddp/instances.hpp"
#include "msddp/oracles.hpp"

namespace msddp {

inline constexpr int kInstanceFormatVersion = 1;

struct OracleSpec {
  std::string kind = "grid";  // "grid" or "analytic"
  std::string analytic;       // analytic oracle name when kind == "analytic"
  bool adversarial = false;
  std::uint64_t seed = 1;
};

struct InstanceDescription {
  Instance instance;
  OracleSpec oracle;
};

/// Wraps a generated instance with default oracle settings taken from its meta.
InstanceDescription describe(Instance instance);

/// Throws SchemaError (with a field path or parser position),
/// UnknownCostFamily, VersionMismatch, plus the tree validation errors.
InstanceDescription instance_from_json(const Json& doc);
InstanceDescription parse_instance(std::string_view text);

Json instance_to_json(const InstanceDescription& desc);
std::string emit_instance(const InstanceDescription& desc);

bool same_description(const InstanceDescription& a, const InstanceDescription& b);

/// Oracles for the description; `force_adversarial` switches on farthest-point
/// tie-breaking regardless of the file.
OracleSet make_oracles(const InstanceDescription& desc, bool force_adversarial = false);

std::string read_file(const std::string& path);
/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace msddp
