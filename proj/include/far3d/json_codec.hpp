#pragma once

#include <string_view>

#include <json.hpp>

#include "far3d/dataset.hpp"

namespace far3d::codec {

using nlohmann::json;

json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const json& j);

json pose_to_json(const Pose& p);
Pose pose_from_json(const json& j);

json detection_to_json(const Detection& d);
Detection detection_from_json(const json& j);

// Parses text and rethrows syntax errors as ParseError with line/column context.
json parse_json(std::string_view text, std::string_view what);

}  // namespace far3d::codec
