#include "pushsum/json_util.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace pushsum::json_util {

namespace {

const nlohmann::json& field(const nlohmann::json& j, std::string_view key, std::string_view where) {
  const auto it = j.find(std::string(key));
  if (it == j.end()) throw ValidationError(fmt::format("{}: missing field '{}'", where, key));
  return *it;
}

}  // namespace

void require_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                  std::string_view where) {
  if (!j.is_object()) throw ValidationError(fmt::format("{}: expected a JSON object", where));
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError(fmt::format("{}: unknown field '{}'", where, key));
    }
  }
}

double number(const nlohmann::json& j, std::string_view key, std::string_view where) {
  const auto& v = field(j, key, where);
  if (!v.is_number()) throw ValidationError(fmt::format("{}: field '{}' must be a number", where, key));
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ValidationError(fmt::format("{}: field '{}' must be finite", where, key));
  return x;
}

std::optional<double> optional_number(const nlohmann::json& j, std::string_view key, std::string_view where) {
  const auto it = j.find(std::string(key));
  if (it == j.end() || it->is_null()) return std::nullopt;
  return number(j, key, where);
}

std::uint64_t count(const nlohmann::json& j, std::string_view key, std::string_view where) {
  const auto& v = field(j, key, where);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ValidationError(fmt::format("{}: field '{}' must be a nonnegative integer", where, key));
  }
  return v.get<std::uint64_t>();
}

std::string text(const nlohmann::json& j, std::string_view key, std::string_view where) {
  const auto& v = field(j, key, where);
  if (!v.is_string()) throw ValidationError(fmt::format("{}: field '{}' must be a string", where, key));
  return v.get<std::string>();
}

bool flag(const nlohmann::json& j, std::string_view key, bool fallback, std::string_view where) {
  const auto it = j.find(std::string(key));
  if (it == j.end()) return fallback;
  if (!it->is_boolean()) throw ValidationError(fmt::format("{}: field '{}' must be a boolean", where, key));
  return it->get<bool>();
}

}  // namespace pushsum::json_util
