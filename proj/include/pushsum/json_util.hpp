#pragma once

#include "pushsum/errors.hpp"

#include <nlohmann/json.hpp>

#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>

namespace pushsum::json_util {

/// Throws ValidationError if `j` is not an object or carries a key outside `allowed`.
void require_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                  std::string_view where);

double number(const nlohmann::json& j, std::string_view key, std::string_view where);
std::optional<double> optional_number(const nlohmann::json& j, std::string_view key, std::string_view where);
std::uint64_t count(const nlohmann::json& j, std::string_view key, std::string_view where);
std::string text(const nlohmann::json& j, std::string_view key, std::string_view where);
bool flag(const nlohmann::json& j, std::string_view key, bool fallback, std::string_view where);

}  // namespace pushsum::json_util
