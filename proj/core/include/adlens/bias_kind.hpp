#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace adlens {

// The machine-assignable content/context biases.
enum class BiasKind { HumanPresence, AnimalPresence, Holiday, Discount };

inline constexpr std::array<BiasKind, 4> kAllBiasKinds = {
    BiasKind::HumanPresence, BiasKind::AnimalPresence, BiasKind::Holiday, BiasKind::Discount};

// Canonical snake_case name, e.g. "human_presence".
std::string_view to_string(BiasKind kind);

// Accepts the canonical name or the CamelCase variant, case-insensitively.
std::optional<BiasKind> parse_bias_kind(std::string_view name);

}  // namespace adlens
