#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "xplore/util.hpp"
#include "xplore/vh.hpp"

namespace xplore {

enum class ActionKind { tap, long_tap, scroll, text_input, back, swipe };

std::string_view action_kind_name(ActionKind kind) noexcept;
ActionKind action_kind_from_name(std::string_view name);

// Element an action is aimed at; at least one of the two is set.
struct ElementRef {
  std::optional<std::string> resource_id;
  std::optional<vh::Bounds> bounds;

  bool operator==(const ElementRef &) const = default;
};

struct Action {
  ActionKind kind = ActionKind::tap;
  std::optional<ElementRef> target;
  std::optional<std::string> params;

  bool operator==(const Action &) const = default;

  // tap/long_tap need a target, back must not have one. Throws
  // Errc::schema_violation.
  void validate() const;

  // Short human-readable form, e.g. "tap(settings/btn)" or "back".
  std::string describe() const;
};

// Total order used for deterministic edge ordering: kind, then target, then params.
bool action_less(const Action &a, const Action &b);

json to_json(const Action &action);
Action action_from_json(const json &doc);

} // namespace xplore
