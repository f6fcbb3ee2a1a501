#include "xplore/action.hpp"

#include <tuple>

#include "xplore/error.hpp"

namespace xplore {

namespace {

constexpr ActionKind kAllKinds[] = {ActionKind::tap,        ActionKind::long_tap, ActionKind::scroll,
                                    ActionKind::text_input, ActionKind::back,     ActionKind::swipe};

std::string target_text(const std::optional<ElementRef> &t) {
  if (!t)
    return "";
  if (t->resource_id)
    return *t->resource_id;
  if (t->bounds) {
    const auto &b = *t->bounds;
    return "[" + std::to_string(b.left) + "," + std::to_string(b.top) + "," + std::to_string(b.right) + "," +
           std::to_string(b.bottom) + "]";
  }
  return "";
}

} // namespace

std::string_view action_kind_name(ActionKind kind) noexcept {
  switch (kind) {
  case ActionKind::tap: return "tap";
  case ActionKind::long_tap: return "long_tap";
  case ActionKind::scroll: return "scroll";
  case ActionKind::text_input: return "text_input";
  case ActionKind::back: return "back";
  case ActionKind::swipe: return "swipe";
  }
  return "tap";
}

ActionKind action_kind_from_name(std::string_view name) {
  for (auto k : kAllKinds)
    if (action_kind_name(k) == name)
      return k;
  throw Error(Errc::schema_violation, "unknown action kind '" + std::string(name) + "'");
}

void Action::validate() const {
  if ((kind == ActionKind::tap || kind == ActionKind::long_tap) && !target)
    throw Error(Errc::schema_violation, std::string(action_kind_name(kind)) + " requires a target");
  if (kind == ActionKind::back && target)
    throw Error(Errc::schema_violation, "back takes no target");
  if (target && !target->resource_id && !target->bounds)
    throw Error(Errc::schema_violation, "target needs a resource_id or bounds");
}

std::string Action::describe() const {
  std::string out(action_kind_name(kind));
  auto t = target_text(target);
  if (t.empty() && !params)
    return out;
  out += '(';
  out += t;
  if (params) {
    if (!t.empty())
      out += ", ";
    out += '"' + *params + '"';
  }
  out += ')';
  return out;
}

bool action_less(const Action &a, const Action &b) {
  auto ta = target_text(a.target), tb = target_text(b.target);
  return std::tie(a.kind, ta, a.params) < std::tie(b.kind, tb, b.params);
}

json to_json(const Action &action) {
  json target = nullptr;
  if (action.target) {
    target = json::object();
    target["resource_id"] = action.target->resource_id ? json(*action.target->resource_id) : json(nullptr);
    if (action.target->bounds) {
      const auto &b = *action.target->bounds;
      target["bounds"] = {b.left, b.top, b.right, b.bottom};
    } else {
      target["bounds"] = nullptr;
    }
  }
  return json{{"kind", action_kind_name(action.kind)},
              {"target", std::move(target)},
              {"params", action.params ? json(*action.params) : json(nullptr)}};
}

Action action_from_json(const json &doc) {
  if (!doc.is_object() || !doc.contains("kind") || !doc["kind"].is_string())
    throw Error(Errc::schema_violation, "action needs a string 'kind'");
  Action a;
  a.kind = action_kind_from_name(doc["kind"].get<std::string>());
  if (auto t = doc.find("target"); t != doc.end() && !t->is_null()) {
    if (!t->is_object())
      throw Error(Errc::schema_violation, "action target must be an object");
    ElementRef ref;
    if (auto id = t->find("resource_id"); id != t->end() && !id->is_null())
      ref.resource_id = id->get<std::string>();
    if (auto b = t->find("bounds"); b != t->end() && !b->is_null()) {
      if (!b->is_array() || b->size() != 4)
        throw Error(Errc::schema_violation, "target bounds must have 4 integers");
      ref.bounds = vh::Bounds{(*b)[0].get<int>(), (*b)[1].get<int>(), (*b)[2].get<int>(), (*b)[3].get<int>()};
    }
    a.target = std::move(ref);
  }
  if (auto p = doc.find("params"); p != doc.end() && !p->is_null())
    a.params = p->get<std::string>();
  a.validate();
  return a;
}

} // namespace xplore
