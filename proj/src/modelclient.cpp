#include "xplore/modelclient.hpp"

#include <cstdlib>
#include <semaphore>

#include <httplib.h>

#include "xplore/error.hpp"

namespace fs = std::filesystem;

namespace xplore::model {

std::string_view endpoint_name(Endpoint e) noexcept {
  switch (e) {
  case Endpoint::vh_generate: return "vh_generate";
  case Endpoint::action_generate: return "action_generate";
  case Endpoint::cluster_decide: return "cluster_decide";
  case Endpoint::qa_answer: return "qa_answer";
  }
  return "unknown";
}

Endpoint endpoint_from_name(std::string_view name) {
  for (auto e : {Endpoint::vh_generate, Endpoint::action_generate, Endpoint::cluster_decide, Endpoint::qa_answer})
    if (endpoint_name(e) == name)
      return e;
  throw Error(Errc::invalid_config, "unknown endpoint '" + std::string(name) + "'");
}

std::string_view backend_name(BackendKind k) noexcept {
  switch (k) {
  case BackendKind::mock: return "mock";
  case BackendKind::cache: return "cache";
  case BackendKind::remote: return "remote";
  }
  return "unknown";
}

InferenceRequest make_request(Endpoint endpoint, json payload) {
  if (!payload.is_object())
    throw Error(Errc::invalid_config, "inference payload must be an object");
  InferenceRequest req;
  req.endpoint = endpoint;
  req.request_id = sha256_hex(std::string(endpoint_name(endpoint)) + "\n" + canonical_dump(payload));
  req.payload = std::move(payload);
  return req;
}

namespace {

[[noreturn]] void bad_reply(Endpoint e, const std::string &what) {
  throw Error(Errc::backend_malformed_reply, std::string(endpoint_name(e)) + " reply: " + what);
}

bool is_action_kind(const json &k) {
  if (!k.is_string())
    return false;
  const auto &s = k.get_ref<const std::string &>();
  return s == "tap" || s == "long_tap" || s == "scroll" || s == "text_input" || s == "back" || s == "swipe";
}

bool subset_match(const json &pattern, const json &payload) {
  for (auto it = pattern.begin(); it != pattern.end(); ++it) {
    auto found = payload.find(it.key());
    if (found == payload.end() || *found != it.value())
      return false;
  }
  return true;
}

} // namespace

void validate_response(Endpoint endpoint, const json &body) {
  if (!body.is_object())
    bad_reply(endpoint, "body must be an object");
  switch (endpoint) {
  case Endpoint::vh_generate: {
    auto it = body.find("vh_lines");
    if (it == body.end() || !it->is_array())
      bad_reply(endpoint, "missing 'vh_lines' array");
    for (const auto &l : *it)
      if (!l.is_string())
        bad_reply(endpoint, "'vh_lines' entries must be strings");
    return;
  }
  case Endpoint::action_generate: {
    auto it = body.find("action");
    if (it == body.end() || !it->is_object() || !is_action_kind(it->value("kind", json())))
      bad_reply(endpoint, "missing 'action' with a known kind");
    return;
  }
  case Endpoint::cluster_decide: {
    bool match = body.contains("match"), fresh = body.contains("new");
    if (match == fresh)
      bad_reply(endpoint, "exactly one of 'match' or 'new' required");
    if (match && !body["match"].is_number_integer())
      bad_reply(endpoint, "'match' must be an integer node id");
    if (fresh && !body["new"].is_string())
      bad_reply(endpoint, "'new' must be a description string");
    return;
  }
  case Endpoint::qa_answer: {
    auto it = body.find("reply");
    if (it == body.end() || !it->is_string())
      bad_reply(endpoint, "missing 'reply' string");
    return;
  }
  }
}

std::vector<Fixture> parse_fixtures(const json &doc) {
  if (!doc.is_array())
    throw Error(Errc::invalid_config, "fixtures must be an array");
  std::vector<Fixture> out;
  for (const auto &f : doc) {
    Fixture fx;
    if (f.contains("endpoint"))
      fx.endpoint = endpoint_from_name(f["endpoint"].get<std::string>());
    if (f.contains("request_id"))
      fx.request_id = f["request_id"].get<std::string>();
    fx.match = f.value("match", json::object());
    if (!f.contains("body"))
      throw Error(Errc::invalid_config, "fixture without 'body'");
    fx.body = f["body"];
    out.push_back(std::move(fx));
  }
  return out;
}

std::vector<Fixture> load_fixtures(const fs::path &path) { return parse_fixtures(read_json(path)); }

MockBackend::MockBackend(std::vector<Fixture> fixtures) : fixtures_(std::move(fixtures)) {}

json MockBackend::call(const InferenceRequest &req) {
  for (const auto &fx : fixtures_) {
    if (fx.endpoint && *fx.endpoint != req.endpoint)
      continue;
    if (fx.request_id) {
      if (*fx.request_id == req.request_id)
        return fx.body;
      continue;
    }
    if (subset_match(fx.match, req.payload))
      return fx.body;
  }

  const auto &p = req.payload;
  switch (req.endpoint) {
  case Endpoint::cluster_decide: {
    auto label = p.find("hidden_label");
    if (label != p.end() && label->is_string()) {
      for (const auto &node : p.value("nodes", json::array()))
        if (node.value("description", json()) == *label)
          return json{{"match", node.at("id")}};
      return json{{"new", *label}};
    }
    return json{{"new", ""}};
  }
  case Endpoint::qa_answer:
    return json{{"reply", "A"}};
  case Endpoint::vh_generate: {
    std::string digest = p.value("luma_digest", std::string());
    return json{{"vh_lines", json::array({"0|GeneratedScreen|gen/" + digest.substr(0, 12) + "||0"})}};
  }
  case Endpoint::action_generate:
    return json{{"action", {{"kind", "tap"}, {"target", {{"bounds", {0, 0, 0, 0}}}}, {"params", nullptr}}}};
  }
  return json::object();
}

std::shared_ptr<Backend> mock_backend(std::vector<Fixture> fixtures) {
  return std::make_shared<MockBackend>(std::move(fixtures));
}

namespace {

class RemoteBackend : public Backend {
public:
  explicit RemoteBackend(const RemoteOptions &opts)
      : opts_(opts), slots_(std::max(1, std::min(opts.max_in_flight, 64))) {
    // Split "scheme://host:port/prefix" into the client base and path prefix.
    auto scheme_end = opts_.url.find("://");
    auto path_start = opts_.url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    base_ = opts_.url.substr(0, path_start);
    if (path_start != std::string::npos)
      prefix_ = opts_.url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/')
      prefix_.pop_back();
  }

  BackendKind kind() const noexcept override { return BackendKind::remote; }

  json call(const InferenceRequest &req) override {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<64> &s;
      ~Release() { s.release(); }
    } release{slots_};

    httplib::Client client(base_);
    client.set_connection_timeout(opts_.timeout);
    client.set_read_timeout(opts_.timeout);
    client.set_write_timeout(opts_.timeout);
    json envelope{{"endpoint", endpoint_name(req.endpoint)}, {"payload", req.payload}};
    auto res = client.Post(prefix_ + "/v1/infer", envelope.dump(), "application/json");
    if (!res) {
      auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout)
        throw Error(Errc::backend_timeout, "remote backend timed out: " + httplib::to_string(err));
      throw Error(Errc::client_unavailable, "remote backend unreachable: " + httplib::to_string(err));
    }
    if (res->status != 200)
      throw Error(Errc::client_unavailable, "remote backend returned HTTP " + std::to_string(res->status));
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::parse_error &e) {
      bad_reply(req.endpoint, std::string("not JSON: ") + e.what());
    }
    if (!reply.is_object() || !reply.contains("body"))
      bad_reply(req.endpoint, "envelope lacks 'body'");
    return reply["body"];
  }

private:
  RemoteOptions opts_;
  std::string base_;
  std::string prefix_;
  std::counting_semaphore<64> slots_;
};

} // namespace

std::shared_ptr<Backend> remote_backend(const RemoteOptions &opts) {
  if (opts.url.empty())
    throw Error(Errc::invalid_config, "remote backend needs a URL");
  return std::make_shared<RemoteBackend>(opts);
}

std::shared_ptr<Backend> backend_from_env() {
  if (const char *url = std::getenv("XPLORE_MODEL_URL"); url && *url)
    return remote_backend(RemoteOptions{url});
  return mock_backend();
}

std::size_t ClientStats::total_calls() const {
  std::size_t n = 0;
  for (const auto &[_, s] : per_endpoint)
    n += s.calls;
  return n;
}

std::size_t ClientStats::total_cache_hits() const {
  std::size_t n = 0;
  for (const auto &[_, s] : per_endpoint)
    n += s.cache_hits;
  return n;
}

std::size_t ClientStats::total_tokens() const {
  std::size_t n = 0;
  for (const auto &[_, s] : per_endpoint)
    n += s.tokens;
  return n;
}

json to_json(const ClientStats &stats) {
  json per = json::object();
  for (const auto &[name, s] : stats.per_endpoint)
    per[name] = {{"calls", s.calls}, {"cache_hits", s.cache_hits}, {"tokens", s.tokens}};
  return json{{"calls", stats.total_calls()},
              {"cache_hits", stats.total_cache_hits()},
              {"tokens", stats.total_tokens()},
              {"per_endpoint", std::move(per)}};
}

ModelClient::ModelClient(std::shared_ptr<Backend> backend, std::optional<fs::path> cache_dir)
    : backend_(std::move(backend)), cache_dir_(std::move(cache_dir)) {}

std::optional<json> ModelClient::cache_lookup(const InferenceRequest &req) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = memory_.find(req.request_id); it != memory_.end())
      return it->second;
  }
  if (!cache_dir_)
    return std::nullopt;
  auto path = *cache_dir_ / std::string(endpoint_name(req.endpoint)) / (req.request_id + ".json");
  if (!fs::exists(path))
    return std::nullopt;
  json body;
  try {
    body = read_json(path);
    validate_response(req.endpoint, body);
  } catch (const Error &) {
    return std::nullopt; // unreadable entries are refetched
  }
  std::lock_guard lock(mutex_);
  memory_.emplace(req.request_id, body);
  return body;
}

void ModelClient::cache_store(const InferenceRequest &req, const json &body) {
  {
    std::lock_guard lock(mutex_);
    memory_.emplace(req.request_id, body);
  }
  if (cache_dir_) {
    auto path = *cache_dir_ / std::string(endpoint_name(req.endpoint)) / (req.request_id + ".json");
    write_text_atomic(path, canonical_dump(body) + "\n");
  }
}

InferenceResponse ModelClient::invoke(const InferenceRequest &req) {
  const std::string name(endpoint_name(req.endpoint));
  {
    std::lock_guard lock(mutex_);
    auto &s = stats_.per_endpoint[name];
    ++s.calls;
    s.tokens += count_json_words(req.payload);
  }
  if (auto cached = cache_lookup(req)) {
    std::lock_guard lock(mutex_);
    ++stats_.per_endpoint[name].cache_hits;
    return {req.request_id, std::move(*cached), BackendKind::cache};
  }
  if (!backend_)
    throw Error(Errc::no_backend, "no backend configured and no cached reply for " + name);
  json body = backend_->call(req);
  validate_response(req.endpoint, body);
  cache_store(req, body);
  {
    std::lock_guard lock(mutex_);
    ++backend_calls_;
  }
  return {req.request_id, std::move(body), backend_->kind()};
}

ClientStats ModelClient::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

std::size_t ModelClient::backend_calls() const {
  std::lock_guard lock(mutex_);
  return backend_calls_;
}

} // namespace xplore::model
