#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "xplore/util.hpp"

namespace xplore::model {

enum class Endpoint { vh_generate, action_generate, cluster_decide, qa_answer };
enum class BackendKind { mock, cache, remote };

std::string_view endpoint_name(Endpoint e) noexcept;
Endpoint endpoint_from_name(std::string_view name);
std::string_view backend_name(BackendKind k) noexcept;

struct InferenceRequest {
  Endpoint endpoint = Endpoint::qa_answer;
  json payload;
  // sha256 over the endpoint name and the canonical payload text.
  std::string request_id;
};

InferenceRequest make_request(Endpoint endpoint, json payload);

struct InferenceResponse {
  std::string request_id;
  json body;
  BackendKind backend = BackendKind::mock;
};

// Throws Errc::backend_malformed_reply when body does not fit the endpoint's
// reply schema:
//   vh_generate     {"vh_lines": [string]}
//   action_generate {"action": {"kind": ..., "target": ..., "params": ...}}
//   cluster_decide  {"match": int} or {"new": string}
//   qa_answer       {"reply": string}
void validate_response(Endpoint endpoint, const json &body);

class Backend {
public:
  virtual ~Backend() = default;
  virtual BackendKind kind() const noexcept = 0;
  virtual json call(const InferenceRequest &req) = 0;
};

// A fixture answers a request either by exact request_id or by a payload
// pattern: every key in `match` must be present in the payload with an
// equal value.
struct Fixture {
  std::optional<Endpoint> endpoint;
  std::optional<std::string> request_id;
  json match = json::object();
  json body;
};

std::vector<Fixture> parse_fixtures(const json &doc);
std::vector<Fixture> load_fixtures(const std::filesystem::path &path);

// Deterministic offline backend; a pure function of the payload. Requests no
// fixture matches get the per-endpoint default:
//   cluster_decide  label echo when the payload carries "hidden_label",
//                   otherwise {"new": ""}
//   qa_answer       {"reply": "A"}
//   vh_generate     one root line keyed by the payload's luma digest
//   action_generate a tap with an empty bounds target
class MockBackend : public Backend {
public:
  explicit MockBackend(std::vector<Fixture> fixtures = {});

  BackendKind kind() const noexcept override { return BackendKind::mock; }
  json call(const InferenceRequest &req) override;

private:
  std::vector<Fixture> fixtures_;
};

std::shared_ptr<Backend> mock_backend(std::vector<Fixture> fixtures = {});

struct RemoteOptions {
  std::string url; // scheme://host[:port][/prefix]
  std::chrono::seconds timeout{60};
  int max_in_flight = 4;
};

// POST <url>/v1/infer with {"endpoint", "payload"}; expects {"body": {...}}.
std::shared_ptr<Backend> remote_backend(const RemoteOptions &opts);

// XPLORE_MODEL_URL set selects the remote backend, otherwise the mock.
std::shared_ptr<Backend> backend_from_env();

struct EndpointStats {
  std::size_t calls = 0;
  std::size_t cache_hits = 0;
  std::size_t tokens = 0;
};

struct ClientStats {
  std::map<std::string, EndpointStats> per_endpoint;
  std::size_t total_calls() const;
  std::size_t total_cache_hits() const;
  std::size_t total_tokens() const;
};

json to_json(const ClientStats &stats);

// Thread-safe front end: memory cache, optional on-disk cache at
// <cache_dir>/<endpoint>/<request_id>.json, response validation, and token
// accounting.
class ModelClient {
public:
  explicit ModelClient(std::shared_ptr<Backend> backend,
                       std::optional<std::filesystem::path> cache_dir = std::nullopt);

  InferenceResponse invoke(const InferenceRequest &req);
  InferenceResponse invoke(Endpoint endpoint, json payload) {
    return invoke(make_request(endpoint, std::move(payload)));
  }

  bool has_backend() const noexcept { return backend_ != nullptr; }
  ClientStats stats() const;
  // Number of requests that reached the backend (cache misses).
  std::size_t backend_calls() const;

private:
  std::optional<json> cache_lookup(const InferenceRequest &req);
  void cache_store(const InferenceRequest &req, const json &body);

  std::shared_ptr<Backend> backend_;
  std::optional<std::filesystem::path> cache_dir_;
  mutable std::mutex mutex_;
  std::map<std::string, json> memory_;
  ClientStats stats_;
  std::size_t backend_calls_ = 0;
};

} // namespace xplore::model
