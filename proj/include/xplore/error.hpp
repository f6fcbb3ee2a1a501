#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xplore {

enum class Errc {
  missing_file,
  malformed_manifest,
  dimension_mismatch,
  empty_frame,
  too_few_frames,
  index_out_of_range,
  malformed_vh,
  schema_violation,
  client_unavailable,
  trace_misaligned,
  backend_timeout,
  backend_malformed_reply,
  no_backend,
  unassigned_keyframe,
  edge_not_in_graph,
  unreachable,
  budget_too_small_for_nodes,
  malformed_qa,
  bad_option_count,
  bad_gt_index,
  insufficient_material,
  universe_mismatch,
  invalid_model,
  invalid_config,
  io_error,
};

std::string_view errc_name(Errc code) noexcept;

// Backend-side failures (as opposed to bad input) map to CLI exit code 2.
bool is_backend_error(Errc code) noexcept;

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string &what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

private:
  Errc code_;
};

// Error raised by a pipeline stage; keeps the original code and names the
// stage in the message.
class StageError : public Error {
public:
  StageError(std::string stage, const Error &inner)
      : Error(inner.code(), "stage '" + stage + "': " + inner.what()),
        stage_(std::move(stage)) {}

  const std::string &stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

} // namespace xplore
