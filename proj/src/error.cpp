#include "xplore/error.hpp"

namespace xplore {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
  case Errc::missing_file: return "MissingFile";
  case Errc::malformed_manifest: return "MalformedManifest";
  case Errc::dimension_mismatch: return "DimensionMismatch";
  case Errc::empty_frame: return "EmptyFrame";
  case Errc::too_few_frames: return "TooFewFrames";
  case Errc::index_out_of_range: return "IndexOutOfRange";
  case Errc::malformed_vh: return "MalformedVh";
  case Errc::schema_violation: return "SchemaViolation";
  case Errc::client_unavailable: return "ClientUnavailable";
  case Errc::trace_misaligned: return "TraceMisaligned";
  case Errc::backend_timeout: return "BackendTimeout";
  case Errc::backend_malformed_reply: return "BackendMalformedReply";
  case Errc::no_backend: return "NoBackend";
  case Errc::unassigned_keyframe: return "UnassignedKeyframe";
  case Errc::edge_not_in_graph: return "EdgeNotInGraph";
  case Errc::unreachable: return "Unreachable";
  case Errc::budget_too_small_for_nodes: return "BudgetTooSmallForNodes";
  case Errc::malformed_qa: return "MalformedQa";
  case Errc::bad_option_count: return "BadOptionCount";
  case Errc::bad_gt_index: return "BadGtIndex";
  case Errc::insufficient_material: return "InsufficientMaterial";
  case Errc::universe_mismatch: return "UniverseMismatch";
  case Errc::invalid_model: return "InvalidModel";
  case Errc::invalid_config: return "InvalidConfig";
  case Errc::io_error: return "IoError";
  }
  return "Unknown";
}

bool is_backend_error(Errc code) noexcept {
  switch (code) {
  case Errc::client_unavailable:
  case Errc::backend_timeout:
  case Errc::backend_malformed_reply:
  case Errc::no_backend:
    return true;
  default:
    return false;
  }
}

} // namespace xplore
