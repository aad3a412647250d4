#include "d2dcache/error.hpp"

namespace d2dcache {

const char* category_name(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::parameter: return "parameter";
    case ErrorCategory::domain: return "domain";
    case ErrorCategory::numerical: return "numerical";
    case ErrorCategory::range: return "range";
    case ErrorCategory::io: return "io";
    case ErrorCategory::config: return "config";
    case ErrorCategory::internal: return "internal";
  }
  return "internal";
}

}  // namespace d2dcache
