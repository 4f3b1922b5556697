#include "catis/error.hpp"

namespace catis {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kDegenerateInput: return "degenerate-input";
    case ErrorKind::kUndefinedStatistic: return "undefined-statistic";
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kCapacity: return "capacity";
    case ErrorKind::kDivergence: return "divergence";
  }
  return "unknown";
}

}  // namespace catis
