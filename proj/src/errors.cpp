#include "msfin/errors.hpp"

namespace msfin {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Index: return "index";
    case ErrorKind::MaskedRow: return "masked-row";
    case ErrorKind::Config: return "config";
    case ErrorKind::EmptySequence: return "empty-sequence";
    case ErrorKind::UndefinedMetric: return "undefined-metric";
    case ErrorKind::CheckpointVersion: return "checkpoint-version";
    case ErrorKind::CheckpointDimension: return "checkpoint-dimension";
    case ErrorKind::CheckpointCorrupt: return "checkpoint-corrupt";
    case ErrorKind::BadMagic: return "bad-magic";
    case ErrorKind::FormatVersion: return "format-version";
    case ErrorKind::ShapeInconsistency: return "shape-inconsistency";
    case ErrorKind::TaoOutOfRange: return "t_ao-out-of-range";
    case ErrorKind::LabelInconsistent: return "label-inconsistent";
    case ErrorKind::Import: return "import";
    case ErrorKind::Io: return "io";
    case ErrorKind::Numerical: return "numerical";
  }
  return "unknown";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::CheckpointDimension:
      return 2;
    case ErrorKind::Numerical:
      return 4;
    case ErrorKind::BadMagic:
    case ErrorKind::FormatVersion:
    case ErrorKind::ShapeInconsistency:
    case ErrorKind::TaoOutOfRange:
    case ErrorKind::LabelInconsistent:
    case ErrorKind::Import:
    case ErrorKind::Io:
    case ErrorKind::CheckpointVersion:
    case ErrorKind::CheckpointCorrupt:
    case ErrorKind::EmptySequence:
    case ErrorKind::UndefinedMetric:
      return 3;
    default:
      return 1;
  }
}

}  // namespace msfin
