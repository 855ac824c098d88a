#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rscope {

/// Error categories shared by the C++ core and the C API status codes.
enum class ErrorCode {
  kParse = 1,
  kValidation,
  kUnknownLabel,
  kStraddlingAnnotation,
  kEmptyClass,
  kPrecondition,
  kDegenerateVector,
  kDimensionMismatch,
  kShapeMismatch,
  kIo,
  kConfig,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Malformed input bytes (JSON, UTF-8, binary files). `position` is a byte offset.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(ErrorCode::kParse, what + " (at byte " + std::to_string(position) + ")"),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

struct ValidationIssue {
  static constexpr std::size_t kDocumentLevel = static_cast<std::size_t>(-1);

  std::string doc_id;
  std::size_t annotation_index = kDocumentLevel;
  std::string message;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues)
      : Error(ErrorCode::kValidation, format(issues)), issues_(std::move(issues)) {}

  const std::vector<ValidationIssue>& issues() const noexcept { return issues_; }

 private:
  static std::string format(const std::vector<ValidationIssue>& issues) {
    std::string out = "corpus validation failed";
    for (const auto& issue : issues) {
      out += "; doc '" + issue.doc_id + "'";
      if (issue.annotation_index != ValidationIssue::kDocumentLevel) {
        out += " annotation " + std::to_string(issue.annotation_index);
      }
      out += ": " + issue.message;
    }
    return out;
  }

  std::vector<ValidationIssue> issues_;
};

class UnknownLabel : public Error {
 public:
  explicit UnknownLabel(std::string label)
      : Error(ErrorCode::kUnknownLabel, "unknown entity label '" + label + "'"),
        label_(std::move(label)) {}

  const std::string& label() const noexcept { return label_; }

 private:
  std::string label_;
};

class StraddlingAnnotation : public Error {
 public:
  StraddlingAnnotation(std::string doc_id, std::vector<std::size_t> indices)
      : Error(ErrorCode::kStraddlingAnnotation, format(doc_id, indices)),
        doc_id_(std::move(doc_id)),
        indices_(std::move(indices)) {}

  const std::string& doc_id() const noexcept { return doc_id_; }
  const std::vector<std::size_t>& indices() const noexcept { return indices_; }

 private:
  static std::string format(const std::string& doc_id, const std::vector<std::size_t>& idx) {
    std::string out = "annotations straddle a sentence boundary in doc '" + doc_id + "':";
    for (auto i : idx) out += " " + std::to_string(i);
    return out;
  }

  std::string doc_id_;
  std::vector<std::size_t> indices_;
};

class EmptyClass : public Error {
 public:
  explicit EmptyClass(const std::string& label)
      : Error(ErrorCode::kEmptyClass, "class " + label + " has no samples") {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error(ErrorCode::kPrecondition, what) {}
};

class DegenerateVector : public Error {
 public:
  DegenerateVector() : Error(ErrorCode::kDegenerateVector, "zero vector has no direction") {}
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : Error(ErrorCode::kDimensionMismatch,
              "dimension mismatch: expected " + std::to_string(expected) + ", got " +
                  std::to_string(got)) {}
};

class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& what) : Error(ErrorCode::kShapeMismatch, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::kConfig, what) {}
};

}  // namespace rscope
