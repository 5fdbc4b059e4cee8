#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace ctxshape {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input text is not valid JSON (or not valid for the requested format).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Parsed data violates the corpus schema or one of its invariants.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Caller broke an operation's precondition (bad k, empty answer, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Evaluation-protocol violations, e.g. |selected| != |gold|.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Failure talking to or interpreting a language-model backend. Multi-step
// procedures attach the step index at which the failure happened.
class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what) : Error(what), message_(what) {}

  const char* what() const noexcept override { return message_.c_str(); }

  std::optional<std::size_t> step_index() const { return step_; }

  void set_step_index(std::size_t step) {
    step_ = step;
    message_ = "step " + std::to_string(step) + ": " + message_;
  }

 private:
  std::string message_;
  std::optional<std::size_t> step_;
};

// Rendered prompt does not fit in the backend's context window.
class ContextOverflowError : public BackendError {
 public:
  ContextOverflowError(std::size_t rendered_tokens, std::size_t limit)
      : BackendError("context overflow: rendered prompt has " + std::to_string(rendered_tokens) +
                     " tokens, limit is " + std::to_string(limit)),
        rendered_tokens_(rendered_tokens),
        limit_(limit) {}

  std::size_t rendered_tokens() const { return rendered_tokens_; }
  std::size_t limit() const { return limit_; }

 private:
  std::size_t rendered_tokens_;
  std::size_t limit_;
};

// The judge's yes/no option tokens were missing from the returned top-K.
class JudgeError : public BackendError {
 public:
  using BackendError::BackendError;
};

}  // namespace ctxshape
