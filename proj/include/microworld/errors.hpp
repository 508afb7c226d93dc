#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mw {

// Base class for every error raised by the library. Callers that only need a
// message can catch this; callers that branch on the failure catch the
// concrete type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidStatement : public Error {
 public:
  using Error::Error;
};

// An action or fact does not hold in the ground-truth state.
class PreconditionViolation : public Error {
 public:
  PreconditionViolation(int statement_index, std::string reason)
      : Error("precondition violated at statement " +
              std::to_string(statement_index) + ": " + reason),
        statement_index_(statement_index),
        reason_(std::move(reason)) {}

  int statement_index() const { return statement_index_; }
  const std::string& reason() const { return reason_; }

 private:
  int statement_index_;
  std::string reason_;
};

// A statement is inconsistent with every world the reader still considers
// possible. `evidence` holds the provenance of the contradicted fact.
class Contradiction : public Error {
 public:
  Contradiction(int statement_index, std::vector<int> evidence,
                std::string reason)
      : Error("contradiction at statement " + std::to_string(statement_index) +
              ": " + reason),
        statement_index_(statement_index),
        evidence_(std::move(evidence)),
        reason_(std::move(reason)) {}

  int statement_index() const { return statement_index_; }
  const std::vector<int>& evidence() const { return evidence_; }
  const std::string& reason() const { return reason_; }

 private:
  int statement_index_;
  std::vector<int> evidence_;
  std::string reason_;
};

class InstanceTooLarge : public Error {
 public:
  using Error::Error;
};

class PolicyReturnedIllegalAction : public Error {
 public:
  using Error::Error;
};

class MissingTemplate : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t position, std::string expected, std::string text)
      : Error("parse error at token " + std::to_string(position) +
              ": expected " + expected + " in \"" + text + "\""),
        position_(position),
        expected_(std::move(expected)) {}

  std::size_t position() const { return position_; }
  const std::string& expected() const { return expected_; }

 private:
  std::size_t position_;
  std::string expected_;
};

class UnknownEntity : public Error {
 public:
  UnknownEntity(std::string token, std::string expected_kind)
      : Error("unknown " + expected_kind + " \"" + token + "\""),
        token_(std::move(token)) {}

  const std::string& token() const { return token_; }

 private:
  std::string token_;
};

class UnresolvedPronoun : public Error {
 public:
  using Error::Error;
};

class GenerationExhausted : public Error {
 public:
  GenerationExhausted(int retries, const std::string& why)
      : Error("generation exhausted after " + std::to_string(retries) +
              " retries: " + why),
        retries_(retries) {}

  int retries() const { return retries_; }

 private:
  int retries_;
};

class Unanswerable : public Error {
 public:
  using Error::Error;
};

class SignatureOverlap : public Error {
 public:
  SignatureOverlap(std::string first, std::string second, std::string detail)
      : Error("signature overlap on pair (" + first + ", " + second +
              "): " + detail),
        pair_{std::move(first), std::move(second)} {}

  const std::pair<std::string, std::string>& pair() const { return pair_; }

 private:
  std::pair<std::string, std::string> pair_;
};

class NoInjectionSite : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class UnresolvedId : public Error {
 public:
  using Error::Error;
};

class DuplicatePrediction : public Error {
 public:
  using Error::Error;
};

class ConstantColumn : public Error {
 public:
  using Error::Error;
};

class TooFewModels : public Error {
 public:
  using Error::Error;
};

class SessionNotFound : public Error {
 public:
  explicit SessionNotFound(const std::string& id)
      : Error("session not found: " + id) {}
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

}  // namespace mw
