#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace resilsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// breaker
class InvalidConfig : public Error {
 public:
  using Error::Error;
};
class ClockRegression : public Error {
 public:
  using Error::Error;
};
class OutcomeInOpenState : public Error {
 public:
  using Error::Error;
};
class UnexpectedTrialOutcome : public Error {
 public:
  using Error::Error;
};
class FallbackFailed : public Error {
 public:
  using Error::Error;
};

// balance / registry
class NoAvailableInstances : public Error {
 public:
  NoAvailableInstances();
};
class UnknownInstance : public Error {
 public:
  explicit UnknownInstance(const std::string& id) : Error("unknown instance: " + id) {}
};
class DuplicateId : public Error {
 public:
  explicit DuplicateId(const std::string& id) : Error("duplicate instance id: " + id) {}
};
class NegativeCount : public Error {
 public:
  explicit NegativeCount(const std::string& id)
      : Error("release without matching acquire: " + id) {}
};

// scenario loading
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};
class CycleError : public Error {
 public:
  using Error::Error;
};

// metrics
class MalformedTrace : public Error {
 public:
  using Error::Error;
};
class IncompatibleRuns : public Error {
 public:
  using Error::Error;
};

}  // namespace resilsim
