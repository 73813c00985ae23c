#pragma once

#include <stdexcept>
#include <string>

namespace wcs {

// Caller passed arguments that violate a precondition (shapes, signs, sizes).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Riccati iteration failed or produced an unstable closed loop.
class SynthesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite gradients, divergent pre-training.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Policy network produced non-finite outputs.
class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A rollout produced a non-finite state or an infeasible allocation.
class EpisodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace wcs
