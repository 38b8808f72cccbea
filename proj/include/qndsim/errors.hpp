#ifndef QNDSIM_ERRORS_HPP
#define QNDSIM_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <utility>

namespace qnd {

/// Enumeration or convolution would exceed a configured size cap.
class size_error : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// An argument violates an operation's precondition.
class argument_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The optical configuration is outside what the z-reduced engine handles
/// (mixed drives, or no drive at all).
class unsupported_scenario : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A photodetection was requested on a state whose every populated branch is
/// dark.
class impossible_jump : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Amplitudes inside one z-sector do not share a common phase.
class ambiguity_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid run configuration. `key()` names the offending key.
class config_error : public std::runtime_error {
 public:
  config_error(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace qnd

#endif  // QNDSIM_ERRORS_HPP
