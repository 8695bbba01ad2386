#pragma once
#include <stdexcept>
#include <string>

namespace reng {

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateConditioning : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateModel : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedRecord : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidCategory : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoInformation : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InfeasibleConditioning : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace reng
