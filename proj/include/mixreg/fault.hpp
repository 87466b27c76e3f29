#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Formula mutations used by the verification suite to prove that its checks
// are sensitive. Production code paths consult `active()`; the default is
// `Mutation::None` and nothing changes unless a ScopedMutation is alive.
namespace mixreg::fault {

enum class Mutation {
  None,
  ShiftThetaBar,  // theta_bar -> theta_bar + 0.01 in coefficients()
  DropGammaSq,    // gamma^2 term removed from the per-example covariances
  DropSigmaSq,    // sigma^2 term removed from the per-example covariances
  FlipR3Sign,     // R3 enters the breakdown with the wrong sign
};

Mutation active();

std::string_view to_string(Mutation m);
std::optional<Mutation> parse(std::string_view name);
std::vector<Mutation> all_mutations();

class ScopedMutation {
 public:
  explicit ScopedMutation(Mutation m);
  ~ScopedMutation();
  ScopedMutation(const ScopedMutation&) = delete;
  ScopedMutation& operator=(const ScopedMutation&) = delete;

 private:
  Mutation previous_;
};

}  // namespace mixreg::fault
