#include "mixreg/fault.hpp"

#include <atomic>

namespace mixreg::fault {
namespace {
std::atomic<Mutation> g_active{Mutation::None};
}

Mutation active() { return g_active.load(std::memory_order_relaxed); }

std::string_view to_string(Mutation m) {
  switch (m) {
    case Mutation::None: return "none";
    case Mutation::ShiftThetaBar: return "shift_theta_bar";
    case Mutation::DropGammaSq: return "drop_gamma_sq";
    case Mutation::DropSigmaSq: return "drop_sigma_sq";
    case Mutation::FlipR3Sign: return "flip_r3_sign";
  }
  return "unknown";
}

std::optional<Mutation> parse(std::string_view name) {
  for (Mutation m : {Mutation::None, Mutation::ShiftThetaBar, Mutation::DropGammaSq,
                     Mutation::DropSigmaSq, Mutation::FlipR3Sign}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

std::vector<Mutation> all_mutations() {
  return {Mutation::ShiftThetaBar, Mutation::DropGammaSq, Mutation::DropSigmaSq,
          Mutation::FlipR3Sign};
}

ScopedMutation::ScopedMutation(Mutation m) : previous_(g_active.exchange(m)) {}

ScopedMutation::~ScopedMutation() { g_active.store(previous_); }

}  // namespace mixreg::fault
