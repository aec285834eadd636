#pragma once

#include "ehcoop/model.hpp"

namespace ehcoop {

enum class BaselineKind { constant_power_no_coop, constant_power_with_coop };

std::string to_string(BaselineKind kind);
BaselineKind parse_baseline(const std::string& s);

/// Each node spends the empirical mean of its own harvests per slot, or what
/// is left in its battery if that is less. The cooperative variant adds the
/// best per-slot transfers for those powers; mode restricts their direction.
TransferPolicy constant_power(const Scenario& sc, BaselineKind kind, CoopMode mode = CoopMode::bidirectional);

}  // namespace ehcoop
