#pragma once

#include <functional>
#include <memory>

#include "fragsim/dbmodels.hpp"

namespace fragsim {

struct ExecStatus {
  bool done = false;
  bool ok = false;
  std::uint32_t gen = 0;       // bump to cancel the attempt
  SimTime parked_until = 0;    // latest reroute horizon a leg is waiting on
  std::int64_t bytes = 0;      // delivered bytes across the flow's legs
};

using ExecHandle = std::shared_ptr<ExecStatus>;

// Drives one operation flow through the network. Optional targets and targets
// with remaining alternates fail fast on routing trouble; required targets
// park until the reroute window closes.
ExecHandle execute_plan(SimWorld& world, OpPlan plan, OpKind op_kind,
                        std::function<void(bool ok, std::int64_t bytes)> done);

inline void cancel_exec(const ExecHandle& h) { ++h->gen; }

// Runs a membership change: admin round trips first, then the bulk transfer
// (parallel batched flows and strictly sequential pieces). The callback gets
// the settle duration.
void execute_churn(SimWorld& world, DbModel& db, ChurnPlan plan,
                   std::function<void(SimTime settle_us, std::int64_t bulk_bytes)> done);

}  // namespace fragsim
