#include "fragsim/opexec.hpp"

namespace fragsim {

namespace {

struct PlanRun : std::enable_shared_from_this<PlanRun> {
  SimWorld& w;
  OpPlan plan;
  OpKind op_kind;
  ExecHandle h;
  std::uint32_t gen;
  std::function<void(bool, std::int64_t)> done;
  bool finished = false;

  PlanRun(SimWorld& world, OpPlan p, OpKind kind, std::function<void(bool, std::int64_t)> cb)
      : w(world), plan(std::move(p)), op_kind(kind), h(std::make_shared<ExecStatus>()),
        gen(0), done(std::move(cb)) {}

  bool cancelled() const { return h->gen != gen; }

  void finish(bool ok) {
    if (finished || cancelled()) return;
    finished = true;
    h->done = true;
    h->ok = ok;
    done(ok, h->bytes);
  }

  void run_from(std::size_t idx) {
    while (idx < plan.stages.size() && plan.stages[idx].async) {
      launch_stage(idx, [](bool) {});
      ++idx;
    }
    if (idx >= plan.stages.size()) {
      finish(true);
      return;
    }
    auto self = shared_from_this();
    launch_stage(idx, [self, idx](bool ok) {
      if (ok) {
        self->run_from(idx + 1);
      } else {
        self->finish(false);
      }
    });
  }

  void launch_stage(std::size_t idx, std::function<void(bool)> cb);
};

struct StageRun {
  std::shared_ptr<PlanRun> pr;
  std::size_t stage_idx;
  std::function<void(bool)> cb;
  int total = 0;
  int got = 0;
  int failed = 0;
  bool completed = false;

  const PlanStage& stage() const { return pr->plan.stages[stage_idx]; }

  void settle() {
    if (completed) return;
    const int wait = stage().wait;
    if (wait >= 0) {
      if (got >= wait) {
        completed = true;
        cb(true);
      } else if (total - failed < wait) {
        completed = true;
        cb(false);
      }
    } else {
      if (got + failed == total) {
        completed = true;
        cb(got >= 1 || total == 0);
      }
    }
  }

  void target_done(bool ok, bool optional) {
    if (pr->cancelled()) return;
    if (ok) {
      ++got;
    } else {
      ++failed;
      if (!optional && !completed) {
        completed = true;
        cb(false);
        return;
      }
    }
    settle();
  }
};

void run_target(const std::shared_ptr<StageRun>& sr, std::size_t target_idx,
                std::size_t alt_idx) {
  auto pr = sr->pr;
  const PlanStage& st = sr->stage();
  const PlanTarget& tg = st.targets[target_idx];
  const int node = (alt_idx == 0) ? tg.node : tg.alternates[alt_idx - 1];
  // Targets that can be replaced fail fast; required ones ride out reroutes.
  const bool fail_fast = tg.optional || alt_idx < tg.alternates.size();
  const int tries = fail_fast ? 0 : 3;
  auto park = [h = pr->h](SimTime ready) { h->parked_until = std::max(h->parked_until, ready); };

  pr->w.send(
      st.origin, node, tg.req_bytes, MsgTag{pr->op_kind, tg.req_leg},
      [sr, pr, target_idx, alt_idx, node](bool ok, SimTime at) {
        if (pr->cancelled()) return;
        const PlanStage& st2 = sr->stage();
        const PlanTarget& tg2 = st2.targets[target_idx];
        if (!ok) {
          if (alt_idx < tg2.alternates.size()) {
            run_target(sr, target_idx, alt_idx + 1);
          } else {
            sr->target_done(false, tg2.optional);
          }
          return;
        }
        pr->h->bytes += tg2.req_bytes;
        if (tg2.resp_bytes == 0) {
          sr->target_done(true, tg2.optional);
          return;
        }
        const SimTime respond_at = at + ms_to_us(tg2.proc_ms);
        pr->w.kernel.schedule(respond_at, EvKind::Timer, [sr, pr, target_idx, node] {
          if (pr->cancelled()) return;
          const PlanStage& st3 = sr->stage();
          const PlanTarget& tg3 = st3.targets[target_idx];
          auto park2 = [h = pr->h](SimTime ready) {
            h->parked_until = std::max(h->parked_until, ready);
          };
          pr->w.send(node, st3.origin, tg3.resp_bytes, MsgTag{pr->op_kind, tg3.resp_leg},
                     [sr, pr, target_idx](bool ok2, SimTime) {
                       if (pr->cancelled()) return;
                       pr->h->bytes += ok2 ? sr->stage().targets[target_idx].resp_bytes : 0;
                       sr->target_done(ok2, sr->stage().targets[target_idx].optional);
                     },
                     park2, 3);
        });
      },
      park, tries);
}

void PlanRun::launch_stage(std::size_t idx, std::function<void(bool)> cb) {
  const PlanStage& st = plan.stages[idx];
  auto sr = std::make_shared<StageRun>();
  sr->pr = shared_from_this();
  sr->stage_idx = idx;
  sr->cb = std::move(cb);
  sr->total = static_cast<int>(st.targets.size());
  if (sr->total == 0) {
    sr->completed = true;
    sr->cb(true);
    return;
  }
  auto fire = [sr] {
    if (sr->pr->cancelled()) return;
    for (std::size_t i = 0; i < sr->stage().targets.size(); ++i) run_target(sr, i, 0);
  };
  if (st.origin_proc_ms > 0) {
    w.kernel.schedule(w.now() + ms_to_us(st.origin_proc_ms), EvKind::Timer, fire);
  } else {
    fire();
  }
}

}  // namespace

ExecHandle execute_plan(SimWorld& world, OpPlan plan, OpKind op_kind,
                        std::function<void(bool, std::int64_t)> done) {
  auto pr = std::make_shared<PlanRun>(world, std::move(plan), op_kind, std::move(done));
  if (!pr->plan.viable) {
    auto h = pr->h;
    world.kernel.schedule(world.now(), EvKind::Timer, [pr] { pr->finish(false); });
    return h;
  }
  pr->run_from(0);
  return pr->h;
}

namespace {

struct ChurnRun : std::enable_shared_from_this<ChurnRun> {
  SimWorld& w;
  DbModel& db;
  ChurnPlan plan;
  std::function<void(SimTime, std::int64_t)> done;
  SimTime t0 = 0;
  int outstanding = 0;
  std::size_t piece_idx = 0;
  bool pieces_done = false;

  ChurnRun(SimWorld& world, DbModel& model, ChurnPlan p,
           std::function<void(SimTime, std::int64_t)> cb)
      : w(world), db(model), plan(std::move(p)), done(std::move(cb)) {}

  void start() {
    t0 = w.now();
    db.churn_started(plan);
    outstanding = static_cast<int>(plan.membership.size());
    if (outstanding == 0) {
      begin_transfers();
      return;
    }
    auto self = shared_from_this();
    for (const auto& [dst, bytes] : plan.membership) {
      w.send(plan.admin_origin, dst, bytes, MsgTag{OpKind::None, MsgLeg::Membership},
             [self, dst = dst](bool ok, SimTime at) {
               if (!ok) {
                 self->membership_settled();
                 return;
               }
               // confirmation back to the admin origin
               self->w.kernel.schedule(at + 1000, EvKind::Membership, [self, dst] {
                 self->w.send(dst, self->plan.admin_origin, kAckBytes,
                              MsgTag{OpKind::None, MsgLeg::Membership},
                              [self](bool, SimTime) { self->membership_settled(); });
               });
             });
    }
  }

  void membership_settled() {
    if (--outstanding == 0) begin_transfers();
  }

  void begin_transfers() {
    outstanding = static_cast<int>(plan.parallel_flows.size());
    pieces_done = plan.sequential_pieces.empty();
    if (outstanding == 0 && pieces_done) {
      complete();
      return;
    }
    for (const auto& flow : plan.parallel_flows) run_flow(flow, flow.bytes, 3);
    if (!pieces_done) run_piece(3);
  }

  void run_flow(const ChurnFlow& flow, std::int64_t remaining, int attempts) {
    if (remaining <= 0) {
      flow_done();
      return;
    }
    const std::int64_t batch = std::min(remaining, plan.batch_bytes);
    auto self = shared_from_this();
    w.send(flow.src, flow.dst, batch, MsgTag{OpKind::None, MsgLeg::Stream},
           [self, flow, remaining, batch, attempts](bool ok, SimTime) {
             if (!ok) {
               self->retry_flow(flow, remaining, attempts);
               return;
             }
             self->w.send(flow.dst, flow.src, kAckBytes, MsgTag{OpKind::None, MsgLeg::Ack},
                          [self, flow, remaining, batch, attempts](bool ok2, SimTime) {
                            if (!ok2) {
                              self->retry_flow(flow, remaining, attempts);
                              return;
                            }
                            self->run_flow(flow, remaining - batch, 3);
                          });
           });
  }

  void retry_flow(const ChurnFlow& flow, std::int64_t remaining, int attempts) {
    if (attempts <= 0) {
      flow_done();  // partial transfer, the topology is broken
      return;
    }
    auto self = shared_from_this();
    w.kernel.schedule(w.now() + w.router.reroute_delay_us() + 1000, EvKind::Timer,
                      [self, flow, remaining, attempts] {
                        self->run_flow(flow, remaining, attempts - 1);
                      });
  }

  void flow_done() {
    if (--outstanding == 0 && pieces_done) complete();
  }

  // Slot-sized pieces move one at a time, one round trip each.
  void run_piece(int attempts) {
    if (piece_idx >= plan.sequential_pieces.size()) {
      pieces_done = true;
      if (outstanding == 0) complete();
      return;
    }
    const ChurnFlow& piece = plan.sequential_pieces[piece_idx];
    auto self = shared_from_this();
    w.send(piece.src, piece.dst, piece.bytes, MsgTag{OpKind::None, MsgLeg::Stream},
           [self, attempts](bool ok, SimTime) {
             const ChurnFlow& p = self->plan.sequential_pieces[self->piece_idx];
             if (!ok) {
               self->retry_piece(attempts);
               return;
             }
             self->w.send(p.dst, p.src, kAckBytes, MsgTag{OpKind::None, MsgLeg::Ack},
                          [self, attempts](bool ok2, SimTime) {
                            if (!ok2) {
                              self->retry_piece(attempts);
                              return;
                            }
                            ++self->piece_idx;
                            self->run_piece(3);
                          });
           });
  }

  void retry_piece(int attempts) {
    if (attempts <= 0) {
      ++piece_idx;  // abandon this piece
      run_piece(3);
      return;
    }
    auto self = shared_from_this();
    w.kernel.schedule(w.now() + w.router.reroute_delay_us() + 1000, EvKind::Timer,
                      [self, attempts] { self->run_piece(attempts - 1); });
  }

  void complete() {
    db.churn_completed(plan);
    done(w.now() - t0, plan.total_bulk_bytes());
  }
};

}  // namespace

void execute_churn(SimWorld& world, DbModel& db, ChurnPlan plan,
                   std::function<void(SimTime, std::int64_t)> done) {
  auto run = std::make_shared<ChurnRun>(world, db, std::move(plan), std::move(done));
  run->start();
}

}  // namespace fragsim
