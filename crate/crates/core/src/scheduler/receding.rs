use super::problem::{allocation_cost, AllocationProblem, RelaxedSchedule, Schedule, ScheduleLike};
use super::{
    baseline_round_robin, round_schedule, solve_exhaustive, solve_greedy_voi, solve_relaxed, ScheduleError, Strategy,
};

/// Result of one receding-horizon solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    /// Grants for the first planned slot, the only ones actuated.
    pub grants: Vec<bool>,
    pub plan: Schedule,
    pub cost: f64,
}

/// Solves the allocation problem posed at time `time` and returns the first
/// column for actuation.
///
/// `previous` is the plan returned at the previous instant. It is shifted by
/// one slot (last column repeated) and kept instead of the fresh solution
/// whenever it is strictly cheaper, so a feasible incumbent is never made
/// worse. The baseline strategy ignores both covariances and incumbent and
/// follows the rotation aligned to `time`, so consecutive calls continue
/// the same cycle.
pub fn receding_horizon_step(
    p: &AllocationProblem,
    strategy: Strategy,
    previous: Option<&Schedule>,
    time: usize,
) -> Result<PlanOutcome, ScheduleError> {
    if strategy == Strategy::Baseline {
        let plan = baseline_round_robin(p.num_agents(), p.capacity(), p.horizon(), time * p.capacity());
        let cost = allocation_cost(p, &plan)?;
        return Ok(PlanOutcome { grants: plan.column(0), plan, cost });
    }

    let warm = previous
        .map(Schedule::shifted)
        .filter(|s| s.num_agents() == p.num_agents() && s.slots() == p.slots() && s.is_feasible(p.capacity()));

    let (mut plan, mut cost) = match strategy {
        Strategy::Exhaustive => solve_exhaustive(p)?,
        Strategy::Greedy => solve_greedy_voi(p)?,
        Strategy::Relaxed => {
            let init = match &warm {
                Some(s) => RelaxedSchedule::from(s),
                None => RelaxedSchedule::uniform(p.num_agents(), p.slots(), p.capacity()),
            };
            let (relaxed, _) = solve_relaxed(p, &init)?;
            let rounded = round_schedule(&relaxed, p.capacity());
            let cost = allocation_cost(p, &rounded)?;
            (rounded, cost)
        }
        Strategy::Baseline => unreachable!(),
    };

    if let Some(incumbent) = warm {
        let incumbent_cost = allocation_cost(p, &incumbent)?;
        if incumbent_cost < cost {
            plan = incumbent;
            cost = incumbent_cost;
        }
    }
    Ok(PlanOutcome { grants: plan.column(0), plan, cost })
}
