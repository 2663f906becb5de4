use super::problem::{AllocationProblem, Schedule};
use super::ScheduleError;

/// Slot-by-slot value-of-information heuristic. In each slot the `γ` agents
/// with the largest one-step reduction `tr(Γ_i (f(E,0) - f(E,1)))` are
/// granted, ties going to the lower agent index. Agents whose reduction is
/// not positive are never granted.
pub fn solve_greedy_voi(p: &AllocationProblem) -> Result<(Schedule, f64), ScheduleError> {
    let m = p.num_agents();
    let mut schedule = Schedule::zeros(m, p.slots());
    let mut states = p.e_init().to_vec();
    let mut total = 0.0;

    for slot in 0..p.slots() {
        let mut candidates = Vec::with_capacity(m);
        for (i, (agent, e)) in p.agents().iter().zip(&states).enumerate() {
            let silent = agent.step(e, 0.0, slot)?;
            let sent = agent.step(e, 1.0, slot)?;
            let gain = agent.price(&silent) - agent.price(&sent);
            candidates.push((i, gain, silent, sent));
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&x, &y| candidates[y].1.total_cmp(&candidates[x].1).then(x.cmp(&y)));
        let granted: Vec<usize> =
            order.into_iter().filter(|&i| candidates[i].1 > 0.0).take(p.capacity()).collect();

        for (i, _, silent, sent) in candidates {
            let next = if granted.contains(&i) {
                schedule.set(i, slot, true);
                sent
            } else {
                silent
            };
            total += p.agents()[i].price(&next);
            states[i] = next;
        }
    }
    Ok((schedule, total))
}
