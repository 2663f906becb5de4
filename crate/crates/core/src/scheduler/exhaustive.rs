use super::problem::{AllocationProblem, Schedule};
use super::ScheduleError;
use crate::linalg::Mat;

/// Upper bound on the number of enumerated schedules.
pub const MAX_ENUMERATION: u64 = 10_000_000;

/// Globally optimal schedule by depth-first enumeration of capacity-feasible
/// columns. Branches whose partial cost already exceeds the incumbent are
/// cut (every term of the objective is non-negative). Ties within a relative
/// `1e-12` go to the lexicographically smallest row-major bit string.
pub fn solve_exhaustive(p: &AllocationProblem) -> Result<(Schedule, f64), ScheduleError> {
    let m = p.num_agents();
    let columns = feasible_columns(m, p.capacity());
    let leaves = (columns.len() as f64).powi(p.slots() as i32);
    if leaves > MAX_ENUMERATION as f64 {
        return Err(ScheduleError::TooLarge { leaves, limit: MAX_ENUMERATION });
    }

    let mut search = Search { p, columns: &columns, path: Vec::with_capacity(p.slots()), best: None };
    search.descend(p.e_init().to_vec(), 0.0)?;
    let (cost, path) = search.best.expect("at least the empty schedule is enumerated");
    Ok((schedule_from_path(m, &columns, &path), cost))
}

/// All grant sets of size at most `capacity`, as boolean columns.
fn feasible_columns(agents: usize, capacity: usize) -> Vec<Vec<bool>> {
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << agents) {
        if (mask.count_ones() as usize) <= capacity {
            out.push((0..agents).map(|i| mask & (1 << i) != 0).collect());
        }
    }
    out
}

fn schedule_from_path(agents: usize, columns: &[Vec<bool>], path: &[usize]) -> Schedule {
    let mut s = Schedule::zeros(agents, path.len());
    for (k, &c) in path.iter().enumerate() {
        for (i, &bit) in columns[c].iter().enumerate() {
            s.set(i, k, bit);
        }
    }
    s
}

struct Search<'a> {
    p: &'a AllocationProblem,
    columns: &'a [Vec<bool>],
    path: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn tolerance(cost: f64) -> f64 {
        1e-12 * cost.abs().max(1.0)
    }

    fn descend(&mut self, states: Vec<Mat>, cost: f64) -> Result<(), ScheduleError> {
        if let Some((best, _)) = &self.best {
            if cost > best + Self::tolerance(*best) {
                return Ok(());
            }
        }
        let slot = self.path.len();
        if slot == self.p.slots() {
            self.offer(cost);
            return Ok(());
        }

        // Both successors of every agent, shared by all columns.
        let mut options = Vec::with_capacity(states.len());
        for (agent, e) in self.p.agents().iter().zip(&states) {
            let silent = agent.step(e, 0.0, slot)?;
            let silent_cost = agent.price(&silent);
            let sent = if agent.sigma[slot] > 0.0 { agent.step(e, 1.0, slot)? } else { silent.clone() };
            let sent_cost = agent.price(&sent);
            options.push([(silent, silent_cost), (sent, sent_cost)]);
        }

        for c in 0..self.columns.len() {
            let column = &self.columns[c];
            let mut next = Vec::with_capacity(states.len());
            let mut step_cost = 0.0;
            for (i, &bit) in column.iter().enumerate() {
                let (e, price) = &options[i][usize::from(bit)];
                next.push(e.clone());
                step_cost += price;
            }
            self.path.push(c);
            self.descend(next, cost + step_cost)?;
            self.path.pop();
        }
        Ok(())
    }

    fn offer(&mut self, cost: f64) {
        let replace = match &self.best {
            None => true,
            Some((best, best_path)) => {
                let tol = Self::tolerance(*best);
                if cost < best - tol {
                    true
                } else if cost <= best + tol {
                    let m = self.p.num_agents();
                    let candidate = schedule_from_path(m, self.columns, &self.path).flattened();
                    let incumbent = schedule_from_path(m, self.columns, best_path).flattened();
                    candidate < incumbent
                } else {
                    false
                }
            }
        };
        if replace {
            self.best = Some((cost, self.path.clone()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::allocation_cost;
    use crate::scheduler::test_support::{random_problem, scalar_agent};

    /// Brute force over every binary matrix, feasible or not, filtered by
    /// capacity afterwards. Independent of the column enumeration above.
    fn brute_force(p: &AllocationProblem) -> (Schedule, f64) {
        let m = p.num_agents();
        let slots = p.slots();
        let bits = m * slots;
        let mut best: Option<(f64, Schedule)> = None;
        for mask in 0u64..(1 << bits) {
            let mut s = Schedule::zeros(m, slots);
            for i in 0..m {
                for k in 0..slots {
                    // Most significant bit first, so increasing masks are
                    // increasing row-major bit strings.
                    let pos = bits - 1 - (i * slots + k);
                    s.set(i, k, mask & (1 << pos) != 0);
                }
            }
            if !s.is_feasible(p.capacity()) {
                continue;
            }
            let cost = allocation_cost(p, &s).unwrap();
            match &best {
                Some((b, _)) if cost >= b - 1e-12 * b.max(1.0) => {}
                _ => best = Some((cost, s)),
            }
        }
        let (c, s) = best.unwrap();
        (s, c)
    }

    #[test]
    fn single_agent_communicates_always() {
        let p = AllocationProblem::new(vec![scalar_agent(1.0, 1.0, 0.1, 1.0, 1.0, 5)], vec![Mat::zeros(1, 1)], 4, 1)
            .unwrap();
        let (s, _) = solve_exhaustive(&p).unwrap();
        assert_eq!(s, Schedule::from_bits(&[&[1, 1, 1, 1, 1]]));
    }

    #[test]
    fn ample_capacity_serves_everyone() {
        let agents = vec![
            scalar_agent(1.0, 1.0, 0.1, 1.0, 0.8, 3),
            scalar_agent(0.9, 0.5, 0.2, 2.0, 0.5, 3),
            scalar_agent(1.1, 0.1, 0.1, 0.5, 1.0, 3),
        ];
        let p = AllocationProblem::new(agents, vec![Mat::zeros(1, 1); 3], 2, 3).unwrap();
        let (s, _) = solve_exhaustive(&p).unwrap();
        assert!(s.flattened().into_iter().all(|b| b));
    }

    #[test]
    fn matches_brute_force() {
        for seed in 0..40 {
            let (p, _) = random_problem(seed, 3, 3);
            if p.num_agents() * p.slots() > 12 {
                continue;
            }
            let (s, cost) = solve_exhaustive(&p).unwrap();
            let (bs, bcost) = brute_force(&p);
            assert!((cost - bcost).abs() <= 1e-12 * bcost.max(1.0), "seed {seed}");
            assert_eq!(s, bs, "seed {seed}");
        }
    }

    #[test]
    fn refuses_oversized_enumeration() {
        let agents = vec![scalar_agent(1.0, 1.0, 0.1, 1.0, 1.0, 30); 4];
        let p = AllocationProblem::new(agents, vec![Mat::zeros(1, 1); 4], 29, 1).unwrap();
        assert!(matches!(solve_exhaustive(&p), Err(ScheduleError::TooLarge { .. })));
    }

    #[test]
    fn column_enumeration_counts() {
        assert_eq!(feasible_columns(4, 1).len(), 5);
        assert_eq!(feasible_columns(4, 2).len(), 11);
        assert_eq!(feasible_columns(3, 3).len(), 8);
    }
}
