use super::problem::Schedule;

/// Fixed rotation: slot `k` grants agents `(phase + k·γ + j) mod M` for
/// `j < γ`. With `γ ≥ M` everyone is served in every slot.
pub fn baseline_round_robin(agents: usize, capacity: usize, horizon: usize, phase: usize) -> Schedule {
    let slots = horizon + 1;
    let mut s = Schedule::zeros(agents, slots);
    for k in 0..slots {
        if capacity >= agents {
            (0..agents).for_each(|i| s.set(i, k, true));
            continue;
        }
        for j in 0..capacity {
            s.set((phase + k * capacity + j) % agents, k, true);
        }
    }
    s
}
