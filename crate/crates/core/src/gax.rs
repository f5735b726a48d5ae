//! Goals above expectation.

/// `sum(goals) - sum(xG)` over a set of shots. Empty input gives 0.
pub fn compute_gax<I>(shots: I) -> f64
where
    I: IntoIterator<Item = (f64, bool)>,
{
    shots
        .into_iter()
        .map(|(xg, goal)| goal as u8 as f64 - xg)
        .sum()
}

pub fn gax_from_totals(goals: usize, total_xg: f64) -> f64 {
    goals as f64 - total_xg
}
