use crate::search::state::{RuleDelta, SearchContext, SearchState};

/// Appends, one at a time, the rule whose list (closed with its best default)
/// has the highest objective; stops when no rule improves on the current
/// list or `l_max` is reached. Returns a terminal state.
pub fn greedy_baseline(ctx: &SearchContext<'_>, l_max: usize) -> SearchState {
    greedy_complete(ctx, ctx.root(), l_max, 1)
}

/// Greedy completion of an arbitrary non-terminal state.
pub fn greedy_complete(
    ctx: &SearchContext<'_>,
    mut state: SearchState,
    l_max: usize,
    min_new_count: usize,
) -> SearchState {
    let (mut default, mut current) = ctx.best_default(&state);
    while state.len() < l_max {
        let mut best: Option<(RuleDelta, usize, usize, f64)> = None;
        for p in 0..ctx.num_patterns() {
            if !ctx.is_legal_rule(&state, p, min_new_count) {
                continue;
            }
            let delta = ctx.rule_delta(&state, p);
            for t in 0..ctx.num_treatments() {
                let (a, v) = ctx.best_default_after(&state, &delta, t);
                if best.as_ref().is_none_or(|b| v > b.3) {
                    best = Some((delta.clone(), t, a, v));
                }
            }
        }
        match best {
            Some((delta, t, a, v)) if v > current => {
                state = ctx.apply_rule(&state, &delta, t);
                default = a;
                current = v;
            }
            _ => break,
        }
    }
    ctx.apply_default(&state, default)
}
