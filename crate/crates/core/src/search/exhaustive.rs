use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::state::{SearchContext, SearchState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExhaustiveConfig {
    pub l_max: usize,
    /// Skip subtrees whose bound cannot beat the incumbent and rules that
    /// cover no new subject.
    pub prune: bool,
    pub max_patterns: usize,
    pub max_l: usize,
}

impl Default for ExhaustiveConfig {
    fn default() -> Self {
        ExhaustiveConfig {
            l_max: 3,
            prune: true,
            max_patterns: 10,
            max_l: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExhaustiveResult {
    pub best: SearchState,
    pub objective: f64,
    /// Complete lists whose objective was evaluated.
    pub evaluated: u64,
    /// Subtrees cut by the bound or the coverage check.
    pub pruned: u64,
}

/// Exact maximizer over all ordered rule sequences of length ≤ `l_max` with
/// every default. Ties keep the first list in enumeration order: shorter
/// prefixes before their extensions, patterns and treatments ascending.
pub fn exhaustive_search(ctx: &SearchContext<'_>, config: &ExhaustiveConfig) -> Result<ExhaustiveResult> {
    if ctx.num_patterns() > config.max_patterns || config.l_max > config.max_l {
        return Err(Error::TooLarge(format!(
            "exhaustive search limited to {} patterns and length {}; got {} patterns and length {}",
            config.max_patterns,
            config.max_l,
            ctx.num_patterns(),
            config.l_max
        )));
    }
    let root = ctx.root();
    let mut result = ExhaustiveResult {
        best: ctx.apply_default(&root, 0),
        objective: f64::NEG_INFINITY,
        evaluated: 0,
        pruned: 0,
    };
    visit(ctx, config, &root, &mut result);
    Ok(result)
}

fn visit(ctx: &SearchContext<'_>, config: &ExhaustiveConfig, state: &SearchState, out: &mut ExhaustiveResult) {
    for a in 0..ctx.num_treatments() {
        out.evaluated += 1;
        let v = ctx.closed_objective(state, a);
        if v > out.objective {
            out.objective = v;
            out.best = ctx.apply_default(state, a);
        }
    }
    if state.len() >= config.l_max {
        return;
    }
    for p in 0..ctx.num_patterns() {
        if state.uses_pattern(p) {
            continue;
        }
        let delta = ctx.rule_delta(state, p);
        if config.prune && delta.new_count == 0 {
            out.pruned += 1;
            continue;
        }
        for t in 0..ctx.num_treatments() {
            let child = ctx.apply_rule(state, &delta, t);
            if config.prune && ctx.bound(&child) <= out.objective {
                out.pruned += 1;
                continue;
            }
            visit(ctx, config, &child, out);
        }
    }
}
