use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::domain::{
    CharacteristicSpec, CostPolicy, Dataset, DecisionList, Op, Operand, Pattern, Predicate, Rule,
    Schema, Treatment,
};
use crate::estimation::DrScores;
use crate::mining::{mine_patterns, CandidateSet, MiningConfig};
use crate::objective::{objective_value, ObjectiveWeights};

struct Instance {
    ds: Dataset,
    scores: DrScores,
    cands: CandidateSet,
}

fn random_instance(seed: u64, max_patterns: usize, m: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = Schema::new(
        vec![
            CharacteristicSpec::binary("b0", ["n", "y"], f64::from(rng.random_range(0..5u8))),
            CharacteristicSpec::binary("b1", ["n", "y"], f64::from(rng.random_range(0..5u8))),
            CharacteristicSpec::categorical("c", &["lo", "mid", "hi"], f64::from(rng.random_range(0..7u8))),
            CharacteristicSpec::real("r", f64::from(rng.random_range(0..3u8))),
        ],
        (0..m)
            .map(|a| Treatment { name: format!("t{a}"), cost: f64::from(rng.random_range(0..16u8)) })
            .collect(),
        "t",
        "y",
    )
    .unwrap();
    let n = rng.random_range(30..90);
    let mut values = Vec::new();
    for _ in 0..n {
        values.push(f64::from(rng.random_range(0..2u8)));
        values.push(f64::from(rng.random_range(0..2u8)));
        values.push(f64::from(rng.random_range(0..3u8)));
        values.push(f64::from(rng.random_range(0..10u8)));
    }
    let treat: Vec<usize> = (0..n).map(|i| if i < m { i } else { rng.random_range(0..m) }).collect();
    let ds = Dataset::new(schema, values, treat, vec![0.0; n]).unwrap();
    let raw: Vec<f64> = (0..n * m).map(|_| rng.random_range(0.0..100.0)).collect();
    let scores = DrScores::from_raw(n, m, raw).unwrap();
    let mined = mine_patterns(
        &ds,
        &MiningConfig { min_support: 0.1, max_predicates: 2, num_bins: 3 },
    )
    .unwrap();
    let mut pool: Vec<Pattern> = mined.patterns.into_iter().map(|c| c.pattern).collect();
    let mut chosen = Vec::new();
    while chosen.len() < max_patterns && !pool.is_empty() {
        chosen.push(pool.swap_remove(rng.random_range(0..pool.len())));
    }
    let cands = CandidateSet::from_patterns(&ds, chosen);
    Instance { ds, scores, cands }
}

/// Enumerates every list (distinct patterns, any treatments, any default)
/// and scores each from scratch.
fn brute_force_best(inst: &Instance, w: &ObjectiveWeights, policy: CostPolicy, l_max: usize) -> f64 {
    fn rec(inst: &Instance, w: &ObjectiveWeights, policy: CostPolicy, l_max: usize, rules: &mut Vec<Rule>, used: &mut Vec<bool>, best: &mut f64) {
        let m = inst.ds.m();
        for a in 0..m {
            let dl = DecisionList::new(rules.clone(), a);
            *best = best.max(objective_value(&inst.scores, &inst.ds, &dl, w, policy));
        }
        if rules.len() == l_max {
            return;
        }
        for p in 0..inst.cands.len() {
            if used[p] {
                continue;
            }
            used[p] = true;
            for t in 0..m {
                rules.push(Rule { pattern: inst.cands.patterns[p].pattern.clone(), treatment: t });
                rec(inst, w, policy, l_max, rules, used, best);
                rules.pop();
            }
            used[p] = false;
        }
    }
    let mut best = f64::NEG_INFINITY;
    rec(inst, w, policy, l_max, &mut Vec::new(), &mut vec![false; inst.cands.len()], &mut best);
    best
}

fn ctx<'a>(inst: &'a Instance, w: ObjectiveWeights, policy: CostPolicy) -> SearchContext<'a> {
    SearchContext::new(&inst.ds, &inst.scores, &inst.cands, w, policy).unwrap()
}

const POLICIES: [CostPolicy; 2] = [CostPolicy::Literal, CostPolicy::ChargeDefaultFull];

#[test]
fn legal_action_counts() {
    let inst = random_instance(1, 3, 2);
    let c = ctx(&inst, ObjectiveWeights::default(), CostPolicy::Literal);
    let root = c.root();
    assert_eq!(c.legal_actions(&root, 3, 1).len(), 3 * 2 + 2);
    // at the length limit only defaults remain
    let full = c.apply(&root, Action::Rule { pattern: 0, treatment: 0 });
    assert_eq!(c.legal_actions(&full, 1, 1), vec![Action::Default(0), Action::Default(1)]);
    // pattern 0 now covers nothing new, so neither it nor its treatments are legal
    let acts = c.legal_actions(&full, 3, 1);
    assert!(!acts.iter().any(|a| matches!(a, Action::Rule { pattern: 0, .. })));
    assert!(c.legal_actions(&c.apply(&full, Action::Default(1)), 3, 1).is_empty());
}

#[test]
fn zero_remaining_coverage_is_excluded() {
    let inst = random_instance(2, 4, 2);
    // cover everything with a tautology built from both levels of b0
    let schema = inst.ds.schema();
    let yes = Pattern::new(vec![Predicate::new(schema, 0, Op::Eq, Operand::Level(1)).unwrap()]).unwrap();
    let no = Pattern::new(vec![Predicate::new(schema, 0, Op::Eq, Operand::Level(0)).unwrap()]).unwrap();
    let cands = CandidateSet::from_patterns(&inst.ds, vec![yes, no, inst.cands.patterns[0].pattern.clone()]);
    let c2 = SearchContext::new(&inst.ds, &inst.scores, &cands, ObjectiveWeights::default(), CostPolicy::Literal).unwrap();
    let mut s = c2.apply(&c2.root(), Action::Rule { pattern: 0, treatment: 0 });
    s = c2.apply(&s, Action::Rule { pattern: 1, treatment: 1 });
    assert_eq!(s.n_covered, inst.ds.n());
    assert_eq!(c2.legal_actions(&s, 5, 1).len(), 2);
}

#[test]
fn incremental_state_matches_recomputation() {
    for seed in 0..20 {
        let inst = random_instance(seed, 8, 2 + (seed as usize % 2));
        for policy in POLICIES {
            let c = ctx(&inst, ObjectiveWeights::new(1.0, 0.5, 2.0), policy).with_verification(true);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = c.root();
            while !s.is_terminal() {
                let acts = c.legal_actions(&s, 4, 1);
                s = c.apply(&s, acts[rng.random_range(0..acts.len())]);
            }
            let dl = c.decision_list(&s, 0);
            let direct = objective_value(&inst.scores, &inst.ds, &dl, &c.weights(), policy);
            assert!((c.objective(&s) - direct).abs() <= 1e-9, "seed {seed}");
        }
    }
}

#[test]
fn terminal_bound_is_exact() {
    let inst = random_instance(4, 5, 2);
    for policy in POLICIES {
        let c = ctx(&inst, ObjectiveWeights::default(), policy);
        let s = c.apply(&c.root(), Action::Rule { pattern: 1, treatment: 1 });
        let t = c.apply(&s, Action::Default(0));
        assert_eq!(c.bound(&t), c.objective(&t));
    }
}

#[test]
fn single_treatment_root_bound_is_the_only_policy() {
    let inst = random_instance(5, 5, 1);
    let c = ctx(&inst, ObjectiveWeights::new(1.3, 0.0, 0.7), CostPolicy::Literal);
    let n = inst.ds.n() as f64;
    let cost = inst.ds.schema().treatment_cost(0);
    let want = 1.3 * (0..inst.ds.n()).map(|i| inst.scores.get(i, 0)).sum::<f64>() / n - 0.7 * cost;
    assert!((c.bound(&c.root()) - want).abs() < 1e-9);
}

/// Best objective over every completion of `state`.
fn best_completion(c: &SearchContext<'_>, state: &SearchState, l_max: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for a in 0..c.num_treatments() {
        best = best.max(c.closed_objective(state, a));
    }
    if state.len() < l_max {
        for p in 0..c.num_patterns() {
            if state.uses_pattern(p) {
                continue;
            }
            for t in 0..c.num_treatments() {
                let child = c.apply(state, Action::Rule { pattern: p, treatment: t });
                best = best.max(best_completion(c, &child, l_max));
            }
        }
    }
    best
}

#[test]
fn bound_dominates_every_completion() {
    for seed in 0..15 {
        let inst = random_instance(100 + seed, 5, 2);
        for policy in POLICIES {
            let c = ctx(&inst, ObjectiveWeights::new(1.0, 2.0, 1.0), policy);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = c.root();
            for _ in 0..3 {
                let opt = best_completion(&c, &s, 3);
                assert!(c.bound(&s) >= opt - 1e-12, "seed {seed} {policy:?}: {} < {opt}", c.bound(&s));
                let acts: Vec<Action> = c
                    .legal_actions(&s, 3, 1)
                    .into_iter()
                    .filter(|a| matches!(a, Action::Rule { .. }))
                    .collect();
                if acts.is_empty() {
                    break;
                }
                s = c.apply(&s, acts[rng.random_range(0..acts.len())]);
            }
        }
    }
}

#[test]
fn exhaustive_matches_brute_force_with_and_without_pruning() {
    for seed in 0..12 {
        let inst = random_instance(200 + seed, 6, 2);
        for policy in POLICIES {
            let w = ObjectiveWeights::new(1.0, 1.0, 1.0);
            let c = ctx(&inst, w, policy);
            let oracle = brute_force_best(&inst, &w, policy, 2);
            let cfg = ExhaustiveConfig { l_max: 2, ..Default::default() };
            let pruned = exhaustive_search(&c, &cfg).unwrap();
            let plain = exhaustive_search(&c, &ExhaustiveConfig { prune: false, ..cfg }).unwrap();
            assert!((pruned.objective - oracle).abs() <= 1e-9);
            assert!((plain.objective - oracle).abs() <= 1e-9);
            let dl = c.decision_list(&pruned.best, 0);
            let direct = objective_value(&inst.scores, &inst.ds, &dl, &w, policy);
            assert!((direct - oracle).abs() <= 1e-9);
            assert!(plain.evaluated >= pruned.evaluated);
        }
    }
}

#[test]
fn exhaustive_without_patterns_picks_best_constant() {
    let inst = random_instance(7, 0, 3);
    let w = ObjectiveWeights::new(1.0, 1.0, 1.0);
    let c = ctx(&inst, w, CostPolicy::Literal);
    let r = exhaustive_search(&c, &ExhaustiveConfig::default()).unwrap();
    let n = inst.ds.n() as f64;
    let closed: Vec<f64> = (0..3)
        .map(|a| (0..inst.ds.n()).map(|i| inst.scores.get(i, a)).sum::<f64>() / n - inst.ds.schema().treatment_cost(a))
        .collect();
    let best = closed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!((r.objective - best).abs() < 1e-9);
    assert!(r.best.is_empty());
}

#[test]
fn cost_only_objective_prefers_empty_list() {
    let inst = random_instance(8, 6, 2);
    let c = ctx(&inst, ObjectiveWeights::new(0.0, 1.0, 0.0), CostPolicy::Literal);
    let r = exhaustive_search(&c, &ExhaustiveConfig::default()).unwrap();
    assert!(r.best.is_empty());
    assert_eq!(r.objective, 0.0);
}

#[test]
fn exhaustive_refuses_large_instances() {
    let inst = random_instance(9, 11, 2);
    if inst.cands.len() > 10 {
        let c = ctx(&inst, ObjectiveWeights::default(), CostPolicy::Literal);
        assert!(matches!(
            exhaustive_search(&c, &ExhaustiveConfig::default()),
            Err(crate::Error::TooLarge(_))
        ));
    }
    let inst = random_instance(9, 3, 2);
    let c = ctx(&inst, ObjectiveWeights::default(), CostPolicy::Literal);
    let cfg = ExhaustiveConfig { l_max: 4, ..Default::default() };
    assert!(exhaustive_search(&c, &cfg).is_err());
}

#[test]
fn greedy_never_beats_exhaustive() {
    for seed in 0..15 {
        let inst = random_instance(300 + seed, 6, 2);
        let c = ctx(&inst, ObjectiveWeights::default(), CostPolicy::Literal);
        let g = greedy_baseline(&c, 3);
        let e = exhaustive_search(&c, &ExhaustiveConfig::default()).unwrap();
        assert!(c.objective(&g) <= e.objective + 1e-12);
        assert_eq!(greedy_baseline(&c, 3), g);
    }
}

#[test]
fn greedy_is_optimal_with_one_informative_feature() {
    // treatment 1 helps exactly the subjects with b0 = y
    let inst = random_instance(10, 0, 2);
    let n = inst.ds.n();
    let raw: Vec<f64> = (0..n)
        .flat_map(|i| if inst.ds.value(i, 0) == 1.0 { [10.0, 90.0] } else { [80.0, 20.0] })
        .collect();
    let scores = DrScores::from_raw(n, 2, raw).unwrap();
    let schema = inst.ds.schema();
    let patterns: Vec<Pattern> = (0..2)
        .flat_map(|f| (0..2).map(move |l| (f, l)))
        .map(|(f, l)| Pattern::new(vec![Predicate::new(schema, f, Op::Eq, Operand::Level(l)).unwrap()]).unwrap())
        .collect();
    let cands = CandidateSet::from_patterns(&inst.ds, patterns);
    let c = SearchContext::new(&inst.ds, &scores, &cands, ObjectiveWeights::default(), CostPolicy::Literal).unwrap();
    let g = greedy_baseline(&c, 3);
    let e = exhaustive_search(&c, &ExhaustiveConfig::default()).unwrap();
    assert!((c.objective(&g) - e.objective).abs() < 1e-12);
    assert_eq!(g.len(), 1);
}

#[test]
fn uct_single_pattern_finds_best_of_all_lists() {
    let inst = random_instance(11, 1, 2);
    let w = ObjectiveWeights::default();
    let c = ctx(&inst, w, CostPolicy::Literal);
    let cfg = UctConfig { l_max: 1, min_new_coverage: 0.0, warm_start: false, iterations: 100, ..Default::default() };
    let r = uct_search(&c, &cfg).unwrap();
    let oracle = brute_force_best(&inst, &w, CostPolicy::Literal, 1);
    assert!((r.objective - oracle).abs() < 1e-9);
    assert!(r.solved);
}

#[test]
fn uct_matches_exhaustive_and_pruning_is_sound() {
    for seed in 0..10 {
        let inst = random_instance(400 + seed, 8, 2);
        for policy in POLICIES {
            let c = ctx(&inst, ObjectiveWeights::default(), policy);
            let e = exhaustive_search(&c, &ExhaustiveConfig::default()).unwrap();
            let base = UctConfig { l_max: 3, min_new_coverage: 0.0, warm_start: false, seed, ..Default::default() };
            let on = uct_search(&c, &base).unwrap();
            let off = uct_search(&c, &UctConfig { prune: false, ..base.clone() }).unwrap();
            assert!((on.objective - e.objective).abs() <= 1e-9, "seed {seed} {policy:?}");
            assert!((off.objective - e.objective).abs() <= 1e-9, "seed {seed} {policy:?} (no pruning)");
        }
    }
}

#[test]
fn uct_is_reproducible_and_anytime_monotone() {
    let inst = random_instance(12, 8, 3);
    let c = ctx(&inst, ObjectiveWeights::default(), CostPolicy::Literal);
    let cfg = UctConfig { l_max: 3, iterations: 500, seed: 42, warm_start: false, ..Default::default() };
    let a = uct_search(&c, &cfg).unwrap();
    let b = uct_search(&c, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.log.windows(2).all(|w| w[1].incumbent_objective >= w[0].incumbent_objective));
    assert!(a.log.iter().enumerate().all(|(k, r)| r.iteration == k));
}

#[test]
fn uct_node_bounds_are_admissible() {
    for seed in 0..5 {
        let inst = random_instance(500 + seed, 8, 2);
        for policy in POLICIES {
            let c = ctx(&inst, ObjectiveWeights::new(1.0, 3.0, 1.0), policy);
            let cfg = UctConfig { l_max: 3, iterations: 2000, seed, warm_start: false, ..Default::default() };
            for (bound, best) in uct::node_bounds_admissible(&c, &cfg) {
                assert!(bound >= best - 1e-12);
            }
        }
    }
}

#[test]
fn greedy_rollouts_and_parallel_roots() {
    let inst = random_instance(13, 8, 2);
    let c = ctx(&inst, ObjectiveWeights::default(), CostPolicy::Literal);
    let e = exhaustive_search(&c, &ExhaustiveConfig::default()).unwrap();
    let cfg = UctConfig { l_max: 3, min_new_coverage: 0.0, greedy_rollout: true, parallel_roots: 3, ..Default::default() };
    let r = uct_search(&c, &cfg).unwrap();
    assert!((r.objective - e.objective).abs() <= 1e-9);
    assert_eq!(r, uct_search(&c, &cfg).unwrap());
    let roots: std::collections::BTreeSet<usize> = r.log.iter().map(|l| l.root).collect();
    assert_eq!(roots.len(), 3);
}

#[test]
fn no_candidates_returns_best_constant() {
    let inst = random_instance(14, 0, 2);
    let c = ctx(&inst, ObjectiveWeights::default(), CostPolicy::Literal);
    let r = uct_search(&c, &UctConfig::default()).unwrap();
    let (_, v) = c.best_default(&c.root());
    assert!(r.best.is_empty());
    assert_eq!(r.objective, v);
}
