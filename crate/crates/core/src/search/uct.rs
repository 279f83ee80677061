use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::DecisionList;
use crate::error::{Error, Result};
use crate::search::greedy::greedy_complete;
use crate::search::state::{Action, SearchContext, SearchState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UctConfig {
    pub iterations: usize,
    pub c_explore: f64,
    pub seed: u64,
    pub l_max: usize,
    /// Fraction of subjects a new rule must newly cover.
    pub min_new_coverage: f64,
    /// Drop children whose bound cannot beat the incumbent.
    pub prune: bool,
    /// Complete rollouts greedily instead of uniformly at random.
    pub greedy_rollout: bool,
    /// Seed the incumbent with the greedy baseline before searching.
    pub warm_start: bool,
    /// Independent trees searched in parallel with seeds `seed + k`.
    pub parallel_roots: usize,
}

impl Default for UctConfig {
    fn default() -> Self {
        UctConfig {
            iterations: 10_000,
            c_explore: 1.414,
            seed: 0,
            l_max: 5,
            min_new_coverage: 0.01,
            prune: true,
            greedy_rollout: false,
            warm_start: true,
            parallel_roots: 1,
        }
    }
}

impl UctConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_explore >= 0.0 && self.c_explore.is_finite()) {
            return Err(Error::Config(format!("c_explore = {} must be ≥ 0", self.c_explore)));
        }
        if !(0.0..=1.0).contains(&self.min_new_coverage) {
            return Err(Error::Config(format!(
                "min_new_coverage = {} must lie in [0, 1]",
                self.min_new_coverage
            )));
        }
        if self.parallel_roots == 0 {
            return Err(Error::Config("parallel_roots must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// One line of the JSON-lines search log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub root: usize,
    pub iteration: usize,
    pub incumbent_objective: f64,
    pub tree_size: usize,
    pub pruned: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UctResult {
    pub best: SearchState,
    /// Objective of `best` as tracked by the search.
    pub objective: f64,
    pub iterations_run: usize,
    pub tree_size: usize,
    pub pruned: u64,
    /// The whole tree was resolved: the incumbent is provably optimal for
    /// the given action space.
    pub solved: bool,
    pub log: Vec<LogRecord>,
}

impl UctResult {
    pub fn decision_list(&self, ctx: &SearchContext<'_>) -> DecisionList {
        ctx.decision_list(&self.best, 0)
    }
}

struct Node {
    state: SearchState,
    children: Vec<usize>,
    visits: u64,
    total_reward: f64,
    best_reward: f64,
    bound: f64,
    /// Position in this node's action order; actions before it were tried.
    cursor: usize,
    action_count: usize,
    offset: usize,
    stride: usize,
    done: bool,
}

struct Tree<'c, 'a> {
    ctx: &'c SearchContext<'a>,
    config: &'c UctConfig,
    min_new: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    incumbent: SearchState,
    incumbent_value: f64,
    reward_min: f64,
    reward_max: f64,
    pruned: u64,
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl<'c, 'a> Tree<'c, 'a> {
    fn new(ctx: &'c SearchContext<'a>, config: &'c UctConfig, seed: u64) -> Self {
        let root = ctx.root();
        let (a, v) = ctx.best_default(&root);
        let mut tree = Tree {
            ctx,
            config,
            min_new: ctx.min_new_count(config.min_new_coverage),
            rng: ChaCha8Rng::seed_from_u64(seed),
            nodes: Vec::new(),
            incumbent: ctx.apply_default(&root, a),
            incumbent_value: v,
            reward_min: f64::INFINITY,
            reward_max: f64::NEG_INFINITY,
            pruned: 0,
        };
        if config.warm_start {
            let greedy = greedy_complete(ctx, root.clone(), config.l_max, tree.min_new);
            tree.offer(&greedy);
        }
        tree.push_node(root);
        tree
    }

    fn offer(&mut self, terminal: &SearchState) -> f64 {
        let v = self.ctx.objective(terminal);
        if v > self.incumbent_value {
            self.incumbent_value = v;
            self.incumbent = terminal.clone();
        }
        v
    }

    fn rule_slots(&self, state: &SearchState) -> usize {
        if state.is_terminal() || state.len() >= self.config.l_max {
            0
        } else {
            self.ctx.num_patterns() * self.ctx.num_treatments()
        }
    }

    fn push_node(&mut self, state: SearchState) -> usize {
        let m = self.ctx.num_treatments();
        let rules = self.rule_slots(&state);
        let action_count = if state.is_terminal() { 0 } else { m + rules };
        // rule actions are visited in a seeded affine order (offset + k·stride) mod rules
        let (offset, stride) = if rules > 1 {
            let offset = self.rng.random_range(0..rules);
            let mut stride = self.rng.random_range(1..rules);
            while gcd(stride, rules) != 1 {
                stride = self.rng.random_range(1..rules);
            }
            (offset, stride)
        } else {
            (0, 1)
        };
        let bound = self.ctx.bound(&state);
        let done = state.is_terminal();
        self.nodes.push(Node {
            state,
            children: Vec::new(),
            visits: 0,
            total_reward: 0.0,
            best_reward: f64::NEG_INFINITY,
            bound,
            cursor: 0,
            action_count,
            offset,
            stride,
            done,
        });
        self.nodes.len() - 1
    }

    /// Defaults come first, then rules in the node's permuted order.
    fn action_at(&self, node: usize, k: usize) -> Action {
        let n = &self.nodes[node];
        let m = self.ctx.num_treatments();
        if k < m {
            return Action::Default(k);
        }
        let slots = n.action_count - m;
        let r = (n.offset + (k - m) * n.stride) % slots;
        Action::Rule {
            pattern: r / m,
            treatment: r % m,
        }
    }

    fn prunable(&self, bound: f64) -> bool {
        self.config.prune && bound <= self.incumbent_value
    }

    /// Creates the next untried, legal and unpruned child of `node`.
    fn expand(&mut self, node: usize) -> Option<usize> {
        while self.nodes[node].cursor < self.nodes[node].action_count {
            let k = self.nodes[node].cursor;
            self.nodes[node].cursor += 1;
            let action = self.action_at(node, k);
            let parent = &self.nodes[node].state;
            let child = match action {
                Action::Default(a) => self.ctx.apply_default(parent, a),
                Action::Rule { pattern, treatment } => {
                    if !self.ctx.is_legal_rule(parent, pattern, self.min_new) {
                        continue;
                    }
                    let delta = self.ctx.rule_delta(parent, pattern);
                    self.ctx.apply_rule(parent, &delta, treatment)
                }
            };
            if self.prunable(self.ctx.bound(&child)) {
                self.pruned += 1;
                continue;
            }
            let id = self.push_node(child);
            self.nodes[node].children.push(id);
            return Some(id);
        }
        None
    }

    fn rollout(&mut self, node: usize) -> f64 {
        let mut state = self.nodes[node].state.clone();
        if !state.is_terminal() {
            state = if self.config.greedy_rollout {
                greedy_complete(self.ctx, state, self.config.l_max, self.min_new)
            } else {
                self.random_completion(state)
            };
        }
        let reward = self.offer(&state);
        self.reward_min = self.reward_min.min(reward);
        self.reward_max = self.reward_max.max(reward);
        reward
    }

    fn random_completion(&mut self, mut state: SearchState) -> SearchState {
        const TRIES: usize = 64;
        let m = self.ctx.num_treatments();
        loop {
            let slots = self.rule_slots(&state);
            let mut chosen = None;
            for _ in 0..TRIES {
                let k = self.rng.random_range(0..m + slots);
                if k < m {
                    chosen = Some(Action::Default(k));
                    break;
                }
                let (pattern, treatment) = ((k - m) / m, (k - m) % m);
                if self.ctx.is_legal_rule(&state, pattern, self.min_new) {
                    chosen = Some(Action::Rule { pattern, treatment });
                    break;
                }
            }
            let action = chosen.unwrap_or_else(|| Action::Default(self.rng.random_range(0..m)));
            state = self.ctx.apply(&state, action);
            if state.is_terminal() {
                return state;
            }
        }
    }

    fn ucb(&self, parent: &Node, child: &Node) -> f64 {
        let mean = child.total_reward / child.visits as f64;
        let span = self.reward_max - self.reward_min;
        let q = if span > 0.0 {
            (mean - self.reward_min) / span
        } else {
            0.5
        };
        q + self.config.c_explore * ((parent.visits as f64).ln() / child.visits as f64).sqrt()
    }

    /// One selection → expansion → rollout → backup pass. Returns false once
    /// the root is resolved.
    fn iterate(&mut self) -> bool {
        loop {
            if self.nodes[0].done {
                return false;
            }
            let mut path = vec![0];
            let mut node = 0;
            let leaf = loop {
                if let Some(child) = self.expand(node) {
                    path.push(child);
                    break Some(child);
                }
                let mut best: Option<(usize, f64)> = None;
                for &c in &self.nodes[node].children {
                    let child = &self.nodes[c];
                    if child.done {
                        continue;
                    }
                    if self.prunable(child.bound) {
                        continue;
                    }
                    let score = self.ucb(&self.nodes[node], child);
                    if best.is_none_or(|b| score > b.1) {
                        best = Some((c, score));
                    }
                }
                match best {
                    Some((c, _)) => {
                        node = c;
                        path.push(c);
                    }
                    None => {
                        // every child is resolved or pruned
                        self.prune_dead_children(node);
                        self.nodes[node].done = true;
                        break None;
                    }
                }
            };
            let Some(leaf) = leaf else {
                continue;
            };
            let reward = self.rollout(leaf);
            for &id in &path {
                let n = &mut self.nodes[id];
                n.visits += 1;
                n.total_reward += reward;
                n.best_reward = n.best_reward.max(reward);
            }
            return true;
        }
    }

    fn prune_dead_children(&mut self, node: usize) {
        let incumbent = self.incumbent_value;
        let prune = self.config.prune;
        let dead = self.nodes[node]
            .children
            .iter()
            .filter(|&&c| {
                let ch = &self.nodes[c];
                !ch.done && prune && ch.bound <= incumbent
            })
            .count();
        self.pruned += dead as u64;
    }

    fn run(mut self, root_index: usize) -> UctResult {
        let mut log = Vec::with_capacity(self.config.iterations);
        let mut iterations_run = 0;
        for it in 0..self.config.iterations {
            if !self.iterate() {
                break;
            }
            iterations_run = it + 1;
            log.push(LogRecord {
                root: root_index,
                iteration: it,
                incumbent_objective: self.incumbent_value,
                tree_size: self.nodes.len(),
                pruned: self.pruned,
            });
        }
        let solved = self.nodes[0].done;
        UctResult {
            objective: self.incumbent_value,
            best: self.incumbent,
            iterations_run,
            tree_size: self.nodes.len(),
            pruned: self.pruned,
            solved,
            log,
        }
    }
}

/// Monte-Carlo tree search over rule lists.
///
/// Children are chosen by UCB1 on rewards normalized with the running min and
/// max of observed objectives. Every child whose bound does not exceed the
/// incumbent is skipped, so a node whose children are all resolved is itself
/// resolved; once the root is resolved the search stops early.
pub fn uct_search(ctx: &SearchContext<'_>, config: &UctConfig) -> Result<UctResult> {
    config.validate()?;
    if config.parallel_roots == 1 {
        return Ok(Tree::new(ctx, config, config.seed).run(0));
    }
    let results: Vec<UctResult> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.parallel_roots)
            .map(|k| {
                scope.spawn(move || {
                    Tree::new(ctx, config, config.seed.wrapping_add(k as u64)).run(k)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("search thread panicked"))
            .collect()
    });
    let mut log = Vec::new();
    let mut winner: Option<UctResult> = None;
    let (mut iterations_run, mut tree_size, mut pruned, mut solved) = (0, 0, 0, false);
    for mut r in results {
        log.append(&mut r.log);
        iterations_run += r.iterations_run;
        tree_size += r.tree_size;
        pruned += r.pruned;
        solved |= r.solved;
        if winner.as_ref().is_none_or(|w| r.objective > w.objective) {
            winner = Some(r);
        }
    }
    let winner = winner.expect("at least one root");
    Ok(UctResult {
        log,
        iterations_run,
        tree_size,
        pruned,
        solved,
        ..winner
    })
}

#[cfg(test)]
pub(crate) fn node_bounds_admissible(ctx: &SearchContext<'_>, config: &UctConfig) -> Vec<(f64, f64)> {
    let mut tree = Tree::new(ctx, config, config.seed);
    for _ in 0..config.iterations {
        if !tree.iterate() {
            break;
        }
    }
    // (bound, best reward seen below) for every visited node
    tree.nodes
        .iter()
        .filter(|n| n.visits > 0)
        .map(|n| (n.bound, n.best_reward))
        .collect()
}
