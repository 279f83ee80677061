//! Candidate pattern universe: frequent conjunctions of atomic predicates,
//! enumerated level by level with the anti-monotone support bound.

use std::collections::{BTreeMap, HashSet};

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::domain::{pattern_from_wire, pattern_to_wire, Dataset, Kind, Op, Operand, Pattern, Predicate, PredicateWire, Schema};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningConfig {
    /// Minimum fraction of rows a pattern must cover.
    pub min_support: f64,
    pub max_predicates: usize,
    pub num_bins: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            min_support: 0.05,
            max_predicates: 4,
            num_bins: 4,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_support) {
            return Err(Error::Config(format!(
                "min_support = {} must lie in [0, 1]",
                self.min_support
            )));
        }
        if self.max_predicates == 0 {
            return Err(Error::Config("max_predicates must be ≥ 1".into()));
        }
        if self.num_bins < 2 {
            return Err(Error::Config("num_bins must be ≥ 2".into()));
        }
        Ok(())
    }

    /// Smallest admissible coverage count on `n` rows; never below one row.
    pub fn min_count(&self, n: usize) -> usize {
        // tolerance absorbs products like 0.3 * 10 = 3.0000000000000004
        ((self.min_support * n as f64 - 1e-9).ceil().max(1.0)) as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub pattern: Pattern,
    pub coverage: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub patterns: Vec<Candidate>,
    /// Thresholds per feature; empty for non-real features.
    pub thresholds: Vec<Vec<f64>>,
}

/// Linear-interpolation quantile cut points at `k / num_bins`, deduplicated
/// and kept strictly inside the observed range.
pub fn quantile_thresholds(values: &[f64], num_bins: usize) -> Vec<f64> {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (Some(&lo), Some(&hi)) = (v.first(), v.last()) else {
        return Vec::new();
    };
    let mut out: Vec<f64> = Vec::new();
    for k in 1..num_bins {
        let pos = k as f64 / num_bins as f64 * (v.len() - 1) as f64;
        let base = pos.floor() as usize;
        let frac = pos - base as f64;
        let t = if base + 1 < v.len() {
            v[base] + frac * (v[base + 1] - v[base])
        } else {
            v[base]
        };
        if t > lo && t < hi && out.last() != Some(&t) {
            out.push(t);
        }
    }
    out
}

pub fn discretize(ds: &Dataset, num_bins: usize) -> Vec<Vec<f64>> {
    ds.schema()
        .characteristics
        .iter()
        .enumerate()
        .map(|(f, spec)| match spec.kind {
            Kind::Real => quantile_thresholds(&ds.column(f).collect::<Vec<_>>(), num_bins),
            Kind::Binary | Kind::Categorical => Vec::new(),
        })
        .collect()
}

/// Atomic predicates in canonical order: by feature, then level or
/// threshold, with `>=` before `<` for each threshold.
pub fn atomic_predicates(schema: &Schema, thresholds: &[Vec<f64>]) -> Vec<Predicate> {
    let mut atoms = Vec::new();
    for (f, spec) in schema.characteristics.iter().enumerate() {
        match spec.kind {
            Kind::Real => {
                for &t in &thresholds[f] {
                    for op in [Op::Ge, Op::Lt] {
                        atoms.push(Predicate {
                            feature: f,
                            op,
                            operand: Operand::Number(t),
                        });
                    }
                }
            }
            Kind::Binary | Kind::Categorical => {
                for l in 0..spec.levels.len() {
                    atoms.push(Predicate {
                        feature: f,
                        op: Op::Eq,
                        operand: Operand::Level(l),
                    });
                }
            }
        }
    }
    atoms
}

pub fn coverage_bits(ds: &Dataset, pattern: &Pattern) -> FixedBitSet {
    let mut bits = FixedBitSet::with_capacity(ds.n());
    for i in 0..ds.n() {
        if pattern.matches(ds.row(i)) {
            bits.insert(i);
        }
    }
    bits
}

pub fn mine_patterns(ds: &Dataset, config: &MiningConfig) -> Result<CandidateSet> {
    config.validate()?;
    let thresholds = discretize(ds, config.num_bins);
    let atoms = atomic_predicates(ds.schema(), &thresholds);
    let min_count = config.min_count(ds.n());

    let atom_bits: Vec<FixedBitSet> = atoms
        .iter()
        .map(|a| {
            let mut bits = FixedBitSet::with_capacity(ds.n());
            for i in 0..ds.n() {
                if a.holds(ds.value(i, a.feature)) {
                    bits.insert(i);
                }
            }
            bits
        })
        .collect();

    // each level holds (sorted atom ids, cover), in lexicographic order
    let mut level: Vec<(Vec<usize>, FixedBitSet)> = atom_bits
        .iter()
        .enumerate()
        .filter(|(_, b)| b.count_ones(..) >= min_count)
        .map(|(k, b)| (vec![k], b.clone()))
        .collect();
    let mut found: Vec<(Vec<usize>, usize)> = Vec::new();

    for size in 1..=config.max_predicates {
        found.extend(level.iter().map(|(ids, b)| (ids.clone(), b.count_ones(..))));
        if size == config.max_predicates || level.is_empty() {
            break;
        }
        let frequent: HashSet<&[usize]> = level.iter().map(|(ids, _)| ids.as_slice()).collect();
        let mut next = Vec::new();
        for (x, (ids_a, bits_a)) in level.iter().enumerate() {
            let prefix = &ids_a[..size - 1];
            let last_a = ids_a[size - 1];
            for (ids_b, _) in level[x + 1..].iter() {
                if &ids_b[..size - 1] != prefix {
                    break;
                }
                let last_b = ids_b[size - 1];
                if atoms[last_b].feature == atoms[last_a].feature {
                    continue;
                }
                let mut ids = ids_a.clone();
                ids.push(last_b);
                let all_subsets_frequent = (0..ids.len() - 2).all(|drop| {
                    let sub: Vec<usize> = ids
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != drop)
                        .map(|(_, &id)| id)
                        .collect();
                    frequent.contains(sub.as_slice())
                });
                if !all_subsets_frequent {
                    continue;
                }
                let mut bits = bits_a.clone();
                bits.intersect_with(&atom_bits[last_b]);
                if bits.count_ones(..) >= min_count {
                    next.push((ids, bits));
                }
            }
        }
        level = next;
    }

    if found.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let patterns = found
        .into_iter()
        .map(|(ids, coverage)| Candidate {
            pattern: Pattern::new(ids.iter().map(|&k| atoms[k]).collect())
                .expect("atoms within a pattern are distinct"),
            coverage,
        })
        .collect();
    Ok(CandidateSet {
        patterns,
        thresholds,
    })
}

#[derive(Serialize, Deserialize)]
struct CandidateWire {
    pattern: Vec<PredicateWire>,
    coverage: usize,
}

#[derive(Serialize, Deserialize)]
struct CandidateSetWire {
    thresholds: BTreeMap<String, Vec<f64>>,
    patterns: Vec<CandidateWire>,
}

impl CandidateSet {
    /// Wraps explicit patterns, computing their coverage on `ds`.
    pub fn from_patterns(ds: &Dataset, patterns: Vec<Pattern>) -> Self {
        let patterns = patterns
            .into_iter()
            .map(|pattern| {
                let coverage = coverage_bits(ds, &pattern).count_ones(..);
                Candidate { pattern, coverage }
            })
            .collect();
        CandidateSet {
            patterns,
            thresholds: vec![Vec::new(); ds.p()],
        }
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn to_json(&self, schema: &Schema) -> Result<String> {
        let wire = CandidateSetWire {
            thresholds: schema
                .characteristics
                .iter()
                .zip(&self.thresholds)
                .filter(|(s, _)| s.kind == Kind::Real)
                .map(|(s, t)| (s.name.clone(), t.clone()))
                .collect(),
            patterns: self
                .patterns
                .iter()
                .map(|c| CandidateWire {
                    pattern: pattern_to_wire(&c.pattern, schema),
                    coverage: c.coverage,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&wire)?)
    }

    pub fn from_json(s: &str, schema: &Schema) -> Result<Self> {
        let wire: CandidateSetWire = serde_json::from_str(s)?;
        let mut thresholds = vec![Vec::new(); schema.p()];
        for (name, t) in wire.thresholds {
            let f = schema.feature_index(&name).ok_or_else(|| {
                Error::validation("candidates", format!("unknown characteristic `{name}`"))
            })?;
            thresholds[f] = t;
        }
        let patterns = wire
            .patterns
            .iter()
            .map(|c| {
                Ok(Candidate {
                    pattern: pattern_from_wire(&c.pattern, schema)?,
                    coverage: c.coverage,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CandidateSet {
            patterns,
            thresholds,
        })
    }
}
