//! Independent reference implementations used as test oracles.

use std::collections::{BTreeMap, BTreeSet};

use drivesafe::domain::ContentId;
use drivesafe::mining::{AssociationRule, ContextTransaction, Item, Itemset};
use drivesafe::recommend::TransitionTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Eight-item universe: two values each of activity, arousal and valence,
/// plus two optional contents.
pub fn random_db(rng: &mut impl Rng, max_len: usize) -> Vec<ContextTransaction> {
    let n = rng.random_range(1..=max_len);
    (0..n as u64)
        .map(|period| {
            let mut items = vec![
                Item::Activity(if rng.random_bool(0.5) { 3 } else { 0 }),
                Item::Arousal(if rng.random_bool(0.5) { 7 } else { 4 }),
                Item::Valence(if rng.random_bool(0.5) { 2 } else { 6 }),
            ];
            match rng.random_range(0..3) {
                0 => items.push(Item::Content(ContentId(20))),
                1 => items.push(Item::Content(ContentId(5))),
                _ => {}
            }
            ContextTransaction::new(period, items).unwrap()
        })
        .collect()
}

/// Supports of every itemset over the database's universe, by enumerating
/// the full powerset.
pub fn brute_frequent(db: &[ContextTransaction], min_support: f64) -> BTreeMap<Itemset, f64> {
    let universe: Vec<Item> = db
        .iter()
        .flat_map(|t| t.items().iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut out = BTreeMap::new();
    for mask in 1u32..(1 << universe.len()) {
        let set: BTreeSet<Item> = (0..universe.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| universe[i])
            .collect();
        let count = db.iter().filter(|t| set.is_subset(t.items())).count();
        // compare counts, not ratios, to stay exact
        if count as f64 >= min_support * db.len() as f64 - 1e-9 {
            out.insert(Itemset::new(set), count as f64 / db.len() as f64);
        }
    }
    out
}

/// `context -> content` rules derived directly from transaction counts.
pub fn brute_rules(
    db: &[ContextTransaction],
    min_support: f64,
    min_confidence: f64,
) -> Vec<AssociationRule> {
    let frequent = brute_frequent(db, min_support);
    let mut rules = Vec::new();
    for (set, &support) in &frequent {
        let contents: Vec<&Item> = set.items().iter().filter(|i| i.is_content()).collect();
        if contents.len() != 1 || set.len() < 2 {
            continue;
        }
        let Item::Content(id) = *contents[0] else {
            unreachable!()
        };
        let ante: BTreeSet<Item> = set
            .items()
            .iter()
            .filter(|i| !i.is_content())
            .copied()
            .collect();
        let ante_count = db.iter().filter(|t| ante.is_subset(t.items())).count();
        let both = db.iter().filter(|t| set.is_subset_of(t.items())).count();
        if both as f64 >= min_confidence * ante_count as f64 - 1e-9 {
            rules.push(AssociationRule {
                antecedent: Itemset::new(ante),
                consequent: id,
                support,
                confidence: both as f64 / ante_count as f64,
            });
        }
    }
    rules.sort_by(|a, b| {
        a.antecedent
            .cmp(&b.antecedent)
            .then(a.consequent.cmp(&b.consequent))
    });
    rules
}

/// Random table over `states` x `contents` with dyadic entries, so path
/// products are exact in floating point and ties are frequent.
pub fn random_table(
    rng: &mut impl Rng,
    states: usize,
    contents: usize,
) -> (TransitionTable, Vec<Vec<Vec<f64>>>) {
    const LEVELS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
    let ids: Vec<ContentId> = (1..=contents as u32).map(ContentId).collect();
    let mut table = TransitionTable::new(states, ids.clone());
    let mut probs = vec![vec![vec![0.0; states]; contents]; states];
    for (s, row) in probs.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            for (t, p) in cell.iter_mut().enumerate() {
                *p = LEVELS[rng.random_range(0..LEVELS.len())];
                table.set(s, ids[c], t, *p);
            }
        }
    }
    (table, probs)
}

/// Best path by exact probability product, then fewer steps, then the
/// lexicographically smallest `(content, state)` sequence.
pub fn brute_plan(
    probs: &[Vec<Vec<f64>>],
    start: usize,
    accept: &dyn Fn(usize) -> bool,
    horizon: usize,
) -> Option<(Vec<(ContentId, usize)>, f64)> {
    if accept(start) {
        return Some((Vec::new(), 1.0));
    }
    let mut best: Option<(Vec<(ContentId, usize)>, f64)> = None;
    let mut stack = vec![(start, Vec::<(ContentId, usize)>::new(), 1.0f64)];
    while let Some((s, path, p)) = stack.pop() {
        if path.len() == horizon {
            continue;
        }
        for (c, row) in probs[s].iter().enumerate() {
            for (t, &q) in row.iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                let mut next = path.clone();
                next.push((ContentId(c as u32 + 1), t));
                let prod = p * q;
                if accept(t) {
                    let better = match &best {
                        None => true,
                        Some((bp, bprod)) => {
                            (
                                prod,
                                std::cmp::Reverse(next.len()),
                                std::cmp::Reverse(&next),
                            ) > (*bprod, std::cmp::Reverse(bp.len()), std::cmp::Reverse(bp))
                        }
                    };
                    if better {
                        best = Some((next.clone(), prod));
                    }
                }
                stack.push((t, next, prod));
            }
        }
    }
    best
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Single-sided amplitude at `freq_hz` of a signal whose length makes that
/// frequency fall on an FFT bin.
pub fn tone_amplitude(xs: &[f64], rate: f64, freq_hz: f64) -> f64 {
    let n = xs.len();
    let mut buf: Vec<Complex<f64>> = xs.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bin = (freq_hz * n as f64 / rate).round() as usize;
    let scale = if bin == 0 { 1.0 } else { 2.0 };
    scale * buf[bin].norm() / n as f64
}

pub fn sine(freq_hz: f64, amplitude: f64, rate: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| amplitude * (2.0 * std::f64::consts::PI * freq_hz * i as f64 / rate).sin())
        .collect()
}
