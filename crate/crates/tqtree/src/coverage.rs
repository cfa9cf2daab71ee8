//! Maximum k-coverage over facilities: pick k facilities whose joint
//! service value is largest.
//!
//! Joint service is a per-user union of credits, and under binary scoring a
//! facility can complete an endpoint pair another facility started, so the
//! objective is not submodular; greedy selection carries no approximation
//! guarantee here. The exact solver enumerates combinations under a budget,
//! the greedy solver picks the best marginal gain per round, and the
//! two-step solver first shortlists candidates by individual score.
//!
//! All solvers work on precomputed per-facility ledgers, so they behave
//! identically no matter which engine produced the ledgers.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::query::Engine;
use crate::service::{ServiceLedger, ServiceMode, ServiceParams};
use crate::traj::{FacilityId, FacilityTrajectory, UserTrajectory};

pub const DEFAULT_EXACT_BUDGET: u64 = 1_000_000;

/// Shortlist size of the two-step solver.
pub fn default_k_prime(k: usize) -> usize {
    4 * k.max(1)
}

/// Anything that can produce one facility's full credit ledger. Coverage
/// unions ledgers across facilities, so the ledger must keep partial
/// endpoint credits the facility cannot complete alone.
pub trait ServiceSource: Sync {
    fn facility_ledger(&self, f: &FacilityTrajectory) -> ServiceLedger;
    fn users(&self) -> &[UserTrajectory];
    fn mode(&self) -> ServiceMode;
}

impl ServiceSource for Engine<'_> {
    fn facility_ledger(&self, f: &FacilityTrajectory) -> ServiceLedger {
        self.facility_credits(f)
    }
    fn users(&self) -> &[UserTrajectory] {
        self.users
    }
    fn mode(&self) -> ServiceMode {
        self.params.mode
    }
}

/// Index-free source backed by linear scans.
pub struct ScanSource<'a> {
    pub users: &'a [UserTrajectory],
    pub params: ServiceParams,
}

impl ServiceSource for ScanSource<'_> {
    fn facility_ledger(&self, f: &FacilityTrajectory) -> ServiceLedger {
        crate::baseline::scan_ledger(self.users, f, &self.params)
    }
    fn users(&self) -> &[UserTrajectory] {
        self.users
    }
    fn mode(&self) -> ServiceMode {
        self.params.mode
    }
}

#[derive(Debug, Clone)]
pub struct CoverageSolution {
    /// Chosen facility ids, ascending.
    pub facilities: Vec<FacilityId>,
    pub score: f64,
    pub ledger: ServiceLedger,
}

/// Per-facility ledgers, sorted by facility id. Input order is irrelevant
/// from here on, which keeps every solver deterministic.
struct Prepared {
    ids: Vec<FacilityId>,
    ledgers: Vec<ServiceLedger>,
}

fn prepare<S: ServiceSource>(source: &S, facilities: &[FacilityTrajectory]) -> Result<Prepared> {
    let mut seen = std::collections::BTreeSet::new();
    for f in facilities {
        if !seen.insert(f.id) {
            return Err(Error::DuplicateFacilityId(f.id));
        }
    }
    let mut order: Vec<&FacilityTrajectory> = facilities.iter().collect();
    order.sort_by_key(|f| f.id);
    let ledgers: Vec<ServiceLedger> = order
        .par_iter()
        .map(|f| source.facility_ledger(f))
        .collect();
    Ok(Prepared {
        ids: order.iter().map(|f| f.id).collect(),
        ledgers,
    })
}

fn solution(p: &Prepared, chosen: &[usize], users: &[UserTrajectory], mode: ServiceMode) -> CoverageSolution {
    let mut ledger = ServiceLedger::new();
    let mut facilities: Vec<FacilityId> = Vec::with_capacity(chosen.len());
    for &i in chosen {
        ledger.merge(&p.ledgers[i]);
        facilities.push(p.ids[i]);
    }
    facilities.sort_unstable();
    CoverageSolution {
        facilities,
        score: ledger.total(users, mode),
        ledger,
    }
}

/// Number of k-combinations, saturating.
fn combination_count(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if c > u128::MAX / 2 {
            return u128::MAX;
        }
    }
    c
}

/// Exhaustive optimum. Refuses instances whose combination count exceeds
/// `budget`; equal scores resolve to the lexicographically smallest id set.
pub fn exact_maxkcov<S: ServiceSource>(
    source: &S,
    facilities: &[FacilityTrajectory],
    k: usize,
    budget: u64,
) -> Result<CoverageSolution> {
    if k == 0 || facilities.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let k = k.min(facilities.len());
    let combos = combination_count(facilities.len(), k);
    if combos > u128::from(budget) {
        return Err(Error::CombinationBudget {
            combinations: combos,
            budget,
        });
    }
    let p = prepare(source, facilities)?;
    let users = source.users();
    let mode = source.mode();

    // Lexicographic combination walk over indices; ids ascend with index,
    // so the first combination reaching the best score is the smallest set.
    let n = p.ids.len();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    'outer: loop {
        let mut merged = ServiceLedger::new();
        for &i in &idx {
            merged.merge(&p.ledgers[i]);
        }
        let score = merged.total(users, mode);
        if best.as_ref().map_or(true, |(b, _)| score > *b) {
            best = Some((score, idx.clone()));
        }
        // Rightmost position that can still advance; none means done.
        let mut j = k;
        loop {
            if j == 0 {
                break 'outer;
            }
            j -= 1;
            if idx[j] < j + n - k {
                break;
            }
        }
        idx[j] += 1;
        for l in j + 1..k {
            idx[l] = idx[l - 1] + 1;
        }
    }
    let (_, chosen) = best.expect("at least one combination");
    Ok(solution(&p, &chosen, users, mode))
}

/// Greedy: k rounds, each adding the facility with the largest marginal
/// gain (ties to the smaller id). Gains can grow as the set grows, so this
/// is a heuristic, not an approximation.
pub fn greedy_maxkcov<S: ServiceSource>(
    source: &S,
    facilities: &[FacilityTrajectory],
    k: usize,
) -> Result<CoverageSolution> {
    let p = prepare(source, facilities)?;
    greedy_over(&p, source.users(), source.mode(), k)
}

fn greedy_over(
    p: &Prepared,
    users: &[UserTrajectory],
    mode: ServiceMode,
    k: usize,
) -> Result<CoverageSolution> {
    if k == 0 || p.ids.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let k = k.min(p.ids.len());
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut taken = vec![false; p.ids.len()];
    let mut merged = ServiceLedger::new();
    let mut base = 0.0;
    for _ in 0..k {
        let mut best: Option<(f64, usize)> = None;
        for (i, is_taken) in taken.iter().enumerate() {
            if *is_taken {
                continue;
            }
            let mut trial = merged.clone();
            trial.merge(&p.ledgers[i]);
            let gain = trial.total(users, mode) - base;
            // Strict improvement keeps the smallest id on ties.
            if best.map_or(true, |(g, _)| gain > g) {
                best = Some((gain, i));
            }
        }
        let (_, pick) = best.expect("unchosen facility remains");
        taken[pick] = true;
        chosen.push(pick);
        merged.merge(&p.ledgers[pick]);
        base = merged.total(users, mode);
    }
    Ok(solution(p, &chosen, users, mode))
}

/// Two-step heuristic: shortlist the `k_prime` individually best facilities
/// (score descending, id ascending), then run greedy inside the shortlist.
pub fn two_step_greedy<S: ServiceSource>(
    source: &S,
    facilities: &[FacilityTrajectory],
    k: usize,
    k_prime: usize,
) -> Result<CoverageSolution> {
    if k == 0 || facilities.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let p = prepare(source, facilities)?;
    let users = source.users();
    let mode = source.mode();
    let k_prime = k_prime.max(k).min(p.ids.len());
    let mut by_single: Vec<(f64, usize)> = p
        .ledgers
        .iter()
        .enumerate()
        .map(|(i, l)| (l.total(users, mode), i))
        .collect();
    by_single.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| p.ids[a.1].cmp(&p.ids[b.1])));
    let mut keep: Vec<usize> = by_single.iter().take(k_prime).map(|(_, i)| *i).collect();
    keep.sort_unstable(); // back to id order for the inner greedy
    let shortlist = Prepared {
        ids: keep.iter().map(|&i| p.ids[i]).collect(),
        ledgers: keep.iter().map(|&i| p.ledgers[i].clone()).collect(),
    };
    greedy_over(&shortlist, users, mode, k)
}
