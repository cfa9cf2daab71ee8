//! Facility service evaluation and top-k reverse range search.
//!
//! [`Engine::facility_service`] scores one facility by walking the tree with
//! its stop components and crediting served points into a [`ServiceLedger`].
//! [`top_k_facilities`] ranks many facilities; the best-first strategy keeps
//! one exploration state per facility in a max-heap keyed by a published
//! upper bound on the facility's final score, and relaxes only the most
//! promising state until k states are exact. Published bounds never increase
//! during relaxation, so a state whose frontier is exhausted and still tops
//! the heap is a confirmed result.

use std::collections::BinaryHeap;
use std::collections::BTreeSet;

// Temporary instrumentation for the profiling probe; removed before release.
#[doc(hidden)]
pub mod walk_stats {
    use std::sync::atomic::{AtomicU64, Ordering};
    pub static Z_NANOS: AtomicU64 = AtomicU64::new(0);
    pub static Z_CALLS: AtomicU64 = AtomicU64::new(0);
    pub static CELLS: AtomicU64 = AtomicU64::new(0);
    pub static CAND: AtomicU64 = AtomicU64::new(0);
    pub static KEPT: AtomicU64 = AtomicU64::new(0);
    pub static CRED_NANOS: AtomicU64 = AtomicU64::new(0);
    pub static SPLIT_NANOS: AtomicU64 = AtomicU64::new(0);
    pub static EVAL_CALLS: AtomicU64 = AtomicU64::new(0);
    pub fn reset() {
        for c in [
            &Z_NANOS, &Z_CALLS, &CELLS, &CAND, &KEPT, &CRED_NANOS, &SPLIT_NANOS, &EVAL_CALLS,
        ] {
            c.store(0, Ordering::Relaxed);
        }
    }
    pub fn dump() -> String {
        format!(
            "evals {} | z: {} calls {:.1}ms, {} cells, {} cand, {} kept | credit {:.1}ms | split {:.1}ms",
            EVAL_CALLS.load(Ordering::Relaxed),
            Z_CALLS.load(Ordering::Relaxed),
            Z_NANOS.load(Ordering::Relaxed) as f64 / 1e6,
            CELLS.load(Ordering::Relaxed),
            CAND.load(Ordering::Relaxed),
            KEPT.load(Ordering::Relaxed),
            CRED_NANOS.load(Ordering::Relaxed) as f64 / 1e6,
            SPLIT_NANOS.load(Ordering::Relaxed) as f64 / 1e6,
        )
    }
}
use std::sync::atomic::Ordering as AtOrd;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::Rect;
use crate::service::{ServiceLedger, ServiceMode, ServiceParams};
use crate::traj::{
    embr, intersecting_components, point_served_x_sorted, rect_reached_x_sorted, ComponentId,
    FacilityComponent, FacilityId, FacilityTrajectory, UserTrajectory,
};
use crate::tree::{QNode, TQTree, TrajEntry};

/// What the credits of an evaluation feed into.
///
/// A lone facility's binary score changes only when it completes an
/// endpoint pair by itself, so the pre-filter may drop an entry carrying
/// both endpoints as soon as either endpoint cell is beyond reach. Credits
/// that feed a group union must keep partial endpoints instead: another
/// group member may complete the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CreditScope {
    Single,
    Group,
}

/// Shared context for query evaluation: the index, the user table it was
/// built from (sorted by id), and the service parameters.
pub struct Engine<'a> {
    pub tree: &'a TQTree,
    pub users: &'a [UserTrajectory],
    pub params: ServiceParams,
}

impl<'a> Engine<'a> {
    /// The user table must be sorted by id and contain exactly the indexed
    /// trajectories; the requested service mode must match the mode the
    /// index bounds were computed for.
    pub fn new(tree: &'a TQTree, users: &'a [UserTrajectory], params: ServiceParams) -> Result<Self> {
        if params.mode != tree.config.mode {
            return Err(Error::ModeMismatch {
                query: params.mode,
                index: tree.config.mode,
            });
        }
        for w in users.windows(2) {
            if w[0].id >= w[1].id {
                return Err(Error::DuplicateId(w[1].id));
            }
        }
        if users.len() != tree.ids().count() || users.iter().any(|u| !tree.contains_id(u.id)) {
            return Err(Error::Dataset(
                "user table does not match the indexed trajectories".into(),
            ));
        }
        Ok(Engine { tree, users, params })
    }

    fn psi(&self) -> f64 {
        self.params.psi
    }

    fn mode(&self) -> ServiceMode {
        self.params.mode
    }

    /// Exact service of one facility: full tree walk, canonical score.
    pub fn facility_service(&self, f: &FacilityTrajectory) -> (f64, ServiceLedger) {
        let ledger = self.walk(f, CreditScope::Single);
        (ledger.total(self.users, self.mode()), ledger)
    }

    /// Credits of one facility destined for a group union: partial endpoint
    /// credits the facility cannot complete alone are retained, because a
    /// union with another facility's credits may complete them.
    pub fn facility_credits(&self, f: &FacilityTrajectory) -> ServiceLedger {
        self.walk(f, CreditScope::Group)
    }

    fn walk(&self, f: &FacilityTrajectory, scope: CreditScope) -> ServiceLedger {
        let mut ledger = ServiceLedger::new();
        let mut next_id: ComponentId = 0;
        let root_comp =
            FacilityComponent::root(f, self.tree.root.cell, self.psi(), &mut next_id);
        self.eval_rec(&self.tree.root, &root_comp, scope, &mut next_id, &mut ledger);
        ledger
    }

    fn eval_rec(
        &self,
        node: &QNode,
        comp: &FacilityComponent,
        scope: CreditScope,
        next_id: &mut ComponentId,
        ledger: &mut ServiceLedger,
    ) {
        if comp.is_empty() {
            return;
        }
        self.eval_node_list(node, &comp.stops, scope, ledger);
        if let Some(children) = &node.children {
            let cells = [
                children[0].cell,
                children[1].cell,
                children[2].cell,
                children[3].cell,
            ];
            let ts = std::time::Instant::now();
            let split = intersecting_components(&cells, comp, self.psi(), next_id);
            walk_stats::SPLIT_NANOS.fetch_add(ts.elapsed().as_nanos() as u64, AtOrd::Relaxed);
            for (child, sub) in children.iter().zip(split) {
                if let Some(sub) = sub {
                    self.eval_rec(child, &sub, scope, next_id, ledger);
                }
            }
        }
    }

    /// Evaluates the trajectory list held directly at `node` against `stops`
    /// and credits served indices. Credits are sets, so re-encountering a
    /// trajectory in another node or component never double counts. Returns
    /// whether any new credit landed.
    fn eval_node_list(
        &self,
        node: &QNode,
        stops: &[crate::geom::Point],
        scope: CreditScope,
        ledger: &mut ServiceLedger,
    ) -> bool {
        if node.entries.is_empty() || stops.is_empty() {
            return false;
        }
        walk_stats::EVAL_CALLS.fetch_add(1, AtOrd::Relaxed);
        let t0 = std::time::Instant::now();
        let reduced = self.z_reduce(node, stops, scope);
        walk_stats::Z_NANOS.fetch_add(t0.elapsed().as_nanos() as u64, AtOrd::Relaxed);
        let t1 = std::time::Instant::now();
        let mut changed = false;
        match reduced {
            None => {
                for entry in &node.entries {
                    changed |= self.credit_entry(entry, stops, ledger);
                }
            }
            Some(keep) => {
                walk_stats::KEPT.fetch_add(keep.len() as u64, AtOrd::Relaxed);
                for i in keep {
                    changed |= self.credit_entry(&node.entries[i as usize], stops, ledger);
                }
            }
        }
        walk_stats::CRED_NANOS.fetch_add(t1.elapsed().as_nanos() as u64, AtOrd::Relaxed);
        changed
    }

    /// The owners of `node`'s entries that survive the single-facility
    /// z-order reduction against `stops` (any order), in list order. An
    /// observer over [`z_reduce`](Self::z_reduce), useful for inspecting how
    /// far a node list shrinks before evaluation; with z-ordering disabled
    /// every owner is returned.
    pub fn servable_entries(
        &self,
        node: &QNode,
        stops: &[crate::geom::Point],
    ) -> Vec<crate::traj::UserId> {
        let mut sorted: Vec<crate::geom::Point> = stops.to_vec();
        sorted.sort_unstable_by(|a, b| a.x.total_cmp(&b.x));
        match self.z_reduce(node, &sorted, CreditScope::Single) {
            None => node.entries.iter().map(|e| e.owner).collect(),
            Some(keep) => keep
                .into_iter()
                .map(|i| node.entries[i as usize].owner)
                .collect(),
        }
    }

    /// Z-order pre-filter: the list positions (ascending) of the entries
    /// that might contribute, or `None` for no filtering (z-ordering
    /// disabled). `stops` must be x-sorted (component invariant). A cell is
    /// reachable when some stop lies within `psi` of its rectangle; any
    /// point in an unreachable cell is provably beyond `psi` of every stop.
    /// Reachability is judged once per distinct cell of the node's lookup
    /// tables, candidates come from the postings of reachable cells (every
    /// rule below requires at least one), and each candidate is then kept by
    /// the rule for the mode. The filter only discards entries that cannot
    /// change this evaluation's outcome; what counts as an outcome depends
    /// on `scope`.
    fn z_reduce(
        &self,
        node: &QNode,
        stops: &[crate::geom::Point],
        scope: CreditScope,
    ) -> Option<Vec<u32>> {
        let zx = node.zindex.as_deref()?;
        if stops.is_empty() {
            return Some(Vec::new());
        }
        walk_stats::Z_CALLS.fetch_add(1, AtOrd::Relaxed);
        walk_stats::CELLS
            .fetch_add((zx.start_rects.len() + zx.end_rects.len()) as u64, AtOrd::Relaxed);
        let psi = self.psi();
        let sbox = Rect::bounding(stops.iter().copied()).expect("stops checked nonempty");
        // The bounding box of the stops rules whole cells out before any
        // per-stop distance: a box farther than psi puts every stop farther.
        // Stops are x-sorted (component invariant), so the survivors get a
        // windowed scan instead of a full one.
        let reachable = |rects: &[Rect]| -> Vec<bool> {
            rects
                .iter()
                .map(|r| {
                    r.dist_to_rect(&sbox) <= psi && rect_reached_x_sorted(r, stops, psi)
                })
                .collect()
        };
        let start_cov = reachable(&zx.start_rects);
        let end_cov = reachable(&zx.end_rects);

        let mut cand: Vec<u32> = Vec::new();
        for (c, cov) in start_cov.iter().enumerate() {
            if *cov {
                cand.extend_from_slice(
                    &zx.start_post
                        [zx.start_post_off[c] as usize..zx.start_post_off[c + 1] as usize],
                );
            }
        }
        for (c, cov) in end_cov.iter().enumerate() {
            if *cov {
                cand.extend_from_slice(
                    &zx.end_post[zx.end_post_off[c] as usize..zx.end_post_off[c + 1] as usize],
                );
            }
        }
        cand.sort_unstable();
        cand.dedup();
        walk_stats::CAND.fetch_add(cand.len() as u64, AtOrd::Relaxed);

        let mode = self.mode();
        cand.retain(|&i| {
            let e = &node.entries[i as usize];
            // The entry's key positions resolved to table indices.
            let s = &zx.pos[zx.pos_off[i as usize] as usize..zx.pos_off[i as usize + 1] as usize];
            match mode {
                ServiceMode::Binary => {
                    // Only the owner's endpoints earn credit. When the entry
                    // carries both endpoints and the credits score a single
                    // facility, the pair can only complete right here, so
                    // either cell out of reach kills the entry. Otherwise a
                    // reachable endpoint must survive on its own: the pair
                    // may complete in another entry or, for group credits,
                    // through another facility's stops.
                    let has_first = e.points[0].0 == 0;
                    let has_last = e.points[e.points.len() - 1].0 == e.owner_points - 1;
                    let start_ok = has_first && start_cov[s[0] as usize];
                    let end_ok = has_last && end_cov[s[1] as usize];
                    match scope {
                        CreditScope::Single if has_first && has_last => start_ok && end_ok,
                        _ => start_ok || end_ok,
                    }
                }
                ServiceMode::PointCountFraction => {
                    start_cov[s[0] as usize]
                        || end_cov[s[1] as usize]
                        || s[2..].iter().any(|&m| start_cov[m as usize])
                }
                ServiceMode::LengthFraction => {
                    // Some owner-consecutive point pair with both cells in
                    // reach. Position j of the entry maps to key[0] for the
                    // start, key[1] for the last point, key[j + 1] otherwise.
                    let last = e.points.len() - 1;
                    let covered = |j: usize| {
                        if j == 0 {
                            start_cov[s[0] as usize]
                        } else if j == last {
                            end_cov[s[1] as usize]
                        } else {
                            start_cov[s[j + 1] as usize]
                        }
                    };
                    (0..last).any(|j| {
                        e.points[j + 1].0 == e.points[j].0 + 1 && covered(j) && covered(j + 1)
                    })
                }
            }
        });
        Some(cand)
    }

    /// Credits one entry's served indices: point indices for the first two
    /// modes, segment indices for length fraction, mirroring
    /// [`crate::service::served_set`]. `stops` must be x-sorted (component
    /// invariant). Returns whether any index was newly credited.
    fn credit_entry(
        &self,
        entry: &TrajEntry,
        stops: &[crate::geom::Point],
        ledger: &mut ServiceLedger,
    ) -> bool {
        let psi = self.psi();
        let n = entry.owner_points;
        let mut changed = false;
        match self.mode() {
            ServiceMode::Binary => {
                for (idx, p) in &entry.points {
                    if (*idx == 0 || *idx == n - 1) && point_served_x_sorted(*p, stops, psi) {
                        changed |= ledger.insert(entry.owner, *idx);
                    }
                }
            }
            ServiceMode::PointCountFraction => {
                for (idx, p) in &entry.points {
                    if point_served_x_sorted(*p, stops, psi) {
                        changed |= ledger.insert(entry.owner, *idx);
                    }
                }
            }
            ServiceMode::LengthFraction => {
                for w in entry.points.windows(2) {
                    let ((ia, pa), (ib, pb)) = (w[0], w[1]);
                    if ib == ia + 1
                        && point_served_x_sorted(pa, stops, psi)
                        && point_served_x_sorted(pb, stops, psi)
                    {
                        changed |= ledger.insert(entry.owner, ia);
                    }
                }
            }
        }
        changed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Bound-driven exploration that stops once k results are exact.
    BestFirst,
    /// Full evaluation of every facility, then a sort. The reference
    /// strategy; also the parallel one.
    Eager,
}

#[derive(Debug, Clone)]
pub struct RankedFacility {
    pub facility: FacilityId,
    pub score: f64,
    pub ledger: ServiceLedger,
}

struct Frontier<'t> {
    node: &'t QNode,
    comp: FacilityComponent,
}

struct State<'t> {
    fidx: usize,
    facility: FacilityId,
    /// Canonical score of the credits collected so far. Recomputed from the
    /// ledger whenever an evaluation round lands a new credit, never
    /// accumulated incrementally: summation order changes the low bits, and
    /// the ranking must be bit-identical to the eager path's scores.
    aserve: f64,
    /// Sum of subtree bounds over the frontier.
    hserve: f64,
    /// Published upper bound on the final score (the heap key). While a
    /// frontier remains this is `aserve + hserve` padded by a relative
    /// float-error envelope and clamped to never increase; once the
    /// frontier is exhausted it is the exact score itself.
    bound: f64,
    frontier: Vec<Frontier<'t>>,
    ledger: ServiceLedger,
    next_component: ComponentId,
}

impl State<'_> {
    /// Recomputes the published bound after an evaluation round.
    ///
    /// `aserve`, `hserve` and the stored subtree bounds are finite-precision
    /// sums whose grouping changes between rounds, so the raw total
    /// `aserve + hserve` can wiggle upward by a few ulps even though the
    /// exact quantity it tracks only shrinks. The `slack` factor covers
    /// every rounding that feeds those sums, keeping the padded value an
    /// upper bound on the final score, and the running minimum makes the
    /// published sequence nonincreasing. An exhausted frontier publishes
    /// the exact score itself, so the heap compares finished states by true
    /// value and a finished state popping first is a confirmed result.
    fn refresh_bound(&mut self, slack: f64) {
        self.bound = if self.frontier.is_empty() {
            self.aserve
        } else {
            self.bound.min((self.aserve + self.hserve) * slack)
        };
    }
}

struct HeapEntry<'t> {
    bound: f64,
    state: State<'t>,
}

impl Eq for HeapEntry<'_> {}

impl PartialEq for HeapEntry<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl PartialOrd for HeapEntry<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry<'_> {
    // Max-heap on the bound; equal bounds pop the smaller facility id first,
    // which fixes the order of equal-score results.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.state.facility.cmp(&self.state.facility))
    }
}

/// Lowest tree node whose cell contains `clip` on the same side of every
/// split line that point placement uses (west/south of a line is the open
/// side). Any point of `clip` then descends into the returned node, so
/// every entry with a servable point lives in its subtree or on the
/// returned ancestor path.
fn containing_descend<'t>(root: &'t QNode, clip: &Rect) -> (Vec<&'t QNode>, &'t QNode) {
    let mut ancestors = Vec::new();
    let mut node = root;
    'down: while let Some(children) = &node.children {
        let c = node.cell.center();
        let west = clip.max.x < c.x;
        let east = clip.min.x >= c.x;
        let south = clip.max.y < c.y;
        let north = clip.min.y >= c.y;
        let digit = match (north, south, east, west) {
            (true, _, _, true) => 0,
            (true, _, true, _) => 1,
            (_, true, _, true) => 2,
            (_, true, true, _) => 3,
            _ => break 'down,
        };
        ancestors.push(node);
        node = &children[digit as usize];
    }
    (ancestors, node)
}

/// Top-k facilities by service value. Results are sorted by score
/// descending, facility id ascending, and carry the exact per-user ledgers.
pub fn top_k_facilities(
    engine: &Engine<'_>,
    facilities: &[FacilityTrajectory],
    k: usize,
    strategy: Strategy,
) -> Result<Vec<RankedFacility>> {
    top_k_traced(engine, facilities, k, strategy, |_, _| {})
}

/// Like [`top_k_facilities`], reporting every bound value a facility's
/// exploration state takes: once at initialization and once per relaxation.
/// The reported sequence per facility never increases.
pub fn top_k_traced(
    engine: &Engine<'_>,
    facilities: &[FacilityTrajectory],
    k: usize,
    strategy: Strategy,
    mut trace: impl FnMut(FacilityId, f64),
) -> Result<Vec<RankedFacility>> {
    let mut seen = BTreeSet::new();
    for f in facilities {
        if !seen.insert(f.id) {
            return Err(Error::DuplicateFacilityId(f.id));
        }
    }
    if k == 0 || facilities.is_empty() {
        return Ok(Vec::new());
    }

    let mut results: Vec<RankedFacility> = match strategy {
        Strategy::Eager => facilities
            .par_iter()
            .map(|f| {
                let (score, ledger) = engine.facility_service(f);
                RankedFacility {
                    facility: f.id,
                    score,
                    ledger,
                }
            })
            .collect(),
        Strategy::BestFirst => best_first(engine, facilities, k, &mut trace),
    };

    results.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.facility.cmp(&b.facility))
    });
    results.truncate(k);
    Ok(results)
}

fn best_first<'t>(
    engine: &Engine<'t>,
    facilities: &[FacilityTrajectory],
    k: usize,
    trace: &mut impl FnMut(FacilityId, f64),
) -> Vec<RankedFacility> {
    let psi = engine.psi();
    let tree = engine.tree;
    // Relative error envelope for published bounds: a first-order cover for
    // every addition feeding a score sum, a frontier sum or a stored subtree
    // bound, with generous headroom. The inflation (well under 1e-9
    // relative) is far too small to change what gets explored.
    let slack = 1.0
        + (engine.users.len() as f64 + 4.0 * tree.entry_count() as f64 + 4096.0) * f64::EPSILON;
    let mut heap: BinaryHeap<HeapEntry<'_>> = BinaryHeap::with_capacity(facilities.len());

    for (fidx, f) in facilities.iter().enumerate() {
        let mut state = State {
            fidx,
            facility: f.id,
            aserve: 0.0,
            hserve: 0.0,
            bound: f64::INFINITY,
            frontier: Vec::new(),
            ledger: ServiceLedger::new(),
            next_component: 0,
        };
        if let Some(clip) = embr(f, psi).intersection(&tree.root.cell) {
            let (ancestors, n0) = containing_descend(&tree.root, &clip);
            // Ancestor lists can hold partially servable entries; evaluate
            // them exactly up front so the frontier bound only has to cover
            // the containing subtree.
            let mut changed = false;
            for a in ancestors {
                let comp = FacilityComponent::root(f, a.cell, psi, &mut state.next_component);
                if !comp.is_empty() {
                    changed |= engine.eval_node_list(
                        a,
                        &comp.stops,
                        CreditScope::Single,
                        &mut state.ledger,
                    );
                }
            }
            if changed {
                state.aserve = state.ledger.total(engine.users, engine.mode());
            }
            let comp = FacilityComponent::root(f, n0.cell, psi, &mut state.next_component);
            if !comp.is_empty() {
                state.hserve = n0.s_ub;
                state.frontier.push(Frontier { node: n0, comp });
            }
        }
        state.refresh_bound(slack);
        trace(f.id, state.bound);
        heap.push(HeapEntry {
            bound: state.bound,
            state,
        });
    }

    let mut results = Vec::with_capacity(k.min(facilities.len()));
    while results.len() < k {
        let Some(mut top) = heap.pop() else { break };
        if top.state.frontier.is_empty() {
            // Highest bound left and already exact: confirmed result.
            // `aserve` always equals the canonical total of the ledger.
            let f = &facilities[top.state.fidx];
            results.push(RankedFacility {
                facility: f.id,
                score: top.state.aserve,
                ledger: top.state.ledger,
            });
            continue;
        }
        relax_state(engine, &mut top.state, slack);
        trace(top.state.facility, top.state.bound);
        heap.push(HeapEntry {
            bound: top.state.bound,
            state: top.state,
        });
    }
    results
}

/// One relaxation round: evaluate the trajectory list of every frontier
/// node exactly, then replace each node by its reachable children. The
/// published bound cannot increase: each node's list contributes at most
/// its summed entry values, its children's bounds sum to the rest of its
/// subtree bound, and [`State::refresh_bound`] absorbs rounding wiggle.
fn relax_state<'t>(engine: &Engine<'t>, state: &mut State<'t>, slack: f64) {
    let psi = engine.psi();
    let old = std::mem::take(&mut state.frontier);
    let mut changed = false;
    for fr in old {
        changed |= engine.eval_node_list(
            fr.node,
            &fr.comp.stops,
            CreditScope::Single,
            &mut state.ledger,
        );
        if let Some(children) = &fr.node.children {
            let cells = [
                children[0].cell,
                children[1].cell,
                children[2].cell,
                children[3].cell,
            ];
            let split = intersecting_components(&cells, &fr.comp, psi, &mut state.next_component);
            for (child, sub) in children.iter().zip(split) {
                if let Some(sub) = sub {
                    state.frontier.push(Frontier { node: child, comp: sub });
                }
            }
        }
    }
    if changed {
        state.aserve = state.ledger.total(engine.users, engine.mode());
    }
    state.hserve =
        crate::service::canonical_sum(state.frontier.iter().map(|fr| fr.node.s_ub));
    state.refresh_bound(slack);

    // All live components of a state must attribute to one facility.
    #[cfg(debug_assertions)]
    if !state.frontier.is_empty() {
        let comps: Vec<FacilityComponent> =
            state.frontier.iter().map(|fr| fr.comp.clone()).collect();
        debug_assert_eq!(crate::service::make_union(&comps).groups(), 1);
    }
}

/// Exact service of a set of facilities acting together (per-user union of
/// credits), evaluated through the index. Used by the coverage solvers.
pub fn group_service_indexed(
    engine: &Engine<'_>,
    group: &[&FacilityTrajectory],
) -> Result<(f64, ServiceLedger)> {
    if group.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let mode = engine.mode();
    let mut merged = ServiceLedger::new();
    for f in group {
        // Credits union per user: point indices may be completed across
        // members, while segment credits (length mode) already require a
        // single member to cover both ends, so a plain set union is the
        // group semantics in every mode. Group-scope credits keep partial
        // endpoints a member cannot complete alone.
        merged.merge(&engine.facility_credits(f));
    }
    Ok((merged.total(engine.users, mode), merged))
}
