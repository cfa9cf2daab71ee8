//! Service semantics: how much of a user trajectory a facility (or a group
//! of facilities) serves.
//!
//! Every evaluation path in this crate, indexed or brute force, reduces to
//! the same two steps so that scores are bit-identical across paths:
//!
//! 1. derive the per-user set of served indices (point indices for
//!    [`ServiceMode::Binary`] and [`ServiceMode::PointCountFraction`],
//!    segment indices for [`ServiceMode::LengthFraction`]);
//! 2. score the set with [`user_score`] and sum user scores in ascending
//!    user-id order.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::traj::{point_served, ComponentId, FacilityComponent, FacilityTrajectory, UserId, UserTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ServiceMode {
    /// 1 if both the first and the last point are served, else 0.
    Binary,
    /// Fraction of trajectory points served.
    PointCountFraction,
    /// Fraction of trajectory length covered by fully served segments.
    LengthFraction,
}

impl ServiceMode {
    pub const ALL: [ServiceMode; 3] = [
        ServiceMode::Binary,
        ServiceMode::PointCountFraction,
        ServiceMode::LengthFraction,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ServiceMode::Binary => "binary",
            ServiceMode::PointCountFraction => "point-count",
            ServiceMode::LengthFraction => "length",
        }
    }

    pub fn parse(s: &str) -> Option<ServiceMode> {
        match s {
            "binary" => Some(ServiceMode::Binary),
            "point-count" => Some(ServiceMode::PointCountFraction),
            "length" => Some(ServiceMode::LengthFraction),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceParams {
    pub psi: f64,
    pub mode: ServiceMode,
}

impl ServiceParams {
    pub fn new(psi: f64, mode: ServiceMode) -> Result<Self> {
        // NaN fails is_finite, so psi ends up strictly positive and finite.
        if !psi.is_finite() || psi <= 0.0 {
            return Err(Error::InvalidPsi(psi));
        }
        Ok(ServiceParams { psi, mode })
    }
}

/// Float sum with a canonical zero. An empty `.sum::<f64>()` is -0.0, and
/// rankings order scores with `total_cmp`, which separates the two zero
/// signs; every score sum goes through here so a zero score is always +0.0
/// no matter which evaluation path produced it.
pub(crate) fn canonical_sum(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |acc, v| acc + v)
}

/// Per-user served indices accumulated during one evaluation.
///
/// Inserting is idempotent, so re-evaluating the same trajectory against
/// another component of the same facility never double counts. Under
/// `LengthFraction` the indices are segment indices (`j` covers the segment
/// between points `j` and `j + 1`); otherwise they are point indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ServiceLedger {
    credits: BTreeMap<UserId, BTreeSet<u32>>,
}

impl ServiceLedger {
    pub fn new() -> Self {
        ServiceLedger::default()
    }

    /// Records index `idx` as served for `user`. Returns true when new.
    pub fn insert(&mut self, user: UserId, idx: u32) -> bool {
        self.credits.entry(user).or_default().insert(idx)
    }

    pub fn get(&self, user: UserId) -> Option<&BTreeSet<u32>> {
        self.credits.get(&user)
    }

    pub fn iter(&self) -> impl Iterator<Item = (UserId, &BTreeSet<u32>)> {
        self.credits.iter().map(|(id, set)| (*id, set))
    }

    pub fn is_empty(&self) -> bool {
        self.credits.is_empty()
    }

    pub fn len(&self) -> usize {
        self.credits.len()
    }

    /// Set union per user. Idempotent and commutative.
    pub fn merge(&mut self, other: &ServiceLedger) {
        for (id, set) in &other.credits {
            self.credits.entry(*id).or_default().extend(set.iter().copied());
        }
    }

    /// Total service value over a user table sorted by ascending id.
    pub fn total(&self, users: &[UserTrajectory], mode: ServiceMode) -> f64 {
        canonical_sum(self.credits.iter().map(|(id, set)| {
            let u = user_by_id(users, *id).expect("ledger references unknown user");
            user_score(u, set, mode)
        }))
    }

    /// Number of users with a positive service value.
    pub fn users_served(&self, users: &[UserTrajectory], mode: ServiceMode) -> usize {
        self.credits
            .iter()
            .filter(|(id, set)| {
                let u = user_by_id(users, **id).expect("ledger references unknown user");
                user_score(u, set, mode) > 0.0
            })
            .count()
    }
}

/// Binary search in a user table sorted by ascending id.
pub fn user_by_id(users: &[UserTrajectory], id: UserId) -> Option<&UserTrajectory> {
    users
        .binary_search_by_key(&id, |u| u.id)
        .ok()
        .map(|i| &users[i])
}

/// Score of one user given its served index set.
pub fn user_score(u: &UserTrajectory, served: &BTreeSet<u32>, mode: ServiceMode) -> f64 {
    let n = u.points.len();
    match mode {
        ServiceMode::Binary => {
            if served.contains(&0) && served.contains(&((n - 1) as u32)) {
                1.0
            } else {
                0.0
            }
        }
        ServiceMode::PointCountFraction => served.len() as f64 / n as f64,
        ServiceMode::LengthFraction => {
            let total = u.length();
            if total == 0.0 {
                // A trajectory without extent has no coverable length.
                return 0.0;
            }
            let covered = canonical_sum(
                served
                    .iter()
                    .map(|&j| crate::geom::dist(u.points[j as usize], u.points[j as usize + 1])),
            );
            covered / total
        }
    }
}

/// Served index set of one user under one facility's stop set.
pub fn served_set(u: &UserTrajectory, stops: &[crate::geom::Point], psi: f64, mode: ServiceMode) -> BTreeSet<u32> {
    let n = u.points.len();
    let mut set = BTreeSet::new();
    match mode {
        ServiceMode::Binary => {
            for idx in [0, n - 1] {
                if point_served(u.points[idx], stops, psi) {
                    set.insert(idx as u32);
                }
            }
        }
        ServiceMode::PointCountFraction => {
            for (idx, p) in u.points.iter().enumerate() {
                if point_served(*p, stops, psi) {
                    set.insert(idx as u32);
                }
            }
        }
        ServiceMode::LengthFraction => {
            let mut prev = point_served(u.points[0], stops, psi);
            for j in 1..n {
                let cur = point_served(u.points[j], stops, psi);
                if prev && cur {
                    set.insert((j - 1) as u32);
                }
                prev = cur;
            }
        }
    }
    set
}

/// Service of a single facility for one user.
pub fn service_single(u: &UserTrajectory, f: &FacilityTrajectory, params: &ServiceParams) -> f64 {
    user_score(u, &served_set(u, &f.stops, params.psi, params.mode), params.mode)
}

/// Service of a single facility over a user set sorted by ascending id.
pub fn service_set(users: &[UserTrajectory], f: &FacilityTrajectory, params: &ServiceParams) -> f64 {
    canonical_sum(users.iter().map(|u| service_single(u, f, params)))
}

/// Joint service of a facility group.
///
/// Per user, the served index sets of the group members are unioned and the
/// union is scored once. Under `Binary` this means the first and last point
/// may be served by different facilities; under `LengthFraction` a segment
/// must be fully served by some single member to enter the union.
pub fn service_group(
    users: &[UserTrajectory],
    group: &[&FacilityTrajectory],
    params: &ServiceParams,
) -> Result<f64> {
    if group.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let mut total = 0.0;
    for u in users {
        let mut union: BTreeSet<u32> = BTreeSet::new();
        for f in group {
            union.extend(served_set(u, &f.stops, params.psi, params.mode));
        }
        total += user_score(u, &union, params.mode);
    }
    Ok(total)
}

/// Union-find over component ids, grouping the components of one facility.
///
/// `find(a) == find(b)` exactly when the two components belong to the same
/// facility. The representative is the smallest component id in the group,
/// which makes lookups deterministic.
#[derive(Debug, Clone, Default)]
pub struct UnionState {
    parent: BTreeMap<ComponentId, ComponentId>,
}

impl UnionState {
    pub fn new() -> Self {
        UnionState::default()
    }

    /// Registers a component id; a no-op if already present.
    pub fn add(&mut self, id: ComponentId) {
        self.parent.entry(id).or_insert(id);
    }

    pub fn find(&mut self, id: ComponentId) -> ComponentId {
        let p = *self.parent.get(&id).unwrap_or(&id);
        if p == id {
            return id;
        }
        let root = self.find(p);
        self.parent.insert(id, root);
        root
    }

    /// Unites two groups; the smaller root id becomes the representative.
    pub fn unite(&mut self, a: ComponentId, b: ComponentId) {
        self.add(a);
        self.add(b);
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent.insert(hi, lo);
    }

    pub fn groups(&mut self) -> usize {
        let ids: Vec<ComponentId> = self.parent.keys().copied().collect();
        let mut roots = BTreeSet::new();
        for id in ids {
            roots.insert(self.find(id));
        }
        roots.len()
    }
}

/// Builds the union over a component list: components sharing a facility id
/// are united into one group.
pub fn make_union(components: &[FacilityComponent]) -> UnionState {
    let mut state = UnionState::new();
    let mut first_of: BTreeMap<crate::traj::FacilityId, ComponentId> = BTreeMap::new();
    for c in components {
        state.add(c.component);
        match first_of.get(&c.facility) {
            Some(&anchor) => state.unite(anchor, c.component),
            None => {
                first_of.insert(c.facility, c.component);
            }
        }
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Point, Rect};
    use rand::rngs::SmallRng;
    use rand::{Rng, SeedableRng};

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    fn user(id: UserId, pts: &[(f64, f64)]) -> UserTrajectory {
        UserTrajectory::new(id, pts.iter().map(|&(x, y)| pt(x, y)).collect()).unwrap()
    }

    fn fac(id: u64, stops: &[(f64, f64)]) -> FacilityTrajectory {
        FacilityTrajectory::new(id, stops.iter().map(|&(x, y)| pt(x, y)).collect()).unwrap()
    }

    fn params(psi: f64, mode: ServiceMode) -> ServiceParams {
        ServiceParams::new(psi, mode).unwrap()
    }

    #[test]
    fn psi_must_be_positive() {
        assert!(ServiceParams::new(0.0, ServiceMode::Binary).is_err());
        assert!(ServiceParams::new(-1.0, ServiceMode::Binary).is_err());
        assert!(ServiceParams::new(f64::NAN, ServiceMode::Binary).is_err());
    }

    #[test]
    fn binary_needs_both_endpoints() {
        let u = user(1, &[(0.0, 0.0), (10.0, 0.0)]);
        let near_start = fac(1, &[(0.0, 1.0)]);
        let near_both = fac(2, &[(0.0, 1.0), (10.0, 1.0)]);
        let p = params(1.5, ServiceMode::Binary);
        assert_eq!(service_single(&u, &near_start, &p), 0.0);
        assert_eq!(service_single(&u, &near_both, &p), 1.0);
    }

    #[test]
    fn binary_one_stop_may_serve_both_endpoints() {
        let u = user(1, &[(0.0, 0.0), (1.0, 0.0)]);
        let f = fac(1, &[(0.5, 0.0)]);
        assert_eq!(service_single(&u, &f, &params(0.6, ServiceMode::Binary)), 1.0);
    }

    #[test]
    fn point_count_fraction() {
        // Four points, two of them served.
        let u = user(1, &[(0.0, 0.0), (5.0, 0.0), (10.0, 0.0), (15.0, 0.0)]);
        let f = fac(1, &[(0.0, 0.5), (5.0, 0.5)]);
        assert_eq!(
            service_single(&u, &f, &params(1.0, ServiceMode::PointCountFraction)),
            0.5
        );
    }

    #[test]
    fn length_fraction_needs_both_segment_endpoints() {
        // Three unit segments; stops serve points 0 and 1 -> only segment 0.
        let u = user(1, &[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        let f = fac(1, &[(0.0, 0.2), (1.0, 0.2)]);
        assert_eq!(
            service_single(&u, &f, &params(0.3, ServiceMode::LengthFraction)),
            1.0 / 3.0
        );
        // Serving only point 1 yields no full segment.
        let g = fac(2, &[(1.0, 0.2)]);
        assert_eq!(
            service_single(&u, &g, &params(0.3, ServiceMode::LengthFraction)),
            0.0
        );
    }

    #[test]
    fn zero_length_trajectory_scores_zero_length_fraction() {
        let u = user(1, &[(5.0, 5.0), (5.0, 5.0)]);
        let f = fac(1, &[(5.0, 5.0)]);
        assert_eq!(
            service_single(&u, &f, &params(1.0, ServiceMode::LengthFraction)),
            0.0
        );
        // Binary and point-count still apply.
        assert_eq!(service_single(&u, &f, &params(1.0, ServiceMode::Binary)), 1.0);
    }

    #[test]
    fn group_union_binary_allows_split_endpoints() {
        let u = [user(1, &[(0.0, 0.0), (10.0, 0.0)])];
        let f1 = fac(1, &[(0.0, 1.0)]);
        let f2 = fac(2, &[(10.0, 1.0)]);
        let p = params(1.5, ServiceMode::Binary);
        assert_eq!(service_set(&u, &f1, &p), 0.0);
        assert_eq!(service_set(&u, &f2, &p), 0.0);
        assert_eq!(service_group(&u, &[&f1, &f2], &p).unwrap(), 1.0);
    }

    #[test]
    fn group_union_length_requires_single_member_per_segment() {
        let u = [user(1, &[(0.0, 0.0), (2.0, 0.0), (4.0, 0.0)])];
        let p = params(0.5, ServiceMode::LengthFraction);
        // f1 fully serves segment 0, f2 fully serves segment 1.
        let f1 = fac(1, &[(0.0, 0.0), (2.0, 0.0)]);
        let f2 = fac(2, &[(2.0, 0.0), (4.0, 0.0)]);
        assert_eq!(service_group(&u, &[&f1, &f2], &p).unwrap(), 1.0);
        // g1 serves only point 0, g2 only point 1: no member covers a full
        // segment, so jointly they still cover nothing.
        let g1 = fac(3, &[(0.0, 0.0)]);
        let g2 = fac(4, &[(2.0, 0.0)]);
        assert_eq!(service_group(&u, &[&g1, &g2], &p).unwrap(), 0.0);
    }

    #[test]
    fn empty_group_is_an_error() {
        let u = [user(1, &[(0.0, 0.0), (1.0, 0.0)])];
        assert!(matches!(
            service_group(&u, &[], &params(1.0, ServiceMode::Binary)),
            Err(Error::EmptyGroup)
        ));
    }

    #[test]
    fn singleton_group_equals_service_set() {
        let mut rng = SmallRng::seed_from_u64(5);
        for mode in ServiceMode::ALL {
            for _ in 0..20 {
                let users: Vec<UserTrajectory> = (0..rng.gen_range(1..20))
                    .map(|i| {
                        let n = rng.gen_range(2..6);
                        UserTrajectory::new(
                            i,
                            (0..n)
                                .map(|_| pt(rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0)))
                                .collect(),
                        )
                        .unwrap()
                    })
                    .collect();
                let f = fac(
                    1,
                    &(0..rng.gen_range(1..5))
                        .map(|_| (rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0)))
                        .collect::<Vec<_>>(),
                );
                let p = params(rng.gen_range(1.0..10.0), mode);
                assert_eq!(
                    service_group(&users, &[&f], &p).unwrap(),
                    service_set(&users, &f, &p)
                );
            }
        }
    }

    #[test]
    fn group_service_is_monotone_in_members() {
        let mut rng = SmallRng::seed_from_u64(6);
        for mode in ServiceMode::ALL {
            for _ in 0..20 {
                let users: Vec<UserTrajectory> = (0..15)
                    .map(|i| {
                        let n = rng.gen_range(2..5);
                        UserTrajectory::new(
                            i,
                            (0..n)
                                .map(|_| pt(rng.gen_range(0.0..40.0), rng.gen_range(0.0..40.0)))
                                .collect(),
                        )
                        .unwrap()
                    })
                    .collect();
                let fs: Vec<FacilityTrajectory> = (0..4)
                    .map(|i| {
                        fac(
                            i,
                            &(0..3)
                                .map(|_| (rng.gen_range(0.0..40.0), rng.gen_range(0.0..40.0)))
                                .collect::<Vec<_>>(),
                        )
                    })
                    .collect();
                let p = params(rng.gen_range(2.0..8.0), mode);
                let small: Vec<&FacilityTrajectory> = fs[..2].iter().collect();
                let big: Vec<&FacilityTrajectory> = fs.iter().collect();
                let s = service_group(&users, &small, &p).unwrap();
                let b = service_group(&users, &big, &p).unwrap();
                assert!(b >= s - 1e-12, "mode {mode:?}: {b} < {s}");
            }
        }
    }

    #[test]
    fn ledger_insert_is_idempotent() {
        let mut ledger = ServiceLedger::new();
        assert!(ledger.insert(7, 0));
        assert!(!ledger.insert(7, 0));
        assert!(ledger.insert(7, 3));
        let users = [user(7, &[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)])];
        let before = ledger.total(&users, ServiceMode::PointCountFraction);
        ledger.insert(7, 3);
        assert_eq!(ledger.total(&users, ServiceMode::PointCountFraction), before);
        assert_eq!(before, 0.5);
    }

    #[test]
    fn ledger_merge_is_set_union() {
        let mut a = ServiceLedger::new();
        a.insert(1, 0);
        a.insert(2, 1);
        let mut b = ServiceLedger::new();
        b.insert(1, 1);
        b.insert(3, 0);
        let mut ab = a.clone();
        ab.merge(&b);
        let mut ba = b.clone();
        ba.merge(&a);
        assert_eq!(ab, ba);
        let mut again = ab.clone();
        again.merge(&b);
        assert_eq!(again, ab);
        assert_eq!(ab.get(1).unwrap().len(), 2);
    }

    #[test]
    fn make_union_groups_by_facility() {
        let cell = Rect::new(pt(0.0, 0.0), pt(1.0, 1.0)).unwrap();
        let comp = |facility, component| FacilityComponent {
            facility,
            component,
            stops: vec![pt(0.5, 0.5)],
            cell,
        };
        // One facility split into four components: one group.
        let mut u = make_union(&[comp(9, 0), comp(9, 1), comp(9, 2), comp(9, 3)]);
        assert_eq!(u.groups(), 1);
        assert_eq!(u.find(3), 0);

        // Two facilities with two components each: two groups.
        let mut u = make_union(&[comp(1, 0), comp(2, 1), comp(1, 2), comp(2, 3)]);
        assert_eq!(u.groups(), 2);
        assert_eq!(u.find(2), 0);
        assert_eq!(u.find(3), 1);
        assert_ne!(u.find(0), u.find(1));
    }

    #[test]
    fn make_union_random_group_count() {
        let mut rng = SmallRng::seed_from_u64(8);
        let cell = Rect::new(pt(0.0, 0.0), pt(1.0, 1.0)).unwrap();
        for _ in 0..30 {
            let facilities = rng.gen_range(1..6u64);
            let comps: Vec<FacilityComponent> = (0..rng.gen_range(1..20u64))
                .map(|i| FacilityComponent {
                    facility: rng.gen_range(0..facilities),
                    component: i,
                    stops: vec![pt(0.5, 0.5)],
                    cell,
                })
                .collect();
            let distinct: BTreeSet<u64> = comps.iter().map(|c| c.facility).collect();
            let mut u = make_union(&comps);
            assert_eq!(u.groups(), distinct.len());
            for a in &comps {
                for b in &comps {
                    assert_eq!(
                        u.find(a.component) == u.find(b.component),
                        a.facility == b.facility
                    );
                }
            }
        }
    }
}
