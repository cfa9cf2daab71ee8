//! Reference implementations: a plain point quadtree and pure linear scans.
//!
//! Both compute the same scores and ledgers as the trajectory index. The
//! point quadtree is the comparison index for benchmarks (it knows nothing
//! about trajectories, so every query pays one range search per stop); the
//! scans are the trusted oracle the test suite measures everything against.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{dist, Point, Rect};
use crate::query::RankedFacility;
use crate::service::{served_set, ServiceLedger, ServiceParams};
use crate::traj::{FacilityTrajectory, UserId, UserTrajectory};
use crate::zorder::{quadrant_of, quadrant_rects};

pub const DEFAULT_LEAF_CAPACITY: usize = 64;
const MAX_DEPTH: u8 = 24;

struct PNode {
    cell: Rect,
    points: Vec<(UserId, u32, Point)>,
    children: Option<Box<[PNode; 4]>>,
}

/// Quadtree over the individual trajectory points.
pub struct PointIndex {
    root: PNode,
    len: usize,
}

impl PointIndex {
    pub fn build(users: &[UserTrajectory], bounds: Rect, leaf_capacity: usize) -> Result<Self> {
        let mut pts = Vec::new();
        for u in users {
            for (i, p) in u.points.iter().enumerate() {
                if !bounds.contains_point(*p) {
                    return Err(Error::OutOfBounds(u.id));
                }
                pts.push((u.id, i as u32, *p));
            }
        }
        let len = pts.len();
        let root = build_node(bounds, 0, pts, leaf_capacity.max(1));
        Ok(PointIndex { root, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// All points within `radius` of `center` (boundary inclusive).
    pub fn range_query(&self, center: Point, radius: f64) -> Vec<(UserId, u32)> {
        let mut out = Vec::new();
        range_rec(&self.root, center, radius, &mut out);
        out
    }
}

fn build_node(cell: Rect, depth: u8, pts: Vec<(UserId, u32, Point)>, cap: usize) -> PNode {
    if pts.len() <= cap || depth >= MAX_DEPTH {
        return PNode {
            cell,
            points: pts,
            children: None,
        };
    }
    let mut buckets: [Vec<(UserId, u32, Point)>; 4] = Default::default();
    for (id, idx, p) in pts {
        buckets[quadrant_of(&cell, p) as usize].push((id, idx, p));
    }
    let cells = quadrant_rects(&cell);
    let mut children: Vec<PNode> = Vec::with_capacity(4);
    for (i, bucket) in buckets.into_iter().enumerate() {
        children.push(build_node(cells[i], depth + 1, bucket, cap));
    }
    let arr: [PNode; 4] = children
        .try_into()
        .unwrap_or_else(|_| unreachable!("exactly four children"));
    PNode {
        cell,
        points: Vec::new(),
        children: Some(Box::new(arr)),
    }
}

fn range_rec(node: &PNode, center: Point, radius: f64, out: &mut Vec<(UserId, u32)>) {
    if node.cell.dist_to_point(center) > radius {
        return;
    }
    match &node.children {
        None => {
            for (id, idx, p) in &node.points {
                if dist(*p, center) <= radius {
                    out.push((*id, *idx));
                }
            }
        }
        Some(children) => {
            for c in children.iter() {
                range_rec(c, center, radius, out);
            }
        }
    }
}

/// Service of one facility through the point index: one range query per
/// stop, union of served point indices per user, then the usual scoring.
/// `users` must be sorted by id.
pub fn baseline_service(
    index: &PointIndex,
    users: &[UserTrajectory],
    f: &FacilityTrajectory,
    params: &ServiceParams,
) -> (f64, ServiceLedger) {
    use std::collections::{BTreeMap, BTreeSet};
    let mut served_points: BTreeMap<UserId, BTreeSet<u32>> = BTreeMap::new();
    for stop in &f.stops {
        for (id, idx) in index.range_query(*stop, params.psi) {
            served_points.entry(id).or_default().insert(idx);
        }
    }
    let mut ledger = ServiceLedger::new();
    for (id, pts) in &served_points {
        let Some(u) = crate::service::user_by_id(users, *id) else {
            continue;
        };
        credit_point_set(u, pts, params, &mut ledger);
    }
    (ledger.total(users, params.mode), ledger)
}

/// Converts a served point set into ledger credits with the same index
/// conventions the tree engine uses (endpoint indices under binary scoring,
/// segment indices under length scoring).
fn credit_point_set(
    u: &UserTrajectory,
    pts: &std::collections::BTreeSet<u32>,
    params: &ServiceParams,
    ledger: &mut ServiceLedger,
) {
    use crate::service::ServiceMode;
    let n = u.points.len() as u32;
    match params.mode {
        ServiceMode::Binary => {
            for idx in [0, n - 1] {
                if pts.contains(&idx) {
                    ledger.insert(u.id, idx);
                }
            }
        }
        ServiceMode::PointCountFraction => {
            for idx in pts {
                ledger.insert(u.id, *idx);
            }
        }
        ServiceMode::LengthFraction => {
            for j in 0..n - 1 {
                if pts.contains(&j) && pts.contains(&(j + 1)) {
                    ledger.insert(u.id, j);
                }
            }
        }
    }
}

/// Top-k through the point index: every facility evaluated in full.
pub fn baseline_topk(
    index: &PointIndex,
    users: &[UserTrajectory],
    facilities: &[FacilityTrajectory],
    k: usize,
    params: &ServiceParams,
) -> Vec<RankedFacility> {
    let mut ranked: Vec<RankedFacility> = facilities
        .par_iter()
        .map(|f| {
            let (score, ledger) = baseline_service(index, users, f, params);
            RankedFacility {
                facility: f.id,
                score,
                ledger,
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.facility.cmp(&b.facility))
    });
    ranked.truncate(k);
    ranked
}

/// Scan reference ledger: no index at all, straight distance checks.
pub fn scan_ledger(
    users: &[UserTrajectory],
    f: &FacilityTrajectory,
    params: &ServiceParams,
) -> ServiceLedger {
    let mut ledger = ServiceLedger::new();
    for u in users {
        for idx in served_set(u, &f.stops, params.psi, params.mode) {
            ledger.insert(u.id, idx);
        }
    }
    ledger
}

pub fn scan_service(
    users: &[UserTrajectory],
    f: &FacilityTrajectory,
    params: &ServiceParams,
) -> (f64, ServiceLedger) {
    let ledger = scan_ledger(users, f, params);
    (ledger.total(users, params.mode), ledger)
}

pub fn scan_topk(
    users: &[UserTrajectory],
    facilities: &[FacilityTrajectory],
    k: usize,
    params: &ServiceParams,
) -> Vec<RankedFacility> {
    let mut ranked: Vec<RankedFacility> = facilities
        .iter()
        .map(|f| {
            let (score, ledger) = scan_service(users, f, params);
            RankedFacility {
                facility: f.id,
                score,
                ledger,
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.facility.cmp(&b.facility))
    });
    ranked.truncate(k);
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service::{service_set, ServiceMode};
    use rand::rngs::SmallRng;
    use rand::{Rng, SeedableRng};

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    fn world() -> Rect {
        Rect::new(pt(0.0, 0.0), pt(100.0, 100.0)).unwrap()
    }

    fn random_users(rng: &mut SmallRng, n: usize) -> Vec<UserTrajectory> {
        (0..n as u64)
            .map(|i| {
                let k = rng.gen_range(2..7);
                UserTrajectory::new(
                    i,
                    (0..k)
                        .map(|_| pt(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)))
                        .collect(),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn range_query_matches_linear_filter() {
        let mut rng = SmallRng::seed_from_u64(7);
        let users = random_users(&mut rng, 150);
        let index = PointIndex::build(&users, world(), 8).unwrap();
        for _ in 0..50 {
            let c = pt(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0));
            let r = rng.gen_range(0.5..20.0);
            let mut got = index.range_query(c, r);
            got.sort_unstable();
            let mut want: Vec<(UserId, u32)> = users
                .iter()
                .flat_map(|u| {
                    u.points
                        .iter()
                        .enumerate()
                        .filter(|(_, p)| dist(**p, c) <= r)
                        .map(move |(i, _)| (u.id, i as u32))
                })
                .collect();
            want.sort_unstable();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn empty_index_serves_nothing() {
        let index = PointIndex::build(&[], world(), 4).unwrap();
        assert!(index.is_empty());
        assert!(index.range_query(pt(50.0, 50.0), 100.0).is_empty());
    }

    #[test]
    fn build_rejects_out_of_bounds() {
        let u = UserTrajectory::new(1, vec![pt(1.0, 1.0), pt(200.0, 1.0)]).unwrap();
        assert!(matches!(
            PointIndex::build(&[u], world(), 4),
            Err(Error::OutOfBounds(1))
        ));
    }

    #[test]
    fn baseline_matches_scan_everywhere() {
        let mut rng = SmallRng::seed_from_u64(21);
        for _ in 0..8 {
            let users = random_users(&mut rng, 60);
            let index = PointIndex::build(&users, world(), 16).unwrap();
            let f = FacilityTrajectory::new(
                0,
                (0..rng.gen_range(1..4))
                    .map(|_| pt(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)))
                    .collect(),
            )
            .unwrap();
            for mode in ServiceMode::ALL {
                let params = ServiceParams::new(rng.gen_range(1.0..8.0), mode).unwrap();
                let (got, got_ledger) = baseline_service(&index, &users, &f, &params);
                let (want, want_ledger) = scan_service(&users, &f, &params);
                assert_eq!(got_ledger, want_ledger, "{mode:?}");
                assert!((got - want).abs() <= 1e-9);
                assert!((want - service_set(&users, &f, &params)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn topk_orders_ties_by_id() {
        // Two facilities with identical stops score identically; the smaller
        // id must rank first.
        let users = vec![
            UserTrajectory::new(1, vec![pt(10.0, 10.0), pt(11.0, 10.0)]).unwrap(),
            UserTrajectory::new(2, vec![pt(50.0, 50.0), pt(90.0, 90.0)]).unwrap(),
        ];
        let index = PointIndex::build(&users, world(), 4).unwrap();
        let f_hi = FacilityTrajectory::new(9, vec![pt(10.5, 10.0)]).unwrap();
        let f_lo = FacilityTrajectory::new(3, vec![pt(10.5, 10.0)]).unwrap();
        let params = ServiceParams::new(2.0, ServiceMode::Binary).unwrap();
        let ranked = baseline_topk(&index, &users, &[f_hi.clone(), f_lo.clone()], 2, &params);
        assert_eq!(ranked[0].facility, 3);
        assert_eq!(ranked[1].facility, 9);
        assert_eq!(ranked[0].score, ranked[1].score);
        let scanned = scan_topk(&users, &[f_hi, f_lo], 2, &params);
        assert_eq!(scanned[0].facility, 3);
    }
}
