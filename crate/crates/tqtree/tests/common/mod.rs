//! Shared fixtures for the integration suites.
//!
//! `demo_*` is a hand-built 12-user scene whose tree shape, bucket keys,
//! scores, and coverage values are all known exactly; `oracle_suite` is the
//! seeded randomized matrix the equivalence and round-trip suites sweep.
#![allow(dead_code)] // not every test target uses every helper

use tqtree::geom::{Point, Rect};
use tqtree::service::{ServiceMode, ServiceParams};
use tqtree::synth::{Distribution, SyntheticSpec};
use tqtree::traj::{FacilityTrajectory, UserTrajectory};
use tqtree::tree::{TreeConfig, TreeVariant, TQTree};

pub fn pt(x: f64, y: f64) -> Point {
    Point::new(x, y)
}

fn user(id: u64, a: (f64, f64), b: (f64, f64)) -> UserTrajectory {
    UserTrajectory::new(id, vec![pt(a.0, a.1), pt(b.0, b.1)]).unwrap()
}

fn facility(id: u64, stops: &[(f64, f64)]) -> FacilityTrajectory {
    FacilityTrajectory::new(id, stops.iter().map(|s| pt(s.0, s.1)).collect()).unwrap()
}

pub fn demo_world() -> Rect {
    Rect::new(pt(0.0, 0.0), pt(16.0, 16.0)).unwrap()
}

/// Twelve two-point commutes. Users 1-2 live in the southeast, 3-4 in the
/// northwest, 5-8 inside the southwest quarter (straddling its center, so
/// they stay on that node's own list), and 9-12 cross quadrants at the top
/// level. Distances are tuned so facility 46 serves 5-8 completely plus the
/// starts of 10-11, facility 65 serves 9 and 12 completely plus the ends of
/// 10-11, and facility 25 serves 1, 2, and 4.
pub fn demo_users() -> Vec<UserTrajectory> {
    vec![
        user(1, (10.0, 3.0), (12.0, 2.0)),
        user(2, (11.0, 4.5), (13.0, 3.5)),
        user(3, (5.0, 13.0), (6.0, 14.5)),
        user(4, (3.0, 12.0), (2.0, 14.0)),
        user(5, (2.5, 6.5), (4.5, 7.0)),
        user(6, (3.0, 7.0), (5.0, 5.0)),
        user(7, (2.5, 4.5), (1.0, 1.0)),
        user(8, (2.0, 2.0), (6.5, 5.5)),
        user(9, (6.5, 12.0), (9.5, 12.2)),
        user(10, (2.9, 6.9), (10.0, 12.5)),
        user(11, (2.7, 4.4), (11.0, 11.0)),
        user(12, (7.0, 10.0), (9.0, 10.3)),
    ]
}

pub fn demo_facilities() -> Vec<FacilityTrajectory> {
    vec![
        facility(
            25,
            &[
                (10.1, 3.1),
                (12.1, 2.1),
                (11.1, 4.6),
                (13.1, 3.4),
                (3.1, 12.1),
                (2.1, 14.1),
            ],
        ),
        facility(
            46,
            &[
                (2.75, 6.75),
                (2.5, 4.2),
                (1.2, 1.2),
                (1.8, 2.1),
                (4.6, 6.8),
                (5.2, 5.1),
                (6.3, 5.4),
            ],
        ),
        facility(
            65,
            &[
                (6.6, 12.1),
                (9.4, 12.1),
                (7.1, 10.1),
                (9.1, 10.2),
                (10.9, 11.2),
            ],
        ),
    ]
}

/// Probe route for the list-reduction check on the southwest node: its
/// stops reach the start cells of users 5, 6, and 8 and the end cells of
/// users 6 and 8, so only 6 and 8 can still be served in full.
pub fn demo_probe_stops() -> Vec<Point> {
    vec![pt(0.5, 0.5), pt(2.3, 7.6), pt(5.6, 4.3), pt(7.4, 4.4)]
}

pub fn demo_params() -> ServiceParams {
    ServiceParams::new(1.0, ServiceMode::Binary).unwrap()
}

pub fn demo_config() -> TreeConfig {
    TreeConfig::new(2, TreeVariant::TwoPoint, demo_world(), ServiceMode::Binary)
}

pub fn demo_tree() -> TQTree {
    TQTree::build(&demo_users(), demo_config()).unwrap()
}

/// One endpoint pair and three single-stop facilities around it: `near_a`
/// reaches the start, `near_b` reaches the end, `remote` reaches nothing.
/// Adding `near_b` to {remote} gains nothing, while adding it to
/// {remote, near_a} gains a whole unit, so marginal gains grow with the
/// base set and the coverage objective is not submodular.
pub fn gain_growth_scene() -> (Vec<UserTrajectory>, Vec<FacilityTrajectory>, ServiceParams, TreeConfig) {
    let users = vec![user(0, (20.0, 20.0), (30.0, 20.0))];
    let facs = vec![
        facility(1, &[(20.0, 20.5)]),
        facility(2, &[(30.0, 20.5)]),
        facility(3, &[(50.0, 50.0)]),
    ];
    let params = ServiceParams::new(1.0, ServiceMode::Binary).unwrap();
    let world = Rect::new(pt(0.0, 0.0), pt(64.0, 64.0)).unwrap();
    let config = TreeConfig::new(2, TreeVariant::TwoPoint, world, ServiceMode::Binary);
    (users, facs, params, config)
}

pub struct Scenario {
    pub label: String,
    pub users: Vec<UserTrajectory>,
    pub facilities: Vec<FacilityTrajectory>,
    pub params: ServiceParams,
    pub config: TreeConfig,
}

/// Seeded scenario matrix: every service mode crossed with every tree
/// variant over a spread of sizes, stop counts, radii, and point
/// distributions. Endpoint-only entries are only exact for two-point
/// trajectories, so fractional scenarios pin trajectory length to two
/// under that variant.
pub fn oracle_suite() -> Vec<Scenario> {
    let sizes = [
        (5000, 32, 16),
        (2500, 24, 8),
        (1200, 16, 4),
        (800, 12, 64),
        (650, 8, 2),
        (500, 32, 1),
        (420, 20, 8),
        (350, 4, 32),
        (300, 28, 4),
        (1500, 16, 2),
        (700, 6, 8),
        (450, 10, 16),
    ];
    let world = Rect::new(pt(0.0, 0.0), pt(2048.0, 2048.0)).unwrap();
    let mut out = Vec::new();
    for (i, &(users, facilities, max_stops)) in sizes.iter().enumerate() {
        let seed = 1000 + i as u64;
        let psi = [6.0, 10.0, 16.0, 24.0, 40.0][i % 5];
        let distribution = if i % 2 == 0 {
            Distribution::clustered(12, psi * 8.0)
        } else {
            Distribution::Uniform
        };
        for mode in ServiceMode::ALL {
            for variant in TreeVariant::ALL {
                let two_point_only = variant == TreeVariant::TwoPoint;
                let spec = SyntheticSpec {
                    seed,
                    users,
                    facilities,
                    points_per_user: if two_point_only { (2, 2) } else { (2, 6) },
                    stops_per_facility: (1, max_stops),
                    bounds: world,
                    distribution,
                };
                let data = tqtree::synth::generate(&spec).unwrap();
                let beta = [2, 4, 8, 16][i % 4];
                out.push(Scenario {
                    label: format!(
                        "seed {seed} users {users} facs {facilities} stops<={max_stops} \
                         psi {psi} beta {beta} {mode:?} {variant:?}"
                    ),
                    users: data.users,
                    facilities: data.facilities,
                    params: ServiceParams::new(psi, mode).unwrap(),
                    config: TreeConfig::new(beta, variant, world, mode),
                });
            }
        }
    }
    out
}

/// Scaled-down version of [`oracle_suite`] for the fast randomized suite.
pub fn dev_suite() -> Vec<Scenario> {
    let sizes = [
        (400, 10, 4),
        (250, 8, 8),
        (180, 16, 2),
        (120, 6, 16),
        (300, 12, 1),
        (220, 5, 6),
    ];
    let world = Rect::new(pt(0.0, 0.0), pt(512.0, 512.0)).unwrap();
    let mut out = Vec::new();
    for (i, &(users, facilities, max_stops)) in sizes.iter().enumerate() {
        let seed = 7000 + i as u64;
        let psi = [4.0, 8.0, 14.0, 24.0][i % 4];
        let distribution = if i % 2 == 0 {
            Distribution::clustered(6, psi * 6.0)
        } else {
            Distribution::Uniform
        };
        for mode in ServiceMode::ALL {
            for variant in TreeVariant::ALL {
                let two_point_only = variant == TreeVariant::TwoPoint;
                let spec = SyntheticSpec {
                    seed,
                    users,
                    facilities,
                    points_per_user: if two_point_only { (2, 2) } else { (2, 5) },
                    stops_per_facility: (1, max_stops),
                    bounds: world,
                    distribution,
                };
                let data = tqtree::synth::generate(&spec).unwrap();
                let beta = [2, 3, 6, 12][i % 4];
                out.push(Scenario {
                    label: format!(
                        "seed {seed} users {users} facs {facilities} stops<={max_stops} \
                         psi {psi} beta {beta} {mode:?} {variant:?}"
                    ),
                    users: data.users,
                    facilities: data.facilities,
                    params: ServiceParams::new(psi, mode).unwrap(),
                    config: TreeConfig::new(beta, variant, world, mode),
                });
            }
        }
    }
    out
}

/// Facility id plus exact score bits: two rankings agree if and only if
/// their signatures match.
pub fn rank_signature(ranked: &[tqtree::query::RankedFacility]) -> Vec<(u64, u64)> {
    ranked.iter().map(|r| (r.facility, r.score.to_bits())).collect()
}
