//! User trajectories, facility routes, and the spatial predicates that
//! connect them: whether a point is served by a stop set, the expanded
//! bounding rectangle of a facility, and the splitting of a facility into
//! per-quadrant components during index traversal.

use crate::error::{Error, Result};
use crate::geom::{dist, Point, Rect};

pub type UserId = u64;
pub type FacilityId = u64;
pub type ComponentId = u64;

/// An ordered sequence of at least two visited points.
#[derive(Debug, Clone, PartialEq)]
pub struct UserTrajectory {
    pub id: UserId,
    pub points: Vec<Point>,
}

impl UserTrajectory {
    pub fn new(id: UserId, points: Vec<Point>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::TooFewPoints(id));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteCoordinate(id));
        }
        Ok(UserTrajectory { id, points })
    }

    /// Sum of consecutive segment lengths. Zero only when all points coincide.
    pub fn length(&self) -> f64 {
        trajectory_length(&self.points)
    }
}

pub fn trajectory_length(points: &[Point]) -> f64 {
    points.windows(2).map(|w| dist(w[0], w[1])).sum()
}

/// A facility route: an unordered set of one or more stop points.
#[derive(Debug, Clone, PartialEq)]
pub struct FacilityTrajectory {
    pub id: FacilityId,
    pub stops: Vec<Point>,
}

impl FacilityTrajectory {
    pub fn new(id: FacilityId, stops: Vec<Point>) -> Result<Self> {
        if stops.is_empty() {
            return Err(Error::EmptyFacility(id));
        }
        if stops.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFiniteCoordinate(id));
        }
        Ok(FacilityTrajectory { id, stops })
    }
}

/// True when some stop lies within `psi` of `p` (boundary inclusive).
/// An empty stop set serves nothing.
pub fn point_served(p: Point, stops: &[Point], psi: f64) -> bool {
    stops.iter().any(|s| dist(p, *s) <= psi)
}

/// Relative widening applied to x-window scans. A stop is skipped only when
/// its x gap alone exceeds `psi` by this factor; the factor dominates every
/// rounding error in the exact distance test, so a windowed scan can never
/// reject a stop the exact test accepts.
const X_WINDOW_SLACK: f64 = 1.0 + 1e-9;

/// [`point_served`] over stops sorted ascending by x: stops whose x gap
/// already rules them out are skipped without a distance call. Agrees with
/// the unsorted scan on every input.
pub fn point_served_x_sorted(p: Point, stops_by_x: &[Point], psi: f64) -> bool {
    let w = psi * X_WINDOW_SLACK;
    let lo = stops_by_x.partition_point(|s| s.x < p.x - w);
    stops_by_x[lo..]
        .iter()
        .take_while(|s| s.x <= p.x + w)
        .any(|s| dist(p, *s) <= psi)
}

/// True when some stop of an x-sorted slice lies within `psi` of the
/// rectangle. Same windowing argument as [`point_served_x_sorted`]: the
/// axis gap lower-bounds the rectangle distance.
pub fn rect_reached_x_sorted(r: &Rect, stops_by_x: &[Point], psi: f64) -> bool {
    let w = psi * X_WINDOW_SLACK;
    let lo = stops_by_x.partition_point(|s| s.x < r.min.x - w);
    stops_by_x[lo..]
        .iter()
        .take_while(|s| s.x <= r.max.x + w)
        .any(|s| r.dist_to_point(*s) <= psi)
}

/// Expanded minimum bounding rectangle: the MBR of the stops grown by `psi`
/// on every side. Every point servable by the facility lies inside it.
pub fn embr(f: &FacilityTrajectory, psi: f64) -> Rect {
    Rect::bounding(f.stops.iter().copied())
        .expect("facility has at least one stop")
        .expand(psi)
}

/// The subset of a facility's stops relevant to one quadtree cell: every
/// stop lies inside the cell or within `psi` of it, so it can serve a point
/// in the cell. Component ids are unique within one query evaluation.
///
/// Stops are sorted ascending by x, established at the root and preserved
/// by splits, so evaluation can use the windowed serving predicates.
#[derive(Debug, Clone)]
pub struct FacilityComponent {
    pub facility: FacilityId,
    pub component: ComponentId,
    pub stops: Vec<Point>,
    pub cell: Rect,
}

impl FacilityComponent {
    /// Root component for one query evaluation: the stops within `psi` of
    /// `cell`. May be empty, in which case the facility serves nothing there.
    pub fn root(f: &FacilityTrajectory, cell: Rect, psi: f64, next_id: &mut ComponentId) -> Self {
        let mut stops: Vec<Point> = f
            .stops
            .iter()
            .copied()
            .filter(|s| cell.dist_to_point(*s) <= psi)
            .collect();
        stops.sort_unstable_by(|a, b| a.x.total_cmp(&b.x));
        let component = *next_id;
        *next_id += 1;
        FacilityComponent {
            facility: f.id,
            component,
            stops,
            cell,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.stops.is_empty()
    }
}

/// Split a component across four child cells. The result slot for a cell is
/// `None` when no stop can serve any point of that cell; otherwise it holds
/// exactly the stops within `psi` of the cell (a stop near two cells appears
/// in both components). Filtering preserves the x order, so children inherit
/// the sorted invariant. Fresh ids are drawn from `next_id`.
pub fn intersecting_components(
    cells: &[Rect; 4],
    f: &FacilityComponent,
    psi: f64,
    next_id: &mut ComponentId,
) -> [Option<FacilityComponent>; 4] {
    let mut out = [None, None, None, None];
    for (i, cell) in cells.iter().enumerate() {
        let stops: Vec<Point> = f
            .stops
            .iter()
            .copied()
            .filter(|s| cell.dist_to_point(*s) <= psi)
            .collect();
        if stops.is_empty() {
            continue;
        }
        let component = *next_id;
        *next_id += 1;
        out[i] = Some(FacilityComponent {
            facility: f.facility,
            component,
            stops,
            cell: *cell,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zorder::quadrant_rects;
    use rand::rngs::SmallRng;
    use rand::{Rng, SeedableRng};

    fn pt(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn trajectory_needs_two_points() {
        assert!(matches!(
            UserTrajectory::new(1, vec![pt(0.0, 0.0)]),
            Err(Error::TooFewPoints(1))
        ));
        assert!(UserTrajectory::new(1, vec![pt(0.0, 0.0), pt(1.0, 0.0)]).is_ok());
    }

    #[test]
    fn trajectory_length_examples() {
        let u = UserTrajectory::new(1, vec![pt(0.0, 0.0), pt(3.0, 4.0), pt(3.0, 10.0)]).unwrap();
        assert_eq!(u.length(), 11.0);
        let closed =
            UserTrajectory::new(2, vec![pt(0.0, 0.0), pt(1.0, 0.0), pt(0.0, 0.0)]).unwrap();
        assert_eq!(closed.length(), 2.0);
        let degenerate = UserTrajectory::new(3, vec![pt(5.0, 5.0), pt(5.0, 5.0)]).unwrap();
        assert_eq!(degenerate.length(), 0.0);
    }

    #[test]
    fn trajectory_length_matches_pairwise_sum() {
        let mut rng = SmallRng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(2..12);
            let points: Vec<Point> = (0..n)
                .map(|_| pt(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0)))
                .collect();
            let mut expect = 0.0;
            for i in 1..points.len() {
                expect += dist(points[i - 1], points[i]);
            }
            assert_eq!(trajectory_length(&points), expect);
        }
    }

    #[test]
    fn point_served_boundary_and_empty() {
        let stops = [pt(0.0, 0.0), pt(10.0, 0.0)];
        // Exactly psi away counts as served.
        assert!(point_served(pt(3.0, 4.0), &stops, 5.0));
        assert!(!point_served(pt(3.0, 4.0), &stops, 4.999999));
        assert!(point_served(pt(10.0, 1.0), &stops, 1.0));
        assert!(!point_served(pt(3.0, 4.0), &[], 1e9));
    }

    #[test]
    fn windowed_scans_agree_with_plain_scans() {
        let mut rng = SmallRng::seed_from_u64(97);
        for _ in 0..200 {
            let psi = rng.gen_range(0.1..30.0);
            let mut stops: Vec<Point> = (0..rng.gen_range(0..24))
                .map(|_| pt(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)))
                .collect();
            stops.sort_unstable_by(|a, b| a.x.total_cmp(&b.x));
            for _ in 0..20 {
                let p = pt(rng.gen_range(-10.0..110.0), rng.gen_range(-10.0..110.0));
                assert_eq!(
                    point_served_x_sorted(p, &stops, psi),
                    point_served(p, &stops, psi)
                );
                let q = pt(
                    p.x + rng.gen_range(0.0..15.0),
                    p.y + rng.gen_range(0.0..15.0),
                );
                let r = Rect::new(p, q).unwrap();
                assert_eq!(
                    rect_reached_x_sorted(&r, &stops, psi),
                    stops.iter().any(|s| r.dist_to_point(*s) <= psi)
                );
            }
            // Points exactly psi away stress the boundary the window must
            // never cut into.
            if let Some(&s) = stops.first() {
                let p = pt(s.x + psi, s.y);
                assert_eq!(
                    point_served_x_sorted(p, &stops, psi),
                    point_served(p, &stops, psi)
                );
            }
        }
    }

    #[test]
    fn embr_contains_exactly_the_servable_halo() {
        let f = FacilityTrajectory::new(9, vec![pt(2.0, 3.0), pt(8.0, 1.0)]).unwrap();
        let r = embr(&f, 2.0);
        assert_eq!(r.min, pt(0.0, -1.0));
        assert_eq!(r.max, pt(10.0, 5.0));

        // Any point within psi of a stop lies inside the EMBR.
        let mut rng = SmallRng::seed_from_u64(3);
        for _ in 0..200 {
            let s = f.stops[rng.gen_range(0..f.stops.len())];
            let ang = rng.gen_range(0.0..std::f64::consts::TAU);
            let rad = rng.gen_range(0.0..2.0);
            let p = pt(s.x + rad * ang.cos(), s.y + rad * ang.sin());
            assert!(r.contains_point(p));
        }
    }

    #[test]
    fn single_stop_embr_is_square() {
        let f = FacilityTrajectory::new(1, vec![pt(5.0, 5.0)]).unwrap();
        let r = embr(&f, 1.5);
        assert_eq!(r.min, pt(3.5, 3.5));
        assert_eq!(r.max, pt(6.5, 6.5));
    }

    #[test]
    fn component_split_keeps_every_stop_that_can_serve_a_cell() {
        let cell = Rect::new(pt(0.0, 0.0), pt(8.0, 8.0)).unwrap();
        let cells = quadrant_rects(&cell);
        // A stop at the center is within psi of all four quadrants.
        let comp = FacilityComponent {
            facility: 1,
            component: 0,
            stops: vec![pt(4.0, 4.0)],
            cell,
        };
        let mut next = 1;
        let parts = intersecting_components(&cells, &comp, 0.5, &mut next);
        assert!(parts.iter().all(|c| c.is_some()));
        // Ids are fresh and distinct.
        let mut ids: Vec<_> = parts
            .iter()
            .map(|c| c.as_ref().unwrap().component)
            .collect();
        ids.dedup();
        assert_eq!(ids.len(), 4);
    }

    #[test]
    fn component_split_drops_unreachable_quadrants() {
        let cell = Rect::new(pt(0.0, 0.0), pt(8.0, 8.0)).unwrap();
        let cells = quadrant_rects(&cell);
        let mut next = 1;
        let comp = FacilityComponent {
            facility: 1,
            component: 0,
            stops: vec![pt(1.0, 1.0)],
            cell,
        };
        let parts = intersecting_components(&cells, &comp, 0.5, &mut next);
        // Quadrant order is NW, NE, SW, SE: only SW is reachable.
        assert!(parts[0].is_none() && parts[1].is_none() && parts[3].is_none());
        assert_eq!(parts[2].as_ref().unwrap().stops, vec![pt(1.0, 1.0)]);
    }

    /// Serving is preserved across a split: a point in a child cell is served
    /// by the child component iff it is served by the parent component.
    #[test]
    fn component_split_preserves_serving() {
        let mut rng = SmallRng::seed_from_u64(21);
        for _ in 0..50 {
            let cell = Rect::new(pt(0.0, 0.0), pt(16.0, 16.0)).unwrap();
            let psi = rng.gen_range(0.2..3.0);
            let stops: Vec<Point> = (0..rng.gen_range(1..8))
                .map(|_| pt(rng.gen_range(-2.0..18.0), rng.gen_range(-2.0..18.0)))
                .collect();
            let parent = FacilityComponent {
                facility: 1,
                component: 0,
                stops,
                cell,
            };
            let cells = quadrant_rects(&cell);
            let mut next = 1;
            let parts = intersecting_components(&cells, &parent, psi, &mut next);
            for _ in 0..40 {
                let p = pt(rng.gen_range(0.0..16.0), rng.gen_range(0.0..16.0));
                let q = crate::zorder::quadrant_of(&cell, p) as usize;
                let by_parent = point_served(p, &parent.stops, psi);
                let by_child = parts[q]
                    .as_ref()
                    .is_some_and(|c| point_served(p, &c.stops, psi));
                assert_eq!(by_parent, by_child);
            }
        }
    }
}
