//! Hierarchical z-order identifiers.
//!
//! A [`ZId`] names one cell of a recursive quadrant partition as the digit
//! path from the partition root, e.g. `0.3` is the south-east child of the
//! north-west quadrant. Identifiers at different depths coexist; ordering is
//! digit-lexicographic with a prefix sorting before its extensions
//! (`0 < 0.0 < 0.1 < 1`).
//!
//! [`assign_keys`] implements the two-phase bucketing of a node's trajectory
//! list: the space is partitioned over start points until every partition
//! holds at most `beta` of them, then over end points with the extra rule
//! that trajectories sharing a start identifier must receive distinct end
//! identifiers (unless their end points coincide). Intermediate points of
//! multi-point entries are located in the start partition and used as
//! ordering tie-breakers.

use std::collections::BTreeSet;
use std::fmt;

use crate::geom::{Point, Rect};

/// Quadrant digits: 0 = NW, 1 = NE, 2 = SW, 3 = SE.
const DIGITS: u8 = 4;

/// Partitions never recurse deeper than this; coincident or near-coincident
/// points beyond it share an identifier.
pub const MAX_PARTITION_DEPTH: u8 = 24;

/// Digit path of a partition cell, packed two bits per digit from the top
/// of `bits`. The packing makes the derived ordering (`bits`, then `depth`)
/// exactly the prefix-first lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ZId {
    bits: u64,
    depth: u8,
}

impl ZId {
    /// The undivided space.
    pub const ROOT: ZId = ZId { bits: 0, depth: 0 };

    pub fn from_digits(digits: &[u8]) -> ZId {
        assert!(digits.len() <= 32, "zid deeper than 32 digits");
        let mut z = ZId::ROOT;
        for &d in digits {
            z = z.child(d);
        }
        z
    }

    pub fn child(self, digit: u8) -> ZId {
        debug_assert!(digit < DIGITS);
        debug_assert!(self.depth < 32);
        ZId {
            bits: self.bits | (u64::from(digit) << (62 - 2 * self.depth)),
            depth: self.depth + 1,
        }
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn digit(&self, i: u8) -> u8 {
        debug_assert!(i < self.depth);
        ((self.bits >> (62 - 2 * i)) & 3) as u8
    }

    pub fn digits(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.depth).map(move |i| self.digit(i))
    }

    pub fn is_prefix_of(&self, other: &ZId) -> bool {
        if self.depth > other.depth {
            return false;
        }
        if self.depth == 0 {
            return true;
        }
        let mask = !0u64 << (64 - 2 * u64::from(self.depth));
        (self.bits ^ other.bits) & mask == 0
    }

    /// Raw packed form, used by the snapshot codec.
    pub fn to_raw(self) -> (u64, u8) {
        (self.bits, self.depth)
    }

    /// Rebuilds an identifier from its raw form, rejecting depths beyond 32
    /// digits and set bits below the encoded prefix.
    pub fn from_raw(bits: u64, depth: u8) -> Option<ZId> {
        if depth > 32 {
            return None;
        }
        let mask = if depth == 0 {
            !0u64
        } else if depth == 32 {
            0
        } else {
            !(!0u64 << (64 - 2 * u64::from(depth)))
        };
        if bits & mask != 0 {
            return None;
        }
        Some(ZId { bits, depth })
    }
}

impl fmt::Display for ZId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.digits().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Quadrant of `p` within `cell`. Boundaries are half-open: a point on a
/// split line belongs to the child whose min corner matches, so the center
/// goes north-east and the global max edge stays inside the outermost cells.
pub fn quadrant_of(cell: &Rect, p: Point) -> u8 {
    let c = cell.center();
    let east = p.x >= c.x;
    let north = p.y >= c.y;
    match (north, east) {
        (true, false) => 0,
        (true, true) => 1,
        (false, false) => 2,
        (false, true) => 3,
    }
}

pub fn quadrant_rect(cell: &Rect, digit: u8) -> Rect {
    let c = cell.center();
    let (min, max) = match digit {
        0 => (Point::new(cell.min.x, c.y), Point::new(c.x, cell.max.y)),
        1 => (c, cell.max),
        2 => (cell.min, c),
        3 => (Point::new(c.x, cell.min.y), Point::new(cell.max.x, c.y)),
        _ => unreachable!("quadrant digit out of range"),
    };
    Rect { min, max }
}

pub fn quadrant_rects(cell: &Rect) -> [Rect; 4] {
    [
        quadrant_rect(cell, 0),
        quadrant_rect(cell, 1),
        quadrant_rect(cell, 2),
        quadrant_rect(cell, 3),
    ]
}

/// Cell named by a z-identifier within `cell`.
pub fn zid_rect(cell: &Rect, zid: ZId) -> Rect {
    let mut r = *cell;
    for d in zid.digits() {
        r = quadrant_rect(&r, d);
    }
    r
}

/// Fixed-depth z-identifier of a point, used to impose a spatial order on
/// unordered point sets.
pub fn zid_of_point(cell: &Rect, p: Point, depth: u8) -> ZId {
    let mut r = *cell;
    let mut z = ZId::ROOT;
    for _ in 0..depth {
        let d = quadrant_of(&r, p);
        z = z.child(d);
        r = quadrant_rect(&r, d);
    }
    z
}

/// One recursive quadrant partition, kept only long enough to locate points.
enum PartNode {
    Leaf(ZId),
    Split(Box<[PartNode; 4]>),
}

impl PartNode {
    fn locate(&self, cell: &Rect, p: Point) -> ZId {
        match self {
            PartNode::Leaf(z) => *z,
            PartNode::Split(children) => {
                let d = quadrant_of(cell, p);
                children[d as usize].locate(&quadrant_rect(cell, d), p)
            }
        }
    }
}

/// Start-phase split rule: more than `beta` points.
fn overfull(items: &[(usize, Point)], beta: usize) -> bool {
    items.len() > beta
}

/// End-phase split rule: more than `beta` points, or two entries share a
/// start identifier while their end points still differ (they must end up
/// with distinct end identifiers).
fn end_conflict(items: &[(usize, Point)], start_zids: &[ZId], beta: usize) -> bool {
    if items.len() > beta {
        return true;
    }
    for (i, (ei, pi)) in items.iter().enumerate() {
        for (ej, pj) in items.iter().skip(i + 1) {
            if start_zids[*ei] == start_zids[*ej] && pi != pj {
                return true;
            }
        }
    }
    false
}

fn partition<F>(
    items: Vec<(usize, Point)>,
    cell: &Rect,
    zid: ZId,
    must_split: &F,
    out: &mut [ZId],
) -> PartNode
where
    F: Fn(&[(usize, Point)]) -> bool,
{
    if items.is_empty() || zid.depth() >= MAX_PARTITION_DEPTH || !must_split(&items) {
        for (idx, _) in &items {
            out[*idx] = zid;
        }
        return PartNode::Leaf(zid);
    }
    let mut buckets: [Vec<(usize, Point)>; 4] = Default::default();
    for (idx, p) in items {
        buckets[quadrant_of(cell, p) as usize].push((idx, p));
    }
    let children = buckets.map(|b| b);
    let mut built: Vec<PartNode> = Vec::with_capacity(4);
    for (d, bucket) in children.into_iter().enumerate() {
        let d = d as u8;
        built.push(partition(
            bucket,
            &quadrant_rect(cell, d),
            zid.child(d),
            must_split,
            out,
        ));
    }
    let arr: [PartNode; 4] = built
        .try_into()
        .unwrap_or_else(|_| unreachable!("exactly four children"));
    PartNode::Split(Box::new(arr))
}

/// Z-order keys for a node's trajectory list.
///
/// `entries[i]` is the point sequence of entry `i` in trajectory order.
/// The returned key for an entry is `[start, end, middle...]` identifiers;
/// sorting entries by these keys lexicographically yields the node's
/// z-order. Both partition phases run over the same `cell`.
pub fn assign_keys(cell: &Rect, entries: &[&[Point]], beta: usize) -> Vec<Vec<ZId>> {
    assert!(beta >= 1, "bucket capacity must be at least one");
    if entries.is_empty() {
        return Vec::new();
    }
    let n = entries.len();

    let starts: Vec<(usize, Point)> = entries.iter().enumerate().map(|(i, e)| (i, e[0])).collect();
    let mut start_zids = vec![ZId::ROOT; n];
    let start_tree = partition(
        starts,
        cell,
        ZId::ROOT,
        &|items: &[(usize, Point)]| overfull(items, beta),
        &mut start_zids,
    );

    let ends: Vec<(usize, Point)> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| (i, *e.last().expect("entries have points")))
        .collect();
    let mut end_zids = vec![ZId::ROOT; n];
    let start_ref = &start_zids;
    partition(
        ends,
        cell,
        ZId::ROOT,
        &move |items: &[(usize, Point)]| end_conflict(items, start_ref, beta),
        &mut end_zids,
    );

    entries
        .iter()
        .enumerate()
        .map(|(i, pts)| {
            let mut key = Vec::with_capacity(pts.len());
            key.push(start_zids[i]);
            key.push(end_zids[i]);
            for p in &pts[1..pts.len() - 1] {
                key.push(start_tree.locate(cell, *p));
            }
            key
        })
        .collect()
}

/// Distance from `p` to the farthest corner of `r`.
fn max_dist_to_point(r: &Rect, p: Point) -> f64 {
    let dx = (p.x - r.min.x).abs().max((p.x - r.max.x).abs());
    let dy = (p.y - r.min.y).abs().max((p.y - r.max.y).abs());
    dx.hypot(dy)
}

/// The subset of `zids` whose cells intersect the `psi` service range of at
/// least one stop. `zids` must be sorted and deduplicated; the result is the
/// covered subset. Whole branches of the implied partition are skipped when
/// no stop is near, and accepted wholesale when a stop covers the branch
/// cell entirely.
pub fn covered_leaves(cell: &Rect, zids: &[ZId], stops: &[Point], psi: f64) -> BTreeSet<ZId> {
    let mut out = BTreeSet::new();
    if stops.is_empty() || zids.is_empty() {
        return out;
    }
    sweep(cell, zids, 0, stops, psi, &mut out);
    out
}

fn sweep(rect: &Rect, zids: &[ZId], depth: u8, stops: &[Point], psi: f64, out: &mut BTreeSet<ZId>) {
    if zids.is_empty() {
        return;
    }
    let mut near = false;
    for s in stops {
        if rect.dist_to_point(*s) <= psi {
            near = true;
            if max_dist_to_point(rect, *s) <= psi {
                // The whole branch cell is inside the service range.
                out.extend(zids.iter().copied());
                return;
            }
            break;
        }
    }
    if !near {
        return;
    }
    // Identifiers terminating at this depth are covered; deeper ones recurse
    // per quadrant. Sorted input keeps each digit group contiguous.
    let mut rest = zids;
    if let Some(first) = rest.first() {
        if first.depth() == depth {
            out.insert(*first);
            rest = &rest[1..];
        }
    }
    let mut lo = 0;
    for d in 0..DIGITS {
        let hi = rest[lo..].partition_point(|z| z.digit(depth) <= d) + lo;
        if hi > lo {
            sweep(&quadrant_rect(rect, d), &rest[lo..hi], depth + 1, stops, psi, out);
        }
        lo = hi;
    }
}
