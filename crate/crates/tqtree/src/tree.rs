//! The trajectory quadtree index.
//!
//! A quadtree over the world rectangle stores trajectory entries at the
//! lowest node whose subdivision they straddle: a node with more than `beta`
//! fully contained entries is split, entries spanning several children stay
//! at the node (its inter-node list), the rest descend. Leaves keep their
//! entries as intra-node lists. Each node's list is z-ordered into buckets
//! of at most `beta` entries by [`crate::zorder::assign_keys`], and every
//! node carries `s_ub`, an upper bound on the service value obtainable from
//! its whole subtree, which drives best-first query exploration.
//!
//! What a trajectory contributes as entries depends on the
//! [`TreeVariant`]: its two endpoints, each consecutive segment, or the
//! whole point sequence kept together.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::geom::{Point, Rect};
use crate::service::ServiceMode;
use crate::traj::{trajectory_length, UserId, UserTrajectory};
use crate::zorder::{assign_keys, quadrant_of, quadrant_rects, zid_rect, ZId};

/// Nodes never subdivide beyond this depth; capacity limits are waived there
/// so coincident trajectories cannot force unbounded recursion.
pub const MAX_TREE_DEPTH: u8 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TreeVariant {
    /// Index only the first and last point of each trajectory.
    TwoPoint,
    /// Index every consecutive point pair as its own entry.
    Segmented,
    /// Index the whole point sequence as one entry.
    FullTrajectory,
}

impl TreeVariant {
    pub const ALL: [TreeVariant; 3] = [
        TreeVariant::TwoPoint,
        TreeVariant::Segmented,
        TreeVariant::FullTrajectory,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TreeVariant::TwoPoint => "two-point",
            TreeVariant::Segmented => "segmented",
            TreeVariant::FullTrajectory => "full-trajectory",
        }
    }

    pub fn parse(s: &str) -> Option<TreeVariant> {
        match s {
            "two-point" => Some(TreeVariant::TwoPoint),
            "segmented" => Some(TreeVariant::Segmented),
            "full-trajectory" => Some(TreeVariant::FullTrajectory),
            _ => None,
        }
    }

    /// Number of entries a trajectory with `n` points produces.
    pub fn entries_per_trajectory(&self, n: usize) -> usize {
        match self {
            TreeVariant::Segmented => n - 1,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeConfig {
    pub beta: usize,
    pub variant: TreeVariant,
    pub bounds: Rect,
    pub mode: ServiceMode,
    /// When false the node lists stay in insertion order and queries scan
    /// them linearly (the non-z-ordered variant used as a comparison index).
    pub zorder: bool,
}

impl TreeConfig {
    pub fn new(beta: usize, variant: TreeVariant, bounds: Rect, mode: ServiceMode) -> Self {
        TreeConfig {
            beta,
            variant,
            bounds,
            mode,
            zorder: true,
        }
    }

    pub fn without_zorder(mut self) -> Self {
        self.zorder = false;
        self
    }
}

/// One indexed piece of a trajectory. `points` pairs each point with its
/// index in the owning trajectory, so service credit lands on the right
/// point or segment no matter how the trajectory was cut into entries.
/// `owner_points` and `owner_length` carry the owner's size for score
/// normalization without a user-table lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajEntry {
    pub owner: UserId,
    pub owner_points: u32,
    pub owner_length: f64,
    pub points: Vec<(u32, Point)>,
    /// Z-order key `[start, end, middles...]`; empty when z-ordering is off.
    pub key: Vec<ZId>,
}

impl TrajEntry {
    /// Largest service value this entry can contribute under `mode`.
    pub fn value(&self, mode: ServiceMode) -> f64 {
        match mode {
            ServiceMode::Binary => 1.0,
            ServiceMode::PointCountFraction => {
                self.points.len() as f64 / f64::from(self.owner_points)
            }
            ServiceMode::LengthFraction => {
                if self.owner_length == 0.0 {
                    return 0.0;
                }
                let mut len = 0.0;
                for w in self.points.windows(2) {
                    if w[1].0 == w[0].0 + 1 {
                        len += crate::geom::dist(w[0].1, w[1].1);
                    }
                }
                len / self.owner_length
            }
        }
    }

    fn point_slice(&self) -> Vec<Point> {
        self.points.iter().map(|(_, p)| *p).collect()
    }
}

/// One z-order bucket of a node list: at most `beta` consecutive entries of
/// the sorted list.
#[derive(Debug, Clone, Copy)]
pub struct ZNode<'a> {
    pub entries: &'a [TrajEntry],
}

impl<'a> ZNode<'a> {
    pub fn min_key(&self) -> &'a [ZId] {
        &self.entries.first().expect("buckets are never empty").key
    }

    pub fn max_key(&self) -> &'a [ZId] {
        &self.entries.last().expect("buckets are never empty").key
    }
}

/// Derived lookup structures over one node list's z-order keys. Rebuilt
/// whenever the list changes, derived again after a snapshot load, never
/// serialized. They let a query judge reachability once per distinct cell
/// instead of once per key position, then touch only the entries that have
/// at least one reachable cell.
///
/// Cells split into two address spaces mirroring the key layout: `key[0]`
/// and the middle identifiers come from the start-phase partition, `key[1]`
/// from the end-phase partition, so equal identifiers across the two phases
/// can denote different cells and are kept apart here.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct NodeZIndex {
    /// Sorted distinct start-phase cells present in the list.
    pub start_zids: Vec<ZId>,
    pub start_rects: Vec<Rect>,
    /// Sorted distinct end-phase cells present in the list.
    pub end_zids: Vec<ZId>,
    pub end_rects: Vec<Rect>,
    /// Key positions of entry `i`, as `pos[pos_off[i]..pos_off[i + 1]]`:
    /// the slice mirrors the entry key, holding indices into the start
    /// tables for `key[0]` and the middles and into the end tables for
    /// `key[1]`.
    pub pos_off: Vec<u32>,
    pub pos: Vec<u32>,
    /// CSR postings: indices of entries whose start or any middle lies in
    /// start cell `i` occupy `start_post[start_post_off[i]..start_post_off[i + 1]]`,
    /// ascending, one occurrence per entry.
    pub start_post_off: Vec<u32>,
    pub start_post: Vec<u32>,
    /// CSR postings over end cells, same layout.
    pub end_post_off: Vec<u32>,
    pub end_post: Vec<u32>,
}

impl NodeZIndex {
    /// `entries` must all carry assigned keys.
    fn build(cell: &Rect, entries: &[TrajEntry]) -> NodeZIndex {
        let mut start_zids: Vec<ZId> = Vec::new();
        let mut end_zids: Vec<ZId> = Vec::with_capacity(entries.len());
        for e in entries {
            start_zids.push(e.key[0]);
            end_zids.push(e.key[1]);
            start_zids.extend_from_slice(&e.key[2..]);
        }
        start_zids.sort_unstable();
        start_zids.dedup();
        end_zids.sort_unstable();
        end_zids.dedup();
        let start_rects: Vec<Rect> = start_zids.iter().map(|z| zid_rect(cell, *z)).collect();
        let end_rects: Vec<Rect> = end_zids.iter().map(|z| zid_rect(cell, *z)).collect();

        let start_at = |z: &ZId| start_zids.binary_search(z).expect("collected above") as u32;
        let end_at = |z: &ZId| end_zids.binary_search(z).expect("collected above") as u32;

        let mut pos_off: Vec<u32> = Vec::with_capacity(entries.len() + 1);
        let mut pos: Vec<u32> = Vec::new();
        let mut start_pairs: Vec<(u32, u32)> = Vec::new();
        let mut end_pairs: Vec<(u32, u32)> = Vec::with_capacity(entries.len());
        pos_off.push(0);
        for (i, e) in entries.iter().enumerate() {
            let s = start_at(&e.key[0]);
            pos.push(s);
            start_pairs.push((s, i as u32));
            let t = end_at(&e.key[1]);
            pos.push(t);
            end_pairs.push((t, i as u32));
            for z in &e.key[2..] {
                let m = start_at(z);
                pos.push(m);
                start_pairs.push((m, i as u32));
            }
            pos_off.push(pos.len() as u32);
        }
        // An entry may hit the same cell through several positions; postings
        // carry it once per cell.
        start_pairs.sort_unstable();
        start_pairs.dedup();
        end_pairs.sort_unstable();

        fn csr(pairs: &[(u32, u32)], cells: usize) -> (Vec<u32>, Vec<u32>) {
            let mut off = vec![0u32; cells + 1];
            for &(c, _) in pairs {
                off[c as usize + 1] += 1;
            }
            for i in 0..cells {
                off[i + 1] += off[i];
            }
            (off, pairs.iter().map(|&(_, e)| e).collect())
        }
        let (start_post_off, start_post) = csr(&start_pairs, start_zids.len());
        let (end_post_off, end_post) = csr(&end_pairs, end_zids.len());

        NodeZIndex {
            start_zids,
            start_rects,
            end_zids,
            end_rects,
            pos_off,
            pos,
            start_post_off,
            start_post,
            end_post_off,
            end_post,
        }
    }
}

/// Whether every entry carries a full key, the precondition for a usable
/// [`NodeZIndex`]. False for the non-z-ordered configuration.
fn list_fully_keyed(entries: &[TrajEntry]) -> bool {
    !entries.is_empty() && entries.iter().all(|e| e.key.len() == e.points.len())
}

#[derive(Debug, Clone)]
pub struct QNode {
    pub cell: Rect,
    pub depth: u8,
    pub children: Option<Box<[QNode; 4]>>,
    /// Inter-node entries for internal nodes, intra-node entries for leaves.
    pub entries: Vec<TrajEntry>,
    /// Upper bound on the total service value stored in this subtree.
    pub s_ub: f64,
    /// Derived z-key lookup for the list; `None` when z-ordering is off or
    /// the list is empty. Queries fall back to a full list scan then.
    pub(crate) zindex: Option<Box<NodeZIndex>>,
}

impl QNode {
    fn new_leaf(cell: Rect, depth: u8) -> Self {
        QNode {
            cell,
            depth,
            children: None,
            entries: Vec::new(),
            s_ub: 0.0,
            zindex: None,
        }
    }

    /// Rebuilds the derived z-key lookup from the current list. Must run
    /// after any change to the list or its keys.
    pub(crate) fn rebuild_zindex(&mut self) {
        self.zindex = if list_fully_keyed(&self.entries) {
            Some(Box::new(NodeZIndex::build(&self.cell, &self.entries)))
        } else {
            None
        };
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    /// Bucketed view of the node list.
    pub fn z_nodes(&self, beta: usize) -> impl Iterator<Item = ZNode<'_>> {
        self.entries.chunks(beta.max(1)).map(|entries| ZNode { entries })
    }

    /// Sum of the entry values held directly at this node.
    pub fn own_value(&self, mode: ServiceMode) -> f64 {
        crate::service::canonical_sum(self.entries.iter().map(|e| e.value(mode)))
    }

    fn recompute_s_ub(&mut self, mode: ServiceMode) {
        let mut v = self.own_value(mode);
        if let Some(children) = &self.children {
            for c in children.iter() {
                v += c.s_ub;
            }
        }
        self.s_ub = v;
    }
}

#[derive(Debug, Clone)]
pub struct TQTree {
    pub config: TreeConfig,
    pub root: QNode,
    ids: BTreeSet<UserId>,
    entry_count: usize,
}

impl TQTree {
    /// Bulk build. Every trajectory must lie inside `config.bounds` and ids
    /// must be unique.
    pub fn build(users: &[UserTrajectory], config: TreeConfig) -> Result<TQTree> {
        let mut ids = BTreeSet::new();
        for u in users {
            if !ids.insert(u.id) {
                return Err(Error::DuplicateId(u.id));
            }
            if u.points.iter().any(|p| !config.bounds.contains_point(*p)) {
                return Err(Error::OutOfBounds(u.id));
            }
        }
        let mut entries: Vec<TrajEntry> = Vec::new();
        for u in users {
            make_entries(u, config.variant, &mut entries);
        }
        let entry_count = entries.len();
        let root = build_node(config.bounds, 0, entries, &config);
        Ok(TQTree {
            config,
            root,
            ids,
            entry_count,
        })
    }

    /// Reassembles a tree from snapshot parts. Only shallow consistency is
    /// checked here; snapshots written by [`crate::snapshot::save`] are
    /// trusted to carry a sound structure.
    pub(crate) fn from_parts(
        config: TreeConfig,
        root: QNode,
        ids: Vec<UserId>,
        entry_count: usize,
    ) -> Result<TQTree> {
        if root.cell != config.bounds {
            return Err(Error::Snapshot(
                "root cell disagrees with configured bounds".into(),
            ));
        }
        if root.depth != 0 {
            return Err(Error::Snapshot("root depth must be zero".into()));
        }
        let id_set: BTreeSet<UserId> = ids.iter().copied().collect();
        if id_set.len() != ids.len() {
            return Err(Error::Snapshot("duplicate user id in snapshot".into()));
        }
        Ok(TQTree {
            config,
            root,
            ids: id_set,
            entry_count,
        })
    }

    pub fn contains_id(&self, id: UserId) -> bool {
        self.ids.contains(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = UserId> + '_ {
        self.ids.iter().copied()
    }

    pub fn entry_count(&self) -> usize {
        self.entry_count
    }

    /// Inserts one trajectory, splitting overflowing leaves and re-running
    /// the z-order assignment of every node whose list changed. The result
    /// is structurally identical to a fresh bulk build over the same
    /// trajectory multiset.
    pub fn insert(&mut self, u: &UserTrajectory) -> Result<()> {
        if self.ids.contains(&u.id) {
            return Err(Error::DuplicateId(u.id));
        }
        if u.points.iter().any(|p| !self.config.bounds.contains_point(*p)) {
            return Err(Error::OutOfBounds(u.id));
        }
        let mut entries = Vec::new();
        make_entries(u, self.config.variant, &mut entries);
        self.entry_count += entries.len();
        for e in entries {
            insert_entry(&mut self.root, e, &self.config);
        }
        self.ids.insert(u.id);
        Ok(())
    }

    /// Service upper bound of the subtree rooted at `node`.
    pub fn subtree_bound(node: &QNode) -> f64 {
        node.s_ub
    }

    pub fn node_count(&self) -> usize {
        fn count(n: &QNode) -> usize {
            1 + n
                .children
                .as_ref()
                .map_or(0, |c| c.iter().map(count).sum())
        }
        count(&self.root)
    }

    pub fn max_depth(&self) -> u8 {
        fn depth(n: &QNode) -> u8 {
            n.children
                .as_ref()
                .map_or(n.depth, |c| c.iter().map(depth).max().unwrap())
        }
        depth(&self.root)
    }

    /// Structural invariant check. Returns human-readable violations; an
    /// empty list means the index is sound. `users` is the table the tree
    /// was built from, used for storage accounting.
    pub fn validate(&self, users: &[UserTrajectory]) -> Vec<String> {
        let mut violations = Vec::new();
        let expected: usize = users
            .iter()
            .map(|u| self.config.variant.entries_per_trajectory(u.points.len()))
            .sum();
        let mut found = 0usize;
        validate_node(&self.root, &self.config, &mut found, &mut violations);
        if found != expected {
            violations.push(format!(
                "storage mismatch: {found} entries indexed, expected {expected}"
            ));
        }
        if found != self.entry_count {
            violations.push(format!(
                "entry counter {} disagrees with tree contents {found}",
                self.entry_count
            ));
        }
        let expected_ids: BTreeSet<UserId> = users.iter().map(|u| u.id).collect();
        if expected_ids != self.ids {
            violations.push("indexed id set disagrees with user table".into());
        }
        violations
    }
}

fn make_entries(u: &UserTrajectory, variant: TreeVariant, out: &mut Vec<TrajEntry>) {
    let n = u.points.len();
    let owner_points = n as u32;
    let owner_length = trajectory_length(&u.points);
    match variant {
        TreeVariant::TwoPoint => out.push(TrajEntry {
            owner: u.id,
            owner_points,
            owner_length,
            points: vec![(0, u.points[0]), ((n - 1) as u32, u.points[n - 1])],
            key: Vec::new(),
        }),
        TreeVariant::Segmented => {
            for j in 0..n - 1 {
                out.push(TrajEntry {
                    owner: u.id,
                    owner_points,
                    owner_length,
                    points: vec![(j as u32, u.points[j]), ((j + 1) as u32, u.points[j + 1])],
                    key: Vec::new(),
                });
            }
        }
        TreeVariant::FullTrajectory => out.push(TrajEntry {
            owner: u.id,
            owner_points,
            owner_length,
            points: u
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| (i as u32, *p))
                .collect(),
            key: Vec::new(),
        }),
    }
}

/// Quadrant of `cell` containing every point of the entry, if one exists.
fn home_quadrant(cell: &Rect, entry: &TrajEntry) -> Option<u8> {
    let first = quadrant_of(cell, entry.points[0].1);
    for (_, p) in &entry.points[1..] {
        if quadrant_of(cell, *p) != first {
            return None;
        }
    }
    Some(first)
}

fn build_node(cell: Rect, depth: u8, entries: Vec<TrajEntry>, config: &TreeConfig) -> QNode {
    let mut node = QNode::new_leaf(cell, depth);
    if entries.len() <= config.beta || depth >= MAX_TREE_DEPTH {
        node.entries = entries;
        apply_zorder(&mut node, config);
        node.recompute_s_ub(config.mode);
        return node;
    }
    let mut stay: Vec<TrajEntry> = Vec::new();
    let mut per_child: [Vec<TrajEntry>; 4] = Default::default();
    for e in entries {
        match home_quadrant(&cell, &e) {
            Some(q) => per_child[q as usize].push(e),
            None => stay.push(e),
        }
    }
    let cells = quadrant_rects(&cell);
    let mut children: Vec<QNode> = Vec::with_capacity(4);
    for (i, bucket) in per_child.into_iter().enumerate() {
        children.push(build_node(cells[i], depth + 1, bucket, config));
    }
    let arr: [QNode; 4] = children
        .try_into()
        .unwrap_or_else(|_| unreachable!("exactly four children"));
    node.children = Some(Box::new(arr));
    node.entries = stay;
    apply_zorder(&mut node, config);
    node.recompute_s_ub(config.mode);
    node
}

/// Recomputes the z-order keys of a node list and sorts it. Ties on the full
/// key fall back to owner id and first point index so the order is total.
fn apply_zorder(node: &mut QNode, config: &TreeConfig) {
    if !config.zorder || node.entries.is_empty() {
        return;
    }
    let point_sets: Vec<Vec<Point>> = node.entries.iter().map(|e| e.point_slice()).collect();
    let slices: Vec<&[Point]> = point_sets.iter().map(|p| p.as_slice()).collect();
    let keys = assign_keys(&node.cell, &slices, config.beta);
    for (e, k) in node.entries.iter_mut().zip(keys) {
        e.key = k;
    }
    node.entries
        .sort_by(|a, b| a.key.cmp(&b.key).then(a.owner.cmp(&b.owner)).then(a.points[0].0.cmp(&b.points[0].0)));
    node.rebuild_zindex();
}

fn insert_entry(node: &mut QNode, entry: TrajEntry, config: &TreeConfig) {
    if node.is_leaf() {
        node.entries.push(entry);
        if node.entries.len() > config.beta && node.depth < MAX_TREE_DEPTH {
            // Rebuild the overflowing leaf as a subtree; bulk build and
            // incremental insertion then agree structurally.
            let entries = std::mem::take(&mut node.entries);
            *node = build_node(node.cell, node.depth, entries, config);
        } else {
            apply_zorder(node, config);
            node.recompute_s_ub(config.mode);
        }
        return;
    }
    match home_quadrant(&node.cell, &entry) {
        Some(q) => {
            let children = node.children.as_mut().expect("internal node");
            insert_entry(&mut children[q as usize], entry, config);
        }
        None => {
            node.entries.push(entry);
            apply_zorder(node, config);
        }
    }
    node.recompute_s_ub(config.mode);
}

fn validate_node(node: &QNode, config: &TreeConfig, found: &mut usize, out: &mut Vec<String>) {
    *found += node.entries.len();
    let where_ = format!("node at depth {} cell {:?}", node.depth, node.cell.min);

    for e in &node.entries {
        for (_, p) in &e.points {
            if !node.cell.contains_point(*p) {
                out.push(format!("{where_}: entry of {} outside its cell", e.owner));
            }
        }
        if config.zorder {
            if e.key.len() != e.points.len() {
                out.push(format!("{where_}: entry of {} lacks z-order keys", e.owner));
            }
        } else if !e.key.is_empty() {
            out.push(format!("{where_}: unexpected z-order keys on entry of {}", e.owner));
        }
    }

    match &node.children {
        None => {
            if node.entries.len() > config.beta && node.depth < MAX_TREE_DEPTH {
                out.push(format!(
                    "{where_}: leaf holds {} entries, capacity {}",
                    node.entries.len(),
                    config.beta
                ));
            }
        }
        Some(children) => {
            // Inter-node entries must straddle at least two children.
            for e in &node.entries {
                if home_quadrant(&node.cell, e).is_some() {
                    out.push(format!(
                        "{where_}: entry of {} fits one child but was not pushed down",
                        e.owner
                    ));
                }
            }
            let cells = quadrant_rects(&node.cell);
            for (i, c) in children.iter().enumerate() {
                if c.cell != cells[i] {
                    out.push(format!("{where_}: child {i} cell mismatch"));
                }
                if c.depth != node.depth + 1 {
                    out.push(format!("{where_}: child {i} depth mismatch"));
                }
                validate_node(c, config, found, out);
            }
        }
    }

    // s_ub must equal own value plus child bounds.
    let mut expect = node.own_value(config.mode);
    if let Some(children) = &node.children {
        for c in children.iter() {
            expect += c.s_ub;
        }
    }
    if (node.s_ub - expect).abs() > 1e-9 * expect.abs().max(1.0) {
        out.push(format!(
            "{where_}: s_ub {} disagrees with recomputation {expect}",
            node.s_ub
        ));
    }

    if config.zorder {
        let mut prev: Option<&TrajEntry> = None;
        for e in &node.entries {
            if let Some(p) = prev {
                if p.key > e.key {
                    out.push(format!("{where_}: entries not in z-order"));
                    break;
                }
            }
            prev = Some(e);
        }
    }

    // The derived z-key lookup must mirror the current list exactly.
    let expect_zindex = if config.zorder && list_fully_keyed(&node.entries) {
        Some(NodeZIndex::build(&node.cell, &node.entries))
    } else {
        None
    };
    if node.zindex.as_deref() != expect_zindex.as_ref() {
        out.push(format!("{where_}: stale z-key lookup"));
    }
}
