//! Binary snapshots of a built index.
//!
//! The format is a little-endian preorder dump: header (magic, version,
//! config), then one record per node. Loading reconstructs the tree
//! verbatim, including z-order keys and cached bounds, so a save/load/save
//! round trip is byte-identical and loads skip all build work.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::geom::{Point, Rect};
use crate::service::ServiceMode;
use crate::traj::UserId;
use crate::tree::{QNode, TQTree, TrajEntry, TreeConfig, TreeVariant};
use crate::zorder::ZId;

const MAGIC: &[u8; 8] = b"TQTREE\0\0";
const VERSION: u32 = 1;

fn mode_tag(mode: ServiceMode) -> u8 {
    match mode {
        ServiceMode::Binary => 0,
        ServiceMode::PointCountFraction => 1,
        ServiceMode::LengthFraction => 2,
    }
}

fn mode_from_tag(tag: u8) -> Result<ServiceMode> {
    match tag {
        0 => Ok(ServiceMode::Binary),
        1 => Ok(ServiceMode::PointCountFraction),
        2 => Ok(ServiceMode::LengthFraction),
        t => Err(Error::Snapshot(format!("unknown service mode tag {t}"))),
    }
}

fn variant_tag(v: TreeVariant) -> u8 {
    match v {
        TreeVariant::TwoPoint => 0,
        TreeVariant::Segmented => 1,
        TreeVariant::FullTrajectory => 2,
    }
}

fn variant_from_tag(tag: u8) -> Result<TreeVariant> {
    match tag {
        0 => Ok(TreeVariant::TwoPoint),
        1 => Ok(TreeVariant::Segmented),
        2 => Ok(TreeVariant::FullTrajectory),
        t => Err(Error::Snapshot(format!("unknown tree variant tag {t}"))),
    }
}

struct Writer<W: Write> {
    w: W,
}

impl<W: Write> Writer<W> {
    fn u8(&mut self, v: u8) -> Result<()> {
        self.w.write_all(&[v])?;
        Ok(())
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        self.w.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.w.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.w.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn point(&mut self, p: Point) -> Result<()> {
        self.f64(p.x)?;
        self.f64(p.y)
    }
    fn rect(&mut self, r: &Rect) -> Result<()> {
        self.point(r.min)?;
        self.point(r.max)
    }
}

struct Reader<R: Read> {
    r: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.r.read_exact(&mut buf)?;
        Ok(buf)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn point(&mut self) -> Result<Point> {
        Ok(Point::new(self.f64()?, self.f64()?))
    }
    fn rect(&mut self) -> Result<Rect> {
        let min = self.point()?;
        let max = self.point()?;
        Rect::new(min, max).map_err(|e| Error::Snapshot(format!("bad rect: {e}")))
    }
    fn len(&mut self, what: &str) -> Result<usize> {
        let n = self.u64()?;
        // Arbitrary sanity cap; a corrupt length must not trigger a huge
        // allocation before read_exact fails.
        if n > 1 << 40 {
            return Err(Error::Snapshot(format!("implausible {what} count {n}")));
        }
        Ok(n as usize)
    }
}

pub fn save<W: Write>(tree: &TQTree, out: W) -> Result<()> {
    let mut w = Writer { w: out };
    w.w.write_all(MAGIC)?;
    w.u32(VERSION)?;
    w.u64(tree.config.beta as u64)?;
    w.u8(variant_tag(tree.config.variant))?;
    w.u8(mode_tag(tree.config.mode))?;
    w.u8(tree.config.zorder as u8)?;
    w.rect(&tree.config.bounds)?;
    w.u64(tree.entry_count() as u64)?;
    let ids: Vec<UserId> = tree.ids().collect();
    w.u64(ids.len() as u64)?;
    for id in ids {
        w.u64(id)?;
    }
    save_node(&mut w, &tree.root)?;
    Ok(())
}

fn save_node<W: Write>(w: &mut Writer<W>, node: &QNode) -> Result<()> {
    w.rect(&node.cell)?;
    w.u8(node.depth)?;
    w.f64(node.s_ub)?;
    w.u64(node.entries.len() as u64)?;
    for e in &node.entries {
        w.u64(e.owner)?;
        w.u32(e.owner_points)?;
        w.f64(e.owner_length)?;
        w.u64(e.points.len() as u64)?;
        for (idx, p) in &e.points {
            w.u32(*idx)?;
            w.point(*p)?;
        }
        w.u64(e.key.len() as u64)?;
        for z in &e.key {
            let (bits, depth) = z.to_raw();
            w.u64(bits)?;
            w.u8(depth)?;
        }
    }
    match &node.children {
        None => w.u8(0)?,
        Some(children) => {
            w.u8(1)?;
            for c in children.iter() {
                save_node(w, c)?;
            }
        }
    }
    Ok(())
}

pub fn load<R: Read>(input: R) -> Result<TQTree> {
    let mut r = Reader { r: input };
    let magic: [u8; 8] = r.bytes()?;
    if &magic != MAGIC {
        return Err(Error::Snapshot("not a tree snapshot (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Snapshot(format!(
            "snapshot version {version} is not supported (expected {VERSION})"
        )));
    }
    let beta = r.u64()? as usize;
    if beta == 0 {
        return Err(Error::Snapshot("beta must be positive".into()));
    }
    let variant = variant_from_tag(r.u8()?)?;
    let mode = mode_from_tag(r.u8()?)?;
    let zorder = match r.u8()? {
        0 => false,
        1 => true,
        t => return Err(Error::Snapshot(format!("bad zorder flag {t}"))),
    };
    let bounds = r.rect()?;
    let mut config = TreeConfig::new(beta, variant, bounds, mode);
    config.zorder = zorder;
    let entry_count = r.len("entry")?;
    let id_count = r.len("id")?;
    let mut ids = Vec::with_capacity(id_count.min(1 << 20));
    for _ in 0..id_count {
        ids.push(r.u64()?);
    }
    let root = load_node(&mut r)?;
    TQTree::from_parts(config, root, ids, entry_count)
}

fn load_node<R: Read>(r: &mut Reader<R>) -> Result<QNode> {
    let cell = r.rect()?;
    let depth = r.u8()?;
    let s_ub = r.f64()?;
    let n_entries = r.len("entry")?;
    let mut entries = Vec::with_capacity(n_entries.min(1 << 20));
    for _ in 0..n_entries {
        let owner = r.u64()?;
        let owner_points = r.u32()?;
        let owner_length = r.f64()?;
        let n_points = r.len("point")?;
        let mut points = Vec::with_capacity(n_points.min(1 << 20));
        for _ in 0..n_points {
            let idx = r.u32()?;
            points.push((idx, r.point()?));
        }
        if points.is_empty() {
            return Err(Error::Snapshot("entry with no points".into()));
        }
        let n_key = r.len("key")?;
        let mut key = Vec::with_capacity(n_key.min(1 << 20));
        for _ in 0..n_key {
            let bits = r.u64()?;
            let depth = r.u8()?;
            key.push(
                ZId::from_raw(bits, depth)
                    .ok_or_else(|| Error::Snapshot("malformed z-order id".into()))?,
            );
        }
        entries.push(TrajEntry {
            owner,
            owner_points,
            owner_length,
            points,
            key,
        });
    }
    let children = match r.u8()? {
        0 => None,
        1 => {
            let a = load_node(r)?;
            let b = load_node(r)?;
            let c = load_node(r)?;
            let d = load_node(r)?;
            Some(Box::new([a, b, c, d]))
        }
        t => return Err(Error::Snapshot(format!("bad child marker {t}"))),
    };
    let mut node = QNode {
        cell,
        depth,
        children,
        entries,
        s_ub,
        zindex: None,
    };
    // The z-key lookup is derived, never stored: rebuild it from the loaded
    // keys. Keys themselves are not reassigned, so a load-save round trip
    // stays byte-identical.
    node.rebuild_zindex();
    Ok(node)
}

pub fn save_to_path(tree: &TQTree, path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut buf = std::io::BufWriter::new(file);
    save(tree, &mut buf)?;
    use std::io::Write as _;
    buf.flush()?;
    Ok(())
}

pub fn load_from_path(path: &std::path::Path) -> Result<TQTree> {
    let file = std::fs::File::open(path)?;
    load(std::io::BufReader::new(file))
}
