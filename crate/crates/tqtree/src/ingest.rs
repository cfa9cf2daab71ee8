//! Dataset readers, coordinate projection, and the canonical dataset dump.
//!
//! Readers are configured with column mappings and CSV dialect options so
//! public datasets load without code changes. Geographic coordinates are
//! projected to planar meters with an equirectangular projection about the
//! dataset's mean latitude, which keeps the service radius a walking
//! distance. All readers are deterministic: the same bytes and options
//! always produce the same trajectory list.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::geom::{Point, Rect};
use crate::traj::{FacilityTrajectory, UserTrajectory};
use crate::zorder::{zid_of_point, MAX_PARTITION_DEPTH};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Default service radius in meters for geographic datasets.
pub const DEFAULT_PSI_M: f64 = 200.0;

/// Equirectangular projection about a reference latitude. Exactly
/// invertible, so round trips recover coordinates up to float rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub ref_lat_deg: f64,
}

impl Projection {
    pub fn new(ref_lat_deg: f64) -> Self {
        Projection { ref_lat_deg }
    }

    pub fn project(&self, lon_deg: f64, lat_deg: f64) -> Point {
        let scale = self.ref_lat_deg.to_radians().cos();
        Point::new(
            EARTH_RADIUS_M * lon_deg.to_radians() * scale,
            EARTH_RADIUS_M * lat_deg.to_radians(),
        )
    }

    pub fn unproject(&self, p: Point) -> (f64, f64) {
        let scale = self.ref_lat_deg.to_radians().cos();
        (
            (p.x / (EARTH_RADIUS_M * scale)).to_degrees(),
            (p.y / EARTH_RADIUS_M).to_degrees(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionChoice {
    /// Coordinates are already planar; use them as-is.
    None,
    /// Project about the mean latitude of the loaded records.
    Equirectangular,
}

#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            has_header: true,
        }
    }
}

/// Column indices (0-based) of a two-point trip file.
#[derive(Debug, Clone, Copy)]
pub struct TripColumns {
    pub pickup_lon: usize,
    pub pickup_lat: usize,
    pub dropoff_lon: usize,
    pub dropoff_lat: usize,
}

/// Column indices (0-based) of a check-in file.
#[derive(Debug, Clone, Copy)]
pub struct CheckinColumns {
    pub user: usize,
    pub timestamp: usize,
    pub lon: usize,
    pub lat: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub rows: usize,
    pub loaded: usize,
    pub skipped_malformed: usize,
    pub skipped_zero: usize,
    /// Groups with a single point (multipoint reader only).
    pub skipped_singleton: usize,
}

#[derive(Debug)]
pub struct LoadedUsers {
    pub users: Vec<UserTrajectory>,
    pub report: IngestReport,
    /// The projection applied, when one was requested and data existed.
    pub projection: Option<Projection>,
}

fn parse_coord(field: Option<&str>) -> Option<f64> {
    let v: f64 = field?.trim().parse().ok()?;
    if v.is_finite() {
        Some(v)
    } else {
        None
    }
}

fn is_zero(lon: f64, lat: f64) -> bool {
    lon == 0.0 && lat == 0.0
}

/// One 2-point trajectory per row; ids are assigned in row order. Rows with
/// unparseable fields are skipped and tallied, as are rows where either
/// endpoint sits at (0, 0), the usual null placeholder in trip data.
pub fn read_two_point_trips<R: Read>(
    input: R,
    opts: CsvOptions,
    cols: TripColumns,
    projection: ProjectionChoice,
) -> Result<LoadedUsers> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(opts.has_header)
        .flexible(true)
        .from_reader(input);
    let mut report = IngestReport::default();
    let mut raw: Vec<[f64; 4]> = Vec::new();
    for record in reader.records() {
        let record = record?;
        report.rows += 1;
        let coords = [
            parse_coord(record.get(cols.pickup_lon)),
            parse_coord(record.get(cols.pickup_lat)),
            parse_coord(record.get(cols.dropoff_lon)),
            parse_coord(record.get(cols.dropoff_lat)),
        ];
        let [Some(plon), Some(plat), Some(dlon), Some(dlat)] = coords else {
            report.skipped_malformed += 1;
            continue;
        };
        if is_zero(plon, plat) || is_zero(dlon, dlat) {
            report.skipped_zero += 1;
            continue;
        }
        raw.push([plon, plat, dlon, dlat]);
    }
    let proj = make_projection(
        projection,
        raw.iter().flat_map(|r| [r[1], r[3]]),
    );
    let to_point = |lon: f64, lat: f64| match &proj {
        Some(p) => p.project(lon, lat),
        None => Point::new(lon, lat),
    };
    let users = raw
        .iter()
        .enumerate()
        .map(|(i, r)| {
            UserTrajectory::new(i as u64, vec![to_point(r[0], r[1]), to_point(r[2], r[3])])
        })
        .collect::<Result<Vec<_>>>()?;
    report.loaded = users.len();
    Ok(LoadedUsers {
        users,
        report,
        projection: proj,
    })
}

fn make_projection(
    choice: ProjectionChoice,
    lats: impl Iterator<Item = f64>,
) -> Option<Projection> {
    match choice {
        ProjectionChoice::None => None,
        ProjectionChoice::Equirectangular => {
            let (mut sum, mut n) = (0.0, 0usize);
            for lat in lats {
                sum += lat;
                n += 1;
            }
            if n == 0 {
                None
            } else {
                Some(Projection::new(sum / n as f64))
            }
        }
    }
}

/// Check-ins grouped into one trajectory per user per UTC calendar day,
/// ordered by timestamp (ties keep file order). Groups with fewer than two
/// points are dropped and tallied. Trajectory ids are assigned in
/// (user, day) order, so the output is independent of row order up to
/// timestamp ties.
pub fn read_multipoint<R: Read>(
    input: R,
    opts: CsvOptions,
    cols: CheckinColumns,
    projection: ProjectionChoice,
) -> Result<LoadedUsers> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(opts.has_header)
        .flexible(true)
        .from_reader(input);
    let mut report = IngestReport::default();
    // Check-ins of one user on one day, as (epoch, row, lon, lat).
    type DayGroup = Vec<(i64, usize, f64, f64)>;
    let mut groups: BTreeMap<(u64, i64), DayGroup> = BTreeMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        report.rows += 1;
        let parsed = (|| {
            let user: u64 = record.get(cols.user)?.trim().parse().ok()?;
            let epoch = parse_timestamp(record.get(cols.timestamp)?.trim())?;
            let lon = parse_coord(record.get(cols.lon))?;
            let lat = parse_coord(record.get(cols.lat))?;
            Some((user, epoch, lon, lat))
        })();
        let Some((user, epoch, lon, lat)) = parsed else {
            report.skipped_malformed += 1;
            continue;
        };
        if is_zero(lon, lat) {
            report.skipped_zero += 1;
            continue;
        }
        let day = epoch.div_euclid(86_400);
        groups.entry((user, day)).or_default().push((epoch, row, lon, lat));
    }
    let proj = make_projection(
        projection,
        groups.values().flatten().map(|(_, _, _, lat)| *lat),
    );
    let to_point = |lon: f64, lat: f64| match &proj {
        Some(p) => p.project(lon, lat),
        None => Point::new(lon, lat),
    };
    let mut users = Vec::new();
    for points in groups.values_mut() {
        if points.len() < 2 {
            report.skipped_singleton += 1;
            continue;
        }
        points.sort_by_key(|(epoch, row, _, _)| (*epoch, *row));
        let pts: Vec<Point> = points.iter().map(|(_, _, lon, lat)| to_point(*lon, *lat)).collect();
        users.push(UserTrajectory::new(users.len() as u64, pts)?);
    }
    report.loaded = users.len();
    Ok(LoadedUsers {
        users,
        report,
        projection: proj,
    })
}

/// Epoch seconds, either as a plain (possibly fractional) number or as an
/// ISO-8601 date-time like `2012-04-03T18:00:00`, `2012-04-03 18:00:00.5Z`.
/// Offsets other than Z are not supported.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_digit() || c == '-' || c == '.') && !s.contains("--")
    {
        // No separators beyond an optional leading minus: numeric epoch.
        if !s[1..].contains('-') {
            let v: f64 = s.parse().ok()?;
            if !v.is_finite() {
                return None;
            }
            return Some(v.floor() as i64);
        }
    }
    let s = s.strip_suffix('Z').unwrap_or(s);
    let (date, time) = match s.split_once('T').or_else(|| s.split_once(' ')) {
        Some(parts) => parts,
        None => (s, "00:00:00"),
    };
    let mut d = date.splitn(3, '-');
    let year: i64 = d.next()?.parse().ok()?;
    let month: u32 = d.next()?.parse().ok()?;
    let day: u32 = d.next()?.parse().ok()?;
    if !(1..=12).contains(&month) || !(1..=31).contains(&day) {
        return None;
    }
    let mut t = time.splitn(3, ':');
    let hour: i64 = t.next()?.parse().ok()?;
    let minute: i64 = t.next()?.parse().ok()?;
    let second: i64 = t.next().map_or(Some(0.0), |v| v.parse::<f64>().ok())? as i64;
    if !(0..24).contains(&hour) || !(0..60).contains(&minute) || !(0..61).contains(&second) {
        return None;
    }
    Some(days_from_civil(year, month, day) * 86_400 + hour * 3600 + minute * 60 + second)
}

/// Days since 1970-01-01 of a proleptic Gregorian date.
fn days_from_civil(y: i64, m: u32, d: u32) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = i64::from((m + 9) % 12);
    let doy = (153 * mp + 2) / 5 + i64::from(d) - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

/// Facility routes, one per line: `id lon1 lat1 lon2 lat2 ...` with the
/// configured delimiter. Malformed lines (bad id, odd coordinate count, no
/// stops, repeated id) are skipped and tallied.
pub fn read_facility_routes<R: Read>(
    input: R,
    opts: CsvOptions,
    projection: Option<&Projection>,
) -> Result<(Vec<FacilityTrajectory>, IngestReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(opts.has_header)
        .flexible(true)
        .from_reader(input);
    let mut report = IngestReport::default();
    let mut seen = std::collections::BTreeSet::new();
    let mut facilities = Vec::new();
    for record in reader.records() {
        let record = record?;
        report.rows += 1;
        let parse = || -> Option<(u64, Vec<f64>)> {
            let id: u64 = record.get(0)?.trim().parse().ok()?;
            let mut coords = Vec::with_capacity(record.len().saturating_sub(1));
            for i in 1..record.len() {
                let f = record.get(i)?.trim();
                if f.is_empty() {
                    continue; // trailing delimiter
                }
                coords.push(f.parse::<f64>().ok().filter(|v| v.is_finite())?);
            }
            Some((id, coords))
        };
        let Some((id, coords)) = parse() else {
            report.skipped_malformed += 1;
            continue;
        };
        if coords.is_empty() || coords.len() % 2 != 0 || !seen.insert(id) {
            report.skipped_malformed += 1;
            continue;
        }
        let stops: Vec<Point> = coords
            .chunks(2)
            .map(|c| match projection {
                Some(p) => p.project(c[0], c[1]),
                None => Point::new(c[0], c[1]),
            })
            .collect();
        facilities.push(FacilityTrajectory::new(id, stops)?);
    }
    report.loaded = facilities.len();
    Ok((facilities, report))
}

/// Reorders each trajectory's points along the z-order curve over `bounds`.
/// For datasets whose point sequence carries no meaning, this fixes a
/// canonical traversal order (ties keep the original order). Off by
/// default; opting in changes segment-based scores.
pub fn normalize_point_order(users: &mut [UserTrajectory], bounds: &Rect) {
    for u in users.iter_mut() {
        let mut keyed: Vec<(crate::zorder::ZId, usize)> = u
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (zid_of_point(bounds, *p, MAX_PARTITION_DEPTH), i))
            .collect();
        keyed.sort();
        let pts = keyed.iter().map(|(_, i)| u.points[*i]).collect();
        u.points = pts;
    }
}

/// Writes the canonical dataset dump: versioned, line-oriented, floats in
/// shortest round-trip form, trajectories sorted by id. The same data
/// always produces the same bytes.
pub fn write_dataset<W: Write>(
    users: &[UserTrajectory],
    facilities: &[FacilityTrajectory],
    mut out: W,
) -> Result<()> {
    let mut us: Vec<&UserTrajectory> = users.iter().collect();
    us.sort_by_key(|u| u.id);
    let mut fs: Vec<&FacilityTrajectory> = facilities.iter().collect();
    fs.sort_by_key(|f| f.id);
    writeln!(out, "tqdata 1")?;
    writeln!(out, "users {}", us.len())?;
    for u in us {
        write!(out, "{} {}", u.id, u.points.len())?;
        for p in &u.points {
            write!(out, " {} {}", p.x, p.y)?;
        }
        writeln!(out)?;
    }
    writeln!(out, "facilities {}", fs.len())?;
    for f in fs {
        write!(out, "{} {}", f.id, f.stops.len())?;
        for p in &f.stops {
            write!(out, " {} {}", p.x, p.y)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_dataset<R: Read>(input: R) -> Result<(Vec<UserTrajectory>, Vec<FacilityTrajectory>)> {
    let mut lines = BufReader::new(input).lines();
    let mut next_line = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Dataset("unexpected end of file".into()))?
            .map_err(Error::from)
    };
    let header = next_line()?;
    if header.trim() != "tqdata 1" {
        return Err(Error::Dataset(format!(
            "unsupported dataset header: {header:?}"
        )));
    }
    let n_users = section_count(&next_line()?, "users")?;
    let mut users = Vec::with_capacity(n_users.min(1 << 20));
    for _ in 0..n_users {
        let line = next_line()?;
        let (id, pts) = parse_dump_line(&line)?;
        users.push(UserTrajectory::new(id, pts)?);
    }
    let n_fac = section_count(&next_line()?, "facilities")?;
    let mut facilities = Vec::with_capacity(n_fac.min(1 << 20));
    for _ in 0..n_fac {
        let line = next_line()?;
        let (id, pts) = parse_dump_line(&line)?;
        facilities.push(FacilityTrajectory::new(id, pts)?);
    }
    Ok((users, facilities))
}

fn section_count(line: &str, name: &str) -> Result<usize> {
    let mut it = line.split_whitespace();
    if it.next() != Some(name) {
        return Err(Error::Dataset(format!("expected `{name} <count>`, got {line:?}")));
    }
    let n = it
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Dataset(format!("bad count in {line:?}")))?;
    if it.next().is_some() {
        return Err(Error::Dataset(format!("trailing junk in {line:?}")));
    }
    Ok(n)
}

fn parse_dump_line(line: &str) -> Result<(u64, Vec<Point>)> {
    let bad = || Error::Dataset(format!("malformed dump line: {line:?}"));
    let mut it = line.split_whitespace();
    let id: u64 = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
    let k: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
    let mut pts = Vec::with_capacity(k.min(1 << 20));
    for _ in 0..k {
        let x: f64 = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let y: f64 = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        pts.push(Point::new(x, y));
    }
    if it.next().is_some() {
        return Err(bad());
    }
    Ok((id, pts))
}
