//! Deterministic synthetic workloads.
//!
//! The clustered distribution draws most trajectory points near shared
//! hotspots, giving the index the locality real movement data has; the
//! uniform distribution is the adversarial flat case. The same spec always
//! generates the same dataset, byte for byte.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{Point, Rect};
use crate::traj::{FacilityTrajectory, UserTrajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Uniform,
    Clustered {
        hotspots: usize,
        /// Points with hotspot affinity land within this radius of their
        /// trajectory's home hotspot.
        radius: f64,
        /// Probability that a point is drawn near the home hotspot rather
        /// than uniformly. 0.85 makes well over half of all endpoints
        /// hotspot-local.
        affinity: f64,
    },
}

impl Distribution {
    pub fn clustered(hotspots: usize, radius: f64) -> Self {
        Distribution::Clustered {
            hotspots,
            radius,
            affinity: 0.85,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub users: usize,
    pub facilities: usize,
    /// Inclusive range of points per user trajectory (min 2).
    pub points_per_user: (usize, usize),
    /// Inclusive range of stops per facility (min 1).
    pub stops_per_facility: (usize, usize),
    pub bounds: Rect,
    pub distribution: Distribution,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.points_per_user.0 >= 2
            && self.points_per_user.0 <= self.points_per_user.1
            && self.stops_per_facility.0 >= 1
            && self.stops_per_facility.0 <= self.stops_per_facility.1;
        if !ok {
            return Err(Error::Dataset(
                "synthetic spec has empty or degenerate size ranges".into(),
            ));
        }
        if let Distribution::Clustered {
            hotspots,
            radius,
            affinity,
        } = self.distribution
        {
            if hotspots == 0 || !radius.is_finite() || radius <= 0.0 || !(0.0..=1.0).contains(&affinity) {
                return Err(Error::Dataset("invalid clustered distribution".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub users: Vec<UserTrajectory>,
    pub facilities: Vec<FacilityTrajectory>,
    /// Hotspot centers (empty for the uniform distribution).
    pub hotspots: Vec<Point>,
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let b = spec.bounds;

    let uniform_point = |rng: &mut ChaCha8Rng| {
        Point::new(
            rng.gen_range(b.min.x..=b.max.x),
            rng.gen_range(b.min.y..=b.max.y),
        )
    };

    let hotspots: Vec<Point> = match spec.distribution {
        Distribution::Uniform => Vec::new(),
        Distribution::Clustered { hotspots, .. } => {
            (0..hotspots).map(|_| uniform_point(&mut rng)).collect()
        }
    };

    // Uniform sample from the disk around a hotspot, clamped into bounds.
    let near = |rng: &mut ChaCha8Rng, center: Point, radius: f64| {
        let ang = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = radius * rng.gen::<f64>().sqrt();
        Point::new(
            (center.x + r * ang.cos()).clamp(b.min.x, b.max.x),
            (center.y + r * ang.sin()).clamp(b.min.y, b.max.y),
        )
    };

    // Skewed hotspot popularity: low-index hotspots attract more traffic,
    // so facilities placed there score higher than remote ones. That
    // spread is what gives pruning bounds something to separate.
    let pick_hotspot = |rng: &mut ChaCha8Rng, n: usize| {
        let t: f64 = rng.gen::<f64>();
        ((t * t * n as f64) as usize).min(n - 1)
    };

    let mut users = Vec::with_capacity(spec.users);
    for id in 0..spec.users as u64 {
        let k = rng.gen_range(spec.points_per_user.0..=spec.points_per_user.1);
        let pts: Vec<Point> = match spec.distribution {
            Distribution::Uniform => (0..k).map(|_| uniform_point(&mut rng)).collect(),
            Distribution::Clustered {
                radius, affinity, ..
            } => {
                let home = hotspots[pick_hotspot(&mut rng, hotspots.len())];
                (0..k)
                    .map(|_| {
                        if rng.gen::<f64>() < affinity {
                            near(&mut rng, home, radius)
                        } else {
                            uniform_point(&mut rng)
                        }
                    })
                    .collect()
            }
        };
        users.push(UserTrajectory::new(id, pts)?);
    }

    let mut facilities = Vec::with_capacity(spec.facilities);
    for id in 0..spec.facilities as u64 {
        let k = rng.gen_range(spec.stops_per_facility.0..=spec.stops_per_facility.1);
        let stops: Vec<Point> = match spec.distribution {
            Distribution::Uniform => (0..k).map(|_| uniform_point(&mut rng)).collect(),
            Distribution::Clustered { radius, .. } => {
                // Facilities pick hotspots uniformly, so some sit in busy
                // areas and some in quiet ones.
                let home = hotspots[rng.gen_range(0..hotspots.len())];
                (0..k).map(|_| near(&mut rng, home, radius)).collect()
            }
        };
        facilities.push(FacilityTrajectory::new(id, stops)?);
    }

    Ok(SyntheticData {
        users,
        facilities,
        hotspots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::dist;

    fn world() -> Rect {
        Rect::new(Point::new(0.0, 0.0), Point::new(10_000.0, 10_000.0)).unwrap()
    }

    fn clustered_spec(seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            seed,
            users: 500,
            facilities: 20,
            points_per_user: (2, 6),
            stops_per_facility: (1, 8),
            bounds: world(),
            distribution: Distribution::clustered(8, 400.0),
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = clustered_spec(42);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.users, b.users);
        assert_eq!(a.facilities, b.facilities);
        assert_eq!(a.hotspots, b.hotspots);
        let c = generate(&clustered_spec(43)).unwrap();
        assert_ne!(a.users, c.users);
    }

    #[test]
    fn uniform_counts_and_bounds() {
        let spec = SyntheticSpec {
            seed: 7,
            users: 1000,
            facilities: 10,
            points_per_user: (2, 2),
            stops_per_facility: (3, 3),
            bounds: world(),
            distribution: Distribution::Uniform,
        };
        let d = generate(&spec).unwrap();
        assert_eq!(d.users.len(), 1000);
        assert_eq!(d.facilities.len(), 10);
        assert!(d.hotspots.is_empty());
        for u in &d.users {
            assert_eq!(u.points.len(), 2);
            for p in &u.points {
                assert!(spec.bounds.contains_point(*p));
            }
        }
        for f in &d.facilities {
            assert_eq!(f.stops.len(), 3);
            for s in &f.stops {
                assert!(spec.bounds.contains_point(*s));
            }
        }
    }

    #[test]
    fn clustered_endpoints_stick_to_hotspots() {
        let spec = clustered_spec(11);
        let Distribution::Clustered { radius, .. } = spec.distribution else {
            unreachable!()
        };
        let d = generate(&spec).unwrap();
        let near_hotspot = |p: Point| d.hotspots.iter().any(|h| dist(p, *h) <= radius);
        let endpoints: Vec<Point> = d
            .users
            .iter()
            .flat_map(|u| [u.points[0], *u.points.last().unwrap()])
            .collect();
        let close = endpoints.iter().filter(|p| near_hotspot(**p)).count();
        assert!(
            close * 2 >= endpoints.len(),
            "only {close} of {} endpoints near a hotspot",
            endpoints.len()
        );
        for u in &d.users {
            for p in &u.points {
                assert!(spec.bounds.contains_point(*p));
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = clustered_spec(1);
        spec.points_per_user = (1, 3);
        assert!(generate(&spec).is_err());
        let mut spec = clustered_spec(1);
        spec.stops_per_facility = (4, 2);
        assert!(generate(&spec).is_err());
        let mut spec = clustered_spec(1);
        spec.distribution = Distribution::Clustered {
            hotspots: 0,
            radius: 100.0,
            affinity: 0.85,
        };
        assert!(generate(&spec).is_err());
    }
}
