//! Directions on the unit sphere.
//!
//! A [`Direction`] is stored as an (azimuth, elevation) pair in radians.
//! Distances and rotations go through [`UnitVector`], the Cartesian form.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// A direction of arrival. Azimuth in `[-π, π)`, elevation in `[-π/2, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    azimuth: f64,
    elevation: f64,
}

impl Direction {
    /// Builds a direction, wrapping azimuth into `[-π, π)` and clamping elevation.
    pub fn new(azimuth: f64, elevation: f64) -> Self {
        Self {
            azimuth: wrap_azimuth(azimuth),
            elevation: elevation.clamp(-FRAC_PI_2, FRAC_PI_2),
        }
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Self {
        Self::new(azimuth_deg.to_radians(), elevation_deg.to_radians())
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth.to_degrees()
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation.to_degrees()
    }

    pub fn to_unit(&self) -> UnitVector {
        let (se, ce) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        UnitVector([ce * ca, ce * sa, se])
    }

    pub fn from_unit(v: UnitVector) -> Self {
        let [x, y, z] = v.0;
        let elevation = z.clamp(-1.0, 1.0).asin();
        let azimuth = if x == 0.0 && y == 0.0 { 0.0 } else { y.atan2(x) };
        Self::new(azimuth, elevation)
    }
}

fn wrap_azimuth(az: f64) -> f64 {
    let mut a = (az + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU
    if a >= PI {
        a -= TAU;
    }
    a
}

/// Cartesian unit vector. Constructors normalize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector(pub [f64; 3]);

impl UnitVector {
    /// Normalizes `v`. Returns `None` for the zero vector.
    pub fn normalize(v: [f64; 3]) -> Option<Self> {
        let n = norm(v);
        if n > 0.0 && n.is_finite() {
            Some(UnitVector([v[0] / n, v[1] / n, v[2] / n]))
        } else {
            None
        }
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(self.0, other.0)
    }

    /// Equal to `acos(clamp(a·b))`, computed as `atan2(|a×b|, a·b)` to keep
    /// precision near 0 and π.
    pub fn angle_to(&self, other: &UnitVector) -> f64 {
        norm(cross(self.0, other.0)).atan2(self.dot(other))
    }

    /// An orthonormal pair spanning the tangent plane at `self`.
    pub fn tangent_basis(&self) -> ([f64; 3], [f64; 3]) {
        let v = self.0;
        // pick the world axis least aligned with v
        let helper = if v[0].abs() <= v[1].abs() && v[0].abs() <= v[2].abs() {
            [1.0, 0.0, 0.0]
        } else if v[1].abs() <= v[2].abs() {
            [0.0, 1.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        };
        let e1 = UnitVector::normalize(cross(v, helper)).expect("helper not parallel").0;
        let e2 = cross(v, e1);
        (e1, e2)
    }

    /// Moves `angle` radians along the great circle leaving `self` with
    /// tangent heading `heading` (measured in the tangent basis).
    pub fn displaced(&self, angle: f64, heading: f64) -> UnitVector {
        let (e1, e2) = self.tangent_basis();
        let (sh, ch) = heading.sin_cos();
        let t = [
            ch * e1[0] + sh * e2[0],
            ch * e1[1] + sh * e2[1],
            ch * e1[2] + sh * e2[2],
        ];
        let (sa, ca) = angle.sin_cos();
        let v = self.0;
        UnitVector::normalize([
            ca * v[0] + sa * t[0],
            ca * v[1] + sa * t[1],
            ca * v[2] + sa * t[2],
        ])
        .unwrap_or(*self)
    }

    /// Rodrigues rotation of `self` about the unit `axis` by `angle`.
    pub fn rotated(&self, axis: &UnitVector, angle: f64) -> UnitVector {
        let (s, c) = angle.sin_cos();
        let v = self.0;
        let k = axis.0;
        let kxv = cross(k, v);
        let kv = dot(k, v);
        UnitVector::normalize([
            v[0] * c + kxv[0] * s + k[0] * kv * (1.0 - c),
            v[1] * c + kxv[1] * s + k[1] * kv * (1.0 - c),
            v[2] * c + kxv[2] * s + k[2] * kv * (1.0 - c),
        ])
        .unwrap_or(*self)
    }
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Great-circle distance in radians, in `[0, π]`.
pub fn angular_distance(a: &Direction, b: &Direction) -> f64 {
    a.to_unit().angle_to(&b.to_unit())
}

/// Uniform sample on the sphere (area measure).
pub fn sample_direction<R: Rng + ?Sized>(rng: &mut R) -> Direction {
    Direction::from_unit(sample_unit(rng))
}

pub fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> UnitVector {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(-PI..PI);
    let r = (1.0 - z * z).max(0.0).sqrt();
    UnitVector([r * phi.cos(), r * phi.sin(), z])
}

/// Rotates `dir` by an angle drawn from a folded normal of std `sigma`
/// toward a uniformly random tangent heading.
pub fn perturb<R: Rng + ?Sized>(dir: &UnitVector, sigma: f64, rng: &mut R) -> UnitVector {
    if sigma <= 0.0 {
        return *dir;
    }
    let magnitude = Normal::new(0.0, sigma)
        .expect("sigma is finite and positive")
        .sample(rng)
        .abs();
    let heading = rng.random_range(0.0..TAU);
    dir.displaced(magnitude, heading)
}

/// Places `n` directions with every pairwise distance at least `min_sep`.
///
/// Points are placed one at a time with up to `max_attempts` draws each; a
/// point that cannot be placed restarts the whole set. After `max_attempts`
/// restarts the request is reported as infeasible.
pub fn sample_separated_set<R: Rng + ?Sized>(
    n: usize,
    min_sep: f64,
    rng: &mut R,
    max_attempts: usize,
) -> Result<Vec<Direction>> {
    if n == 0 {
        return Err(Error::InvalidConfig("need at least one direction".into()));
    }
    if !(min_sep > 0.0 && min_sep <= PI) {
        return Err(Error::InvalidConfig(format!(
            "min_sep {min_sep} outside (0, π]"
        )));
    }
    let attempts = max_attempts.max(1);
    'rounds: for _ in 0..attempts {
        let mut placed: Vec<UnitVector> = Vec::with_capacity(n);
        while placed.len() < n {
            let ok = (0..attempts).find_map(|_| {
                // check distances on the stored representation
                let cand = Direction::from_unit(sample_unit(rng)).to_unit();
                placed
                    .iter()
                    .all(|p| p.angle_to(&cand) >= min_sep)
                    .then_some(cand)
            });
            match ok {
                Some(c) => placed.push(c),
                None => continue 'rounds,
            }
        }
        return Ok(placed.into_iter().map(Direction::from_unit).collect());
    }
    Err(Error::FeasibilityExhausted { n, attempts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DEG: f64 = PI / 180.0;

    #[test]
    fn distance_worked_examples() {
        let a = Direction::new(0.3, -0.2);
        assert_eq!(angular_distance(&a, &a), 0.0);
        let front = Direction::new(0.0, 0.0);
        assert!((angular_distance(&front, &Direction::new(PI, 0.0)) - PI).abs() < 1e-12);
        assert!((angular_distance(&front, &Direction::new(PI / 2.0, 0.0)) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn azimuth_wraps_into_half_open_range() {
        assert_eq!(Direction::new(PI, 0.0).azimuth(), -PI);
        assert!((Direction::from_degrees(190.0, 0.0).azimuth_deg() + 170.0).abs() < 1e-9);
        assert!((Direction::from_degrees(-180.0, 0.0).azimuth() + PI).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_direction(&mut ChaCha8Rng::seed_from_u64(42));
        let b = sample_direction(&mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_is_uniform_on_sphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut sum = [0.0; 3];
        let mut upper = 0usize;
        for _ in 0..n {
            let d = sample_direction(&mut rng);
            let u = d.to_unit().0;
            for k in 0..3 {
                sum[k] += u[k];
            }
            if d.elevation() > 0.0 {
                upper += 1;
            }
        }
        let mean = sum.map(|s| s / n as f64);
        assert!(norm(mean) < 0.02, "mean norm {}", norm(mean));
        let frac = upper as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.01, "upper fraction {frac}");
    }

    #[test]
    fn separated_set_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(sample_separated_set(1, PI, &mut rng, 10).unwrap().len(), 1);

        let set = sample_separated_set(6, 60.0 * DEG, &mut rng, 1000).unwrap();
        assert_eq!(set.len(), 6);
        let mut pairs = 0;
        for i in 0..6 {
            for j in i + 1..6 {
                assert!(angular_distance(&set[i], &set[j]) >= 60.0 * DEG);
                pairs += 1;
            }
        }
        assert_eq!(pairs, 15);

        let err = sample_separated_set(3, 179.9 * DEG, &mut rng, 200).unwrap_err();
        assert!(matches!(err, Error::FeasibilityExhausted { n: 3, .. }));
    }

    #[test]
    fn separated_set_is_deterministic() {
        let a = sample_separated_set(6, 60.0 * DEG, &mut ChaCha8Rng::seed_from_u64(11), 1000);
        let b = sample_separated_set(6, 60.0 * DEG, &mut ChaCha8Rng::seed_from_u64(11), 1000);
        assert_eq!(a.unwrap(), b.unwrap());
    }

    #[test]
    fn perturb_magnitude_matches_folded_normal_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sigma = 5.0 * DEG;
        let base = Direction::from_degrees(40.0, 20.0).to_unit();
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|_| perturb(&base, sigma, &mut rng).angle_to(&base))
            .sum::<f64>()
            / n as f64;
        let expected = sigma * (2.0 / PI).sqrt();
        assert!((mean - expected).abs() / expected < 0.15);
    }

    fn direction() -> impl Strategy<Value = Direction> {
        (-PI..PI, -FRAC_PI_2..=FRAC_PI_2).prop_map(|(a, e)| Direction::new(a, e))
    }

    proptest! {
        #[test]
        fn unit_round_trip(d in direction()) {
            let u = d.to_unit();
            prop_assert!((norm(u.0) - 1.0).abs() < 1e-12);
            let back = Direction::from_unit(u).to_unit();
            // chord length equals the angle to first order
            let chord = norm([u.0[0] - back.0[0], u.0[1] - back.0[1], u.0[2] - back.0[2]]);
            prop_assert!(chord < 1e-12);
        }

        #[test]
        fn distance_is_symmetric_and_bounded(a in direction(), b in direction()) {
            let ab = angular_distance(&a, &b);
            prop_assert_eq!(ab, angular_distance(&b, &a));
            prop_assert!((0.0..=PI).contains(&ab));
        }

        #[test]
        fn triangle_inequality(a in direction(), b in direction(), c in direction()) {
            let ac = angular_distance(&a, &c);
            prop_assert!(ac <= angular_distance(&a, &b) + angular_distance(&b, &c) + 1e-9);
        }

        #[test]
        fn rotation_invariance(a in direction(), b in direction(), axis in direction(), angle in -PI..PI) {
            let k = axis.to_unit();
            let ra = Direction::from_unit(a.to_unit().rotated(&k, angle));
            let rb = Direction::from_unit(b.to_unit().rotated(&k, angle));
            prop_assert!((angular_distance(&a, &b) - angular_distance(&ra, &rb)).abs() < 1e-9);
        }
    }
}
