//! Rectangular-room mirror-source lattice and per-path deterministic quantities.
//!
//! The room spans `[0, lx) x [0, ly) x [0, lz)`. Mirror source `k` of a point
//! `p` is obtained per axis as `ceil(k/2) * 2L + (-1)^k * p`, so odd indices are
//! reflections and even indices are pure translations of the original room.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Exact SI speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Tolerance on `|‖v‖ - 1|` for vectors that must be unit length.
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Rectangular room, dimensions in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
}

impl Room {
    pub fn new(lx: f64, ly: f64, lz: f64) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0 && lz > 0.0) || !(lx * ly * lz).is_finite() {
            return domain(format!("room dimensions must be positive, got {lx} x {ly} x {lz}"));
        }
        Ok(Room { lx, ly, lz })
    }

    pub fn volume(&self) -> f64 {
        self.lx * self.ly * self.lz
    }

    pub fn surface(&self) -> f64 {
        2.0 * (self.lx * self.ly + self.ly * self.lz + self.lx * self.lz)
    }

    pub fn diagonal(&self) -> f64 {
        (self.lx * self.lx + self.ly * self.ly + self.lz * self.lz).sqrt()
    }

    pub fn dims(&self) -> [f64; 3] {
        [self.lx, self.ly, self.lz]
    }

    /// Half-open membership test for `[0,lx) x [0,ly) x [0,lz)`.
    pub fn contains(&self, p: Vec3) -> bool {
        (0.0..self.lx).contains(&p.x) && (0.0..self.ly).contains(&p.y) && (0.0..self.lz).contains(&p.z)
    }
}

/// Half-angle of a spherical cap covering the fraction `omega` of the unit sphere.
pub fn cap_half_angle(omega: f64) -> Result<f64> {
    if !(omega > 0.0 && omega <= 1.0) {
        return domain(format!("beam coverage fraction must lie in (0, 1], got {omega}"));
    }
    Ok((1.0 - 2.0 * omega).clamp(-1.0, 1.0).acos())
}

/// Lossless spherical-cap-sector antenna.
///
/// The gain is `1/omega` inside the cap and zero outside, so gain times
/// coverage integrates to one over the sphere. `epsilon` is carried for
/// general patterns but plays no role for caps, whose footprint is fixed by
/// the half-angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Antenna {
    pub position: Vec3,
    pub boresight: Vec3,
    pub omega: f64,
    pub epsilon: f64,
}

impl Antenna {
    pub fn new(position: Vec3, boresight: Vec3, omega: f64) -> Result<Self> {
        if !boresight.is_unit() {
            return domain(format!("boresight must be a unit vector, norm is {}", boresight.norm()));
        }
        cap_half_angle(omega)?;
        Ok(Antenna {
            position,
            boresight,
            omega,
            epsilon: 0.0,
        })
    }

    pub fn isotropic(position: Vec3) -> Self {
        Antenna {
            position,
            boresight: Vec3::new(1.0, 0.0, 0.0),
            omega: 1.0,
            epsilon: 0.0,
        }
    }

    pub fn half_angle(&self) -> f64 {
        (1.0 - 2.0 * self.omega).clamp(-1.0, 1.0).acos()
    }

    pub fn in_footprint(&self, direction: Vec3) -> Result<bool> {
        in_footprint(self, direction)
    }

    /// Power gain in `direction`: `1/omega` inside the footprint, else zero.
    pub fn gain(&self, direction: Vec3) -> Result<f64> {
        Ok(if in_footprint(self, direction)? { 1.0 / self.omega } else { 0.0 })
    }
}

/// True iff the angle between boresight and `direction` is at most the cap half-angle.
pub fn in_footprint(antenna: &Antenna, direction: Vec3) -> Result<bool> {
    if !direction.is_unit() {
        return domain(format!("direction must be a unit vector, norm is {}", direction.norm()));
    }
    if antenna.omega >= 1.0 {
        return Ok(true);
    }
    // angle <= theta  <=>  cos(angle) >= cos(theta) = 1 - 2*omega
    Ok(antenna.boresight.dot(direction) >= 1.0 - 2.0 * antenna.omega)
}

/// Mirror-source lattice index `k = (kx, ky, kz)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct LatticeIndex {
    pub kx: i32,
    pub ky: i32,
    pub kz: i32,
}

impl LatticeIndex {
    pub const IDENTITY: LatticeIndex = LatticeIndex { kx: 0, ky: 0, kz: 0 };

    pub const fn new(kx: i32, ky: i32, kz: i32) -> Self {
        LatticeIndex { kx, ky, kz }
    }

    /// Reflection order `|kx| + |ky| + |kz|`, the number of wall bounces.
    pub fn order(&self) -> u32 {
        self.kx.unsigned_abs() + self.ky.unsigned_abs() + self.kz.unsigned_abs()
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// Index of the receiver image that describes the same physical path.
    ///
    /// Odd components are reflections and map to themselves; even components
    /// are translations and flip sign. With it,
    /// `|mirror(r_T, k) - r_R| == |mirror(r_R, k.reciprocal()) - r_T|`.
    pub fn reciprocal(&self) -> LatticeIndex {
        let flip = |k: i32| if k % 2 == 0 { -k } else { k };
        LatticeIndex::new(flip(self.kx), flip(self.ky), flip(self.kz))
    }

    fn components(&self) -> [i32; 3] {
        [self.kx, self.ky, self.kz]
    }
}

fn mirror_coordinate(k: i32, length: f64, base: f64) -> f64 {
    // ceil(k / 2) for signed k
    let half = (k + 1).div_euclid(2);
    let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    f64::from(half) * 2.0 * length + sign * base
}

fn mirror_unchecked(base: Vec3, k: LatticeIndex, room: &Room) -> Vec3 {
    Vec3::new(
        mirror_coordinate(k.kx, room.lx, base.x),
        mirror_coordinate(k.ky, room.ly, base.y),
        mirror_coordinate(k.kz, room.lz, base.z),
    )
}

/// Position of mirror image `k` of `base`.
pub fn mirror_position(base: Vec3, k: LatticeIndex, room: &Room) -> Result<Vec3> {
    if !room.contains(base) {
        return domain(format!("base point {base:?} lies outside the room"));
    }
    Ok(mirror_unchecked(base, k, room))
}

/// Maps a point back into the room by repeated wall reflections.
pub fn fold_into_room(p: Vec3, room: &Room) -> Vec3 {
    let fold = |x: f64, l: f64| {
        let period = 2.0 * l;
        let r = x.rem_euclid(period);
        if r < l {
            r
        } else {
            period - r
        }
    };
    Vec3::new(fold(p.x, room.lx), fold(p.y, room.ly), fold(p.z, room.lz))
}

/// A mirror image together with its lattice index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorImage {
    pub index: LatticeIndex,
    pub position: Vec3,
}

/// All mirror images of `base` within Euclidean distance `radius` of `center`.
///
/// Each axis is scanned over `|k| <= ceil((radius + diag) / L) + 1`; the image
/// coordinate for index `k` lies within one room length of `k * L`, so this
/// box contains every candidate.
pub fn mirror_images_within(room: &Room, base: Vec3, center: Vec3, radius: f64) -> Result<Vec<MirrorImage>> {
    if !room.contains(base) {
        return domain(format!("base point {base:?} lies outside the room"));
    }
    if !(radius >= 0.0) {
        return domain(format!("radius must be nonnegative, got {radius}"));
    }
    let bound = |l: f64| ((radius + room.diagonal()) / l).ceil() as i32 + 1;
    let (bx, by, bz) = (bound(room.lx), bound(room.ly), bound(room.lz));
    let r2 = radius * radius;
    let mut out = Vec::new();
    for kx in -bx..=bx {
        let dx = mirror_coordinate(kx, room.lx, base.x) - center.x;
        let dx2 = dx * dx;
        if dx2 > r2 {
            continue;
        }
        for ky in -by..=by {
            let dy = mirror_coordinate(ky, room.ly, base.y) - center.y;
            let dxy2 = dx2 + dy * dy;
            if dxy2 > r2 {
                continue;
            }
            for kz in -bz..=bz {
                let dz = mirror_coordinate(kz, room.lz, base.z) - center.z;
                if dxy2 + dz * dz <= r2 {
                    let index = LatticeIndex::new(kx, ky, kz);
                    out.push(MirrorImage {
                        index,
                        position: Vec3::new(center.x + dx, center.y + dy, center.z + dz),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Lattice indices whose mirror image of `base` lies within `radius` of `center`.
pub fn enumerate_indices(room: &Room, base: Vec3, center: Vec3, radius: f64) -> Result<Vec<LatticeIndex>> {
    Ok(mirror_images_within(room, base, center, radius)?
        .into_iter()
        .map(|m| m.index)
        .collect())
}

/// Propagation delay between two points for wave speed `c`.
pub fn path_delay(source: Vec3, other: Vec3, c: f64) -> f64 {
    source.distance(other) / c
}

/// Unit vector pointing from `receiver` toward `source`.
pub fn arrival_direction(source: Vec3, receiver: Vec3) -> Result<Vec3> {
    let d = source - receiver;
    let n = d.norm();
    if !(n > 0.0) {
        return domain("arrival direction undefined for coincident positions");
    }
    Ok(d * (1.0 / n))
}

/// Direction of departure at the transmitter for path `k`, given the arrival
/// direction of the same path at the receiver.
///
/// The unfolded path runs from the image source to the receiver along
/// `-doa`; mapping that direction back through the (odd-axis) reflections of
/// mirror room `k` gives the physical departure direction.
pub fn departure_direction(k: LatticeIndex, doa: Vec3) -> Vec3 {
    let c = k.components();
    let s = |i: usize, v: f64| if c[i] % 2 == 0 { -v } else { v };
    Vec3::new(s(0, doa.x), s(1, doa.y), s(2, doa.z))
}

/// Power gain `g^|k| G_T(dod) G_R(doa) / (4 pi c tau / l_c)^2` of a path.
#[allow(clippy::too_many_arguments)]
pub fn path_power_gain(
    order: u32,
    delay: f64,
    dod: Vec3,
    doa: Vec3,
    tx: &Antenna,
    rx: &Antenna,
    wall_gain: f64,
    wavelength: f64,
    c: f64,
) -> Result<f64> {
    if !(delay > 0.0) {
        return domain(format!("path delay must be positive, got {delay}"));
    }
    if !(wall_gain > 0.0 && wall_gain <= 1.0) {
        return domain(format!("wall gain must lie in (0, 1], got {wall_gain}"));
    }
    let g = tx.gain(dod)? * rx.gain(doa)?;
    if g == 0.0 {
        return Ok(0.0);
    }
    let spreading = 4.0 * PI * c * delay / wavelength;
    Ok(wall_gain.powi(order as i32) * g / (spreading * spreading))
}
