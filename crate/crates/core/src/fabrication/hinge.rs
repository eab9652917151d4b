//! Two-part connector joining the holes of neighbouring patches.

use super::solid::{push_quad, Solid};
use super::FabConfig;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Segments of the half-circle groove.
const GROOVE_SEGMENTS: usize = 16;

/// Connector frame: `x` points into the hole of half `a`, `y` runs along the
/// shared patch edge (the rod axis through the origin), `z` across the
/// thickness. Half `b` is the mirror image of `a` through `x = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeConnector {
    pub half_a: Solid,
    pub half_b: Solid,
    pub axis_origin: Vec3,
    pub axis_direction: Vec3,
    /// Tongue `[width, height, depth]`.
    pub tongue: [f64; 3],
    /// Length of the knuckle between the rod axis and the tongue.
    pub knuckle: f64,
    pub channel_diameter: f64,
}

/// Each half is a prism along the rod axis: a knuckle holding half of the
/// rod channel, followed by the tongue that enters one hole.
pub fn make_hinge(cfg: &FabConfig) -> Result<HingeConnector> {
    cfg.validate()?;
    let [w, h, d] = cfg.tongue();
    let channel = cfg.channel_diameter();
    let rho = channel / 2.0;
    if rho >= h / 2.0 {
        return Err(Error::Config(format!(
            "rod channel {channel} does not fit the tongue height {h}"
        )));
    }
    let knuckle = rho + cfg.clearance.max(0.1 * h);
    let half_a = half_solid(w, h, knuckle + d, rho);
    let half_b = half_a.mirrored_x();
    Ok(HingeConnector {
        half_a,
        half_b,
        axis_origin: Vec3::zeros(),
        axis_direction: Vec3::y(),
        tongue: [w, h, d],
        knuckle,
        channel_diameter: channel,
    })
}

/// Box `[0, length] x [-w/2, w/2] x [-h/2, h/2]` minus a half-cylinder of
/// radius `rho` around the `y` axis.
fn half_solid(w: f64, h: f64, length: f64, rho: f64) -> Solid {
    let corner = (h / 2.0).atan2(length);
    let mut angles: Vec<f64> = (0..=GROOVE_SEGMENTS)
        .map(|i| std::f64::consts::FRAC_PI_2 - std::f64::consts::PI * i as f64 / GROOVE_SEGMENTS as f64)
        .collect();
    angles.extend([corner, -corner]);
    angles.sort_by(|a, b| b.total_cmp(a));
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    // groove point and the matching point on the box outline, in (x, z)
    let section: Vec<((f64, f64), (f64, f64))> = angles
        .iter()
        .map(|&t| {
            let (s, c) = t.sin_cos();
            let groove = (rho * c, rho * s);
            let outline = if t.abs() >= corner {
                let z = (h / 2.0).copysign(s);
                (if c.abs() < 1e-15 { 0.0 } else { z * c / s }, z)
            } else {
                (length, length * s / c)
            };
            (groove, outline)
        })
        .collect();
    let n = section.len();
    let mut positions = Vec::with_capacity(4 * n);
    for y in [-w / 2.0, w / 2.0] {
        for &((gx, gz), _) in &section {
            positions.push(Vec3::new(gx, y, gz));
        }
        for &(_, (ox, oz)) in &section {
            positions.push(Vec3::new(ox, y, oz));
        }
    }
    let g = |cap: usize, i: usize| cap * 2 * n + i;
    let o = |cap: usize, i: usize| cap * 2 * n + n + i;
    let mut faces = Vec::new();
    for i in 0..n - 1 {
        push_quad(&mut faces, g(0, i), o(0, i), o(0, i + 1), g(0, i + 1));
        push_quad(&mut faces, g(1, i), g(1, i + 1), o(1, i + 1), o(1, i));
    }
    // boundary of cap 0 with its direction in cap 0
    let mut boundary = Vec::new();
    for i in 0..n - 1 {
        boundary.push((o(0, i), o(0, i + 1)));
        boundary.push((g(0, i + 1), g(0, i)));
    }
    boundary.push((g(0, 0), o(0, 0)));
    boundary.push((o(0, n - 1), g(0, n - 1)));
    let lift = 2 * n;
    for (u, v) in boundary {
        push_quad(&mut faces, v, u, u + lift, v + lift);
    }
    let mut solid = Solid::new(positions, faces);
    if solid.signed_volume() < 0.0 {
        for f in &mut solid.faces {
            f.swap(1, 2);
        }
    }
    solid
}

#[cfg(test)]
mod tests {
    use super::*;

    fn printable() -> FabConfig {
        FabConfig {
            thickness: 6.0,
            hole_width: 6.0,
            hole_height: 4.0,
            hole_depth: 8.0,
            clearance: 0.15,
            rod_diameter: 1.5,
        }
    }

    #[test]
    fn halves_are_closed_and_fit_their_holes() {
        let cfg = printable();
        let hinge = make_hinge(&cfg).unwrap();
        for half in [&hinge.half_a, &hinge.half_b] {
            half.validate().unwrap();
            let b = half.aabb();
            assert!((b.max.y - b.min.y - 5.7).abs() < 1e-12);
            assert!((b.max.z - b.min.z - 3.7).abs() < 1e-12);
        }
        let t = hinge.tongue;
        for (got, hole) in t.iter().zip([cfg.hole_width, cfg.hole_height, cfg.hole_depth]) {
            assert!(*got <= hole - 2.0 * cfg.clearance + 1e-12);
        }
        assert!((hinge.channel_diameter - (cfg.rod_diameter + cfg.clearance)).abs() < 1e-15);
        // tongue length past the knuckle
        let b = hinge.half_a.aabb();
        assert!((b.max.x - hinge.knuckle - 7.7).abs() < 1e-12);
    }

    #[test]
    fn halves_are_mirror_images() {
        let hinge = make_hinge(&printable()).unwrap();
        let back = hinge.half_b.mirrored_x();
        assert_eq!(back, hinge.half_a);
        assert!((hinge.half_a.signed_volume() - hinge.half_b.signed_volume()).abs() < 1e-9);
    }

    #[test]
    fn channel_is_hollow() {
        let hinge = make_hinge(&printable()).unwrap();
        let r = hinge.channel_diameter / 2.0;
        assert!(!hinge.half_a.contains(&Vec3::new(0.5 * r, 0.1, 0.01)));
        assert!(hinge.half_a.contains(&Vec3::new(1.5 * r, 0.1, 0.01)));
        assert!(hinge.half_a.contains(&Vec3::new(hinge.knuckle + 1.0, 0.1, 0.01)));
    }

    #[test]
    fn clearance_too_large_is_rejected() {
        let cfg = FabConfig {
            clearance: 3.0,
            ..printable()
        };
        assert!(matches!(make_hinge(&cfg), Err(Error::Config(_))));
        let fat_rod = FabConfig {
            rod_diameter: 3.6,
            ..printable()
        };
        assert!(matches!(make_hinge(&fat_rod), Err(Error::Config(_))));
    }
}
