//! Small geometric kernels shared by the mesh, fidelity and fabrication code.

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

/// Unnormalized normal `(b - a) x (c - a)`; its length is twice the area.
#[inline]
pub fn triangle_cross(a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    (b - a).cross(&(c - a))
}

#[inline]
pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * triangle_cross(a, b, c).norm()
}

#[inline]
pub fn triangle_centroid(a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    (a + b + c) / 3.0
}

/// Unit normal, or `None` when the triangle has (numerically) zero area.
pub fn triangle_normal(a: &Vec3, b: &Vec3, c: &Vec3) -> Option<Vec3> {
    let n = triangle_cross(a, b, c);
    let len = n.norm();
    if len > 0.0 && len.is_finite() {
        Some(n / len)
    } else {
        None
    }
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision Detection, 5.1.5).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Closed segment `pq` against closed triangle `abc`, non-coplanar configurations only.
pub fn segment_hits_triangle(p: &Vec3, q: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> bool {
    let n = triangle_cross(a, b, c);
    let scale = n.norm();
    if scale == 0.0 {
        return false;
    }
    let dp = n.dot(&(p - a));
    let dq = n.dot(&(q - a));
    let tol = 1e-12 * scale * ((p - a).norm() + (q - a).norm() + 1.0);
    if (dp > tol && dq > tol) || (dp < -tol && dq < -tol) {
        return false;
    }
    if dp.abs() <= tol && dq.abs() <= tol {
        // coplanar; treated as non-intersecting
        return false;
    }
    let t = dp / (dp - dq);
    let x = p + (q - p) * t;
    let c0 = triangle_cross(a, b, &x).dot(&n);
    let c1 = triangle_cross(b, c, &x).dot(&n);
    let c2 = triangle_cross(c, a, &x).dot(&n);
    let eps = -1e-12 * scale * scale;
    c0 >= eps && c1 >= eps && c2 >= eps
}

/// Intersection test for two triangles that share no vertex.
pub fn triangles_intersect(t0: [&Vec3; 3], t1: [&Vec3; 3]) -> bool {
    for i in 0..3 {
        let (p, q) = (t0[i], t0[(i + 1) % 3]);
        if segment_hits_triangle(p, q, t1[0], t1[1], t1[2]) {
            return true;
        }
        let (p, q) = (t1[i], t1[(i + 1) % 3]);
        if segment_hits_triangle(p, q, t0[0], t0[1], t0[2]) {
            return true;
        }
    }
    false
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_closest(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
        // dense barycentric grid
        let n = 400;
        let mut best = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let u = i as f64 / n as f64;
                let v = j as f64 / n as f64;
                let x = a + (b - a) * u + (c - a) * v;
                best = best.min((x - p).norm());
            }
        }
        best
    }

    #[test]
    fn closest_point_matches_dense_grid() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(2.0, 0.1, 0.0);
        let c = Vec3::new(0.5, 1.5, 0.3);
        let probes = [
            Vec3::new(0.5, 0.5, 1.0),
            Vec3::new(-1.0, -1.0, 0.0),
            Vec3::new(3.0, 0.0, 0.0),
            Vec3::new(1.5, 1.5, -0.4),
            Vec3::new(0.2, 2.0, 0.3),
            Vec3::new(1.0, -0.5, 0.2),
        ];
        for p in &probes {
            let q = closest_point_on_triangle(p, &a, &b, &c);
            let d = (q - p).norm();
            let oracle = brute_closest(p, &a, &b, &c);
            assert!(d <= oracle + 1e-12, "{d} vs {oracle}");
            assert!(oracle - d < 1e-2, "{d} vs {oracle}");
        }
    }

    #[test]
    fn crossing_triangles_detected() {
        let a = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let b = [
            Vec3::new(0.2, 0.2, -1.0),
            Vec3::new(0.2, 0.2, 1.0),
            Vec3::new(0.3, 0.9, 0.5),
        ];
        assert!(triangles_intersect([&a[0], &a[1], &a[2]], [&b[0], &b[1], &b[2]]));
        let c = [
            Vec3::new(0.0, 0.0, 0.5),
            Vec3::new(1.0, 0.0, 0.5),
            Vec3::new(0.0, 1.0, 0.5),
        ];
        assert!(!triangles_intersect([&a[0], &a[1], &a[2]], [&c[0], &c[1], &c[2]]));
    }
}
