use std::collections::HashMap;

use crate::geometry::Vec3;

/// Merges vertices closer than `tolerance`, returning the surviving positions
/// (first occurrence order) and a per-input-vertex index into them.
pub fn weld_vertices(positions: &[Vec3], tolerance: f64) -> (Vec<Vec3>, Vec<usize>) {
    let mut out: Vec<Vec3> = Vec::new();
    let mut remap = Vec::with_capacity(positions.len());
    if tolerance <= 0.0 {
        // exact-match welding only
        let mut seen: HashMap<[u64; 3], usize> = HashMap::new();
        for p in positions {
            let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
            let id = *seen.entry(key).or_insert_with(|| {
                out.push(*p);
                out.len() - 1
            });
            remap.push(id);
        }
        return (out, remap);
    }

    let cell = |p: &Vec3| -> [i64; 3] {
        [
            (p.x / tolerance).floor() as i64,
            (p.y / tolerance).floor() as i64,
            (p.z / tolerance).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let tol2 = tolerance * tolerance;
    for p in positions {
        let c = cell(p);
        let mut found = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &id in ids {
                            if (out[id] - p).norm_squared() <= tol2 {
                                found = Some(match found {
                                    Some(prev) if prev < id => prev,
                                    _ => id,
                                });
                            }
                        }
                    }
                }
            }
        }
        let id = match found {
            Some(id) => id,
            None => {
                out.push(*p);
                let id = out.len() - 1;
                grid.entry(c).or_default().push(id);
                id
            }
        };
        remap.push(id);
    }
    (out, remap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welds_near_duplicates_and_keeps_order() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1e-9, 0.0, 0.0),
            Vec3::new(1.0, 2e-9, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let (out, map) = weld_vertices(&pts, 1e-7);
        assert_eq!(out.len(), 3);
        assert_eq!(map, vec![0, 1, 0, 1, 2]);
    }

    #[test]
    fn zero_tolerance_is_exact() {
        let pts = vec![
            Vec3::new(0.5, 0.0, 0.0),
            Vec3::new(0.5, 0.0, 0.0),
            Vec3::new(0.5, 1e-15, 0.0),
        ];
        let (out, map) = weld_vertices(&pts, 0.0);
        assert_eq!(out.len(), 2);
        assert_eq!(map, vec![0, 0, 1]);
    }
}
