//! Class patches thickened along averaged normals, and their connector holes.

use std::collections::HashMap;

use super::placement::{canonical_triangle, place_face, place_triangle, Placement};
use super::solid::{push_quad, Solid};
use super::FabConfig;
use crate::error::{Error, Result};
use crate::geometry::{triangle_cross, triangles_intersect, Vec3};
use crate::mesh::HalfedgeMesh;
use crate::metric::{ClusterState, ShapePoint, TrianglePoint};
use crate::subdivision::{CurvedClassification, CurvedPatch, Subdivided};

/// Largest accepted angle between an averaged normal and the patch normal.
pub const MAX_NORMAL_ANGLE_DEG: f64 = 80.0;

/// Patch surfaces in the canonical frame: corners in the `z = 0` plane,
/// outside towards `+z`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchLayers {
    pub inner: Vec<Vec3>,
    /// `outer[i]` is `inner[i]` moved along its averaged normal.
    pub outer: Vec<Vec3>,
    /// Inner surface triangles, counter-clockwise seen from `+z`.
    pub faces: Vec<[usize; 3]>,
    /// Indices of corners `A`, `B`, `C`.
    pub corners: [usize; 3],
    /// Boundary polyline of each side, counter-clockwise from corner to corner.
    pub sides: [Vec<usize>; 3],
}

/// A rectangular blind hole in one side of a patch.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleCavity {
    pub side: usize,
    /// Centre of the opening.
    pub center: Vec3,
    /// Unit direction along the side edge.
    pub along: Vec3,
    /// Unit direction across the thickness, in the opening plane.
    pub up: Vec3,
    /// Unit direction into the patch.
    pub inward: Vec3,
    /// Opening corners, counter-clockwise seen from outside.
    pub rim: [Vec3; 4],
    pub bottom: [Vec3; 4],
}

impl HoleCavity {
    /// Sorted pairwise corner distances; equal for congruent cavities.
    pub fn signature(&self) -> Vec<f64> {
        let pts: Vec<Vec3> = self.rim.iter().chain(&self.bottom).copied().collect();
        let mut d = Vec::with_capacity(28);
        for i in 0..8 {
            for j in i + 1..8 {
                d.push((pts[i] - pts[j]).norm());
            }
        }
        d.sort_by(f64::total_cmp);
        d
    }

    /// Wall and bottom triangles.
    pub fn triangles(&self) -> Vec<[Vec3; 3]> {
        let (r, b) = (&self.rim, &self.bottom);
        let mut out = Vec::with_capacity(10);
        for i in 0..4 {
            let j = (i + 1) % 4;
            out.push([r[i], r[j], b[j]]);
            out.push([r[i], b[j], b[i]]);
        }
        out.push([b[0], b[1], b[2]]);
        out.push([b[0], b[2], b[3]]);
        out
    }
}

/// One canonical part per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ThickenedPatch {
    pub class_id: usize,
    pub curved: bool,
    pub inner: [Vec3; 3],
    pub outer: [Vec3; 3],
    pub layers: PatchLayers,
    pub holes: Vec<HoleCavity>,
    pub solid: Solid,
    /// Placement of the canonical part onto every class instance.
    pub placements: Vec<Placement>,
}

impl ThickenedPatch {
    pub fn count(&self) -> usize {
        self.placements.len()
    }

    /// Corner quads `(v_a, v_b, v'_b, v'_a)` of the three sides.
    pub fn side_quads(&self) -> [[Vec3; 4]; 3] {
        std::array::from_fn(|s| {
            let a = self.layers.corners[s];
            let b = self.layers.corners[(s + 1) % 3];
            let l = &self.layers;
            [l.inner[a], l.inner[b], l.outer[b], l.outer[a]]
        })
    }
}

fn checked_normal(index: usize, n: Vec3) -> Result<Vec3> {
    let len = n.norm();
    let angle_deg = if len > 1e-12 && len.is_finite() {
        (n.z / len).clamp(-1.0, 1.0).acos().to_degrees()
    } else {
        90.0
    };
    if angle_deg > MAX_NORMAL_ANGLE_DEG {
        return Err(Error::DegenerateNormal {
            corner: index,
            angle_deg,
        });
    }
    Ok(n / len)
}

/// Mean of unit directions, expressed in each instance's canonical frame.
fn mean_local_normal<'a>(items: impl Iterator<Item = (&'a Placement, Vec3)>) -> Vec3 {
    items
        .map(|(pl, n)| {
            let l = pl.local_vector(&n);
            let len = l.norm();
            if len > 0.0 {
                l / len
            } else {
                l
            }
        })
        .sum()
}

/// Thickens the flat canonical triangle. `corner_normals[j][k]` is the
/// model-space normal at the vertex of instance `j` matched to corner `k`.
pub fn thicken(
    class_id: usize,
    canonical: [Vec3; 3],
    placements: Vec<Placement>,
    corner_normals: &[[Vec3; 3]],
    thickness: f64,
) -> Result<ThickenedPatch> {
    let mut outer = canonical;
    for k in 0..3 {
        let n = mean_local_normal(placements.iter().zip(corner_normals).map(|(pl, ns)| (pl, ns[k])));
        outer[k] = canonical[k] + checked_normal(k, n)? * thickness;
    }
    let layers = PatchLayers {
        inner: canonical.to_vec(),
        outer: outer.to_vec(),
        faces: vec![[0, 1, 2]],
        corners: [0, 1, 2],
        sides: [vec![0, 1], vec![1, 2], vec![2, 0]],
    };
    let solid = assemble(&layers, &[]);
    solid.validate()?;
    Ok(ThickenedPatch {
        class_id,
        curved: false,
        inner: canonical,
        outer,
        layers,
        holes: Vec::new(),
        solid,
        placements,
    })
}

/// Canonical part of one class of a planar decomposition. The inner
/// triangle is the class centroid; normals are the vertex normals of `mesh`.
pub fn thicken_class(
    mesh: &HalfedgeMesh,
    state: &ClusterState<TrianglePoint>,
    class_id: usize,
    cfg: &FabConfig,
) -> Result<ThickenedPatch> {
    cfg.validate()?;
    if class_id >= state.k() {
        return Err(Error::Config(format!(
            "class {class_id} out of range ({} classes)",
            state.k()
        )));
    }
    let canonical = canonical_triangle(&state.centroids[class_id]);
    let members: Vec<usize> = mesh.face_ids().filter(|&f| state.labels[f] == class_id).collect();
    if members.is_empty() {
        return Err(Error::EmptyCluster);
    }
    let normals: HashMap<usize, Vec3> = members
        .iter()
        .flat_map(|&f| mesh.face_vertices(f))
        .map(|v| Ok((v, mesh.vertex_normal(v)?)))
        .collect::<Result<_>>()?;
    let placements: Vec<Placement> = members.iter().map(|&f| place_face(mesh, f, &canonical)).collect();
    let corner_normals: Vec<[Vec3; 3]> = placements.iter().map(|pl| pl.corners.map(|v| normals[&v])).collect();
    thicken(class_id, canonical, placements, &corner_normals, cfg.thickness)
}

/// Canonical part of one class of curved patches. The inner surface is the
/// class member closest to the centroid; each vertex normal is averaged over
/// the nearest vertices of all members, in their canonical frames.
pub fn thicken_curved_class(
    sub: &Subdivided,
    patches: &[CurvedPatch],
    classification: &CurvedClassification,
    class_id: usize,
    cfg: &FabConfig,
) -> Result<ThickenedPatch> {
    cfg.validate()?;
    let state = &classification.state;
    if class_id >= state.k() {
        return Err(Error::Config(format!(
            "class {class_id} out of range ({} classes)",
            state.k()
        )));
    }
    let members: Vec<usize> = (0..patches.len()).filter(|&i| state.labels[i] == class_id).collect();
    let centroid = state.centroids[class_id];
    let medoid = *members
        .iter()
        .min_by(|&&a, &&b| {
            let da = classification.points[a].distance(&centroid);
            let db = classification.points[b].distance(&centroid);
            da.total_cmp(&db)
        })
        .ok_or(Error::EmptyCluster)?;
    let canonical = canonical_triangle(&patches[medoid].corner);
    let place = |i: usize| {
        let p = &patches[i];
        place_triangle(p.parent_face, sub.base_corners[p.parent_face], p.corners, &canonical)
    };
    let placements: Vec<Placement> = members.iter().map(|&i| place(i)).collect();
    let pm = place(medoid);
    let mp = &patches[medoid];

    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut model_ids = Vec::new();
    let mut faces = Vec::with_capacity(mp.faces.len());
    for g in mp.faces.clone() {
        let tri = sub.mesh.face_vertices(g).map(|v| {
            *index.entry(v).or_insert_with(|| {
                model_ids.push(v);
                model_ids.len() - 1
            })
        });
        faces.push(if pm.reflected { [tri[0], tri[2], tri[1]] } else { tri });
    }
    let mut inner: Vec<Vec3> = model_ids
        .iter()
        .map(|&v| pm.local_point(&sub.mesh.position(v)))
        .collect();
    let corners = pm.corners.map(|v| index[&v]);
    for k in 0..3 {
        inner[corners[k]] = canonical[k];
    }

    let mut ring: Vec<usize> = mp.boundary.iter().map(|v| index[v]).collect();
    if pm.reflected {
        ring.reverse();
    }
    let start = ring.iter().position(|&i| i == corners[0]).expect("corner on boundary");
    ring.rotate_left(start);
    let at = |c: usize| ring.iter().position(|&i| i == c).expect("corner on boundary");
    let (ib, ic) = (at(corners[1]), at(corners[2]));
    let mut closing = ring[ic..].to_vec();
    closing.push(ring[0]);
    let sides = [ring[..=ib].to_vec(), ring[ib..=ic].to_vec(), closing];

    let mut sums = vec![Vec3::zeros(); inner.len()];
    for (&i, pl) in members.iter().zip(&placements) {
        let verts: Vec<usize> = {
            let mut vs: Vec<usize> = patches[i]
                .faces
                .clone()
                .flat_map(|g| sub.mesh.face_vertices(g))
                .collect();
            vs.sort_unstable();
            vs.dedup();
            vs
        };
        let local: Vec<Vec3> = verts.iter().map(|&v| pl.local_point(&sub.mesh.position(v))).collect();
        for (k, p) in inner.iter().enumerate() {
            let nearest = (0..verts.len())
                .min_by(|&a, &b| (local[a] - p).norm_squared().total_cmp(&(local[b] - p).norm_squared()))
                .expect("patch has vertices");
            sums[k] += mean_local_normal(std::iter::once((pl, sub.mesh.vertex_normal(verts[nearest])?)));
        }
    }
    let mut outer = Vec::with_capacity(inner.len());
    for (k, p) in inner.iter().enumerate() {
        outer.push(p + checked_normal(k, sums[k])? * cfg.thickness);
    }
    let layers = PatchLayers {
        inner,
        outer,
        faces,
        corners,
        sides,
    };
    let solid = assemble(&layers, &[]);
    solid.validate()?;
    Ok(ThickenedPatch {
        class_id,
        curved: true,
        inner: canonical,
        outer: corners.map(|c| layers.outer[c]),
        layers,
        holes: Vec::new(),
        solid,
        placements,
    })
}

/// Builds the closed solid from the two layers, side strips and cavities.
fn assemble(layers: &PatchLayers, holes: &[HoleCavity]) -> Solid {
    let n = layers.inner.len();
    let mut positions: Vec<Vec3> = layers.inner.iter().chain(&layers.outer).copied().collect();
    let mut faces = Vec::new();
    for f in &layers.faces {
        faces.push([f[0], f[2], f[1]]);
    }
    for f in &layers.faces {
        faces.push([f[0] + n, f[1] + n, f[2] + n]);
    }
    for (s, poly) in layers.sides.iter().enumerate() {
        match holes.iter().find(|h| h.side == s) {
            None => {
                for w in poly.windows(2) {
                    push_quad(&mut faces, w[0], w[1], w[1] + n, w[0] + n);
                }
            }
            Some(hole) => {
                // only the rungs around the rim are retriangulated, so curved
                // sides stay close to the hole plane
                let t = |i: usize| (positions[i] - hole.center).dot(&hole.along);
                let half = (hole.rim[1] - hole.rim[0]).norm() / 2.0;
                let last = poly.len() - 1;
                let a = (0..=last)
                    .rev()
                    .find(|&j| t(poly[j]).max(t(poly[j] + n)) < -half)
                    .unwrap_or(0);
                let b = (0..=last)
                    .find(|&j| t(poly[j]).min(t(poly[j] + n)) > half)
                    .unwrap_or(last)
                    .max(a + 1);
                for w in poly[..=a].windows(2).chain(poly[b..].windows(2)) {
                    push_quad(&mut faces, w[0], w[1], w[1] + n, w[0] + n);
                }
                let window = &poly[a..=b];
                let base = positions.len();
                positions.extend(hole.rim);
                positions.extend(hole.bottom);
                let ring: Vec<usize> = window
                    .iter()
                    .copied()
                    .chain(window.iter().rev().map(|&i| i + n))
                    .collect();
                zip_annulus(&mut faces, &positions, &ring, base, hole);
                for i in 0..4 {
                    let j = (i + 1) % 4;
                    push_quad(&mut faces, base + i, base + j, base + 4 + j, base + 4 + i);
                }
                push_quad(&mut faces, base + 4, base + 5, base + 6, base + 7);
            }
        }
    }
    Solid::new(positions, faces)
}

/// Triangulates the planar region between the side outline `ring` and the
/// hole rim, counter-clockwise in the `(along, up)` basis.
fn zip_annulus(faces: &mut Vec<[usize; 3]>, positions: &[Vec3], ring: &[usize], rim: usize, hole: &HoleCavity) {
    let uv = |p: &Vec3| {
        let d = p - hole.center;
        (d.dot(&hole.along), d.dot(&hole.up))
    };
    let ids: Vec<usize> = ring.iter().copied().chain(rim..rim + 4).collect();
    let mut coords = Vec::with_capacity(2 * ids.len());
    for &i in &ids {
        let (u, v) = uv(&positions[i]);
        coords.extend([u, v]);
    }
    let tris = earcutr::earcut(&coords, &[ring.len()], 2).expect("side outline triangulates");
    for t in tris.chunks(3) {
        let [a, b, c] = [t[0], t[1], t[2]];
        let (pa, pb, pc) = (uv(&positions[ids[a]]), uv(&positions[ids[b]]), uv(&positions[ids[c]]));
        let cross = (pb.0 - pa.0) * (pc.1 - pa.1) - (pb.1 - pa.1) * (pc.0 - pa.0);
        if cross > 0.0 {
            faces.push([ids[a], ids[b], ids[c]]);
        } else {
            faces.push([ids[a], ids[c], ids[b]]);
        }
    }
}

/// Cavity with the given opening centre and plane, checked against the side.
/// `base` and `top` are the inner and outer ends of the side at the hole.
fn cavity(
    patch: &ThickenedPatch,
    side: usize,
    center: Vec3,
    up: Vec3,
    base: Vec3,
    top: Vec3,
    cfg: &FabConfig,
) -> Result<HoleCavity> {
    let layers = &patch.layers;
    let a = layers.inner[layers.corners[side]];
    let b = layers.inner[layers.corners[(side + 1) % 3]];
    let edge = b - a;
    let along = edge.normalize();
    let side_height = (top - base).dot(&up);
    let c = cfg.clearance;
    if cfg.hole_width + 2.0 * c > edge.norm() {
        return Err(Error::Overlap(format!(
            "side {side}: hole width {} plus clearance exceeds edge length {}",
            cfg.hole_width,
            edge.norm()
        )));
    }
    let h_e = (center - base).dot(&up);
    let half = cfg.hole_height / 2.0 + c;
    if half > h_e || half > side_height - h_e {
        return Err(Error::Overlap(format!(
            "side {side}: hole height {} plus clearance exceeds side height {side_height}",
            cfg.hole_height
        )));
    }
    let inward = up.cross(&along);
    let wa = along * (cfg.hole_width / 2.0);
    let hu = up * (cfg.hole_height / 2.0);
    let rim = [center - wa - hu, center + wa - hu, center + wa + hu, center - wa + hu];
    let bottom = rim.map(|p| p + inward * cfg.hole_depth);
    for p in &bottom {
        if !patch.solid.contains(p) {
            return Err(Error::Overlap(format!(
                "side {side}: hole depth {} reaches past the patch",
                cfg.hole_depth
            )));
        }
    }
    Ok(HoleCavity {
        side,
        center,
        along,
        up,
        inward,
        rim,
        bottom,
    })
}

fn finish(patch: &ThickenedPatch, holes: Vec<HoleCavity>) -> Result<ThickenedPatch> {
    for i in 0..holes.len() {
        for j in i + 1..holes.len() {
            for ta in holes[i].triangles() {
                for tb in holes[j].triangles() {
                    if triangles_intersect([&ta[0], &ta[1], &ta[2]], [&tb[0], &tb[1], &tb[2]]) {
                        return Err(Error::Overlap(format!(
                            "holes of sides {} and {} intersect",
                            holes[i].side, holes[j].side
                        )));
                    }
                }
            }
        }
    }
    let solid = assemble(&patch.layers, &holes);
    solid
        .validate()
        .map_err(|e| Error::Overlap(format!("holed part is invalid: {e}")))?;
    Ok(ThickenedPatch {
        holes,
        solid,
        ..patch.clone()
    })
}

/// Holes for flat patches: each opening is centred on the rectangle raised
/// from the side edge perpendicular to the inner surface up to the outer one.
pub fn cut_holes_planar(patch: &ThickenedPatch, cfg: &FabConfig) -> Result<ThickenedPatch> {
    cfg.validate()?;
    let l = &patch.layers;
    let outer = l.corners.map(|i| l.outer[i]);
    let normal = (outer[1] - outer[0]).cross(&(outer[2] - outer[0]));
    let mut holes = Vec::with_capacity(3);
    for s in 0..3 {
        let a = l.inner[l.corners[s]];
        let b = l.inner[l.corners[(s + 1) % 3]];
        let m = (a + b) * 0.5;
        // height of the outer plane above m along +z
        let h = normal.dot(&(outer[0] - m)) / normal.z;
        let top = m + Vec3::z() * h;
        holes.push(cavity(patch, s, m + Vec3::z() * (h / 2.0), Vec3::z(), m, top, cfg)?);
    }
    finish(patch, holes)
}

/// Holes for curved patches: `c` is the middle of the side's inner boundary
/// and `d` its projection onto the outer boundary. The opening centre lies
/// half the thickness from `d` towards `c`, in the plane through the side's
/// corners and `d`.
pub fn cut_holes_curved(patch: &ThickenedPatch, cfg: &FabConfig) -> Result<ThickenedPatch> {
    cfg.validate()?;
    let l = &patch.layers;
    let mut holes = Vec::with_capacity(3);
    for s in 0..3 {
        let inner: Vec<Vec3> = l.sides[s].iter().map(|&i| l.inner[i]).collect();
        let outer: Vec<Vec3> = l.sides[s].iter().map(|&i| l.outer[i]).collect();
        let (c, seg) = polyline_middle(&inner);
        let d = project_onto_polyline(&outer, &c).ok_or_else(|| {
            Error::Projection(format!("side {s}: the inner midpoint projects past the outer boundary"))
        })?;
        let along = (inner[inner.len() - 1] - inner[0]).normalize();
        let n = side_normal(l, s, seg);
        let mut up = (n - along * along.dot(&n)).normalize();
        if up.dot(&(d - c)) < 0.0 {
            up = -up;
        }
        let inward = up.cross(&along);
        // the rung c-d may lean against the surface normal; recess the rim
        // so that both of its long edges stay behind the side
        let rung = d - c;
        let lean = (rung.dot(&inward) / rung.dot(&up)).abs();
        let center = (c + d) * 0.5 + inward * (lean * cfg.hole_height / 2.0);
        holes.push(cavity(patch, s, center, up, c, d, cfg)?);
    }
    finish(patch, holes)
}

/// Point halfway along a polyline by arc length, with its segment index.
fn polyline_middle(points: &[Vec3]) -> (Vec3, usize) {
    let total: f64 = points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let mut left = total / 2.0;
    for (i, w) in points.windows(2).enumerate() {
        let len = (w[1] - w[0]).norm();
        if left <= len {
            return (w[0] + (w[1] - w[0]) * (left / len), i);
        }
        left -= len;
    }
    (points[points.len() - 1], points.len() - 2)
}

/// Mean unit normal of the inner and outer faces along one side segment.
fn side_normal(l: &PatchLayers, side: usize, seg: usize) -> Vec3 {
    let (a, b) = (l.sides[side][seg], l.sides[side][seg + 1]);
    let f = l
        .faces
        .iter()
        .find(|f| f.contains(&a) && f.contains(&b))
        .expect("every side segment borders a face");
    let unit = |p: &[Vec3]| triangle_cross(&p[f[0]], &p[f[1]], &p[f[2]]).normalize();
    (unit(&l.inner) + unit(&l.outer)).normalize()
}

/// Closest point of a polyline, unless it is one of the polyline's ends.
fn project_onto_polyline(points: &[Vec3], q: &Vec3) -> Option<Vec3> {
    let mut best: Option<(f64, Vec3, bool)> = None;
    let last = points.len() - 2;
    for (i, w) in points.windows(2).enumerate() {
        let dir = w[1] - w[0];
        let t = ((q - w[0]).dot(&dir) / dir.norm_squared()).clamp(0.0, 1.0);
        let p = w[0] + dir * t;
        let at_end = (i == 0 && t == 0.0) || (i == last && t == 1.0);
        let d = (p - q).norm_squared();
        if best.is_none_or(|b| d < b.0) {
            best = Some((d, p, at_end));
        }
    }
    best.filter(|b| !b.2).map(|b| b.1)
}
