//! Index-based halfedge triangle mesh.
//!
//! Halfedge `h` belongs to face `h / 3` and runs from corner `h % 3` to the next
//! corner of that face, so `next`, `prev`, `face` and `origin` are implicit and
//! only the twin table is stored. Flips and collapses mark records dead instead
//! of reindexing; [`HalfedgeMesh::compact`] reclaims them.

mod io;
mod weld;

pub(crate) use io::save_triangles;
pub use io::{load_mesh, save_mesh, MeshFormat};
pub use weld::weld_vertices;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Aabb, Vec3};

pub type VertexId = usize;
pub type FaceId = usize;
pub type HalfedgeId = usize;

const INVALID: u32 = u32::MAX;

/// Faces below `DEGENERATE_AREA_FACTOR * diagonal^2` are rejected at load.
pub const DEGENERATE_AREA_FACTOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub diagonal: f64,
}

impl BoundingBox {
    pub fn from_aabb(b: &Aabb) -> Self {
        BoundingBox {
            min: [b.min.x, b.min.y, b.min.z],
            max: [b.max.x, b.max.y, b.max.z],
            diagonal: b.diagonal(),
        }
    }
}

/// Old-to-new id maps produced by [`HalfedgeMesh::compact`].
#[derive(Debug, Clone)]
pub struct CompactMap {
    pub vertices: Vec<Option<VertexId>>,
    pub faces: Vec<Option<FaceId>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfedgeMesh {
    positions: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    twins: Vec<u32>,
    vertex_halfedge: Vec<u32>,
    face_alive: Vec<bool>,
    vertex_alive: Vec<bool>,
    dead_faces: usize,
    dead_vertices: usize,
}

#[inline]
fn next_he(h: HalfedgeId) -> HalfedgeId {
    if h % 3 == 2 {
        h - 2
    } else {
        h + 1
    }
}

#[inline]
fn prev_he(h: HalfedgeId) -> HalfedgeId {
    if h.is_multiple_of(3) {
        h + 2
    } else {
        h - 1
    }
}

impl HalfedgeMesh {
    /// Builds a closed, oriented, 2-manifold mesh from an indexed triangle list.
    pub fn from_triangles(positions: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let nv = positions.len();
        if faces.is_empty() {
            return Err(Error::Topology("mesh has no faces".into()));
        }
        if nv >= INVALID as usize || faces.len() * 3 >= INVALID as usize {
            return Err(Error::Topology("mesh too large for 32-bit ids".into()));
        }
        let mut faces32 = Vec::with_capacity(faces.len());
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= nv {
                    return Err(Error::Topology(format!(
                        "face {fi} references vertex {v} (only {nv} vertices)"
                    )));
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Topology(format!("face {fi} repeats a vertex")));
            }
            faces32.push([f[0] as u32, f[1] as u32, f[2] as u32]);
        }

        let nh = faces32.len() * 3;
        let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(nh);
        for (fi, f) in faces32.iter().enumerate() {
            for i in 0..3 {
                let key = (f[i], f[(i + 1) % 3]);
                if directed.insert(key, (3 * fi + i) as u32).is_some() {
                    return Err(Error::Topology(format!(
                        "edge ({}, {}) is non-manifold or inconsistently oriented",
                        key.0, key.1
                    )));
                }
            }
        }
        let mut twins = vec![INVALID; nh];
        for (&(a, b), &h) in &directed {
            match directed.get(&(b, a)) {
                Some(&g) => twins[h as usize] = g,
                None => return Err(Error::Topology(format!("boundary edge ({a}, {b}): mesh is not closed"))),
            }
        }

        let mut vertex_halfedge = vec![INVALID; nv];
        for h in 0..nh {
            let v = faces32[h / 3][h % 3] as usize;
            if vertex_halfedge[v] == INVALID {
                vertex_halfedge[v] = h as u32;
            }
        }
        if let Some(v) = vertex_halfedge.iter().position(|&h| h == INVALID) {
            return Err(Error::Topology(format!("vertex {v} is not referenced by any face")));
        }

        let nf = faces32.len();
        let mesh = HalfedgeMesh {
            positions,
            faces: faces32,
            twins,
            vertex_halfedge,
            face_alive: vec![true; nf],
            vertex_alive: vec![true; nv],
            dead_faces: 0,
            dead_vertices: 0,
        };

        // every corner of a vertex must be reachable from a single fan
        let mut corner_count = vec![0usize; nv];
        for f in &mesh.faces {
            for &v in f {
                corner_count[v as usize] += 1;
            }
        }
        for v in 0..nv {
            let fan = mesh.outgoing(v).count();
            if fan != corner_count[v] {
                return Err(Error::Topology(format!(
                    "vertex {v} is non-manifold ({} faces, fan of {fan})",
                    corner_count[v]
                )));
            }
        }
        Ok(mesh)
    }

    /// Rejects faces whose area is below `1e-12 * diagonal^2`.
    pub fn check_nondegenerate(&self) -> Result<()> {
        let diag = self.bounding_box().diagonal;
        let eps = DEGENERATE_AREA_FACTOR * diag * diag;
        for f in self.face_ids() {
            let a = self.face_area(f);
            if !(a > eps) {
                return Err(Error::Degenerate(format!("face {f} has area {a:e}")));
            }
        }
        Ok(())
    }

    pub fn n_vertices(&self) -> usize {
        self.positions.len() - self.dead_vertices
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len() - self.dead_faces
    }

    pub fn n_edges(&self) -> usize {
        self.n_faces() * 3 / 2
    }

    /// Id capacity including dead slots.
    pub fn vertex_capacity(&self) -> usize {
        self.positions.len()
    }

    pub fn face_capacity(&self) -> usize {
        self.faces.len()
    }

    pub fn halfedge_capacity(&self) -> usize {
        self.twins.len()
    }

    pub fn is_compact(&self) -> bool {
        self.dead_faces == 0 && self.dead_vertices == 0
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_faces() as i64
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.positions.len()).filter(move |&v| self.vertex_alive[v])
    }

    pub fn face_ids(&self) -> impl Iterator<Item = FaceId> + '_ {
        (0..self.faces.len()).filter(move |&f| self.face_alive[f])
    }

    pub fn is_face_alive(&self, f: FaceId) -> bool {
        self.face_alive[f]
    }

    pub fn is_vertex_alive(&self, v: VertexId) -> bool {
        self.vertex_alive[v]
    }

    /// One representative halfedge per undirected edge, in ascending id.
    pub fn edge_ids(&self) -> impl Iterator<Item = HalfedgeId> + '_ {
        (0..self.twins.len()).filter(move |&h| self.face_alive[h / 3] && h < self.twins[h] as usize)
    }

    #[inline]
    pub fn position(&self, v: VertexId) -> Vec3 {
        self.positions[v]
    }

    #[inline]
    pub fn set_position(&mut self, v: VertexId, p: Vec3) {
        self.positions[v] = p;
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    #[inline]
    pub fn face_vertices(&self, f: FaceId) -> [VertexId; 3] {
        let t = self.faces[f];
        [t[0] as usize, t[1] as usize, t[2] as usize]
    }

    #[inline]
    pub fn face_positions(&self, f: FaceId) -> [Vec3; 3] {
        let t = self.faces[f];
        [
            self.positions[t[0] as usize],
            self.positions[t[1] as usize],
            self.positions[t[2] as usize],
        ]
    }

    #[inline]
    pub fn origin(&self, h: HalfedgeId) -> VertexId {
        self.faces[h / 3][h % 3] as usize
    }

    #[inline]
    pub fn target(&self, h: HalfedgeId) -> VertexId {
        self.origin(next_he(h))
    }

    #[inline]
    pub fn next(&self, h: HalfedgeId) -> HalfedgeId {
        next_he(h)
    }

    #[inline]
    pub fn prev(&self, h: HalfedgeId) -> HalfedgeId {
        prev_he(h)
    }

    #[inline]
    pub fn twin(&self, h: HalfedgeId) -> HalfedgeId {
        self.twins[h] as usize
    }

    #[inline]
    pub fn face(&self, h: HalfedgeId) -> FaceId {
        h / 3
    }

    /// Halfedges leaving `v`, walking around its fan.
    pub fn outgoing(&self, v: VertexId) -> Outgoing<'_> {
        let start = self.vertex_halfedge[v] as usize;
        Outgoing {
            mesh: self,
            start,
            current: Some(start),
        }
    }

    pub fn valence(&self, v: VertexId) -> usize {
        self.outgoing(v).count()
    }

    pub fn vertex_neighbors(&self, v: VertexId) -> Vec<VertexId> {
        self.outgoing(v).map(|h| self.target(h)).collect()
    }

    pub fn vertex_faces(&self, v: VertexId) -> Vec<FaceId> {
        self.outgoing(v).map(|h| h / 3).collect()
    }

    pub fn find_halfedge(&self, from: VertexId, to: VertexId) -> Option<HalfedgeId> {
        self.outgoing(from).find(|&h| self.target(h) == to)
    }

    pub fn edge_length(&self, h: HalfedgeId) -> f64 {
        (self.positions[self.target(h)] - self.positions[self.origin(h)]).norm()
    }

    pub fn face_area(&self, f: FaceId) -> f64 {
        let [a, b, c] = self.face_positions(f);
        geometry::triangle_area(&a, &b, &c)
    }

    pub fn face_normal(&self, f: FaceId) -> Option<Vec3> {
        let [a, b, c] = self.face_positions(f);
        geometry::triangle_normal(&a, &b, &c)
    }

    pub fn face_centroid(&self, f: FaceId) -> Vec3 {
        let [a, b, c] = self.face_positions(f);
        geometry::triangle_centroid(&a, &b, &c)
    }

    /// Mean of the unit normals of the incident faces, renormalized.
    pub fn vertex_normal(&self, v: VertexId) -> Result<Vec3> {
        let mut sum = Vec3::zeros();
        let mut any = false;
        for h in self.outgoing(v) {
            if let Some(n) = self.face_normal(h / 3) {
                sum += n;
                any = true;
            }
        }
        let len = sum.norm();
        if !any || !(len > 1e-300) {
            return Err(Error::Degenerate(format!(
                "vertex {v}: incident faces have no usable normal"
            )));
        }
        Ok(sum / len)
    }

    pub fn vertex_normals(&self) -> Result<Vec<Vec3>> {
        let mut out = vec![Vec3::zeros(); self.positions.len()];
        for v in self.vertex_ids() {
            out[v] = self.vertex_normal(v)?;
        }
        Ok(out)
    }

    pub fn aabb(&self) -> Aabb {
        let mut b = Aabb::empty();
        for v in self.vertex_ids() {
            b.grow(&self.positions[v]);
        }
        b
    }

    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox::from_aabb(&self.aabb())
    }

    /// Mean length over unique edges.
    pub fn mean_edge_length(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for h in self.edge_ids() {
            sum += self.edge_length(h);
            n += 1;
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    pub fn total_area(&self) -> f64 {
        self.face_ids().map(|f| self.face_area(f)).sum()
    }

    /// Signed enclosed volume (positive for outward orientation).
    pub fn signed_volume(&self) -> f64 {
        self.face_ids()
            .map(|f| {
                let [a, b, c] = self.face_positions(f);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Compact `(positions, faces)` copy of the live elements.
    pub fn to_triangles(&self) -> (Vec<Vec3>, Vec<[usize; 3]>) {
        let mut remap = vec![usize::MAX; self.positions.len()];
        let mut positions = Vec::with_capacity(self.n_vertices());
        for v in self.vertex_ids() {
            remap[v] = positions.len();
            positions.push(self.positions[v]);
        }
        let faces = self
            .face_ids()
            .map(|f| {
                let t = self.face_vertices(f);
                [remap[t[0]], remap[t[1]], remap[t[2]]]
            })
            .collect();
        (positions, faces)
    }

    // ---- topology edits ---------------------------------------------------

    /// True when flipping `h` keeps the mesh a valid manifold with every
    /// valence at least 3. Geometry is not checked.
    pub fn is_flip_topologically_legal(&self, h: HalfedgeId) -> bool {
        let g = self.twin(h);
        let a = self.origin(h);
        let b = self.target(h);
        let c = self.origin(prev_he(h));
        let d = self.origin(prev_he(g));
        if c == d {
            return false;
        }
        if self.valence(a) <= 3 || self.valence(b) <= 3 {
            return false;
        }
        self.find_halfedge(c, d).is_none()
    }

    /// The two faces that would replace the faces of `h` after a flip.
    pub fn flipped_faces(&self, h: HalfedgeId) -> [[VertexId; 3]; 2] {
        let g = self.twin(h);
        let a = self.origin(h);
        let b = self.target(h);
        let c = self.origin(prev_he(h));
        let d = self.origin(prev_he(g));
        [[c, a, d], [d, b, c]]
    }

    /// Flips the edge of `h`. Face ids are preserved; the flipped edge is
    /// afterwards represented by halfedge `h` itself (running `d -> c`).
    pub fn flip_edge(&mut self, h: HalfedgeId) {
        let g = self.twin(h);
        let f0 = h / 3;
        let f1 = g / 3;
        let a = self.origin(h) as u32;
        let b = self.target(h) as u32;
        let c = self.origin(prev_he(h)) as u32;
        let d = self.origin(prev_he(g)) as u32;

        // outer twins: b->c, c->a in f0; a->d, d->b in f1
        let t_bc = self.twins[next_he(h)];
        let t_ca = self.twins[prev_he(h)];
        let t_ad = self.twins[next_he(g)];
        let t_db = self.twins[prev_he(g)];

        // f0 := (d, c, a) with h = d->c ; f1 := (c, d, b) with g = c->d
        let hb = 3 * f0;
        let gb = 3 * f1;
        let hi = h - hb;
        let gi = g - gb;
        let mut t0 = [0u32; 3];
        t0[hi] = d;
        t0[(hi + 1) % 3] = c;
        t0[(hi + 2) % 3] = a;
        let mut t1 = [0u32; 3];
        t1[gi] = c;
        t1[(gi + 1) % 3] = d;
        t1[(gi + 2) % 3] = b;
        self.faces[f0] = t0;
        self.faces[f1] = t1;

        let h_ca = hb + (hi + 1) % 3; // c->a
        let h_ad = hb + (hi + 2) % 3; // a->d
        let g_db = gb + (gi + 1) % 3; // d->b
        let g_bc = gb + (gi + 2) % 3; // b->c
        self.link(h, g);
        self.link(h_ca, t_ca as usize);
        self.link(h_ad, t_ad as usize);
        self.link(g_db, t_db as usize);
        self.link(g_bc, t_bc as usize);

        self.vertex_halfedge[a as usize] = h_ad as u32;
        self.vertex_halfedge[b as usize] = g_bc as u32;
        self.vertex_halfedge[c as usize] = h_ca as u32;
        self.vertex_halfedge[d as usize] = g_db as u32;
    }

    #[inline]
    fn link(&mut self, x: HalfedgeId, y: HalfedgeId) {
        self.twins[x] = y as u32;
        self.twins[y] = x as u32;
    }

    /// Link condition plus valence guards for collapsing `h` (`b` into `a`).
    pub fn is_collapse_topologically_legal(&self, h: HalfedgeId) -> bool {
        if self.n_vertices() <= 4 {
            return false;
        }
        let g = self.twin(h);
        let a = self.origin(h);
        let b = self.target(h);
        let c = self.origin(prev_he(h));
        let d = self.origin(prev_he(g));
        if c == d {
            return false;
        }
        let na = self.vertex_neighbors(a);
        let nb = self.vertex_neighbors(b);
        let common = na.iter().filter(|v| nb.contains(v)).count();
        if common != 2 {
            return false;
        }
        // c and d each lose one neighbor; merged vertex has val(a)+val(b)-4
        if self.valence(c) <= 3 || self.valence(d) <= 3 {
            return false;
        }
        na.len() + nb.len() >= 7
    }

    /// Faces around `a` and `b` after collapsing `h`, as they would be
    /// rewritten (excluding the two removed faces), with `b` replaced by `a`.
    pub fn collapse_affected_faces(&self, h: HalfedgeId) -> Vec<(FaceId, [VertexId; 3])> {
        let g = self.twin(h);
        let a = self.origin(h);
        let b = self.target(h);
        let removed = [h / 3, g / 3];
        let mut out = Vec::new();
        for v in [a, b] {
            for o in self.outgoing(v) {
                let f = o / 3;
                if removed.contains(&f) || out.iter().any(|(x, _)| *x == f) {
                    continue;
                }
                let mut t = self.face_vertices(f);
                for x in t.iter_mut() {
                    if *x == b {
                        *x = a;
                    }
                }
                out.push((f, t));
            }
        }
        out
    }

    /// Collapses `h = a -> b`, keeping `a` at `position` and removing `b`
    /// and the two incident faces.
    pub fn collapse_edge(&mut self, h: HalfedgeId, position: Vec3) {
        let g = self.twin(h);
        let a = self.origin(h);
        let b = self.target(h);
        let c = self.origin(prev_he(h));
        let d = self.origin(prev_he(g));
        let f0 = h / 3;
        let f1 = g / 3;

        let outgoing_b: Vec<HalfedgeId> = self.outgoing(b).collect();
        // f0 = (a, b, c): glue twin(b->c) with twin(c->a)
        let x = self.twins[next_he(h)] as usize;
        let y = self.twins[prev_he(h)] as usize;
        // f1 = (b, a, d): glue twin(a->d) with twin(d->b)
        let u = self.twins[next_he(g)] as usize;
        let w = self.twins[prev_he(g)] as usize;

        for o in outgoing_b {
            let f = o / 3;
            if f == f0 || f == f1 {
                continue;
            }
            self.faces[f][o % 3] = a as u32;
        }
        self.link(x, y);
        self.link(u, w);

        self.face_alive[f0] = false;
        self.face_alive[f1] = false;
        self.dead_faces += 2;
        self.vertex_alive[b] = false;
        self.dead_vertices += 1;
        for hh in [3 * f0, 3 * f0 + 1, 3 * f0 + 2, 3 * f1, 3 * f1 + 1, 3 * f1 + 2] {
            self.twins[hh] = INVALID;
        }
        self.positions[a] = position;
        // y = a->c, w = d->b now a->d... pick halfedges that are certainly alive
        self.vertex_halfedge[a] = y as u32;
        self.vertex_halfedge[c] = x as u32;
        self.vertex_halfedge[d] = u as u32;
    }

    /// Drops dead records and renumbers vertices and faces in ascending order.
    pub fn compact(&mut self) -> CompactMap {
        let mut vmap = vec![None; self.positions.len()];
        let mut positions = Vec::with_capacity(self.n_vertices());
        for v in 0..self.positions.len() {
            if self.vertex_alive[v] {
                vmap[v] = Some(positions.len());
                positions.push(self.positions[v]);
            }
        }
        let mut fmap = vec![None; self.faces.len()];
        let mut faces = Vec::with_capacity(self.n_faces());
        let mut twins = Vec::with_capacity(self.n_faces() * 3);
        for f in 0..self.faces.len() {
            if self.face_alive[f] {
                fmap[f] = Some(faces.len());
                let t = self.faces[f];
                faces.push([
                    vmap[t[0] as usize].expect("live face on dead vertex") as u32,
                    vmap[t[1] as usize].expect("live face on dead vertex") as u32,
                    vmap[t[2] as usize].expect("live face on dead vertex") as u32,
                ]);
            }
        }
        for f in 0..self.faces.len() {
            if self.face_alive[f] {
                for i in 0..3 {
                    let t = self.twins[3 * f + i] as usize;
                    let nf = fmap[t / 3].expect("twin on dead face");
                    twins.push((3 * nf + t % 3) as u32);
                }
            }
        }
        let mut vertex_halfedge = vec![INVALID; positions.len()];
        for (h, _) in twins.iter().enumerate() {
            let v = faces[h / 3][h % 3] as usize;
            if vertex_halfedge[v] == INVALID {
                vertex_halfedge[v] = h as u32;
            }
        }
        let nv = positions.len();
        let nf = faces.len();
        *self = HalfedgeMesh {
            positions,
            faces,
            twins,
            vertex_halfedge,
            face_alive: vec![true; nf],
            vertex_alive: vec![true; nv],
            dead_faces: 0,
            dead_vertices: 0,
        };
        CompactMap {
            vertices: vmap,
            faces: fmap,
        }
    }

    /// Walks every structural invariant; used by tests and debug assertions.
    pub fn audit(&self) -> Result<()> {
        let err = |m: String| Err(Error::Topology(m));
        for h in 0..self.twins.len() {
            if !self.face_alive[h / 3] {
                continue;
            }
            let t = self.twins[h];
            if t == INVALID {
                return err(format!("halfedge {h} has no twin"));
            }
            let t = t as usize;
            if !self.face_alive[t / 3] {
                return err(format!("halfedge {h} twins into dead face"));
            }
            if self.twins[t] as usize != h {
                return err(format!("twin(twin({h})) != {h}"));
            }
            if self.origin(t) != self.target(h) || self.target(t) != self.origin(h) {
                return err(format!("halfedge {h} and its twin disagree on endpoints"));
            }
            if next_he(next_he(next_he(h))) != h {
                return err(format!("face cycle broken at {h}"));
            }
        }
        let mut corners = vec![0usize; self.positions.len()];
        for f in self.face_ids() {
            let t = self.face_vertices(f);
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return err(format!("face {f} repeats a vertex"));
            }
            for v in t {
                if !self.vertex_alive[v] {
                    return err(format!("face {f} uses dead vertex {v}"));
                }
                corners[v] += 1;
            }
        }
        for v in self.vertex_ids() {
            let h = self.vertex_halfedge[v] as usize;
            if !self.face_alive[h / 3] || self.origin(h) != v {
                return err(format!("vertex {v} has a stale halfedge reference"));
            }
            let fan = self.outgoing(v).count();
            if fan != corners[v] || fan < 3 {
                return err(format!("vertex {v}: fan {fan} vs {} corners", corners[v]));
            }
        }
        Ok(())
    }
}

/// Iterator over the outgoing halfedges of a vertex.
pub struct Outgoing<'a> {
    mesh: &'a HalfedgeMesh,
    start: HalfedgeId,
    current: Option<HalfedgeId>,
}

impl Iterator for Outgoing<'_> {
    type Item = HalfedgeId;

    fn next(&mut self) -> Option<HalfedgeId> {
        let h = self.current?;
        let n = self.mesh.twins[prev_he(h)];
        self.current = if n == INVALID || n as usize == self.start {
            None
        } else {
            Some(n as usize)
        };
        Some(h)
    }
}

#[cfg(test)]
mod tests;
