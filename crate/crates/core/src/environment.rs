//! Voxel world: occupancy grid, exact Euclidean distance field, traversable
//! ground for the UGV and the vertical-plane slice that feeds the decision
//! solvers.
//!
//! Cell `(ix, iy, iz)` covers `origin + [i, i + 1) * resolution` on each axis
//! and its value lives at the cell centre. The bottom layer `iz = 0` is the
//! ground; [`EdfGrid::obstacle_distance_at`] ignores it so vehicles resting
//! on the floor are not flagged as colliding with it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::curves::PlaneFrame;
use crate::decision::{clip_for_decision, Obstacle2D, TrapezoidT};
use crate::error::{Error, Result};
use crate::geometry::{convex_hull, Point2, Vec3};

/// Squared distance standing in for "no obstacle" inside the transform.
const FAR: f64 = 1e20;

/// On-disk grid: sparse list of occupied cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    pub resolution: f64,
    pub origin: [f64; 3],
    pub dims: [usize; 3],
    pub occupied: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub resolution: f64,
    pub origin: Vec3,
    pub dims: [usize; 3],
    pub occupied: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(resolution: f64, origin: Vec3, dims: [usize; 3]) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(Error::InvalidInput(format!("resolution {resolution} must be positive")));
        }
        let n = dims[0] * dims[1] * dims[2];
        if n == 0 {
            return Err(Error::EmptyGrid);
        }
        Ok(Self { resolution, origin, dims, occupied: vec![false; n] })
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.dims[0] * (iy + self.dims[1] * iz)
    }

    pub fn is_occupied(&self, ix: usize, iy: usize, iz: usize) -> bool {
        self.occupied[self.index(ix, iy, iz)]
    }

    pub fn set(&mut self, ix: usize, iy: usize, iz: usize, value: bool) {
        let i = self.index(ix, iy, iz);
        self.occupied[i] = value;
    }

    /// Ground slab: the whole bottom layer.
    pub fn fill_ground(&mut self) {
        for iy in 0..self.dims[1] {
            for ix in 0..self.dims[0] {
                self.set(ix, iy, 0, true);
            }
        }
    }

    /// Marks every cell whose centre lies in the world-space box.
    pub fn fill_box(&mut self, min: Vec3, max: Vec3) {
        let res = self.resolution;
        let range = |axis: usize| {
            let lo = ((min[axis] - self.origin[axis]) / res - 0.5).ceil().max(0.0) as usize;
            let hi = ((max[axis] - self.origin[axis]) / res - 0.5).floor();
            let hi = if hi < 0.0 { None } else { Some((hi as usize).min(self.dims[axis] - 1)) };
            hi.filter(|&h| h >= lo).map(|h| lo..=h)
        };
        let (Some(rx), Some(ry), Some(rz)) = (range(0), range(1), range(2)) else {
            return;
        };
        for iz in rz {
            for iy in ry.clone() {
                for ix in rx.clone() {
                    self.set(ix, iy, iz, true);
                }
            }
        }
    }

    pub fn cell_center(&self, ix: usize, iy: usize, iz: usize) -> Vec3 {
        self.origin + Vec3::new(ix as f64 + 0.5, iy as f64 + 0.5, iz as f64 + 0.5) * self.resolution
    }

    pub fn to_file(&self) -> GridFile {
        let mut occupied = Vec::new();
        for iz in 0..self.dims[2] {
            for iy in 0..self.dims[1] {
                for ix in 0..self.dims[0] {
                    if self.is_occupied(ix, iy, iz) {
                        occupied.push([ix, iy, iz]);
                    }
                }
            }
        }
        GridFile { resolution: self.resolution, origin: self.origin.into(), dims: self.dims, occupied }
    }

    pub fn from_file(file: &GridFile) -> Result<Self> {
        let mut g = Self::new(file.resolution, Vec3::from(file.origin), file.dims)?;
        for &[ix, iy, iz] in &file.occupied {
            if ix >= g.dims[0] || iy >= g.dims[1] || iz >= g.dims[2] {
                return Err(Error::InvalidInput(format!("occupied cell [{ix}, {iy}, {iz}] outside dims")));
            }
            g.set(ix, iy, iz, true);
        }
        Ok(g)
    }
}

/// Occupancy plus two precomputed distance fields, immutable once built.
#[derive(Debug, Clone)]
pub struct EdfGrid {
    pub resolution: f64,
    pub origin: Vec3,
    pub dims: [usize; 3],
    pub occupancy: Vec<bool>,
    /// Metres to the nearest occupied cell centre.
    pub distance: Vec<f64>,
    /// Same, ignoring the ground layer.
    pub obstacle_distance: Vec<f64>,
}

/// Exact squared distance transform of one line (lower envelope of
/// parabolas). `f` holds squared distances in cell units and is overwritten.
fn edt_1d(f: &mut [f64], v: &mut [usize], z: &mut [f64], out: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let fq = f[q] + (q * q) as f64;
        loop {
            let p = v[k];
            let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        out[q] = d * d + f[p];
    }
    f.copy_from_slice(out);
}

/// Squared transform along each axis in turn; returns distances in metres.
fn separable_edt(dims: [usize; 3], seeds: impl Fn(usize) -> bool, res: f64) -> Vec<f64> {
    let [nx, ny, nz] = dims;
    let n = nx * ny * nz;
    let mut d: Vec<f64> = (0..n).map(|i| if seeds(i) { 0.0 } else { FAR }).collect();
    let any = d.iter().any(|&x| x == 0.0);
    if !any {
        let diag = res * ((nx * nx + ny * ny + nz * nz) as f64).sqrt();
        return vec![diag; n];
    }
    let m = nx.max(ny).max(nz);
    let (mut line, mut v, mut z, mut out) = (vec![0.0; m], vec![0usize; m], vec![0.0; m + 1], vec![0.0; m]);
    let strides = [1, nx, nx * ny];
    for axis in 0..3 {
        let len = dims[axis];
        let stride = strides[axis];
        for start in 0..n {
            // visit each line once, from its first cell
            if (start / stride) % len != 0 {
                continue;
            }
            for t in 0..len {
                line[t] = d[start + t * stride];
            }
            edt_1d(&mut line[..len], &mut v[..len], &mut z[..len + 1], &mut out[..len]);
            for t in 0..len {
                d[start + t * stride] = line[t];
            }
        }
    }
    d.into_iter().map(|s| s.sqrt() * res).collect()
}

/// Builds both distance fields. Fully free grids get the diagonal length of
/// the grid as their "infinite" distance.
pub fn compute_edf(grid: &OccupancyGrid) -> Result<EdfGrid> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let layer = grid.dims[0] * grid.dims[1];
    let distance = separable_edt(grid.dims, |i| grid.occupied[i], grid.resolution);
    let obstacle_distance = separable_edt(grid.dims, |i| i >= layer && grid.occupied[i], grid.resolution);
    Ok(EdfGrid {
        resolution: grid.resolution,
        origin: grid.origin,
        dims: grid.dims,
        occupancy: grid.occupied.clone(),
        distance,
        obstacle_distance,
    })
}

impl EdfGrid {
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.dims[0] * (iy + self.dims[1] * iz)
    }

    pub fn is_occupied(&self, ix: usize, iy: usize, iz: usize) -> bool {
        self.occupancy[self.index(ix, iy, iz)]
    }

    pub fn cell_center(&self, ix: usize, iy: usize, iz: usize) -> Vec3 {
        self.origin + Vec3::new(ix as f64 + 0.5, iy as f64 + 0.5, iz as f64 + 0.5) * self.resolution
    }

    /// World-space extent `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let size = Vec3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.resolution;
        (self.origin, self.origin + size)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let (lo, hi) = self.bounds();
        let eps = 1e-9 * self.resolution;
        (0..3).all(|k| p[k] >= lo[k] - eps && p[k] <= hi[k] + eps)
    }

    /// Cell containing `p`, if inside the grid.
    pub fn cell_of(&self, p: Vec3) -> Option<[usize; 3]> {
        if !self.contains(p) {
            return None;
        }
        let g = (p - self.origin) / self.resolution;
        let c = |k: usize| (g[k].floor().max(0.0) as usize).min(self.dims[k] - 1);
        Some([c(0), c(1), c(2)])
    }

    /// Top of the ground layer.
    pub fn ground_height(&self) -> f64 {
        self.origin.z + self.resolution
    }

    /// Trilinear interpolation of `field` between cell centres, clamped at
    /// the outer half cells.
    fn interpolate(&self, field: &[f64], p: Vec3) -> Result<f64> {
        if !self.contains(p) {
            return Err(Error::OutOfBounds(p.x, p.y, p.z));
        }
        let mut i0 = [0usize; 3];
        let mut w = [0.0f64; 3];
        for k in 0..3 {
            let n = self.dims[k];
            let g = ((p[k] - self.origin[k]) / self.resolution - 0.5).clamp(0.0, (n - 1) as f64);
            if n == 1 {
                continue;
            }
            let f = (g.floor() as usize).min(n - 2);
            i0[k] = f;
            w[k] = g - f as f64;
        }
        let step = |k: usize| usize::from(self.dims[k] > 1);
        let mut acc = 0.0;
        for corner in 0..8 {
            let o = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
            let mut weight = 1.0;
            let mut idx = [0usize; 3];
            for k in 0..3 {
                idx[k] = i0[k] + o[k] * step(k);
                weight *= if o[k] == 1 { w[k] } else { 1.0 - w[k] };
            }
            if weight != 0.0 {
                acc += weight * field[self.index(idx[0], idx[1], idx[2])];
            }
        }
        Ok(acc)
    }

    pub fn distance_at(&self, p: Vec3) -> Result<f64> {
        self.interpolate(&self.distance, p)
    }

    pub fn obstacle_distance_at(&self, p: Vec3) -> Result<f64> {
        self.interpolate(&self.obstacle_distance, p)
    }

    pub fn is_clear(&self, p: Vec3, clearance: f64) -> Result<bool> {
        Ok(self.distance_at(p)? >= clearance)
    }

    /// Clearance against everything except the ground layer.
    pub fn is_clear_of_obstacles(&self, p: Vec3, clearance: f64) -> Result<bool> {
        Ok(self.obstacle_distance_at(p)? >= clearance)
    }

    /// Segment check sampled at grid resolution against the obstacle field.
    pub fn segment_clear(&self, a: Vec3, b: Vec3, clearance: f64) -> bool {
        let n = ((b - a).norm() / self.resolution).ceil().max(1.0) as usize;
        (0..=n).all(|i| {
            let p = a + (b - a) * (i as f64 / n as f64);
            self.obstacle_distance_at(p).is_ok_and(|d| d >= clearance)
        })
    }

    pub fn to_json(&self) -> GridFile {
        let mut occupied = Vec::new();
        for iz in 0..self.dims[2] {
            for iy in 0..self.dims[1] {
                for ix in 0..self.dims[0] {
                    if self.is_occupied(ix, iy, iz) {
                        occupied.push([ix, iy, iz]);
                    }
                }
            }
        }
        GridFile { resolution: self.resolution, origin: self.origin.into(), dims: self.dims, occupied }
    }
}

pub fn is_clear(grid: &EdfGrid, point: Vec3, clearance: f64) -> Result<bool> {
    grid.is_clear(point, clearance)
}

/// Cells the UGV can stand in, indexed by column for snapping.
#[derive(Debug, Clone, Default)]
pub struct GroundMap {
    pub cells: Vec<[usize; 3]>,
    pub points: Vec<Vec3>,
    columns: HashMap<(usize, usize), Vec<usize>>,
}

impl GroundMap {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Traversable point in the column under `p` whose height is closest to
    /// `near_z`.
    pub fn snap(&self, grid: &EdfGrid, p: Vec3, near_z: f64) -> Option<Vec3> {
        let [ix, iy, _] = grid.cell_of(Vec3::new(p.x, p.y, grid.origin.z))?;
        let ids = self.columns.get(&(ix, iy))?;
        ids.iter()
            .map(|&i| self.points[i])
            .min_by(|a, b| (a.z - near_z).abs().total_cmp(&(b.z - near_z).abs()))
    }

    pub fn contains_cell(&self, c: [usize; 3]) -> bool {
        self.columns
            .get(&(c[0], c[1]))
            .is_some_and(|ids| ids.iter().any(|&i| self.cells[i][2] == c[2]))
    }
}

/// Free cells resting on an occupied one, with `clearance` of free headroom
/// and at least one horizontally adjacent standing cell within `max_step`
/// height change.
pub fn traversable_ground(grid: &EdfGrid, clearance: f64, max_step: f64) -> GroundMap {
    let [nx, ny, nz] = grid.dims;
    let headroom = ((clearance / grid.resolution).ceil() as usize).max(1);
    let step_cells = (max_step / grid.resolution + 1e-9).floor() as i64;
    let standing = |ix: usize, iy: usize, iz: usize| {
        iz >= 1
            && grid.is_occupied(ix, iy, iz - 1)
            && (iz..(iz + headroom).min(nz)).all(|z| !grid.is_occupied(ix, iy, z))
    };
    let mut by_col: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let zs: Vec<usize> = (1..nz).filter(|&iz| standing(ix, iy, iz)).collect();
            if !zs.is_empty() {
                by_col.insert((ix, iy), zs);
            }
        }
    }
    let mut map = GroundMap::default();
    for iy in 0..ny {
        for ix in 0..nx {
            let Some(zs) = by_col.get(&(ix, iy)) else { continue };
            for &iz in zs {
                let linked = (-1i64..=1).any(|dy| {
                    (-1i64..=1).any(|dx| {
                        if dx == 0 && dy == 0 {
                            return false;
                        }
                        let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                        if jx < 0 || jy < 0 || jx >= nx as i64 || jy >= ny as i64 {
                            return false;
                        }
                        by_col
                            .get(&(jx as usize, jy as usize))
                            .is_some_and(|other| other.iter().any(|&jz| (jz as i64 - iz as i64).abs() <= step_cells))
                    })
                });
                if linked {
                    let id = map.cells.len();
                    map.cells.push([ix, iy, iz]);
                    map.points.push(grid.cell_center(ix, iy, iz));
                    map.columns.entry((ix, iy)).or_default().push(id);
                }
            }
        }
    }
    map
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster2D {
    pub points: Vec<Point2>,
    pub hull: Obstacle2D,
}

/// Result of slicing the world along the vertical plane through two points.
#[derive(Debug, Clone)]
pub struct PlaneSlice {
    pub frame: PlaneFrame,
    pub a: Point2,
    pub b: Point2,
    pub ground_y: f64,
    pub clusters: Vec<Cluster2D>,
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new() -> Self {
        Self { parent: Vec::new(), rank: Vec::new() }
    }

    fn push(&mut self) -> usize {
        self.parent.push(self.parent.len());
        self.rank.push(0);
        self.parent.len() - 1
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Single-pass 8-neighbour clustering of lattice cells, visited in the given
/// order. Each cell joins every already-visited neighbour's cluster. Returns
/// groups of input indices, each sorted, ordered by their smallest index.
pub fn cluster_cells(cells: &[(i64, i64)]) -> Vec<Vec<usize>> {
    let mut ds = DisjointSet::new();
    let mut seen: HashMap<(i64, i64), usize> = HashMap::with_capacity(cells.len());
    for &(i, j) in cells {
        let id = ds.push();
        for dj in -1..=1 {
            for di in -1..=1 {
                if let Some(&other) = seen.get(&(i + di, j + dj)) {
                    ds.union(id, other);
                }
            }
        }
        seen.insert((i, j), id);
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for id in 0..cells.len() {
        let r = ds.find(id);
        groups.entry(r).or_default().push(id);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

/// Samples the region under the chord `A B` at grid resolution, turns cells
/// closer than `clearance` to an obstacle into obstacle points, clusters them
/// and returns each cluster's hull clipped to that region.
///
/// Points are padded to their resolution square before hulling so a single
/// sample still yields a polygon. Rows are sampled until the padded square
/// clears the chord, which keeps obstacles that cross the chord visible.
pub fn slice_plane(grid: &EdfGrid, a3: Vec3, b3: Vec3, clearance: f64) -> Result<PlaneSlice> {
    for p in [a3, b3] {
        if !grid.contains(p) {
            return Err(Error::OutOfBounds(p.x, p.y, p.z));
        }
    }
    let frame = PlaneFrame::through(a3, b3);
    let res = grid.resolution;
    if frame.span < res {
        return Err(Error::DegenerateSpan(frame.span));
    }
    let a = frame.map_to_2d(a3);
    let b = frame.map_to_2d(b3);
    let ground_y = grid.ground_height();
    let chord_at = |x: f64| a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x);

    let mut cells: Vec<(i64, i64)> = Vec::new();
    let mut samples: Vec<Point2> = Vec::new();
    let columns = (frame.span / res).floor() as i64;
    for i in 0..=columns {
        let x = i as f64 * res;
        let top = chord_at(x);
        let mut j = 0i64;
        loop {
            let y = ground_y + (j as f64 + 0.5) * res;
            if y - 0.5 * res >= top {
                break;
            }
            let p3 = frame.map_to_3d(Point2::new(x, y));
            if let Ok(d) = grid.obstacle_distance_at(p3) {
                if d < clearance {
                    cells.push((i, j));
                    samples.push(Point2::new(x, y));
                }
            }
            j += 1;
        }
    }

    let t = TrapezoidT::new(a, b, ground_y);
    let h = 0.5 * res;
    let mut clusters = Vec::new();
    for group in cluster_cells(&cells) {
        let pts: Vec<Point2> = group.iter().map(|&k| samples[k]).collect();
        let padded: Vec<Point2> = pts
            .iter()
            .flat_map(|p| {
                [
                    Point2::new(p.x - h, p.y - h),
                    Point2::new(p.x + h, p.y - h),
                    Point2::new(p.x + h, p.y + h),
                    Point2::new(p.x - h, p.y + h),
                ]
            })
            .collect();
        let hull = Obstacle2D { vertices: convex_hull(&padded) };
        if let Some(clipped) = clip_for_decision(std::slice::from_ref(&hull), &t).pop() {
            clusters.push(Cluster2D { points: pts, hull: clipped });
        }
    }
    Ok(PlaneSlice { frame, a, b, ground_y, clusters })
}
