//! Exact k-nearest-neighbor and fixed-radius queries over 3D points using a
//! uniform spatial hash grid.
//!
//! Results are defined by brute force: neighbors ordered by squared
//! distance, ties broken by the lower point index. The grid only prunes.

use std::collections::HashMap;

use nalgebra::Point3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbor {
    pub fn distance(&self) -> f64 {
        self.dist_sq.sqrt()
    }
}

#[inline]
fn dist_sq(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

#[inline]
fn closer(a: &Neighbor, b: &Neighbor) -> bool {
    (a.dist_sq, a.index) < (b.dist_sq, b.index)
}

/// Bounded sorted candidate list.
struct TopK {
    k: usize,
    items: Vec<Neighbor>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn offer(&mut self, n: Neighbor) {
        if self.items.len() == self.k {
            if !closer(&n, self.items.last().expect("k > 0")) {
                return;
            }
            self.items.pop();
        }
        let pos = self.items.partition_point(|x| closer(x, &n));
        self.items.insert(pos, n);
    }

    fn full(&self) -> bool {
        self.items.len() == self.k
    }

    fn worst_dist_sq(&self) -> f64 {
        self.items.last().map(|n| n.dist_sq).unwrap_or(f64::INFINITY)
    }
}

/// Brute-force KNN over `candidates` (indices into `points`).
pub fn brute_force_knn(points: &[Point3<f64>], candidates: &[usize], query: &Point3<f64>, k: usize) -> Vec<Neighbor> {
    if k == 0 {
        return Vec::new();
    }
    let mut top = TopK::new(k);
    for &i in candidates {
        top.offer(Neighbor {
            index: i,
            dist_sq: dist_sq(&points[i], query),
        });
    }
    top.items
}

type Cell = [i64; 3];

/// Uniform grid hashing point indices by cell.
#[derive(Debug, Clone)]
pub struct SpatialHashGrid {
    cell_size: f64,
    inv_cell: f64,
    cells: HashMap<Cell, Vec<usize>>,
    points: Vec<Point3<f64>>,
    lo: Cell,
    hi: Cell,
    len: usize,
}

impl SpatialHashGrid {
    /// Indexes `points[i]` for every `i` in `members`. Points outside
    /// `members` are kept for index stability but never returned.
    pub fn new(points: &[Point3<f64>], members: &[usize], cell_size: f64) -> Self {
        let cell_size = if cell_size.is_finite() && cell_size > 0.0 { cell_size } else { 1.0 };
        let inv_cell = 1.0 / cell_size;
        let mut grid = Self {
            cell_size,
            inv_cell,
            cells: HashMap::new(),
            points: points.to_vec(),
            lo: [i64::MAX; 3],
            hi: [i64::MIN; 3],
            len: 0,
        };
        for &i in members {
            let c = grid.cell_of(&points[i]);
            for a in 0..3 {
                grid.lo[a] = grid.lo[a].min(c[a]);
                grid.hi[a] = grid.hi[a].max(c[a]);
            }
            grid.cells.entry(c).or_default().push(i);
            grid.len += 1;
        }
        for bucket in grid.cells.values_mut() {
            bucket.sort_unstable();
        }
        grid
    }

    /// Grid with cell size set to the median distance to the 4th nearest
    /// neighbor among `members` (deterministically subsampled above 2048 points).
    pub fn with_auto_cell(points: &[Point3<f64>], members: &[usize]) -> Self {
        Self::new(points, members, median_knn_distance(points, members, 4))
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    fn cell_of(&self, p: &Point3<f64>) -> Cell {
        let q = |v: f64| (v * self.inv_cell).floor().clamp(-1e15, 1e15) as i64;
        [q(p.x), q(p.y), q(p.z)]
    }

    fn visit_shell(&self, center: Cell, r: i64, mut f: impl FnMut(usize)) {
        let mut visit = |c: Cell| {
            if let Some(bucket) = self.cells.get(&c) {
                for &i in bucket {
                    f(i);
                }
            }
        };
        if r == 0 {
            visit(center);
            return;
        }
        for dx in -r..=r {
            for dy in -r..=r {
                let on_face = dx.abs() == r || dy.abs() == r;
                if on_face {
                    for dz in -r..=r {
                        visit([center[0] + dx, center[1] + dy, center[2] + dz]);
                    }
                } else {
                    visit([center[0] + dx, center[1] + dy, center[2] - r]);
                    visit([center[0] + dx, center[1] + dy, center[2] + r]);
                }
            }
        }
    }

    /// Chebyshev ring radius beyond which no indexed cell exists.
    fn max_ring(&self, c: Cell) -> i64 {
        (0..3)
            .map(|a| (c[a] - self.lo[a]).abs().max((self.hi[a] - c[a]).abs()))
            .max()
            .unwrap_or(0)
    }

    /// The `k` nearest indexed points (fewer if the grid holds fewer).
    pub fn knn(&self, query: &Point3<f64>, k: usize) -> Vec<Neighbor> {
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let k = k.min(self.len);
        let center = self.cell_of(query);
        let max_ring = self.max_ring(center);
        let mut top = TopK::new(k);
        let mut r = 0i64;
        loop {
            self.visit_shell(center, r, |i| {
                top.offer(Neighbor {
                    index: i,
                    dist_sq: dist_sq(&self.points[i], query),
                })
            });
            if r >= max_ring {
                break;
            }
            // Unvisited cells lie at least r cell widths away.
            if top.full() {
                let bound = r as f64 * self.cell_size * (1.0 - 1e-9);
                if top.worst_dist_sq() < bound * bound {
                    break;
                }
            }
            r += 1;
        }
        top.items
    }
}

/// Median distance from each member to its `k`-th nearest other member.
pub fn median_knn_distance(points: &[Point3<f64>], members: &[usize], k: usize) -> f64 {
    if members.len() < 2 {
        return 1.0;
    }
    let k = k.min(members.len() - 1);
    let step = members.len().div_ceil(2048).max(1);
    let mut dists: Vec<f64> = members
        .iter()
        .step_by(step)
        .map(|&i| {
            let nn = brute_force_knn(points, members, &points[i], k + 1);
            nn.last().map(|n| n.distance()).unwrap_or(0.0)
        })
        .collect();
    dists.sort_by(f64::total_cmp);
    let m = dists[dists.len() / 2];
    if m > 0.0 && m.is_finite() {
        m
    } else {
        1.0
    }
}

/// Fixed-radius "is anything within r" index.
#[derive(Debug, Clone)]
pub struct RadiusIndex {
    grid: SpatialHashGrid,
    radius_sq: f64,
}

impl RadiusIndex {
    pub fn new(points: &[Point3<f64>], radius: f64) -> Self {
        let members: Vec<usize> = (0..points.len()).collect();
        Self {
            grid: SpatialHashGrid::new(points, &members, radius),
            radius_sq: radius * radius,
        }
    }

    /// True when some indexed point lies within the radius (inclusive).
    pub fn any_within(&self, q: &Point3<f64>) -> bool {
        if self.grid.is_empty() {
            return false;
        }
        let center = self.grid.cell_of(q);
        let mut found = false;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = self.grid.cells.get(&[center[0] + dx, center[1] + dy, center[2] + dz]) {
                        if bucket.iter().any(|&i| dist_sq(&self.grid.points[i], q) <= self.radius_sq) {
                            found = true;
                        }
                    }
                    if found {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Per-point flag: is `a[i]` within the radius of any indexed point.
    pub fn covered(&self, a: &[Point3<f64>]) -> Vec<bool> {
        a.iter().map(|p| self.any_within(p)).collect()
    }
}
