//! Word-based homotopy signatures in the projected x-z plane.
//!
//! Every blade carries a vertical beam (see [`crate::env::place_beams`]). A
//! curve's signature is the sequence of beams it crosses, signed by the
//! crossing direction, with adjacent inverse pairs cancelled. Signatures
//! drive two things in the planner: a distance map over (cell, signature)
//! pairs built by uniform-cost search from the goal, and the list of
//! relevant classes derived from passage sequences through blade columns.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;
use std::io::{self, Write};

use crate::env::{project, Beam, Environment, Interval};
use crate::error::HomotopyError;
use crate::robot::{forward_kinematics, Configuration, RobotSpec};
use crate::Point2;

/// A beam letter with its crossing direction; `positive` is left-to-right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignedLetter {
    pub letter: u16,
    pub positive: bool,
}

impl SignedLetter {
    pub fn pos(letter: usize) -> Self {
        Self { letter: letter as u16, positive: true }
    }

    pub fn neg(letter: usize) -> Self {
        Self { letter: letter as u16, positive: false }
    }

    pub fn inverse(self) -> Self {
        Self { letter: self.letter, positive: !self.positive }
    }
}

impl fmt::Display for SignedLetter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "l{}", self.letter)
        } else {
            write!(f, "l{}'", self.letter)
        }
    }
}

/// Cancels adjacent `(l, l')` pairs until none remain.
pub fn reduce_word(word: &[SignedLetter]) -> Vec<SignedLetter> {
    let mut out: Vec<SignedLetter> = Vec::with_capacity(word.len());
    for &s in word {
        if out.last() == Some(&s.inverse()) {
            out.pop();
        } else {
            out.push(s);
        }
    }
    out
}

/// Reduced word identifying a homotopy class.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HSignature(Vec<SignedLetter>);

impl HSignature {
    pub fn new(word: &[SignedLetter]) -> Self {
        Self(reduce_word(word))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn letters(&self) -> &[SignedLetter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.iter().rev().map(|s| s.inverse()).collect())
    }

    /// Reduced concatenation `self . other`.
    pub fn concat(&self, other: &HSignature) -> Self {
        let mut w = self.0.clone();
        w.extend_from_slice(&other.0);
        Self::new(&w)
    }

    /// All suffixes, longest first, ending with the empty word.
    pub fn suffixes(&self) -> Vec<HSignature> {
        (0..=self.0.len()).map(|i| HSignature(self.0[i..].to_vec())).collect()
    }
}

impl fmt::Display for HSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "-");
        }
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Beam crossings of segment `a -> b`, ordered along the segment.
///
/// A point with `x` exactly on a beam counts as lying to its right, so an
/// endpoint on a beam is never double counted.
pub fn segment_crossings(beams: &[Beam], a: &Point2, b: &Point2) -> Vec<SignedLetter> {
    let mut hits: Vec<(f64, SignedLetter)> = Vec::new();
    for beam in beams {
        let bx = beam.x();
        let a_right = a.x >= bx;
        let b_right = b.x >= bx;
        if a_right == b_right {
            continue;
        }
        let t = (bx - a.x) / (b.x - a.x);
        let z = a.y + t * (b.y - a.y);
        if beam.z_range().contains(z) {
            let s = if b_right {
                SignedLetter::pos(beam.letter)
            } else {
                SignedLetter::neg(beam.letter)
            };
            hits.push((t, s));
        }
    }
    hits.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    hits.into_iter().map(|(_, s)| s).collect()
}

/// Signature of a projected polyline. Fewer than two points give the empty
/// signature.
pub fn signature_of_polyline(beams: &[Beam], pts: &[Point2]) -> HSignature {
    let mut word = Vec::new();
    for w in pts.windows(2) {
        word.extend(segment_crossings(beams, &w[0], &w[1]));
    }
    HSignature::new(&word)
}

/// Signature of the projected robot body, base to tip.
pub fn signature_of_state(spec: &RobotSpec, beams: &[Beam], c: &Configuration) -> HSignature {
    let pts: Vec<Point2> = forward_kinematics(spec, c).points().iter().map(project).collect();
    signature_of_polyline(beams, &pts)
}

/// Class the tip still has to traverse: `reduce(inverse(state) . goal)`.
pub fn remainder_signature(state_sig: &HSignature, goal_sig: &HSignature) -> HSignature {
    state_sig.inverse().concat(goal_sig)
}

/// 8-connected neighbor offsets `(dx, dz)`; the first four are axis moves.
pub const NEIGHBORS: [(i32, i32); 8] =
    [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Occupancy grid over the projected plane with per-move beam crossings.
#[derive(Debug, Clone)]
pub struct ProjectedGrid {
    origin: Point2,
    resolution: f64,
    nx: usize,
    nz: usize,
    free: Vec<bool>,
    crossings: Vec<Vec<SignedLetter>>,
}

impl ProjectedGrid {
    pub fn new(env: &Environment, beams: &[Beam], resolution: f64) -> Self {
        let b = env.bounds();
        let nx = (((b.max.x - b.min.x) / resolution).ceil() as usize).max(1);
        let nz = (((b.max.z - b.min.z) / resolution).ceil() as usize).max(1);
        let mut grid = Self {
            origin: Point2::new(b.min.x, b.min.z),
            resolution,
            nx,
            nz,
            free: vec![false; nx * nz],
            crossings: vec![Vec::new(); nx * nz * 8],
        };
        for cell in 0..nx * nz {
            let c = grid.center(cell);
            grid.free[cell] = !env.projected_occupied(&c);
        }
        for cell in 0..nx * nz {
            for (dir, _) in NEIGHBORS.iter().enumerate() {
                if let Some(n) = grid.neighbor(cell, dir) {
                    let w = segment_crossings(beams, &grid.center(cell), &grid.center(n));
                    grid.crossings[cell * 8 + dir] = w;
                }
            }
        }
        grid
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.nz)
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_free(&self, cell: usize) -> bool {
        self.free[cell]
    }

    pub fn index(&self, i: usize, k: usize) -> usize {
        k * self.nx + i
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    pub fn center(&self, cell: usize) -> Point2 {
        let (i, k) = self.coords(cell);
        Point2::new(
            self.origin.x + (i as f64 + 0.5) * self.resolution,
            self.origin.y + (k as f64 + 0.5) * self.resolution,
        )
    }

    /// Cell containing `p`, if inside the grid.
    pub fn cell_of(&self, p: &Point2) -> Option<usize> {
        let u = (p.x - self.origin.x) / self.resolution;
        let v = (p.y - self.origin.y) / self.resolution;
        if !(u >= 0.0 && v >= 0.0) {
            return None;
        }
        let (i, k) = (u.floor() as usize, v.floor() as usize);
        // Points on the far boundary belong to the last cell.
        let i = if i == self.nx && u <= self.nx as f64 { self.nx - 1 } else { i };
        let k = if k == self.nz && v <= self.nz as f64 { self.nz - 1 } else { k };
        (i < self.nx && k < self.nz).then(|| self.index(i, k))
    }

    /// Neighbor in direction `dir`, if inside the grid.
    pub fn neighbor(&self, cell: usize, dir: usize) -> Option<usize> {
        let (i, k) = self.coords(cell);
        let (dx, dz) = NEIGHBORS[dir];
        let ni = i as i64 + dx as i64;
        let nk = k as i64 + dz as i64;
        if ni < 0 || nk < 0 || ni >= self.nx as i64 || nk >= self.nz as i64 {
            return None;
        }
        Some(self.index(ni as usize, nk as usize))
    }

    /// Free neighbor reachable without cutting an occupied corner.
    pub fn free_move(&self, cell: usize, dir: usize) -> Option<usize> {
        let n = self.neighbor(cell, dir)?;
        if !self.free[n] {
            return None;
        }
        if dir >= 4 {
            let (i, k) = self.coords(cell);
            let (dx, dz) = NEIGHBORS[dir];
            let a = self.index((i as i64 + dx as i64) as usize, k);
            let b = self.index(i, (k as i64 + dz as i64) as usize);
            if !self.free[a] || !self.free[b] {
                return None;
            }
        }
        Some(n)
    }

    /// Beam crossings of the move from `cell` toward `dir`.
    pub fn move_crossings(&self, cell: usize, dir: usize) -> &[SignedLetter] {
        &self.crossings[cell * 8 + dir]
    }
}

/// Path length in axis and diagonal grid steps. Distances are always derived
/// from the counts so that equal paths give bit-identical values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct OctileCount {
    pub straight: u32,
    pub diagonal: u32,
}

impl OctileCount {
    pub fn cells(&self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    pub fn step(self, dir: usize) -> Self {
        if dir < 4 {
            Self { straight: self.straight + 1, ..self }
        } else {
            Self { diagonal: self.diagonal + 1, ..self }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    cells: f64,
    count: OctileCount,
    cell: u32,
    word: u32,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // Reversed for a min-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cells
            .total_cmp(&self.cells)
            .then(other.cell.cmp(&self.cell))
            .then(other.word.cmp(&self.word))
    }
}

/// Settings for [`build_homotopy_distance_map`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    pub resolution: f64,
    pub max_word_len: usize,
    /// When classes are given, words may prefix a class suffix with up to
    /// this many extra letters.
    pub detour_letters: usize,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self { resolution: 0.02, max_word_len: 6, detour_letters: 1 }
    }
}

/// Distances from (cell, signature) nodes to the goal cell, where the
/// signature is that of the path from the cell to the goal.
#[derive(Debug, Clone)]
pub struct HomotopyDistanceMap {
    grid: ProjectedGrid,
    goal_cell: usize,
    words: Vec<HSignature>,
    word_ids: HashMap<HSignature, u32>,
    dist: HashMap<u64, OctileCount>,
}

fn node_key(cell: u32, word: u32) -> u64 {
    (word as u64) << 32 | cell as u64
}

impl HomotopyDistanceMap {
    pub fn grid(&self) -> &ProjectedGrid {
        &self.grid
    }

    pub fn goal_cell(&self) -> usize {
        self.goal_cell
    }

    pub fn resolution(&self) -> f64 {
        self.grid.resolution
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    pub fn count(&self, cell: usize, sig: &HSignature) -> Option<OctileCount> {
        let w = *self.word_ids.get(sig)?;
        self.dist.get(&node_key(cell as u32, w)).copied()
    }

    /// Shortest free-path length (meters) from `cell` to the goal with
    /// signature `sig`, if reached.
    pub fn distance(&self, cell: usize, sig: &HSignature) -> Option<f64> {
        self.count(cell, sig).map(|c| c.cells() * self.grid.resolution)
    }

    /// Every reached node as `(cell, signature, meters)`, sorted.
    pub fn entries(&self) -> Vec<(usize, &HSignature, f64)> {
        let mut out: Vec<(usize, &HSignature, f64)> = self
            .dist
            .iter()
            .map(|(k, c)| {
                let cell = (*k & 0xffff_ffff) as usize;
                let word = (*k >> 32) as usize;
                (cell, &self.words[word], c.cells() * self.grid.resolution)
            })
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(b.1)));
        out
    }

    /// Distance from an arbitrary projected point to the goal along curves of
    /// class `sig`. The point is joined to the centers of its own and the
    /// eight surrounding cells by a straight segment, whose crossings are
    /// accounted for. Returns infinity when no candidate is reached.
    pub fn query(&self, p: &Point2, sig: &HSignature, beams: &[Beam]) -> f64 {
        let Some(own) = self.grid.cell_of(p) else {
            return f64::INFINITY;
        };
        let mut best = f64::INFINITY;
        let candidates =
            std::iter::once(own).chain((0..8).filter_map(|d| self.grid.neighbor(own, d)));
        for cell in candidates {
            if !self.grid.is_free(cell) {
                continue;
            }
            let center = self.grid.center(cell);
            let lead = HSignature::new(&segment_crossings(beams, p, &center));
            let rest = lead.inverse().concat(sig);
            if let Some(d) = self.distance(cell, &rest) {
                best = best.min((center - p).norm() + d);
            }
        }
        best
    }

    /// Text dump: one `cell_x cell_z word distance` line per node.
    pub fn dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# cell_x cell_z signature distance_m")?;
        for (cell, sig, d) in self.entries() {
            let (i, k) = self.grid.coords(cell);
            writeln!(out, "{i} {k} {sig} {d:.6}")?;
        }
        Ok(())
    }
}

/// Words allowed in a class-restricted map: every suffix of every class,
/// optionally prefixed by up to `detour` letters, capped at `max_len`.
fn allowed_words(
    classes: &[HSignature],
    num_letters: usize,
    detour: usize,
    max_len: usize,
) -> HashSet<HSignature> {
    let mut out: HashSet<HSignature> = HashSet::new();
    let alphabet: Vec<SignedLetter> = (0..num_letters)
        .flat_map(|l| [SignedLetter::pos(l), SignedLetter::neg(l)])
        .collect();
    let mut frontier: Vec<HSignature> = Vec::new();
    for c in classes {
        for s in c.suffixes() {
            if s.len() <= max_len && out.insert(s.clone()) {
                frontier.push(s);
            }
        }
    }
    for _ in 0..detour {
        let mut next = Vec::new();
        for w in &frontier {
            for a in &alphabet {
                let cand = HSignature::new(&[*a]).concat(w);
                if cand.len() <= max_len && out.insert(cand.clone()) {
                    next.push(cand);
                }
            }
        }
        frontier = next;
    }
    out
}

/// Uniform-cost search over (cell, signature) from `(goal, [])`.
///
/// With `classes = None` every reduced word up to `max_word_len` letters is
/// admitted. With classes, only the words from [`MapOptions::detour_letters`]
/// around class suffixes are kept, which bounds the node count for planning.
pub fn build_homotopy_distance_map(
    env: &Environment,
    beams: &[Beam],
    g_proj: &Point2,
    classes: Option<&[HSignature]>,
    opts: &MapOptions,
) -> Result<HomotopyDistanceMap, HomotopyError> {
    let grid = ProjectedGrid::new(env, beams, opts.resolution);
    let goal_cell = grid
        .cell_of(g_proj)
        .filter(|&c| grid.is_free(c) && !env.projected_occupied(g_proj))
        .ok_or(HomotopyError::GoalBlocked(g_proj.x, g_proj.y))?;

    let allowed = classes.map(|cs| allowed_words(cs, beams.len(), opts.detour_letters, opts.max_word_len));
    let mut map = HomotopyDistanceMap {
        grid,
        goal_cell,
        words: Vec::new(),
        word_ids: HashMap::new(),
        dist: HashMap::new(),
    };
    let intern = |map: &mut HomotopyDistanceMap, w: HSignature| -> u32 {
        if let Some(&id) = map.word_ids.get(&w) {
            return id;
        }
        let id = map.words.len() as u32;
        map.words.push(w.clone());
        map.word_ids.insert(w, id);
        id
    };
    // (word, move crossing) -> resulting word
    let mut transitions: HashMap<(u32, Vec<SignedLetter>), Option<u32>> = HashMap::new();

    let empty = intern(&mut map, HSignature::empty());
    let mut heap = BinaryHeap::new();
    map.dist.insert(node_key(goal_cell as u32, empty), OctileCount::default());
    heap.push(HeapEntry { cells: 0.0, count: OctileCount::default(), cell: goal_cell as u32, word: empty });

    while let Some(HeapEntry { cells, count, cell, word }) = heap.pop() {
        if map.dist.get(&node_key(cell, word)).map_or(true, |c| c.cells() < cells) {
            continue;
        }
        for dir in 0..8 {
            let Some(next) = map.grid.free_move(cell as usize, dir) else {
                continue;
            };
            // Path next -> cell -> goal: prefix the crossings of next -> cell,
            // which are the inverse of cell -> next.
            let crossed = map.grid.move_crossings(cell as usize, dir);
            let next_word = if crossed.is_empty() {
                Some(word)
            } else {
                let key = (word, crossed.to_vec());
                match transitions.get(&key) {
                    Some(r) => *r,
                    None => {
                        let lead = HSignature::new(crossed).inverse();
                        let w = lead.concat(&map.words[word as usize]);
                        let ok = match &allowed {
                            Some(set) => set.contains(&w),
                            None => w.len() <= opts.max_word_len,
                        };
                        let r = ok.then(|| intern(&mut map, w));
                        transitions.insert(key, r);
                        r
                    }
                }
            };
            let Some(next_word) = next_word else { continue };
            let nc = count.step(dir);
            let nv = nc.cells();
            let key = node_key(next as u32, next_word);
            if map.dist.get(&key).map_or(true, |c| nv < c.cells()) {
                map.dist.insert(key, nc);
                heap.push(HeapEntry { cells: nv, count: nc, cell: next as u32, word: next_word });
            }
        }
    }
    Ok(map)
}

/// Homotopy-agnostic octile distance to the goal over free projected cells.
#[derive(Debug, Clone)]
pub struct PlainDistanceMap {
    grid: ProjectedGrid,
    dist: Vec<Option<OctileCount>>,
}

impl PlainDistanceMap {
    pub fn build(env: &Environment, beams: &[Beam], g_proj: &Point2, resolution: f64) -> Result<Self, HomotopyError> {
        let grid = ProjectedGrid::new(env, beams, resolution);
        let goal = grid
            .cell_of(g_proj)
            .filter(|&c| grid.is_free(c) && !env.projected_occupied(g_proj))
            .ok_or(HomotopyError::GoalBlocked(g_proj.x, g_proj.y))?;
        let mut dist = vec![None; grid.num_cells()];
        let mut heap = BinaryHeap::new();
        dist[goal] = Some(OctileCount::default());
        heap.push(HeapEntry { cells: 0.0, count: OctileCount::default(), cell: goal as u32, word: 0 });
        while let Some(HeapEntry { cells, count, cell, .. }) = heap.pop() {
            if dist[cell as usize].map_or(true, |c| c.cells() < cells) {
                continue;
            }
            for dir in 0..8 {
                let Some(next) = grid.free_move(cell as usize, dir) else { continue };
                let nc = count.step(dir);
                if dist[next].map_or(true, |c| nc.cells() < c.cells()) {
                    dist[next] = Some(nc);
                    heap.push(HeapEntry { cells: nc.cells(), count: nc, cell: next as u32, word: 0 });
                }
            }
        }
        Ok(Self { grid, dist })
    }

    pub fn distance(&self, cell: usize) -> Option<f64> {
        self.dist[cell].map(|c| c.cells() * self.grid.resolution)
    }

    /// Same candidate scheme as [`HomotopyDistanceMap::query`], without
    /// signatures.
    pub fn query(&self, p: &Point2) -> f64 {
        let Some(own) = self.grid.cell_of(p) else {
            return f64::INFINITY;
        };
        std::iter::once(own)
            .chain((0..8).filter_map(|d| self.grid.neighbor(own, d)))
            .filter_map(|c| self.distance(c).map(|d| d + (self.grid.center(c) - p).norm()))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Heuristic of a robot state toward `goal_sig`: distance from the projected
/// tip to the goal along the remainder class.
pub fn homotopy_heuristic(
    map: &HomotopyDistanceMap,
    spec: &RobotSpec,
    beams: &[Beam],
    c: &Configuration,
    goal_sig: &HSignature,
) -> f64 {
    let pts: Vec<Point2> = forward_kinematics(spec, c).points().iter().map(project).collect();
    let state_sig = signature_of_polyline(beams, &pts);
    let tip = *pts.last().expect("non-empty body");
    map.query(&tip, &remainder_signature(&state_sig, goal_sig), beams)
}

/// Gap in one column through which the robot may pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Passage {
    pub column: usize,
    pub z: Interval,
    /// Between two blades, as opposed to between a blade and the bounds.
    pub interior: bool,
    /// x of the beam spanning this gap, or of the blade above it when the
    /// gap lies under the lowest blade.
    pub x: f64,
}

impl Passage {
    pub fn midpoint(&self) -> Point2 {
        Point2::new(self.x, self.z.center())
    }
}

/// Gaps of every column, bottom to top, including boundary gaps of
/// non-zero height.
pub fn passages(env: &Environment) -> Vec<Passage> {
    let b = env.bounds();
    let mut out = Vec::new();
    for c in 0..env.columns().len() {
        let col: Vec<_> = env.column_blades(c).collect();
        let first = col[0];
        if first.z.min > b.min.z {
            out.push(Passage {
                column: c,
                z: Interval::new(b.min.z, first.z.min),
                interior: false,
                x: first.x.center(),
            });
        }
        for w in col.windows(2) {
            out.push(Passage {
                column: c,
                z: Interval::new(w[0].z.max, w[1].z.min),
                interior: true,
                x: w[0].x.center(),
            });
        }
        let last = col[col.len() - 1];
        if last.z.max < b.max.z {
            out.push(Passage {
                column: c,
                z: Interval::new(last.z.max, b.max.z),
                interior: false,
                x: last.x.center(),
            });
        }
    }
    out
}

/// A relevant class: passage sequence, its signature and rank (0 = best).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub passages: Vec<Passage>,
    pub signature: HSignature,
    pub rank: usize,
    /// Summed |dz| between consecutive passage midpoints.
    pub deviation: f64,
}

/// Passage sequences from the robot base to the goal, best first.
///
/// The last column's passage is the one nearest the goal height; earlier
/// columns take every passage wide enough for the body. Sequences are ranked
/// by summed vertical deviation between consecutive passages, then by the
/// first passage's offset from the base height.
pub fn detect_relevant_classes(
    env: &Environment,
    beams: &[Beam],
    spec: &RobotSpec,
    start: &Configuration,
    g_proj: &Point2,
    k: usize,
) -> Result<Vec<ClassSpec>, HomotopyError> {
    if k == 0 {
        return Err(HomotopyError::ZeroClasses);
    }
    let base = project(&(spec.base_position + spec.forward() * start.l));
    let min_width = 2.0 * spec.body_radius;
    let all = passages(env);
    let columns: Vec<usize> = env
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, iv)| iv.center() > base.x && iv.center() < g_proj.x)
        .map(|(c, _)| c)
        .collect();
    if columns.is_empty() {
        return Ok(vec![ClassSpec {
            passages: vec![],
            signature: signature_of_polyline(beams, &[base, *g_proj]),
            rank: 0,
            deviation: 0.0,
        }]);
    }
    let usable = |c: usize| -> Vec<Passage> {
        all.iter().filter(|p| p.column == c && p.z.width() > min_width).cloned().collect()
    };
    let last_col = *columns.last().unwrap();
    let Some(last) = usable(last_col).into_iter().min_by(|a, b| {
        a.z.distance(g_proj.y).total_cmp(&b.z.distance(g_proj.y)).then(a.z.min.total_cmp(&b.z.min))
    }) else {
        return Ok(vec![]);
    };

    let options: Vec<Vec<Passage>> = columns[..columns.len() - 1].iter().map(|&c| usable(c)).collect();
    if options.iter().any(|o| o.is_empty()) {
        return Ok(vec![]);
    }
    let mut sequences: Vec<(f64, f64, Vec<usize>)> = Vec::new();
    let mut choice = vec![0usize; options.len()];
    loop {
        let mut seq: Vec<&Passage> = choice.iter().enumerate().map(|(i, &j)| &options[i][j]).collect();
        seq.push(&last);
        let dev: f64 = seq.windows(2).map(|w| (w[0].z.center() - w[1].z.center()).abs()).sum();
        let start_dev = (seq[0].z.center() - base.y).abs();
        sequences.push((dev, start_dev, choice.clone()));
        // Odometer increment over the per-column choices.
        let mut i = 0;
        while i < choice.len() {
            choice[i] += 1;
            if choice[i] < options[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
        if i == choice.len() {
            break;
        }
    }
    sequences.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    Ok(sequences
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(rank, (deviation, _, choice))| {
            let mut ps: Vec<Passage> = choice.iter().enumerate().map(|(i, &j)| options[i][j].clone()).collect();
            ps.push(last.clone());
            let mut poly = vec![base];
            poly.extend(ps.iter().map(|p| p.midpoint()));
            poly.push(*g_proj);
            ClassSpec { signature: signature_of_polyline(beams, &poly), passages: ps, rank, deviation }
        })
        .collect())
}
