//! Independent oracles and fixture checks shared by the integration tests
//! and the acceptance runner. Each `criterion_*` function returns a one-line
//! summary on success and a description of the first violation otherwise.

#![allow(dead_code)]

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use bladecrawl::env::{place_beams, Beam, Blade, Bounds, Environment, Interval};
use bladecrawl::homotopy::{
    build_homotopy_distance_map, reduce_word, signature_of_polyline, HSignature, MapOptions, SignedLetter,
};
use bladecrawl::optimizer::{
    generate_neighbor, objective, ObjectiveWeights, OptRequest, OptimizerSettings, P_COLLIDE,
};
use bladecrawl::robot::{
    end_effector, forward_kinematics, is_valid_state, is_valid_transition, transition_cost, Configuration,
    RobotSpec, TransitionSteps,
};
use bladecrawl::search::{
    plan, plan_with_generator, validate_plan, ActionDeltas, ActionMode, GoalPose, Generated, HeuristicMode,
    NeighborGenerator, PlanOutcome, PlannerConfig, Problem, SchedulerMode,
};
use bladecrawl::{cmaes_minimize, CmaesOptions, Point2, Point3, Vector3};
use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

// ---------------------------------------------------------------------------
// Kinematics

fn rot_y(a: f64) -> Matrix4<f64> {
    let (s, c) = a.sin_cos();
    Matrix4::new(c, 0.0, s, 0.0, 0.0, 1.0, 0.0, 0.0, -s, 0.0, c, 0.0, 0.0, 0.0, 0.0, 1.0)
}

fn rot_z(a: f64) -> Matrix4<f64> {
    let (s, c) = a.sin_cos();
    Matrix4::new(c, -s, 0.0, 0.0, s, c, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0)
}

fn translate_x(d: f64) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m[(0, 3)] = d;
    m
}

/// Body points by composing 4x4 homogeneous transforms, one
/// `Ry(-pitch) Rz(yaw) Tx(L)` per subunit. The base frame has columns
/// (forward, up x forward, up) with up = world z orthogonalized.
pub fn fk_homogeneous(spec: &RobotSpec, c: &Configuration) -> Vec<Point3> {
    let f = spec.base_forward.normalize();
    let up = (Vector3::z() - f * f.z).normalize();
    let lat = up.cross(&f);
    let origin = spec.base_position + f * c.l;
    let mut t = Matrix4::identity();
    for r in 0..3 {
        t[(r, 0)] = f[r];
        t[(r, 1)] = lat[r];
        t[(r, 2)] = up[r];
        t[(r, 3)] = origin[r];
    }
    let mut out = vec![origin];
    for u in 0..spec.num_units {
        for _ in 0..spec.subunits_per_unit {
            t = t * rot_y(-c.pitch[u]) * rot_z(c.yaw[u]) * translate_x(spec.subunit_length);
            let p = t * Vector4::new(0.0, 0.0, 0.0, 1.0);
            out.push(Point3::new(p.x, p.y, p.z));
        }
    }
    out
}

pub fn desk_spec() -> RobotSpec {
    RobotSpec {
        num_units: 5,
        subunits_per_unit: 5,
        subunit_length: 0.04,
        body_radius: 0.015,
        pitch_limit: 0.35,
        yaw_limit: 0.35,
        prismatic_range: Interval::new(0.0, 0.8),
        base_position: Point3::new(0.05, 0.0, 0.6),
        base_forward: Vector3::x(),
    }
}

pub fn random_config<R: Rng>(spec: &RobotSpec, rng: &mut R) -> Configuration {
    let mut c = Configuration::straight(spec.num_units, rng.random_range(spec.prismatic_range.min..=spec.prismatic_range.max));
    for u in 0..spec.num_units {
        c.pitch[u] = rng.random_range(-spec.pitch_limit..=spec.pitch_limit);
        c.yaw[u] = rng.random_range(-spec.yaw_limit..=spec.yaw_limit);
    }
    c
}

// ---------------------------------------------------------------------------
// Signatures

pub type Word = Vec<(usize, bool)>;

/// Repeated adjacent cancellation until no pair `x x'` remains.
pub fn oracle_reduce(word: &[(usize, bool)]) -> Word {
    let mut w: Word = word.to_vec();
    loop {
        let pos = w.windows(2).position(|p| p[0].0 == p[1].0 && p[0].1 != p[1].1);
        match pos {
            Some(i) => {
                w.drain(i..i + 2);
            }
            None => return w,
        }
    }
}

pub fn to_word(sig: &HSignature) -> Word {
    sig.letters().iter().map(|l| (l.letter as usize, l.positive)).collect()
}

fn letter(l: (usize, bool)) -> SignedLetter {
    if l.1 {
        SignedLetter::pos(l.0)
    } else {
        SignedLetter::neg(l.0)
    }
}

/// Beam crossings of the segment `a -> b`, ordered along the segment. A point
/// with x at or right of the beam counts as right of it.
pub fn oracle_crossings(beams: &[Beam], a: &Point2, b: &Point2) -> Word {
    let mut hits: Vec<(f64, (usize, bool))> = Vec::new();
    for beam in beams {
        let x = beam.anchor.x;
        let (ra, rb) = (a.x >= x, b.x >= x);
        if ra == rb {
            continue;
        }
        let t = (x - a.x) / (b.x - a.x);
        let z = a.y + t * (b.y - a.y);
        if z >= beam.anchor.y && z <= beam.top {
            hits.push((t, (beam.letter, rb)));
        }
    }
    hits.sort_by(|p, q| p.0.total_cmp(&q.0));
    hits.into_iter().map(|h| h.1).collect()
}

fn polyline_word(beams: &[Beam], pts: &[Point2]) -> Word {
    let mut w = Vec::new();
    for s in pts.windows(2) {
        w.extend(oracle_crossings(beams, &s[0], &s[1]));
    }
    oracle_reduce(&w)
}

/// Whether the closed triangle meets the closed axis-aligned rectangle
/// (separating axis test).
fn triangle_meets_rect(t: [Point2; 3], lo: Point2, hi: Point2) -> bool {
    let mut axes: Vec<(f64, f64)> = vec![(1.0, 0.0), (0.0, 1.0)];
    for i in 0..3 {
        let e = t[(i + 1) % 3] - t[i];
        axes.push((-e.y, e.x));
    }
    let corners = [lo, Point2::new(hi.x, lo.y), hi, Point2::new(lo.x, hi.y)];
    for (ax, az) in axes {
        let proj = |p: &Point2| p.x * ax + p.y * az;
        let (tmin, tmax) = t.iter().map(proj).fold((f64::INFINITY, f64::NEG_INFINITY), |m, v| (m.0.min(v), m.1.max(v)));
        let (rmin, rmax) = corners.iter().map(proj).fold((f64::INFINITY, f64::NEG_INFINITY), |m, v| (m.0.min(v), m.1.max(v)));
        if tmax < rmin || rmax < tmin {
            return false;
        }
    }
    true
}

fn segment_free(env: &Environment, a: Point2, b: Point2) -> bool {
    !triangle_meets_rect_any(env, [a, b, b])
}

fn triangle_meets_rect_any(env: &Environment, t: [Point2; 3]) -> bool {
    env.blades()
        .iter()
        .any(|b| triangle_meets_rect(t, Point2::new(b.x.min, b.z.min), Point2::new(b.x.max, b.z.max)))
}

/// Random environment of 1 to 4 non-overlapping blades in the unit square.
pub fn random_env<R: Rng>(rng: &mut R) -> Environment {
    let bounds = Bounds::new(Point3::new(0.0, -0.1, 0.0), Point3::new(1.0, 0.1, 1.0));
    loop {
        let n = rng.random_range(1..=4);
        let blades: Vec<Blade> = (0..n)
            .map(|_| {
                let x = rng.random_range(0.1..0.8);
                let z = rng.random_range(0.05..0.8);
                let w = rng.random_range(0.04..0.15);
                let h = rng.random_range(0.05..0.3);
                Blade::new(Interval::new(x, x + w), Interval::new(0.0, 0.0), Interval::new(z, (z + h).min(0.95)))
            })
            .collect();
        if let Ok(env) = Environment::from_blades(bounds, blades) {
            return env;
        }
    }
}

fn random_free_point<R: Rng>(env: &Environment, rng: &mut R) -> Point2 {
    loop {
        let p = Point2::new(rng.random_range(0.01..0.99), rng.random_range(0.01..0.99));
        if !env.projected_occupied(&p) {
            return p;
        }
    }
}

/// Random collision-free polyline between two free points.
fn random_polyline<R: Rng>(env: &Environment, rng: &mut R) -> Vec<Point2> {
    'outer: loop {
        let n = rng.random_range(3..8);
        let mut pts = vec![random_free_point(env, rng)];
        for _ in 0..n {
            let p = random_free_point(env, rng);
            if !segment_free(env, *pts.last().unwrap(), p) {
                continue 'outer;
            }
            pts.push(p);
        }
        return pts;
    }
}

/// Moves one interior vertex so that the swept region avoids every blade,
/// which keeps the curve in its homotopy class.
fn deform<R: Rng>(env: &Environment, pts: &mut [Point2], rng: &mut R) -> bool {
    let i = rng.random_range(1..pts.len() - 1);
    let step = rng.random_range(0.01..0.15);
    let q = pts[i] + nalgebra::Vector2::new(rng.random_range(-step..step), rng.random_range(-step..step));
    if !(q.x > 0.0 && q.x < 1.0 && q.y > 0.0 && q.y < 1.0) {
        return false;
    }
    let (a, p, b) = (pts[i - 1], pts[i], pts[i + 1]);
    if triangle_meets_rect_any(env, [a, p, q]) || triangle_meets_rect_any(env, [p, q, b]) {
        return false;
    }
    pts[i] = q;
    true
}

fn random_word<R: Rng>(rng: &mut R, letters: usize, len: usize) -> Vec<SignedLetter> {
    (0..len).map(|_| letter((rng.random_range(0..letters), rng.random_bool(0.5)))).collect()
}

/// Three single-blade columns at equal height, beams to the ceiling. The
/// first curve passes over the first and third blade and under the second;
/// the second curve passes under the first two and over the third.
pub fn three_blade_fixture() -> (Environment, Vec<Point2>, Vec<Point2>) {
    let bounds = Bounds::new(Point3::new(0.0, -0.1, 0.0), Point3::new(1.0, 0.1, 1.0));
    let blade = |x0: f64| Blade::new(Interval::new(x0, x0 + 0.1), Interval::new(0.0, 0.0), Interval::new(0.4, 0.6));
    let env = Environment::from_blades(bounds, vec![blade(0.2), blade(0.45), blade(0.7)]).unwrap();
    let p = Point2::new;
    let tau1 = vec![p(0.05, 0.5), p(0.1, 0.8), p(0.35, 0.8), p(0.4, 0.2), p(0.6, 0.2), p(0.65, 0.8), p(0.9, 0.8), p(0.95, 0.5)];
    let tau2 = vec![p(0.05, 0.5), p(0.1, 0.2), p(0.6, 0.2), p(0.65, 0.8), p(0.9, 0.8), p(0.95, 0.5)];
    (env, tau1, tau2)
}

pub fn criterion_2() -> Check {
    // Fixture values; letters are zero-based.
    let (env, tau1, tau2) = three_blade_fixture();
    let beams = place_beams(&env);
    let s1 = signature_of_polyline(&beams, &tau1);
    let s2 = signature_of_polyline(&beams, &tau2);
    ensure!(to_word(&s1) == vec![(0, true), (2, true)], "tau1 signature {s1}, expected l0 l2");
    ensure!(to_word(&s2) == vec![(2, true)], "tau2 signature {s2}, expected l2");

    let mut rng = ChaCha8Rng::seed_from_u64(0x5167);
    // Idempotence and agreement with the cancellation oracle.
    for _ in 0..2000 {
        let len = rng.random_range(0..12);
        let w = random_word(&mut rng, 3, len);
        let r = reduce_word(&w);
        ensure!(reduce_word(&r) == r, "reduce is not idempotent on {w:?}");
        let o: Vec<(usize, bool)> = w.iter().map(|l| (l.letter as usize, l.positive)).collect();
        let r_word: Word = r.iter().map(|l| (l.letter as usize, l.positive)).collect();
        ensure!(r_word == oracle_reduce(&o), "reduce disagrees with the cancellation oracle on {o:?}");
    }
    // Concatenation homomorphism on words and on polylines.
    for _ in 0..1000 {
        let (la, lb) = (rng.random_range(0..8), rng.random_range(0..8));
        let a = random_word(&mut rng, 3, la);
        let b = random_word(&mut rng, 3, lb);
        let ab: Vec<SignedLetter> = a.iter().chain(&b).copied().collect();
        ensure!(
            HSignature::new(&a).concat(&HSignature::new(&b)) == HSignature::new(&ab),
            "concat(reduce a, reduce b) != reduce(a b)"
        );
    }
    let mut deformations = 0usize;
    let mut cases = 0usize;
    while cases < 500 {
        let env = random_env(&mut rng);
        let beams = place_beams(&env);
        let mut pts = random_polyline(&env, &mut rng);
        let base = signature_of_polyline(&beams, &pts);
        ensure!(to_word(&base) == polyline_word(&beams, &pts), "signature disagrees with the crossing oracle");
        // Homomorphism on a split polyline.
        let k = pts.len() / 2;
        let head = signature_of_polyline(&beams, &pts[..=k]);
        let tail = signature_of_polyline(&beams, &pts[k..]);
        ensure!(head.concat(&tail) == base, "signature of a joined polyline is not the product");
        let mut applied = 0;
        let mut tries = 0;
        while applied < 20 && tries < 2000 {
            tries += 1;
            if deform(&env, &mut pts, &mut rng) {
                applied += 1;
                let s = signature_of_polyline(&beams, &pts);
                ensure!(s == base, "deformation changed the signature from {base} to {s}");
            }
        }
        if applied == 20 {
            cases += 1;
            deformations += applied;
        }
    }
    Ok(format!("fixture l0 l2 / l2, {cases} curves x 20 deformations ({deformations} checks), 0 violations"))
}

// ---------------------------------------------------------------------------
// Homotopy-augmented grid

/// Exact octile length `a + b * sqrt(2)`, compared without rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Octile(pub u32, pub u32);

impl Ord for Octile {
    fn cmp(&self, o: &Self) -> Ordering {
        let da = self.0 as i64 - o.0 as i64;
        let db = o.1 as i64 - self.1 as i64;
        // sign of da - db * sqrt(2)
        match (da.signum(), db.signum()) {
            (0, 0) => Ordering::Equal,
            (s, t) if s >= 0 && t <= 0 => Ordering::Greater,
            (s, t) if s <= 0 && t >= 0 => Ordering::Less,
            (1, 1) => (da * da).cmp(&(2 * db * db)),
            _ => (2 * db * db).cmp(&(da * da)),
        }
    }
}

impl PartialOrd for Octile {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

pub struct ProductGraph {
    pub nx: usize,
    pub nz: usize,
    pub words: Vec<Word>,
    /// Indexed by `cell * words.len() + word`.
    pub dist: Vec<Option<Octile>>,
}

/// Dijkstra from `(goal, [])` over the explicit product of free cells and
/// every reduced word of at most `max_len` letters. Node `(c, w)` holds the
/// shortest path from `c` to the goal whose signature is `w`.
pub fn product_graph(env: &Environment, beams: &[Beam], goal: Point2, res: f64, max_len: usize) -> ProductGraph {
    let b = env.bounds();
    let nx = ((b.max.x - b.min.x) / res).ceil() as usize;
    let nz = ((b.max.z - b.min.z) / res).ceil() as usize;
    let center = |i: usize, k: usize| Point2::new(b.min.x + (i as f64 + 0.5) * res, b.min.z + (k as f64 + 0.5) * res);
    let free: Vec<bool> = (0..nx * nz)
        .map(|c| {
            let p = center(c % nx, c / nx);
            !env.blades().iter().any(|bl| p.x >= bl.x.min && p.x <= bl.x.max && p.y >= bl.z.min && p.y <= bl.z.max)
        })
        .collect();

    // Every reduced word up to max_len.
    let mut words: Vec<Word> = vec![vec![]];
    let mut layer = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for l in 0..beams.len() {
                for s in [true, false] {
                    let last: Option<&(usize, bool)> = w.last();
                    if last.is_some_and(|x| x.0 == l && x.1 != s) {
                        continue;
                    }
                    let mut v = w.clone();
                    v.push((l, s));
                    next.push(v);
                }
            }
        }
        words.extend(next.iter().cloned());
        layer = next;
    }
    let index: HashMap<Word, usize> = words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
    let nw = words.len();

    let gi = ((goal.x - b.min.x) / res).floor() as usize;
    let gk = ((goal.y - b.min.z) / res).floor() as usize;
    let goal_cell = gk * nx + gi;
    let mut dist: Vec<Option<Octile>> = vec![None; nx * nz * nw];
    let mut heap = BinaryHeap::new();
    dist[goal_cell * nw] = Some(Octile(0, 0));
    heap.push(std::cmp::Reverse((Octile(0, 0), goal_cell, 0usize)));
    while let Some(std::cmp::Reverse((d, cell, w))) = heap.pop() {
        if dist[cell * nw + w] != Some(d) {
            continue;
        }
        let (i, k) = ((cell % nx) as i64, (cell / nx) as i64);
        for dx in -1i64..=1 {
            for dz in -1i64..=1 {
                if dx == 0 && dz == 0 {
                    continue;
                }
                let (ni, nk) = (i + dx, k + dz);
                if ni < 0 || nk < 0 || ni >= nx as i64 || nk >= nz as i64 {
                    continue;
                }
                let n = (nk as usize) * nx + ni as usize;
                if !free[n] {
                    continue;
                }
                let diagonal = dx != 0 && dz != 0;
                if diagonal && (!free[k as usize * nx + ni as usize] || !free[nk as usize * nx + i as usize]) {
                    continue;
                }
                // Path n -> cell -> goal.
                let lead = oracle_crossings(beams, &center(ni as usize, nk as usize), &center(i as usize, k as usize));
                let nw_idx = if lead.is_empty() {
                    w
                } else {
                    let mut full = lead;
                    full.extend(words[w].iter().copied());
                    match index.get(&oracle_reduce(&full)) {
                        Some(&j) => j,
                        None => continue,
                    }
                };
                let nd = if diagonal { Octile(d.0, d.1 + 1) } else { Octile(d.0 + 1, d.1) };
                let slot = &mut dist[n * nw + nw_idx];
                if slot.is_none_or(|old| nd < old) {
                    *slot = Some(nd);
                    heap.push(std::cmp::Reverse((nd, n, nw_idx)));
                }
            }
        }
    }
    ProductGraph { nx, nz, words, dist }
}

/// Grid fixtures of at most 30 x 30 cells with 1 to 4 blades.
pub fn grid_fixtures() -> Vec<(Environment, Point2)> {
    let bounds = Bounds::new(Point3::new(0.0, -0.1, 0.0), Point3::new(0.6, 0.1, 0.6));
    let bl = |x0: f64, x1: f64, z0: f64, z1: f64| {
        Blade::new(Interval::new(x0, x1), Interval::new(0.0, 0.0), Interval::new(z0, z1))
    };
    let p = Point2::new;
    let raw = vec![
        (vec![bl(0.28, 0.34, 0.2, 0.4)], p(0.5, 0.3)),
        (vec![bl(0.2, 0.26, 0.1, 0.25), bl(0.2, 0.26, 0.35, 0.5)], p(0.45, 0.45)),
        (vec![bl(0.15, 0.21, 0.2, 0.45), bl(0.38, 0.44, 0.05, 0.25), bl(0.38, 0.44, 0.33, 0.55)], p(0.55, 0.1)),
        (
            vec![bl(0.12, 0.18, 0.1, 0.28), bl(0.12, 0.18, 0.36, 0.5), bl(0.36, 0.42, 0.0, 0.2), bl(0.36, 0.42, 0.3, 0.52)],
            p(0.05, 0.55),
        ),
        (vec![bl(0.3, 0.36, 0.0, 0.3), bl(0.1, 0.16, 0.4, 0.5)], p(0.31, 0.5)),
        (vec![bl(0.25, 0.3, 0.25, 0.3)], p(0.27, 0.1)),
    ];
    raw.into_iter().map(|(b, g)| (Environment::from_blades(bounds, b).unwrap(), g)).collect()
}

pub fn criterion_1() -> Check {
    let t0 = Instant::now();
    let res = 0.02;
    let max_len = 4;
    let mut nodes = 0usize;
    let fixtures = grid_fixtures();
    for (fi, (env, goal)) in fixtures.iter().enumerate() {
        let beams = place_beams(&env);
        let opts = MapOptions { resolution: res, max_word_len: max_len, detour_letters: 0 };
        let map = build_homotopy_distance_map(env, &beams, goal, None, &opts).map_err(|e| e.to_string())?;
        let oracle = product_graph(env, &beams, *goal, res, max_len);
        let nw = oracle.words.len();
        ensure!(map.grid().dims() == (oracle.nx, oracle.nz), "fixture {fi}: grid dimensions differ");
        let reached = oracle.dist.iter().filter(|d| d.is_some()).count();
        ensure!(map.len() == reached, "fixture {fi}: map has {} nodes, oracle reaches {reached}", map.len());
        let goal_center = map.grid().center(map.goal_cell());
        for (cell, sig, meters) in map.entries() {
            let w = to_word(sig);
            let wi = oracle.words.iter().position(|x| *x == w).ok_or(format!("fixture {fi}: unknown word {sig}"))?;
            let Some(Octile(a, b)) = oracle.dist[cell * nw + wi] else {
                return Err(format!("fixture {fi}: map reaches cell {cell} {sig}, oracle does not"));
            };
            let c = map.count(cell, sig).unwrap();
            ensure!(
                (c.straight, c.diagonal) == (a, b),
                "fixture {fi}: cell {cell} {sig}: map {}+{}d, oracle {a}+{b}d",
                c.straight,
                c.diagonal
            );
            // Admissibility of the straight-line distance against the map.
            let straight = (map.grid().center(cell) - goal_center).norm();
            ensure!(straight <= meters + 1e-9, "fixture {fi}: map distance below the straight line");
        }
        nodes += reached;
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1} s");
    Ok(format!("{} grids, {nodes} (cell, word) nodes equal to the product-graph oracle", fixtures.len()))
}

// ---------------------------------------------------------------------------
// Planner fixtures

/// Three-DOF robot: one unit of four subunits.
pub fn micro_spec() -> RobotSpec {
    RobotSpec {
        num_units: 1,
        subunits_per_unit: 4,
        subunit_length: 0.05,
        body_radius: 0.02,
        pitch_limit: 0.4,
        yaw_limit: 0.4,
        prismatic_range: Interval::new(0.0, 0.5),
        base_position: Point3::new(0.1, 0.0, 0.5),
        base_forward: Vector3::x(),
    }
}

pub fn micro_config(w: f64) -> PlannerConfig {
    PlannerConfig {
        heuristic_weight: w,
        deltas: ActionDeltas { revolute: 0.1, prismatic: 0.025 },
        steps: TransitionSteps { revolute: 0.05, prismatic: 0.01 },
        eps: 0.05,
        eps_pos: 0.01,
        action_mode: ActionMode::PredefinedOnly,
        heuristic_mode: HeuristicMode::AnchorOnly,
        scheduler: SchedulerMode::RoundRobin,
        timeout: None,
        ..PlannerConfig::default()
    }
}

fn micro_bounds() -> Bounds {
    Bounds::new(Point3::new(0.0, -0.4, 0.0), Point3::new(1.2, 0.4, 1.0))
}

/// A micro-instance whose goal is the tip of a lattice configuration.
pub fn micro_problem(blades: Vec<[f64; 4]>, goal_of: Configuration) -> Problem {
    let bounds = micro_bounds();
    let blades = blades
        .into_iter()
        .map(|b| Blade::new(Interval::new(b[0], b[1]), bounds.axis(1), Interval::new(b[2], b[3])))
        .collect();
    let env = Environment::from_blades(bounds, blades).unwrap();
    let spec = micro_spec();
    let goal = GoalPose::at(end_effector(&spec, &goal_of));
    Problem::new(env, spec.clone(), Configuration::straight(1, 0.0), goal, 0.02, 1.0).unwrap()
}

fn cfg3(l: f64, p: f64, y: f64) -> Configuration {
    Configuration { l, pitch: vec![p], yaw: vec![y] }
}

/// Micro-instances: an open field and several blade placements that force
/// detours around or under a blade.
pub fn micro_fixtures() -> Vec<Problem> {
    vec![
        micro_problem(vec![], cfg3(0.2, 0.2, 0.1)),
        micro_problem(vec![[0.55, 0.6, 0.44, 0.6]], cfg3(0.35, -0.4, -0.2)),
        micro_problem(vec![[0.55, 0.6, 0.4, 0.48]], cfg3(0.3, -0.4, 0.3)),
        micro_problem(vec![[0.6, 0.65, 0.35, 0.47], [0.6, 0.65, 0.53, 0.7]], cfg3(0.5, -0.2, -0.4)),
        micro_problem(vec![[0.48, 0.52, 0.56, 0.7]], cfg3(0.25, -0.3, -0.3)),
    ]
}

/// Exhaustive uniform-cost search over the joint lattice reachable from the
/// start with single-joint steps. Returns the optimal cost to any goal state
/// and the number of lattice states visited.
pub fn lattice_optimum(problem: &Problem, cfg: &PlannerConfig) -> (Option<f64>, usize) {
    let spec = &problem.spec;
    let start = &problem.start;
    let dof = start.dof();
    let step = |i: usize| if i == 0 { cfg.deltas.prismatic } else { cfg.deltas.revolute };
    let bounds = spec.joint_bounds();
    let config_of = |k: &[i64]| {
        let v: Vec<f64> = (0..dof).map(|i| start.get(i) + k[i] as f64 * step(i)).collect();
        Configuration::from_vector(&v)
    };
    let mut best: HashMap<Vec<i64>, f64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let zero = vec![0i64; dof];
    best.insert(zero.clone(), 0.0);
    heap.push(std::cmp::Reverse((Ordered(0.0), zero)));
    let mut settled = 0;
    while let Some(std::cmp::Reverse((g, k))) = heap.pop() {
        let g = g.0;
        if best.get(&k).is_some_and(|&b| b < g) {
            continue;
        }
        settled += 1;
        let c = config_of(&k);
        if (end_effector(spec, &c) - problem.goal.position).norm() <= cfg.eps_pos {
            return (Some(g), settled);
        }
        for i in 0..dof {
            for s in [1i64, -1] {
                let mut nk = k.clone();
                nk[i] += s;
                let v = start.get(i) + nk[i] as f64 * step(i);
                if v < bounds[i].min - 1e-12 || v > bounds[i].max + 1e-12 {
                    continue;
                }
                let n = config_of(&nk);
                let ng = g + transition_cost(spec, &c, &n);
                if best.get(&nk).is_some_and(|&b| b <= ng) {
                    continue;
                }
                if !is_valid_transition(spec, &problem.df, &c, &n, cfg.steps) {
                    continue;
                }
                best.insert(nk.clone(), ng);
                heap.push(std::cmp::Reverse((Ordered(ng), nk)));
            }
        }
    }
    (None, settled)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ordered(pub f64);
impl Eq for Ordered {}
impl Ord for Ordered {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.total_cmp(&o.0)
    }
}
impl PartialOrd for Ordered {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

pub fn lattice_size(spec: &RobotSpec, cfg: &PlannerConfig) -> usize {
    spec.joint_bounds()
        .iter()
        .enumerate()
        .map(|(i, iv)| {
            let d = if i == 0 { cfg.deltas.prismatic } else { cfg.deltas.revolute };
            (iv.width() / d + 1e-9).floor() as usize + 1
        })
        .product()
}

pub fn criterion_4() -> Check {
    let t0 = Instant::now();
    let mut lines = Vec::new();
    for (fi, problem) in micro_fixtures().iter().enumerate() {
        let base = micro_config(1.0);
        ensure!(lattice_size(&problem.spec, &base) <= 100_000, "lattice too large");
        let (opt, _) = lattice_optimum(problem, &base);
        let opt = opt.ok_or(format!("fixture {fi}: goal unreachable on the lattice"))?;
        for w in [1.0, 2.0, 5.0] {
            let cfg = micro_config(w);
            let out = plan(problem, &cfg).map_err(|e| e.to_string())?;
            let p = out.plan.ok_or(format!("fixture {fi}, w {w}: no plan"))?;
            validate_plan(problem, &cfg, &p).map_err(|e| format!("fixture {fi}: {e}"))?;
            ensure!(p.cost <= w * opt + 1e-9, "fixture {fi}, w {w}: cost {} > {w} x {opt}", p.cost);
            if w == 1.0 {
                ensure!((p.cost - opt).abs() <= 1e-9, "fixture {fi}: w 1 cost {} != optimum {opt}", p.cost);
            }
            ensure!(out.stats.reexpansions == 0, "fixture {fi}: a node was expanded twice");
        }
        lines.push(format!("{opt:.4}"));
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "took {secs:.1} s");
    Ok(format!("{} micro-instances, optima [{}], bound holds for w in 1, 2, 5", lines.len(), lines.join(", ")))
}

// ---------------------------------------------------------------------------
// Lazy and eager optimization actions with a deterministic stub generator

/// Returns the half-lattice neighbor (offsets in {-2..2} half steps per joint)
/// of `from` whose tip is nearest the target, if it lies within `accept`.
pub struct StubGenerator {
    pub half: ActionDeltas,
    pub accept: f64,
    pub calls: Cell<usize>,
}

impl StubGenerator {
    pub fn new(deltas: ActionDeltas, accept: f64) -> Self {
        Self {
            half: ActionDeltas { revolute: deltas.revolute / 2.0, prismatic: deltas.prismatic / 2.0 },
            accept,
            calls: Cell::new(0),
        }
    }
}

impl NeighborGenerator for StubGenerator {
    fn generate(&self, problem: &Problem, from: &Configuration, target: &Point3, _seed: u64) -> Generated {
        self.calls.set(self.calls.get() + 1);
        let spec = &problem.spec;
        let dof = from.dof();
        let bounds = spec.joint_bounds();
        let mut best: Option<(f64, Configuration)> = None;
        let mut evaluations = 0u64;
        let total = 5usize.pow(dof as u32);
        for code in 0..total {
            let mut c = from.clone();
            let mut rest = code;
            let mut inside = true;
            for (i, iv) in bounds.iter().enumerate() {
                let k = (rest % 5) as f64 - 2.0;
                rest /= 5;
                let d = if i == 0 { self.half.prismatic } else { self.half.revolute };
                let v = from.get(i) + k * d;
                inside &= v >= iv.min && v <= iv.max;
                c.set(i, v);
            }
            if !inside || &c == from {
                continue;
            }
            evaluations += 1;
            let d = (end_effector(spec, &c) - target).norm();
            if best.as_ref().is_none_or(|b| d < b.0) {
                best = Some((d, c));
            }
        }
        let config = best.filter(|b| b.0 <= self.accept).map(|b| b.1);
        Generated { config, evaluations }
    }
}

/// Optimal-search settings under which eager and lazy see the same graph:
/// unit weight, the admissible anchor alone, and a one-expansion stagnation
/// window so every expansion after the first emits optimization actions.
pub fn lazy_eager_config(mode: ActionMode) -> PlannerConfig {
    let mut cfg = micro_config(1.0);
    cfg.action_mode = mode;
    cfg.stagnation_window = 1;
    cfg.stagnation_tol = Some(0.0);
    cfg.eps = 0.04;
    cfg.optimizer.eps_reach = 0.02;
    cfg
}

/// Start wedged between two blades: every bending step collides and only
/// the prismatic joint and optimization actions move the tip.
pub fn trap_problem() -> Problem {
    micro_problem(vec![[0.25, 0.5, 0.44, 0.47], [0.25, 0.5, 0.53, 0.56]], cfg3(0.2, 0.0, 0.0))
}

pub struct LazyEagerRun {
    pub cost: f64,
    pub calls: usize,
    pub outcome: PlanOutcome,
}

pub fn run_with_stub(problem: &Problem, mode: ActionMode) -> Result<LazyEagerRun, String> {
    let cfg = lazy_eager_config(mode);
    // Results within half the reach tolerance keep pseudostate keys below the
    // keys of the states they resolve to.
    let stub = StubGenerator::new(cfg.deltas, cfg.optimizer.eps_reach / 2.0);
    let out = plan_with_generator(problem, &cfg, &stub).map_err(|e| e.to_string())?;
    let p = out.plan.clone().ok_or("no plan")?;
    validate_plan(problem, &cfg, &p)?;
    Ok(LazyEagerRun { cost: p.cost, calls: stub.calls.get(), outcome: out })
}

pub fn lazy_eager_fixtures() -> Vec<Problem> {
    let mut out = micro_fixtures();
    out.extend([
        micro_problem(vec![], cfg3(0.1, -0.3, 0.2)),
        micro_problem(vec![], cfg3(0.4, 0.4, -0.4)),
        micro_problem(vec![[0.5, 0.55, 0.3, 0.45]], cfg3(0.3, 0.3, 0.2)),
        micro_problem(vec![[0.45, 0.5, 0.55, 0.75]], cfg3(0.5, -0.4, -0.4)),
        micro_problem(vec![[0.62, 0.66, 0.2, 0.48]], cfg3(0.5, 0.4, -0.4)),
        trap_problem(),
    ]);
    out
}

pub fn criterion_3() -> Check {
    let t0 = Instant::now();
    let fixtures = lazy_eager_fixtures();
    let trap = fixtures.len() - 1;
    let mut trap_calls = (0, 0);
    for (fi, problem) in fixtures.iter().enumerate() {
        let eager = run_with_stub(problem, ActionMode::OptEager).map_err(|e| format!("fixture {fi} eager: {e}"))?;
        let lazy = run_with_stub(problem, ActionMode::OptLazy).map_err(|e| format!("fixture {fi} lazy: {e}"))?;
        ensure!(
            eager.cost == lazy.cost,
            "fixture {fi}: eager cost {} != lazy cost {}",
            eager.cost,
            lazy.cost
        );
        ensure!(lazy.calls <= eager.calls, "fixture {fi}: lazy made {} calls, eager {}", lazy.calls, eager.calls);
        let s = &lazy.outcome.stats;
        ensure!(
            s.pseudostates_popped == s.pseudostates_reinserted + s.pseudostates_discarded,
            "fixture {fi}: pseudostate lifecycle broken"
        );
        ensure!(s.pseudo_g_violations == 0, "fixture {fi}: insertion estimate exceeded the true g");
        if fi == trap {
            trap_calls = (lazy.calls, eager.calls);
        }
    }
    ensure!(trap_calls.0 < trap_calls.1, "trap: lazy calls {} not below eager {}", trap_calls.0, trap_calls.1);
    let secs = t0.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "took {secs:.1} s");
    Ok(format!(
        "{} fixtures equal cost; trap generator calls lazy {} < eager {}",
        fixtures.len(),
        trap_calls.0,
        trap_calls.1
    ))
}

// ---------------------------------------------------------------------------
// Optimizer

/// Objective recomputed from its definition with the homogeneous-transform
/// kinematics and direct distance-field lookups.
pub fn objective_oracle(
    spec: &RobotSpec,
    df: &bladecrawl::env::DistanceField,
    s_min: &Configuration,
    goal: &Point3,
    w: &ObjectiveWeights,
    c: &Configuration,
) -> (f64, f64, f64) {
    let pts = fk_homogeneous(spec, c);
    let mut sum = 0.0;
    let mut collided = false;
    for p in &pts {
        let d = df.clearance(p);
        collided |= d <= 0.0;
        sum += d * spec.subunit_length;
    }
    let obst = if collided { P_COLLIDE } else { 1.0 / sum };
    let goal_term = (pts.last().unwrap() - goal).norm();
    let a = s_min.to_vector();
    let b = c.to_vector();
    let state = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    (obst, w.lambda * goal_term, w.gamma * state)
}

pub fn desk_problem() -> Problem {
    let bounds = Bounds::new(Point3::new(0.0, -0.4, 0.0), Point3::new(2.4, 0.4, 1.2));
    let blade = |z0: f64, z1: f64| Blade::new(Interval::new(1.2, 1.26), bounds.axis(1), Interval::new(z0, z1));
    let env = Environment::from_blades(bounds, vec![blade(0.1, 0.4), blade(0.55, 0.85)]).unwrap();
    let spec = desk_spec();
    Problem::new(env, spec, Configuration::straight(5, 0.0), GoalPose::at(Point3::new(1.45, 0.0, 0.5)), 0.02, 1.0)
        .unwrap()
}

pub fn criterion_8() -> Check {
    // CMA-ES on the sphere and Rosenbrock functions.
    let sphere = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let opts = CmaesOptions { sigma0: 0.5, budget: 2000, population: None, seed: 7, ..Default::default() };
    let out = cmaes_minimize(sphere, &[1.0; 5], &opts).map_err(|e| e.to_string())?;
    ensure!(out.f_best < 1e-8, "sphere reached only {}", out.f_best);
    let rosen = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
    let opts = CmaesOptions { sigma0: 0.5, budget: 4000, population: None, seed: 3, ..Default::default() };
    let r = cmaes_minimize(rosen, &[-1.2, 1.0], &opts).map_err(|e| e.to_string())?;
    ensure!(r.f_best < 1e-4, "Rosenbrock reached only {}", r.f_best);

    // Componentwise objective oracle on 100 random triples.
    let problem = desk_problem();
    let spec = &problem.spec;
    let w = ObjectiveWeights { lambda: 10.0, gamma: 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let s_min = random_config(spec, &mut rng);
        let c = random_config(spec, &mut rng);
        let goal = Point3::new(rng.random_range(0.2..2.0), rng.random_range(-0.2..0.2), rng.random_range(0.1..1.1));
        let req = OptRequest { s_min: s_min.clone(), ee_goal: goal };
        let (o, g, s) = objective_oracle(spec, &problem.df, &s_min, &goal, &w, &c);
        let got = objective(spec, &problem.df, &req, &w, &c);
        let want = o + g + s;
        let err = (got - want).abs() / want.abs().max(1.0);
        worst = worst.max(err);
        ensure!(err <= 1e-9, "objective {got} differs from oracle {want}");
    }

    // Determinism of generate_neighbor under a fixed seed.
    let mut settings = OptimizerSettings::for_step(0.04);
    settings.sigma0 = 0.01;
    settings.weights = ObjectiveWeights { lambda: 100.0, gamma: 30.0 };
    settings.budget = 600;
    let mut from = problem.start.clone();
    from.l = 0.1;
    let tip = end_effector(spec, &from);
    let req = OptRequest { s_min: from, ee_goal: tip + Vector3::new(0.0, 0.0, 0.04) };
    let first = generate_neighbor(spec, &problem.df, &req, &settings, 1234);
    for _ in 0..19 {
        let again = generate_neighbor(spec, &problem.df, &req, &settings, 1234);
        ensure!(again == first, "generate_neighbor differs between repeats");
    }
    Ok(format!(
        "sphere {:.1e}, Rosenbrock {:.1e}; 100 objective triples within {worst:.1e}; 20 identical generator runs",
        out.f_best, r.f_best
    ))
}

// ---------------------------------------------------------------------------
// Kinematics and validity

pub fn criterion_9() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    let mut specs = vec![desk_spec(), micro_spec()];
    let mut tilted = desk_spec();
    tilted.base_forward = Vector3::new(1.0, 0.3, -0.2);
    tilted.base_position = Point3::new(0.3, -0.1, 0.4);
    specs.push(tilted);
    for i in 0..200 {
        let spec = &specs[i % specs.len()];
        let c = random_config(spec, &mut rng);
        let got = forward_kinematics(spec, &c);
        let want = fk_homogeneous(spec, &c);
        ensure!(got.points().len() == want.len(), "body point count differs");
        for (a, b) in got.points().iter().zip(&want) {
            worst = worst.max((a - b).norm());
        }
    }
    ensure!(worst <= 1e-9, "forward kinematics differs from the transform oracle by {worst:e}");

    // Transition cost is a pseudometric on configurations.
    let spec = desk_spec();
    for _ in 0..300 {
        let a = random_config(&spec, &mut rng);
        let b = random_config(&spec, &mut rng);
        let c = random_config(&spec, &mut rng);
        let ab = transition_cost(&spec, &a, &b);
        ensure!(ab >= 0.0 && transition_cost(&spec, &a, &a) == 0.0, "cost not non-negative or not zero on the diagonal");
        ensure!((ab - transition_cost(&spec, &b, &a)).abs() <= 1e-12, "cost not symmetric");
        ensure!(ab <= transition_cost(&spec, &a, &c) + transition_cost(&spec, &c, &b) + 1e-12, "triangle inequality fails");
        let tips = (fk_homogeneous(&spec, &a).last().copied().unwrap(), fk_homogeneous(&spec, &b).last().copied().unwrap());
        ensure!((ab - (tips.0 - tips.1).norm()).abs() <= 1e-9, "cost is not the tip distance");
    }

    // Every emitted plan revalidates.
    let mut plans = 0;
    for problem in micro_fixtures() {
        for mode in [ActionMode::PredefinedOnly] {
            let mut cfg = micro_config(5.0);
            cfg.action_mode = mode;
            let out = plan(&problem, &cfg).map_err(|e| e.to_string())?;
            if let Some(p) = out.plan {
                validate_plan(&problem, &cfg, &p)?;
                ensure!(p.states.iter().all(|s| is_valid_state(&problem.spec, &problem.df, s)), "invalid plan state");
                plans += 1;
            }
        }
    }
    let problem = desk_problem();
    let cfg = PlannerConfig {
        heuristic_weight: 5.0,
        deltas: ActionDeltas { revolute: 0.02, prismatic: 0.02 },
        steps: TransitionSteps { revolute: 0.01, prismatic: 0.01 },
        eps: 0.04,
        eps_pos: 0.03,
        heuristic_mode: HeuristicMode::Homotopy { k: 2 },
        timeout: None,
        eval_budget: Some(400_000),
        ..PlannerConfig::default()
    };
    if let Some(p) = plan(&problem, &cfg).map_err(|e| e.to_string())?.plan {
        validate_plan(&problem, &cfg, &p)?;
        plans += 1;
    }
    ensure!(plans >= 5, "only {plans} plans produced");
    Ok(format!("FK within {worst:.1e} on 200 configurations; transition metric holds on 300 triples; {plans} plans revalidated"))
}
