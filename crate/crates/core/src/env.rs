//! Blade-array world model.
//!
//! Blades are axis-aligned boxes extruded along `y`, arranged in columns
//! along `x`. Everything downstream (distance field, beams, passages)
//! is derived from the [`Environment`] and immutable once built.

use crate::error::EnvError;
use crate::{Point2, Point3};

/// Closed interval `[min, max]` in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.min + self.max)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.min < self.max)
    }

    /// Open-interior overlap test; touching intervals do not overlap.
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.min < other.max && other.min < self.max
    }

    /// Distance from `v` to the interval, zero inside.
    pub fn distance(&self, v: f64) -> f64 {
        if v < self.min {
            self.min - v
        } else if v > self.max {
            v - self.max
        } else {
            0.0
        }
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Point3,
    pub max: Point3,
}

impl Bounds {
    pub fn new(min: Point3, max: Point3) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn axis(&self, i: usize) -> Interval {
        Interval::new(self.min[i], self.max[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Blade {
    pub x: Interval,
    pub y: Interval,
    pub z: Interval,
    /// Position within its column, counted from the bottom.
    pub row: usize,
    pub column: usize,
}

impl Blade {
    /// Blade with the given extents; row and column are assigned by
    /// [`Environment::from_blades`].
    pub fn new(x: Interval, y: Interval, z: Interval) -> Self {
        Self { x, y, z, row: 0, column: 0 }
    }

    /// Euclidean distance from `p` to the box surface, zero inside.
    pub fn distance(&self, p: &Point3) -> f64 {
        let dx = self.x.distance(p.x);
        let dy = self.y.distance(p.y);
        let dz = self.z.distance(p.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn contains(&self, p: &Point3) -> bool {
        self.x.contains(p.x) && self.y.contains(p.y) && self.z.contains(p.z)
    }

    /// Whether the projection onto the x-z plane contains `q`.
    pub fn contains_projected(&self, q: &Point2) -> bool {
        self.x.contains(q.x) && self.z.contains(q.y)
    }
}

/// Parameters for a regular blade array.
///
/// Columns are placed at `first_column_x + c * column_pitch`; blades in a
/// column are stacked upward from `bottom_z + column_offsets[c]` separated by
/// `gap`.
#[derive(Debug, Clone, PartialEq)]
pub struct BladeArraySpec {
    pub bounds: Bounds,
    pub rows: usize,
    pub columns: usize,
    pub blade_width: f64,
    pub blade_height: f64,
    pub gap: f64,
    pub column_pitch: f64,
    pub first_column_x: f64,
    pub bottom_z: f64,
    /// Per-column vertical shift; missing entries are zero.
    pub column_offsets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    bounds: Bounds,
    blades: Vec<Blade>,
    columns: Vec<Interval>,
}

impl Environment {
    /// Builds an environment from explicit blades.
    ///
    /// Blades whose x extents overlap form one column. Column and row indices
    /// are reassigned (columns left to right, rows bottom to top), and the y
    /// extent of every blade is clamped to the bounds (blades are extruded).
    pub fn from_blades(bounds: Bounds, blades: Vec<Blade>) -> Result<Self, EnvError> {
        for i in 0..3 {
            if bounds.axis(i).is_degenerate() {
                return Err(EnvError::DegenerateBounds);
            }
        }
        let mut blades = blades;
        for (i, b) in blades.iter_mut().enumerate() {
            b.y = bounds.axis(1);
            if b.x.is_degenerate() || b.z.is_degenerate() {
                return Err(EnvError::DegenerateBlade(i));
            }
            let inside = b.x.min >= bounds.min.x
                && b.x.max <= bounds.max.x
                && b.z.min >= bounds.min.z
                && b.z.max <= bounds.max.z;
            if !inside {
                return Err(EnvError::BladeOutOfBounds(i));
            }
        }
        for i in 0..blades.len() {
            for j in (i + 1)..blades.len() {
                let (a, b) = (&blades[i], &blades[j]);
                if a.x.overlaps(&b.x) && a.z.overlaps(&b.z) {
                    return Err(EnvError::Overlap(i, j));
                }
            }
        }

        // Columns are the connected groups of blades with overlapping x extents.
        let mut by_x: Vec<usize> = (0..blades.len()).collect();
        by_x.sort_by(|&a, &b| blades[a].x.min.total_cmp(&blades[b].x.min));
        let mut columns: Vec<Interval> = Vec::new();
        for i in by_x {
            match columns.last_mut() {
                Some(col) if blades[i].x.min <= col.max => col.max = col.max.max(blades[i].x.max),
                _ => columns.push(blades[i].x),
            }
            blades[i].column = columns.len() - 1;
        }
        for c in 0..columns.len() {
            let mut order: Vec<usize> = (0..blades.len()).filter(|&i| blades[i].column == c).collect();
            order.sort_by(|&a, &b| blades[a].z.min.total_cmp(&blades[b].z.min));
            for (row, idx) in order.into_iter().enumerate() {
                blades[idx].row = row;
            }
        }
        // Stable order: column ascending, then bottom to top.
        blades.sort_by(|a, b| (a.column, a.row).cmp(&(b.column, b.row)));
        Ok(Self { bounds, blades, columns })
    }

    pub fn empty(bounds: Bounds) -> Result<Self, EnvError> {
        Self::from_blades(bounds, Vec::new())
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn blades(&self) -> &[Blade] {
        &self.blades
    }

    pub fn columns(&self) -> &[Interval] {
        &self.columns
    }

    /// Blades of one column, bottom to top.
    pub fn column_blades(&self, column: usize) -> impl Iterator<Item = &Blade> {
        self.blades.iter().filter(move |b| b.column == column)
    }

    /// Exact distance to the nearest blade surface (infinite when empty).
    pub fn blade_distance(&self, p: &Point3) -> f64 {
        self.blades.iter().map(|b| b.distance(p)).fold(f64::INFINITY, f64::min)
    }

    /// Whether the projected point lies inside any blade projection.
    pub fn projected_occupied(&self, q: &Point2) -> bool {
        self.blades.iter().any(|b| b.contains_projected(q))
    }

    /// Smallest vertical gap between z-adjacent blades of a column.
    pub fn smallest_gap(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for c in 0..self.columns.len() {
            let col: Vec<&Blade> = self.column_blades(c).collect();
            for w in col.windows(2) {
                let gap = w[1].z.min - w[0].z.max;
                best = Some(best.map_or(gap, |b: f64| b.min(gap)));
            }
        }
        best
    }
}

/// Builds a regular blade array.
pub fn build_environment(spec: &BladeArraySpec) -> Result<Environment, EnvError> {
    if spec.rows == 0 || spec.columns == 0 {
        return Err(EnvError::EmptyArray);
    }
    if !(spec.gap > 0.0) {
        return Err(EnvError::NonPositiveGap(spec.gap));
    }
    if !(spec.blade_width > 0.0) || !(spec.blade_height > 0.0) {
        return Err(EnvError::NonPositiveBladeSize);
    }
    if spec.columns > 1 && spec.column_pitch <= spec.blade_width {
        return Err(EnvError::ColumnOrder(1));
    }
    let mut blades = Vec::with_capacity(spec.rows * spec.columns);
    for c in 0..spec.columns {
        let x0 = spec.first_column_x + c as f64 * spec.column_pitch;
        let offset = spec.column_offsets.get(c).copied().unwrap_or(0.0);
        for r in 0..spec.rows {
            let z0 = spec.bottom_z + offset + r as f64 * (spec.blade_height + spec.gap);
            blades.push(Blade {
                x: Interval::new(x0, x0 + spec.blade_width),
                y: spec.bounds.axis(1),
                z: Interval::new(z0, z0 + spec.blade_height),
                row: r,
                column: c,
            });
        }
    }
    Environment::from_blades(spec.bounds, blades)
}

/// Drops the extrusion axis: `(x, y, z) -> (x, z)`.
///
/// The returned point stores `z` in its second component.
pub fn project(p: &Point3) -> Point2 {
    Point2::new(p.x, p.z)
}

/// Sampled distance-to-blade field with a distance cap.
#[derive(Debug, Clone)]
pub struct DistanceField {
    origin: Point3,
    resolution: f64,
    dims: [usize; 3],
    d_max: f64,
    values: Vec<f64>,
}

impl DistanceField {
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn origin(&self) -> &Point3 {
        &self.origin
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn cell_center(&self, idx: [usize; 3]) -> Point3 {
        Point3::new(
            self.origin.x + (idx[0] as f64 + 0.5) * self.resolution,
            self.origin.y + (idx[1] as f64 + 0.5) * self.resolution,
            self.origin.z + (idx[2] as f64 + 0.5) * self.resolution,
        )
    }

    pub fn value(&self, idx: [usize; 3]) -> f64 {
        self.values[self.flat(idx)]
    }

    fn flat(&self, idx: [usize; 3]) -> usize {
        (idx[2] * self.dims[1] + idx[1]) * self.dims[0] + idx[0]
    }

    fn upper(&self) -> Point3 {
        Point3::new(
            self.origin.x + self.dims[0] as f64 * self.resolution,
            self.origin.y + self.dims[1] as f64 * self.resolution,
            self.origin.z + self.dims[2] as f64 * self.resolution,
        )
    }

    /// Trilinear interpolation between cell centers. Points outside the field
    /// are treated as colliding and return 0.
    pub fn clearance(&self, p: &Point3) -> f64 {
        let upper = self.upper();
        for i in 0..3 {
            if !(p[i] >= self.origin[i] && p[i] <= upper[i]) {
                return 0.0;
            }
        }
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for i in 0..3 {
            let n = self.dims[i];
            let u = ((p[i] - self.origin[i]) / self.resolution - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = (u.floor() as usize).min(n.saturating_sub(2));
            base[i] = i0;
            frac[i] = if n > 1 { u - i0 as f64 } else { 0.0 };
        }
        let mut acc = 0.0;
        for corner in 0..8usize {
            let mut idx = base;
            let mut weight = 1.0;
            for i in 0..3 {
                let hi = (corner >> i) & 1 == 1;
                if hi {
                    if self.dims[i] > 1 {
                        idx[i] += 1;
                    }
                    weight *= frac[i];
                } else {
                    weight *= 1.0 - frac[i];
                }
            }
            if weight != 0.0 {
                acc += weight * self.values[self.flat(idx)];
            }
        }
        acc
    }
}

/// Samples the capped blade distance at every cell center.
pub fn build_distance_field(
    env: &Environment,
    resolution: f64,
    d_max: f64,
) -> Result<DistanceField, EnvError> {
    if !(resolution > 0.0) {
        return Err(EnvError::NonPositiveResolution(resolution));
    }
    if !(d_max > 0.0) {
        return Err(EnvError::NonPositiveCap(d_max));
    }
    if let Some(gap) = env.smallest_gap() {
        if resolution > gap {
            log::warn!(
                "distance field resolution {resolution} exceeds the narrowest passage {gap}; \
                 narrow passages will not be resolved"
            );
        }
    }
    let b = env.bounds();
    let mut dims = [0usize; 3];
    for (i, d) in dims.iter_mut().enumerate() {
        *d = (((b.max[i] - b.min[i]) / resolution).ceil() as usize).max(1);
    }
    let mut field = DistanceField {
        origin: b.min,
        resolution,
        dims,
        d_max,
        values: vec![d_max; dims[0] * dims[1] * dims[2]],
    };
    // Blades span the whole y extent, so one x-z slice determines the rest.
    let mut slice = vec![d_max; dims[0] * dims[2]];
    let y_mid = field.cell_center([0, dims[1] / 2, 0]).y;
    for k in 0..dims[2] {
        for i in 0..dims[0] {
            let mut c = field.cell_center([i, 0, k]);
            c.y = y_mid;
            slice[k * dims[0] + i] = env.blade_distance(&c).min(d_max);
        }
    }
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let flat = field.flat([i, j, k]);
                field.values[flat] = slice[k * dims[0] + i];
            }
        }
    }
    Ok(field)
}

/// Vertical beam used for word-based homotopy signatures.
#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    pub letter: usize,
    /// Index of the blade the beam is anchored on.
    pub blade: usize,
    /// Top-center of the projected blade, `(x, z)`.
    pub anchor: Point2,
    /// Upper end of the beam (z).
    pub top: f64,
}

impl Beam {
    pub fn x(&self) -> f64 {
        self.anchor.x
    }

    pub fn z_range(&self) -> Interval {
        Interval::new(self.anchor.y, self.top)
    }
}

/// One beam per blade, anchored at the projected blade's top-center and
/// running upward to the next blade above or the ceiling. Letters follow
/// (column ascending, z descending).
pub fn place_beams(env: &Environment) -> Vec<Beam> {
    let blades = env.blades();
    let mut order: Vec<usize> = (0..blades.len()).collect();
    order.sort_by(|&a, &b| {
        blades[a]
            .column
            .cmp(&blades[b].column)
            .then(blades[b].z.max.total_cmp(&blades[a].z.max))
    });
    order
        .into_iter()
        .enumerate()
        .map(|(letter, i)| {
            let blade = &blades[i];
            let anchor = Point2::new(blade.x.center(), blade.z.max);
            let top = blades
                .iter()
                .filter(|o| o.x.contains(anchor.x) && o.z.min >= anchor.y)
                .map(|o| o.z.min)
                .fold(env.bounds().max.z, f64::min);
            Beam { letter, blade: i, anchor, top }
        })
        .collect()
}
