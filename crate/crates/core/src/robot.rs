//! Kinematics and validity for the serpentine manipulator.
//!
//! The joint vector is `[l, pitch_1, yaw_1, ..., pitch_N, yaw_N]`. Each unit
//! is modeled as `subunits_per_unit` rigid segments whose joints all mimic
//! the unit's (pitch, yaw) pair, so unit `k` contributes a constant-curvature
//! arc. Positive pitch bends toward the local `+z` axis and positive yaw
//! toward local `+y`; pitch is applied before yaw within each subunit joint.

use crate::env::{DistanceField, Interval};
use crate::error::RobotError;
use crate::{Point3, Vector3};
use nalgebra::Matrix3;

#[derive(Debug, Clone, PartialEq)]
pub struct RobotSpec {
    pub num_units: usize,
    pub subunits_per_unit: usize,
    pub subunit_length: f64,
    pub body_radius: f64,
    pub pitch_limit: f64,
    pub yaw_limit: f64,
    pub prismatic_range: Interval,
    pub base_position: Point3,
    pub base_forward: Vector3,
}

impl RobotSpec {
    pub fn validate(&self) -> Result<(), RobotError> {
        if self.num_units == 0 || self.subunits_per_unit == 0 {
            return Err(RobotError::EmptyChain);
        }
        let positive = [self.subunit_length, self.body_radius, self.pitch_limit, self.yaw_limit];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(RobotError::NonPositiveDimension);
        }
        if self.prismatic_range.is_degenerate() {
            return Err(RobotError::DegeneratePrismaticRange);
        }
        if !(self.base_forward.norm() > 0.0) {
            return Err(RobotError::ZeroForward);
        }
        Ok(())
    }

    /// Number of joint coordinates, `1 + 2 * num_units`.
    pub fn dof(&self) -> usize {
        1 + 2 * self.num_units
    }

    pub fn num_body_points(&self) -> usize {
        1 + self.num_units * self.subunits_per_unit
    }

    pub fn body_length(&self) -> f64 {
        (self.num_units * self.subunits_per_unit) as f64 * self.subunit_length
    }

    pub fn forward(&self) -> Vector3 {
        self.base_forward.normalize()
    }

    /// Base frame with columns (forward, lateral, up); `up` is world `z`
    /// made orthogonal to the forward axis.
    pub fn base_rotation(&self) -> Matrix3<f64> {
        let f = self.forward();
        let mut up = Vector3::z() - f * f.z;
        if up.norm() < 1e-9 {
            up = Vector3::x() - f * f.x;
        }
        let up = up.normalize();
        let lateral = up.cross(&f);
        Matrix3::from_columns(&[f, lateral, up])
    }

    /// Lower and upper bound of each joint coordinate, in joint-vector order.
    pub fn joint_bounds(&self) -> Vec<Interval> {
        let mut out = Vec::with_capacity(self.dof());
        out.push(self.prismatic_range);
        for _ in 0..self.num_units {
            out.push(Interval::new(-self.pitch_limit, self.pitch_limit));
            out.push(Interval::new(-self.yaw_limit, self.yaw_limit));
        }
        out
    }

    pub fn within_limits(&self, c: &Configuration) -> bool {
        self.prismatic_range.contains(c.l)
            && c.pitch.iter().all(|p| p.abs() <= self.pitch_limit)
            && c.yaw.iter().all(|y| y.abs() <= self.yaw_limit)
    }
}

/// Full joint state.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub l: f64,
    pub pitch: Vec<f64>,
    pub yaw: Vec<f64>,
}

impl Configuration {
    pub fn straight(num_units: usize, l: f64) -> Self {
        Self { l, pitch: vec![0.0; num_units], yaw: vec![0.0; num_units] }
    }

    pub fn num_units(&self) -> usize {
        self.pitch.len()
    }

    pub fn dof(&self) -> usize {
        1 + 2 * self.pitch.len()
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dof());
        v.push(self.l);
        for (p, y) in self.pitch.iter().zip(&self.yaw) {
            v.push(*p);
            v.push(*y);
        }
        v
    }

    pub fn from_vector(v: &[f64]) -> Self {
        debug_assert!(v.len() % 2 == 1);
        let n = (v.len() - 1) / 2;
        Self {
            l: v[0],
            pitch: (0..n).map(|k| v[1 + 2 * k]).collect(),
            yaw: (0..n).map(|k| v[2 + 2 * k]).collect(),
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        if i == 0 {
            self.l
        } else if i % 2 == 1 {
            self.pitch[(i - 1) / 2]
        } else {
            self.yaw[(i - 2) / 2]
        }
    }

    pub fn set(&mut self, i: usize, v: f64) {
        if i == 0 {
            self.l = v;
        } else if i % 2 == 1 {
            self.pitch[(i - 1) / 2] = v;
        } else {
            self.yaw[(i - 2) / 2] = v;
        }
    }

    /// Componentwise linear interpolation.
    pub fn lerp(&self, other: &Configuration, t: f64) -> Configuration {
        let mix = |a: f64, b: f64| a + (b - a) * t;
        Configuration {
            l: mix(self.l, other.l),
            pitch: self.pitch.iter().zip(&other.pitch).map(|(a, b)| mix(*a, *b)).collect(),
            yaw: self.yaw.iter().zip(&other.yaw).map(|(a, b)| mix(*a, *b)).collect(),
        }
    }

    pub fn check_dimension(&self, spec: &RobotSpec) -> Result<(), RobotError> {
        if self.pitch.len() != spec.num_units || self.yaw.len() != spec.num_units {
            return Err(RobotError::DimensionMismatch {
                expected: spec.num_units,
                got: self.pitch.len().min(self.yaw.len()),
            });
        }
        Ok(())
    }
}

/// Body sample points from the prismatic carriage to the tip.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyPoints(pub Vec<Point3>);

impl BodyPoints {
    pub fn tip(&self) -> Point3 {
        *self.0.last().expect("body has at least one point")
    }

    /// Unit direction of the last segment.
    pub fn terminal_axis(&self) -> Vector3 {
        let n = self.0.len();
        (self.0[n - 1] - self.0[n - 2]).normalize()
    }

    pub fn points(&self) -> &[Point3] {
        &self.0
    }
}

fn subunit_rotation(pitch: f64, yaw: f64) -> Matrix3<f64> {
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    // Rot_y(-pitch) * Rot_z(yaw)
    let ry = Matrix3::new(cp, 0.0, -sp, 0.0, 1.0, 0.0, sp, 0.0, cp);
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    ry * rz
}

/// Writes the body points of `c` into `out`, reusing its allocation.
pub fn forward_kinematics_into(spec: &RobotSpec, c: &Configuration, out: &mut Vec<Point3>) {
    out.clear();
    let mut rot = spec.base_rotation();
    let mut p = spec.base_position + spec.forward() * c.l;
    out.push(p);
    for k in 0..spec.num_units {
        let q = subunit_rotation(c.pitch[k], c.yaw[k]);
        for _ in 0..spec.subunits_per_unit {
            rot *= q;
            p += rot.column(0) * spec.subunit_length;
            out.push(p);
        }
    }
}

pub fn forward_kinematics(spec: &RobotSpec, c: &Configuration) -> BodyPoints {
    let mut out = Vec::with_capacity(spec.num_body_points());
    forward_kinematics_into(spec, c, &mut out);
    BodyPoints(out)
}

pub fn end_effector(spec: &RobotSpec, c: &Configuration) -> Point3 {
    forward_kinematics(spec, c).tip()
}

/// Collision and self-collision test for precomputed body points.
pub fn body_is_free(spec: &RobotSpec, df: &DistanceField, points: &[Point3]) -> bool {
    if points.iter().any(|p| df.clearance(p) <= spec.body_radius) {
        return false;
    }
    let min_sq = (2.0 * spec.body_radius).powi(2);
    for i in 0..points.len() {
        for j in (i + 3)..points.len() {
            if (points[i] - points[j]).norm_squared() <= min_sq {
                return false;
            }
        }
    }
    true
}

pub fn is_valid_state(spec: &RobotSpec, df: &DistanceField, c: &Configuration) -> bool {
    if !spec.within_limits(c) {
        return false;
    }
    let mut pts = Vec::with_capacity(spec.num_body_points());
    forward_kinematics_into(spec, c, &mut pts);
    body_is_free(spec, df, &pts)
}

/// Joint-space resolution for interpolated transition checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionSteps {
    pub revolute: f64,
    pub prismatic: f64,
}

impl Default for TransitionSteps {
    fn default() -> Self {
        Self { revolute: 0.05, prismatic: 0.01 }
    }
}

impl TransitionSteps {
    /// Number of interpolation intervals needed between `a` and `b`.
    pub fn intervals(&self, a: &Configuration, b: &Configuration) -> usize {
        let mut n = ((b.l - a.l).abs() / self.prismatic).ceil();
        for (x, y) in a.pitch.iter().chain(&a.yaw).zip(b.pitch.iter().chain(&b.yaw)) {
            n = n.max(((y - x).abs() / self.revolute).ceil());
        }
        (n as usize).max(1)
    }
}

/// Checks every interpolated state from `a` to `b`. Returns validity and
/// the number of states examined; with `skip_start` the known-valid `a` is
/// not re-checked.
pub fn check_transition(
    spec: &RobotSpec,
    df: &DistanceField,
    a: &Configuration,
    b: &Configuration,
    steps: TransitionSteps,
    skip_start: bool,
) -> (bool, usize) {
    let n = steps.intervals(a, b);
    let mut pts = Vec::with_capacity(spec.num_body_points());
    let mut checked = 0;
    // Check the far endpoint first; it rejects most invalid transitions.
    let order = std::iter::once(n).chain(if skip_start { 1..n } else { 0..n });
    for i in order {
        let c = if i == n { b.clone() } else { a.lerp(b, i as f64 / n as f64) };
        checked += 1;
        if !spec.within_limits(&c) {
            return (false, checked);
        }
        forward_kinematics_into(spec, &c, &mut pts);
        if !body_is_free(spec, df, &pts) {
            return (false, checked);
        }
    }
    (true, checked)
}

pub fn is_valid_transition(
    spec: &RobotSpec,
    df: &DistanceField,
    a: &Configuration,
    b: &Configuration,
    steps: TransitionSteps,
) -> bool {
    check_transition(spec, df, a, b, steps, false).0
}

/// Euclidean distance between the end-effector positions.
pub fn transition_cost(spec: &RobotSpec, a: &Configuration, b: &Configuration) -> f64 {
    (end_effector(spec, a) - end_effector(spec, b)).norm()
}

/// Sum of per-transition costs along a state sequence.
pub fn path_cost(spec: &RobotSpec, states: &[Configuration]) -> f64 {
    states.windows(2).map(|w| transition_cost(spec, &w[0], &w[1])).sum()
}
