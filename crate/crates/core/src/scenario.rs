//! Synthetic vehicle runs: anticlockwise perimeter laps for training and a
//! U-turn test run with per-tick ground truth.
//!
//! The vehicle follows a path made of straights and clothoid-like turns
//! (curvature ramps linearly in and out over `ramp` metres). Speed is capped
//! per turn and blended with constant acceleration `accel` on the straights.
//! Steering is the kinematic bicycle angle `atan(wheelbase · κ)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::eval::{GroundTruth, SegmentClass};
use crate::signal::SensorSeries;

pub const CHANNELS: [&str; 3] = ["steering", "velocity", "power"];

/// Share of each channel's noiseless perimeter range used as default noise.
pub const DEFAULT_NOISE_FRACTION: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    /// Rectangle half-extents along x and y, metres.
    pub half_width: f64,
    pub half_height: f64,
    /// Cruise speed on straights, m/s.
    pub speed: f64,
    /// Speed through perimeter corners, m/s.
    pub corner_speed: f64,
    /// Yaw rate through perimeter corners, rad/s.
    pub turn_rate: f64,
    pub uturn_speed: f64,
    pub uturn_turn_rate: f64,
    /// Longitudinal acceleration magnitude, m/s².
    pub accel: f64,
    /// Curvature ramp length at turn entry and exit, metres.
    pub ramp: f64,
    pub wheelbase: f64,
    pub dt: f64,
    pub laps: usize,
    /// Per-channel noise std (steering, velocity, power). `None` uses
    /// `noise_fraction` of each channel's noiseless perimeter range.
    pub noise_std: Option<[f64; 3]>,
    pub noise_fraction: f64,
    /// Where the U-turn starts along the first straight, in `(0, 1)`.
    pub obstacle_fraction: f64,
    /// Number of corners driven clockwise after the U-turn.
    pub reverse_corners: usize,
    /// Power model `c₁·v + c₂·|v̇| + c₃·|steer|·v`.
    pub power_coeffs: [f64; 3],
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            half_width: 10.0,
            half_height: 6.0,
            speed: 2.0,
            corner_speed: 1.2,
            turn_rate: 0.5,
            uturn_speed: 0.4,
            uturn_turn_rate: 0.4,
            accel: 0.5,
            ramp: 0.8,
            wheelbase: 1.5,
            dt: 0.1,
            laps: 10,
            noise_std: None,
            noise_fraction: DEFAULT_NOISE_FRACTION,
            obstacle_fraction: 0.5,
            reverse_corners: 2,
            power_coeffs: [100.0, 100.0, 50.0],
            seed: 0,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        let positive = [
            ("half_width", self.half_width),
            ("half_height", self.half_height),
            ("speed", self.speed),
            ("corner_speed", self.corner_speed),
            ("turn_rate", self.turn_rate),
            ("uturn_speed", self.uturn_speed),
            ("uturn_turn_rate", self.uturn_turn_rate),
            ("accel", self.accel),
            ("ramp", self.ramp),
            ("wheelbase", self.wheelbase),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{name} must be positive, got {v}"));
            }
        }
        if self.dt > 0.5 {
            return bad("dt must be at most 0.5 s");
        }
        if self.laps == 0 {
            return bad("laps must be at least 1");
        }
        if self.reverse_corners == 0 {
            return bad("reverse_corners must be at least 1");
        }
        if !(self.obstacle_fraction > 0.0 && self.obstacle_fraction < 1.0) {
            return bad("obstacle_fraction must lie in (0, 1)");
        }
        if self.corner_speed > self.speed || self.uturn_speed > self.speed {
            return bad("turn speeds cannot exceed the cruise speed");
        }
        if let Some(n) = self.noise_std {
            if n.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return bad("noise std must be finite and non-negative");
            }
        }
        if !(self.noise_fraction.is_finite() && self.noise_fraction >= 0.0) {
            return bad("noise_fraction must be finite and non-negative");
        }
        if self.power_coeffs.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("power coefficients must be finite and non-negative");
        }
        let corner = self.corner_curvature();
        let uturn = self.uturn_curvature();
        if FRAC_PI_2 / corner < self.ramp || PI / uturn < self.ramp {
            return bad("turns too tight for the curvature ramp");
        }
        let d = turn_displacement(FRAC_PI_2, corner, self.ramp).0;
        if 2.0 * d >= 2.0 * self.half_width.min(self.half_height) {
            return bad("rectangle too small for the corner radius");
        }
        let lat = turn_displacement(PI, uturn, self.ramp).1;
        if lat + 2.0 * d >= 2.0 * self.half_height {
            return bad("U-turn too wide for the rectangle");
        }
        Ok(())
    }

    fn corner_curvature(&self) -> f64 {
        self.turn_rate / self.corner_speed
    }

    fn uturn_curvature(&self) -> f64 {
        self.uturn_turn_rate / self.uturn_speed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tag {
    Lap,
    Approach,
    Uturn,
    AfterUturn,
    Inverse,
}

#[derive(Debug, Clone)]
struct Segment {
    start: f64,
    length: f64,
    /// Signed plateau curvature; 0 for straights.
    curvature: f64,
    speed_cap: Option<f64>,
    tag: Tag,
}

impl Segment {
    fn end(&self) -> f64 {
        self.start + self.length
    }

    fn curvature_at(&self, u: f64, ramp: f64) -> f64 {
        if self.curvature == 0.0 {
            return 0.0;
        }
        let shape = (u / ramp).min(1.0).min((self.length - u) / ramp).max(0.0);
        self.curvature * shape
    }

    /// Heading change accumulated `u` metres into the segment.
    fn heading_at(&self, u: f64, ramp: f64) -> f64 {
        let (k, l) = (self.curvature, self.length);
        if k == 0.0 {
            0.0
        } else if u <= ramp {
            k * u * u / (2.0 * ramp)
        } else if u <= l - ramp {
            k * (ramp / 2.0 + (u - ramp))
        } else {
            let r = l - u;
            k * (l - ramp - r * r / (2.0 * ramp))
        }
    }
}

fn turn_segment(angle: f64, curvature: f64, ramp: f64, speed: f64, tag: Tag) -> Segment {
    Segment {
        start: 0.0,
        length: angle.abs() / curvature + ramp,
        curvature: curvature * angle.signum(),
        speed_cap: Some(speed),
        tag,
    }
}

fn straight(length: f64, tag: Tag) -> Segment {
    Segment {
        start: 0.0,
        length,
        curvature: 0.0,
        speed_cap: None,
        tag,
    }
}

/// Forward and lateral displacement of a left turn of `angle` radians
/// starting at the origin heading along +x.
fn turn_displacement(angle: f64, curvature: f64, ramp: f64) -> (f64, f64) {
    let mut seg = turn_segment(angle, curvature, ramp, 1.0, Tag::Lap);
    seg.start = 0.0;
    let mut pose = Pose {
        x: 0.0,
        y: 0.0,
        heading: 0.0,
    };
    advance_within(&mut pose, &seg, 0.0, seg.length, ramp);
    (pose.x, pose.y)
}

/// Integrates position over `[u0, u1]` of one segment with Simpson's rule on
/// the analytic heading.
fn advance_within(pose: &mut Pose, seg: &Segment, u0: f64, u1: f64, ramp: f64) {
    if u1 <= u0 {
        return;
    }
    let base = pose.heading - seg.heading_at(u0, ramp);
    let n = ((u1 - u0) / 0.01).ceil().max(2.0) as usize;
    let n = n + n % 2;
    let h = (u1 - u0) / n as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let th = base + seg.heading_at(u0 + i as f64 * h, ramp);
        sx += w * th.cos();
        sy += w * th.sin();
    }
    pose.x += sx * h / 3.0;
    pose.y += sy * h / 3.0;
    pose.heading = base + seg.heading_at(u1, ramp);
}

struct Path {
    segments: Vec<Segment>,
    start: Pose,
    ramp: f64,
    cruise: f64,
    accel: f64,
}

struct Profile {
    speed: f64,
    accel: f64,
    /// Segment whose speed cap is binding, if any.
    binding: Option<usize>,
}

impl Path {
    fn new(mut segments: Vec<Segment>, start: Pose, p: &ScenarioParams) -> Self {
        let mut s = 0.0;
        for seg in &mut segments {
            seg.start = s;
            s += seg.length;
        }
        Self {
            segments,
            start,
            ramp: p.ramp,
            cruise: p.speed,
            accel: p.accel,
        }
    }

    fn total(&self) -> f64 {
        self.segments.last().map_or(0.0, Segment::end)
    }

    fn segment_at(&self, s: f64) -> usize {
        self.segments
            .iter()
            .position(|g| s < g.end())
            .unwrap_or(self.segments.len() - 1)
    }

    fn profile(&self, s: f64) -> Profile {
        let mut best = Profile {
            speed: self.cruise,
            accel: 0.0,
            binding: None,
        };
        for (i, g) in self.segments.iter().enumerate() {
            let Some(cap) = g.speed_cap else { continue };
            let (v, a) = if s < g.start {
                ((cap * cap + 2.0 * self.accel * (g.start - s)).sqrt(), -self.accel)
            } else if s > g.end() {
                ((cap * cap + 2.0 * self.accel * (s - g.end())).sqrt(), self.accel)
            } else {
                (cap, 0.0)
            };
            if v < best.speed {
                best = Profile {
                    speed: v,
                    accel: a,
                    binding: Some(i),
                };
            }
        }
        best
    }

    fn curvature_at(&self, s: f64) -> f64 {
        let g = &self.segments[self.segment_at(s)];
        g.curvature_at(s - g.start, self.ramp)
    }

    fn advance(&self, pose: &mut Pose, s0: f64, s1: f64) {
        let mut s = s0;
        while s < s1 {
            let i = self.segment_at(s);
            let g = &self.segments[i];
            let stop = if i + 1 == self.segments.len() {
                s1
            } else {
                s1.min(g.end())
            };
            // past the final segment the path continues straight
            let u1 = (stop - g.start).min(g.length);
            advance_within(pose, g, s - g.start, u1, self.ramp);
            if stop - g.start > g.length {
                let extra = stop - g.end();
                pose.x += extra * pose.heading.cos();
                pose.y += extra * pose.heading.sin();
            }
            s = stop;
        }
    }
}

struct Run {
    rows: Vec<[f64; 3]>,
    odometry: Vec<Pose>,
    ticks: Vec<(usize, Option<usize>)>,
}

/// Drives the path tick by tick until the arc length passes its end.
fn drive(path: &Path, p: &ScenarioParams) -> Run {
    let total = path.total();
    let [c1, c2, c3] = p.power_coeffs;
    let mut pose = path.start;
    let mut s = 0.0;
    let mut run = Run {
        rows: Vec::new(),
        odometry: Vec::new(),
        ticks: Vec::new(),
    };
    loop {
        let prof = path.profile(s);
        let steer = (p.wheelbase * path.curvature_at(s)).atan();
        let power = c1 * prof.speed + c2 * prof.accel.abs() + c3 * steer.abs() * prof.speed;
        run.rows.push([steer, prof.speed, power]);
        run.odometry.push(pose);
        run.ticks.push((path.segment_at(s), prof.binding));
        if s >= total {
            break;
        }
        let next = s + prof.speed * p.dt;
        path.advance(&mut pose, s, next);
        s = next;
    }
    run
}

fn perimeter_path(p: &ScenarioParams) -> Path {
    let k = p.corner_curvature();
    let d = turn_displacement(FRAC_PI_2, k, p.ramp).0;
    let mut segs = Vec::with_capacity(8 * p.laps);
    for _ in 0..p.laps {
        for side in 0..4 {
            let len = if side % 2 == 0 { p.half_width } else { p.half_height };
            segs.push(straight(2.0 * (len - d), Tag::Lap));
            segs.push(turn_segment(FRAC_PI_2, k, p.ramp, p.corner_speed, Tag::Lap));
        }
    }
    let start = Pose {
        x: -p.half_width + d,
        y: -p.half_height,
        heading: 0.0,
    };
    Path::new(segs, start, p)
}

fn uturn_path(p: &ScenarioParams) -> Path {
    let k = p.corner_curvature();
    let ku = p.uturn_curvature();
    let d = turn_displacement(FRAC_PI_2, k, p.ramp).0;
    let (fwd, lat) = turn_displacement(PI, ku, p.ramp);
    let bottom = 2.0 * (p.half_width - d);
    let approach = p.obstacle_fraction * bottom;
    // back along the bottom until the first clockwise corner ends on x = -half_width
    let x_after = -p.half_width + d + approach + fwd;
    let back = x_after + p.half_width - d;
    let mut segs = vec![
        straight(approach, Tag::Approach),
        turn_segment(PI, ku, p.ramp, p.uturn_speed, Tag::Uturn),
        straight(back, Tag::AfterUturn),
    ];
    // sides visited clockwise from the bottom: left, top, right, bottom, ...
    for c in 0..p.reverse_corners {
        segs.push(turn_segment(-FRAC_PI_2, k, p.ramp, p.corner_speed, Tag::Inverse));
        let full = if c % 2 == 0 { p.half_height } else { p.half_width };
        let mut len = 2.0 * (full - d);
        if c == 0 {
            len -= lat;
        }
        if c + 1 == p.reverse_corners {
            len *= 0.5;
        }
        segs.push(straight(len, Tag::Lap));
    }
    let start = Pose {
        x: -p.half_width + d,
        y: -p.half_height,
        heading: 0.0,
    };
    Path::new(segs, start, p)
}

fn noise_levels(p: &ScenarioParams) -> [f64; 3] {
    if let Some(n) = p.noise_std {
        return n;
    }
    let clean = drive(&perimeter_path(p), p);
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let (lo, hi) = clean
            .rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r[c]), hi.max(r[c]))
            });
        *o = p.noise_fraction * (hi - lo);
    }
    out
}

fn to_series(rows: &[[f64; 3]], p: &ScenarioParams, stream: u64) -> Result<SensorSeries> {
    let noise = noise_levels(p);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(stream);
    let values = rows
        .iter()
        .map(|r| {
            (0..3)
                .map(|c| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    r[c] + noise[c] * e
                })
                .collect()
        })
        .collect();
    let timestamps = (0..rows.len()).map(|k| k as f64 * p.dt).collect();
    SensorSeries::new(
        timestamps,
        CHANNELS.iter().map(|c| c.to_string()).collect(),
        values,
    )
}

/// Anticlockwise laps around the rectangle, starting at the beginning of the
/// bottom straight.
pub fn gen_perimeter(params: &ScenarioParams) -> Result<(SensorSeries, Vec<Pose>)> {
    params.validate()?;
    let run = drive(&perimeter_path(params), params);
    Ok((to_series(&run.rows, params, 0)?, run.odometry))
}

/// U-turn test run with one ground-truth class per tick.
pub fn gen_uturn(params: &ScenarioParams) -> Result<(SensorSeries, Vec<Pose>, GroundTruth)> {
    params.validate()?;
    let path = uturn_path(params);
    let run = drive(&path, params);
    let uturn = path
        .segments
        .iter()
        .position(|g| g.tag == Tag::Uturn)
        .expect("U-turn segment");
    let classes = run
        .ticks
        .iter()
        .map(|&(seg, binding)| match path.segments[seg].tag {
            Tag::Uturn => SegmentClass::UturnExecution,
            Tag::Inverse => SegmentClass::InverseCurve,
            Tag::Approach if binding == Some(uturn) => SegmentClass::EnteringUturn,
            Tag::AfterUturn if binding == Some(uturn) => SegmentClass::ExitingUturn,
            _ => SegmentClass::StraightMotion,
        })
        .collect();
    let series = to_series(&run.rows, params, 1)?;
    let gt = GroundTruth {
        timestamps: series.timestamps().to_vec(),
        classes,
    };
    Ok((series, run.odometry, gt))
}
