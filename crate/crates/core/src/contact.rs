//! Closed-form contact model standing in for the physics simulator.
//!
//! The sponge is a linear spring with a light damper along the surface
//! normal, plus Coulomb friction for sliding and spinning. Two exploratory
//! actions are simulated from first contact:
//!
//! * **pressing**: the end-effector moves into the surface at constant speed,
//!   so the normal force ramps linearly with penetration;
//! * **lateral motion**: holding the final penetration, the end-effector
//!   slides one way and then back, producing friction force and spin torque
//!   whose sign follows the sliding direction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{standard_normal, RandomStream};
use crate::trajectory::{
    ForceTrajectory, MotionTrajectory, FORCE_CHANNELS, FORCE_LEN, MOTION_STEPS, STEPS_PER_ACTION,
};

pub const STIFFNESS_RANGE: (f64, f64) = (80.0, 1000.0);
pub const LATERAL_FRICTION_RANGE: (f64, f64) = (0.2, 8.0);
pub const SPINNING_FRICTION_RANGE: (f64, f64) = (0.0, 4.0);

/// Ground-truth physical parameters of one object.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectProperties {
    /// N/m
    pub stiffness: f64,
    pub lateral_friction: f64,
    pub spinning_friction: f64,
}

impl ObjectProperties {
    pub fn new(stiffness: f64, lateral_friction: f64, spinning_friction: f64) -> Result<Self> {
        let p = ObjectProperties {
            stiffness,
            lateral_friction,
            spinning_friction,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let within = |v: f64, (lo, hi): (f64, f64), name: &str| {
            if v.is_finite() && (lo..=hi).contains(&v) {
                Ok(())
            } else {
                Err(Error::Data(format!("{name} {v} outside [{lo}, {hi}]")))
            }
        };
        within(self.stiffness, STIFFNESS_RANGE, "stiffness")?;
        within(self.lateral_friction, LATERAL_FRICTION_RANGE, "lateral friction")?;
        within(self.spinning_friction, SPINNING_FRICTION_RANGE, "spinning friction")
    }
}

/// Draw each property independently and uniformly from its range.
pub fn sample_object(rng: &mut RandomStream) -> ObjectProperties {
    let mut draw = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    ObjectProperties {
        stiffness: draw(STIFFNESS_RANGE),
        lateral_friction: draw(LATERAL_FRICTION_RANGE),
        spinning_friction: draw(SPINNING_FRICTION_RANGE),
    }
}

pub const GRID_STIFFNESS: [f64; 4] = [150.0, 350.0, 600.0, 900.0];
pub const GRID_LATERAL_FRICTION: [f64; 3] = [0.5, 2.0, 6.0];
pub const GRID_OBJECTS: usize = GRID_STIFFNESS.len() * GRID_LATERAL_FRICTION.len();

/// One of the twelve sponge stand-ins, with its ordinal levels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridObject {
    /// 1..=12, stiffness-major.
    pub id: u32,
    /// 1..=4
    pub stiffness_level: u8,
    /// 1..=3
    pub friction_level: u8,
    pub properties: ObjectProperties,
}

/// 4 stiffness levels × 3 friction levels; spinning friction is half the lateral friction.
pub fn grid_objects() -> Vec<GridObject> {
    let mut out = Vec::with_capacity(GRID_OBJECTS);
    for (si, &k) in GRID_STIFFNESS.iter().enumerate() {
        for (fi, &mu) in GRID_LATERAL_FRICTION.iter().enumerate() {
            out.push(GridObject {
                id: (si * GRID_LATERAL_FRICTION.len() + fi + 1) as u32,
                stiffness_level: si as u8 + 1,
                friction_level: fi as u8 + 1,
                properties: ObjectProperties {
                    stiffness: k,
                    lateral_friction: mu,
                    spinning_friction: mu / 2.0,
                },
            });
        }
    }
    out
}

/// Speeds and durations of the two exploratory actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplorationProgram {
    /// m/s
    pub press_speed: f64,
    /// s
    pub press_duration: f64,
    /// m/s; the first half moves at `+lateral_speed`, the second at `-lateral_speed`.
    pub lateral_speed: f64,
    /// s, per direction
    pub lateral_duration_each_direction: f64,
    /// Hz
    pub sample_rate: f64,
}

impl Default for ExplorationProgram {
    fn default() -> Self {
        ExplorationProgram {
            press_speed: 0.01,
            press_duration: 2.0,
            lateral_speed: 0.05,
            lateral_duration_each_direction: 1.0,
            sample_rate: 100.0,
        }
    }
}

impl ExplorationProgram {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("exploration.{name} must be > 0, got {v}")))
            }
        };
        pos(self.press_speed, "press_speed")?;
        pos(self.press_duration, "press_duration")?;
        pos(self.lateral_speed, "lateral_speed")?;
        pos(self.lateral_duration_each_direction, "lateral_duration_each_direction")?;
        pos(self.sample_rate, "sample_rate")?;
        let press = (self.press_duration * self.sample_rate).round() as usize;
        let lateral = (2.0 * self.lateral_duration_each_direction * self.sample_rate).round() as usize;
        if press != STEPS_PER_ACTION || lateral != STEPS_PER_ACTION {
            return Err(Error::Config(format!(
                "exploration program must yield {STEPS_PER_ACTION} samples per action, \
                 got {press} pressing and {lateral} lateral"
            )));
        }
        Ok(())
    }
}

/// Fixed constants of the contact model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactModel {
    pub damping_ratio: f64,
    /// m
    pub patch_radius: f64,
}

impl Default for ContactModel {
    fn default() -> Self {
        ContactModel {
            damping_ratio: 0.05,
            patch_radius: 0.02,
        }
    }
}

impl ContactModel {
    /// Damping coefficient `2ζ√k`.
    pub fn damping(&self, stiffness: f64) -> f64 {
        2.0 * self.damping_ratio * stiffness.sqrt()
    }
}

/// Sensor noise standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// N
    pub force_noise_sd: f64,
    /// N·m
    pub torque_noise_sd: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            force_noise_sd: 0.2,
            torque_noise_sd: 0.01,
        }
    }
}

impl NoiseConfig {
    pub const NONE: NoiseConfig = NoiseConfig {
        force_noise_sd: 0.0,
        torque_noise_sd: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.force_noise_sd >= 0.0 && self.torque_noise_sd >= 0.0) {
            return Err(Error::Config("noise standard deviations must be >= 0".into()));
        }
        Ok(())
    }
}

const FX: usize = 0;
const FZ: usize = 2;
const TZ: usize = 5;

/// Run both exploratory actions against `obj` and record the wrist wrench.
pub fn simulate_exploration(
    obj: &ObjectProperties,
    prog: &ExplorationProgram,
    model: &ContactModel,
    noise: &NoiseConfig,
    rng: &mut RandomStream,
) -> Result<ForceTrajectory> {
    prog.validate()?;
    noise.validate()?;
    let dt = 1.0 / prog.sample_rate;
    let k = obj.stiffness;
    let damping_force = model.damping(k) * prog.press_speed;
    let mut out = vec![0.0; FORCE_LEN];

    for step in 0..STEPS_PER_ACTION {
        let t = (step + 1) as f64 * dt;
        let depth = prog.press_speed * t;
        out[step * FORCE_CHANNELS + FZ] = k * depth + damping_force;
    }

    let held = k * prog.press_speed * prog.press_duration + damping_force;
    let half = STEPS_PER_ACTION / 2;
    let base = STEPS_PER_ACTION * FORCE_CHANNELS;
    for step in 0..STEPS_PER_ACTION {
        let dir = if step < half { 1.0 } else { -1.0 };
        let row = base + step * FORCE_CHANNELS;
        out[row + FX] = -obj.lateral_friction * held * dir;
        out[row + FZ] = held;
        out[row + TZ] = -obj.spinning_friction * held * model.patch_radius * dir;
    }

    for (i, v) in out.iter_mut().enumerate() {
        let sd = if i % FORCE_CHANNELS < 3 {
            noise.force_noise_sd
        } else {
            noise.torque_noise_sd
        };
        let n = standard_normal(rng);
        if sd > 0.0 {
            *v += sd * n;
        }
    }
    ForceTrajectory::new(out)
}

/// Normal force while replaying a motion against `obj`: `k · max(0, table_height − z)`.
pub fn simulate_wipe_replay(
    obj: &ObjectProperties,
    motion: &MotionTrajectory,
    table_height: f64,
) -> Vec<f64> {
    let profile: Vec<f64> = motion
        .positions()
        .map(|[_, _, z]| obj.stiffness * (table_height - z).max(0.0))
        .collect();
    debug_assert_eq!(profile.len(), MOTION_STEPS);
    profile
}

/// Length-checked variant of [`simulate_wipe_replay`] for raw vectors.
pub fn simulate_wipe_replay_raw(
    obj: &ObjectProperties,
    motion: &[f64],
    table_height: f64,
) -> Result<Vec<f64>> {
    let m = MotionTrajectory::new(motion.to_vec())?;
    Ok(simulate_wipe_replay(obj, &m, table_height))
}
