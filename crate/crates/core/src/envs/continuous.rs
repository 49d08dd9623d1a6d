use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{EnvSpec, Environment};
use crate::error::{self, Result};
use crate::rng::Rng;

/// Torque-limited pendulum; `θ = 0` is upright.
///
/// State `(cos θ, sin θ, θ̇)`, action torque `u ∈ [-2, 2]`.
/// Dynamics `θ̈ = 3g/(2l)·sin θ + 3u/(m l²) - c·θ̇`, integrated with one RK4 step
/// of `dt`, then `θ̇` is clipped to `[-8, 8]`. With `c > 0` and `u = 0` the
/// mechanical energy `(m l²/6)·θ̇² + (m g l/2)·cos θ` never increases.
/// Reward `-(θ² + 0.1·θ̇² + 0.001·u²)` with `θ` wrapped to `[-π, π)`.
/// Reset `θ ~ U(-π, π)`, `θ̇ ~ U(-1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pendulum {
    spec: EnvSpec,
    pub g: f64,
    pub mass: f64,
    pub length: f64,
    pub dt: f64,
    pub friction: f64,
    pub max_speed: f64,
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::with_friction(0.0)
    }
}

impl Pendulum {
    pub fn with_friction(friction: f64) -> Self {
        Self {
            spec: EnvSpec {
                state_dim: 3,
                action_dim: 1,
                action_low: vec![-2.0],
                action_high: vec![2.0],
                max_episode_len: 200,
                gamma: 0.99,
            },
            g: 10.0,
            mass: 1.0,
            length: 1.0,
            dt: 0.05,
            friction,
            max_speed: 8.0,
        }
    }

    pub fn angular_acceleration(&self, theta: f64, theta_dot: f64, torque: f64) -> f64 {
        3.0 * self.g / (2.0 * self.length) * theta.sin() + 3.0 * torque / (self.mass * self.length * self.length)
            - self.friction * theta_dot
    }

    pub fn energy(&self, theta: f64, theta_dot: f64) -> f64 {
        self.mass * self.length * self.length / 6.0 * theta_dot * theta_dot
            + self.mass * self.g * self.length / 2.0 * theta.cos()
    }

    pub fn state_from_angle(theta: f64, theta_dot: f64) -> Vec<f64> {
        vec![theta.cos(), theta.sin(), theta_dot]
    }

    pub fn angle(state: &[f64]) -> f64 {
        state[1].atan2(state[0])
    }
}

fn wrap_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

impl Environment for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, rng: &mut Rng) -> Vec<f64> {
        let theta = rng.random_range(-PI..PI);
        let theta_dot = rng.random_range(-1.0..1.0);
        Self::state_from_angle(theta, theta_dot)
    }

    fn is_terminal(&self, _state: &[f64]) -> bool {
        false
    }

    fn transition(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let (theta, omega, u) = (Self::angle(state), state[2], action[0]);
        let f = |th: f64, om: f64| (om, self.angular_acceleration(th, om, u));
        let h = self.dt;
        let (k1t, k1o) = f(theta, omega);
        let (k2t, k2o) = f(theta + 0.5 * h * k1t, omega + 0.5 * h * k1o);
        let (k3t, k3o) = f(theta + 0.5 * h * k2t, omega + 0.5 * h * k2o);
        let (k4t, k4o) = f(theta + h * k3t, omega + h * k3o);
        let theta = theta + h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
        let omega = (omega + h / 6.0 * (k1o + 2.0 * k2o + 2.0 * k3o + k4o)).clamp(-self.max_speed, self.max_speed);
        Self::state_from_angle(theta, omega)
    }

    fn reward_clipped(&self, state: &[f64], action: &[f64]) -> f64 {
        let theta = wrap_angle(Self::angle(state));
        -(theta * theta + 0.1 * state[2] * state[2] + 0.001 * action[0] * action[0])
    }
}

/// Damped planar point mass steered towards the origin.
///
/// State `(x, y, vx, vy)`, action force `f ∈ [-1, 1]²`.
/// `v' = (1 - damping)·v + dt·f`, `p' = p + dt·v'`.
/// Reward `-(|p|² + 0.01·|f|²)`; reset `p ~ U(-1, 1)²`, `v = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMass2D {
    spec: EnvSpec,
    pub dt: f64,
    pub damping: f64,
}

impl Default for PointMass2D {
    fn default() -> Self {
        Self {
            spec: EnvSpec {
                state_dim: 4,
                action_dim: 2,
                action_low: vec![-1.0, -1.0],
                action_high: vec![1.0, 1.0],
                max_episode_len: 200,
                gamma: 0.99,
            },
            dt: 0.1,
            damping: 0.1,
        }
    }
}

impl Environment for PointMass2D {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, rng: &mut Rng) -> Vec<f64> {
        vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0, 0.0]
    }

    fn is_terminal(&self, _state: &[f64]) -> bool {
        false
    }

    fn transition(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        let vx = (1.0 - self.damping) * s[2] + self.dt * a[0];
        let vy = (1.0 - self.damping) * s[3] + self.dt * a[1];
        vec![s[0] + self.dt * vx, s[1] + self.dt * vy, vx, vy]
    }

    fn reward_clipped(&self, s: &[f64], a: &[f64]) -> f64 {
        -(s[0] * s[0] + s[1] * s[1] + 0.01 * (a[0] * a[0] + a[1] * a[1]))
    }
}

/// Continuous mountain car.
///
/// State `(position, velocity)`, action `u ∈ [-1, 1]`.
/// `v' = clip(v + 0.0015·u - 0.0025·cos(3p), ±0.07)`, `p' = clip(p + v', [-1.2, 0.6])`,
/// with `v' = 0` when the car hits the left wall. Terminal once `p ≥ 0.45`.
/// Reward `100·[p' ≥ 0.45] - 0.1·u²`, a pure function of `(s, u)` because the
/// transition is deterministic. Reset `p ~ U(-0.6, -0.4)`, `v = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MountainCar {
    spec: EnvSpec,
}

impl Default for MountainCar {
    fn default() -> Self {
        Self {
            spec: EnvSpec {
                state_dim: 2,
                action_dim: 1,
                action_low: vec![-1.0],
                action_high: vec![1.0],
                max_episode_len: EnvSpec::DEFAULT_MAX_EPISODE_LEN,
                gamma: 0.99,
            },
        }
    }
}

impl MountainCar {
    pub const GOAL: f64 = 0.45;
}

impl Environment for MountainCar {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, rng: &mut Rng) -> Vec<f64> {
        vec![rng.random_range(-0.6..-0.4), 0.0]
    }

    fn is_terminal(&self, state: &[f64]) -> bool {
        state[0] >= Self::GOAL
    }

    fn transition(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        let mut v = (s[1] + 0.0015 * a[0] - 0.0025 * (3.0 * s[0]).cos()).clamp(-0.07, 0.07);
        let p = (s[0] + v).clamp(-1.2, 0.6);
        if p <= -1.2 && v < 0.0 {
            v = 0.0;
        }
        vec![p, v]
    }

    fn reward_clipped(&self, s: &[f64], a: &[f64]) -> f64 {
        let bonus = if self.transition(s, a)[0] >= Self::GOAL { 100.0 } else { 0.0 };
        bonus - 0.1 * a[0] * a[0]
    }
}

/// Stable linear system `s' = A s + B a` with a known closed form.
///
/// `A = [[0.95, 0.1], [-0.1, 0.95]]`, `B = [[0], [0.1]]`, `a ∈ [-1, 1]`.
/// Reward `-(|s|² + 0.01·a²)`; reset `s ~ U(-1, 1)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    spec: EnvSpec,
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
}

impl Default for LinearSystem {
    fn default() -> Self {
        Self {
            spec: EnvSpec {
                state_dim: 2,
                action_dim: 1,
                action_low: vec![-1.0],
                action_high: vec![1.0],
                max_episode_len: 100,
                gamma: 0.99,
            },
            a: [[0.95, 0.1], [-0.1, 0.95]],
            b: [0.0, 0.1],
        }
    }
}

impl Environment for LinearSystem {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&self, rng: &mut Rng) -> Vec<f64> {
        vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
    }

    fn is_terminal(&self, _state: &[f64]) -> bool {
        false
    }

    fn transition(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        (0..2).map(|i| self.a[i][0] * s[0] + self.a[i][1] * s[1] + self.b[i] * a[0]).collect()
    }

    fn reward_clipped(&self, s: &[f64], a: &[f64]) -> f64 {
        -(s[0] * s[0] + s[1] * s[1] + 0.01 * a[0] * a[0])
    }
}

/// Any built-in continuous environment, selectable by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ContinuousEnv {
    Pendulum(Pendulum),
    PointMass(PointMass2D),
    MountainCar(MountainCar),
    Linear(LinearSystem),
}

impl ContinuousEnv {
    pub const NAMES: [&'static str; 4] = ["pendulum", "point_mass", "mountain_car", "linear"];

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "pendulum" => Ok(Self::Pendulum(Pendulum::default())),
            "point_mass" => Ok(Self::PointMass(PointMass2D::default())),
            "mountain_car" => Ok(Self::MountainCar(MountainCar::default())),
            "linear" => Ok(Self::Linear(LinearSystem::default())),
            other => error::config(format!("unknown environment '{other}' (expected one of {:?})", Self::NAMES)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Pendulum(_) => "pendulum",
            Self::PointMass(_) => "point_mass",
            Self::MountainCar(_) => "mountain_car",
            Self::Linear(_) => "linear",
        }
    }

    fn inner(&self) -> &dyn Environment {
        match self {
            Self::Pendulum(e) => e,
            Self::PointMass(e) => e,
            Self::MountainCar(e) => e,
            Self::Linear(e) => e,
        }
    }
}

impl Environment for ContinuousEnv {
    fn spec(&self) -> &EnvSpec {
        self.inner().spec()
    }

    fn reset(&self, rng: &mut Rng) -> Vec<f64> {
        self.inner().reset(rng)
    }

    fn is_terminal(&self, state: &[f64]) -> bool {
        self.inner().is_terminal(state)
    }

    fn transition(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        self.inner().transition(state, action)
    }

    fn reward_clipped(&self, state: &[f64], action: &[f64]) -> f64 {
        self.inner().reward_clipped(state, action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    #[test]
    fn all_specs_validate() {
        for name in ContinuousEnv::NAMES {
            let env = ContinuousEnv::by_name(name).unwrap();
            env.spec().validate().unwrap();
            assert_eq!(env.name(), name);
        }
        assert!(ContinuousEnv::by_name("half_cheetah").is_err());
    }

    #[test]
    fn pendulum_reset_in_box() {
        let env = Pendulum::default();
        let mut rng = SeedTree::new(1).rng();
        for _ in 0..1000 {
            let s = env.reset(&mut rng);
            assert!((s[0] * s[0] + s[1] * s[1] - 1.0).abs() < 1e-12);
            assert!(s[2].abs() <= 1.0);
        }
    }

    #[test]
    fn pendulum_upright_rest_has_zero_reward() {
        let env = Pendulum::default();
        assert_eq!(env.reward(&Pendulum::state_from_angle(0.0, 0.0), &[0.0]), 0.0);
    }

    #[test]
    fn point_mass_origin_is_fixed_point() {
        let env = PointMass2D::default();
        let step = env.step(&[0.0; 4], &[0.0, 0.0]).unwrap();
        assert_eq!(step.next_state, vec![0.0; 4]);
        assert_eq!(step.reward, 0.0);
        assert_eq!(env.reward(&[0.0; 4], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn actions_are_clipped_and_nan_rejected() {
        let env = Pendulum::default();
        let s = Pendulum::state_from_angle(0.3, 0.0);
        assert_eq!(env.step(&s, &[50.0]).unwrap(), env.step(&s, &[2.0]).unwrap());
        assert!(matches!(env.step(&s, &[f64::NAN]), Err(crate::Error::Argument(_))));
        assert!(matches!(env.step(&s, &[f64::INFINITY]), Err(crate::Error::Argument(_))));
    }

    #[test]
    fn mountain_car_reaches_terminal_with_bonus() {
        let env = MountainCar::default();
        let s = [0.449, 0.05];
        let step = env.step(&s, &[1.0]).unwrap();
        assert!(step.terminal);
        assert!((step.reward - (100.0 - 0.1)).abs() < 1e-12);
    }

    #[test]
    fn linear_system_matches_closed_form() {
        let env = LinearSystem::default();
        let s = env.step(&[1.0, -0.5], &[0.4]).unwrap().next_state;
        assert!((s[0] - (0.95 - 0.05)).abs() < 1e-15);
        assert!((s[1] - (-0.1 - 0.475 + 0.04)).abs() < 1e-15);
    }
}
