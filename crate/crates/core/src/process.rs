//! Locally stationary simulation models: innovation processes and nonlinear
//! autoregressive scenarios with known regression surfaces.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scalar::{lit, to_f64, Scalar};

/// Burn-in used by [`simulate_scenario`].
pub const DEFAULT_BURN_IN: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnovationKind {
    /// `ε_i = a_1 ε_{i-1} + a_2 ε_{i-2} + η_i`.
    TvAr2,
    /// `ε_i = a_1 ε_{i-1} + η_i` if `ε_{i-1} ≥ 0`, else `a_2 ε_{i-1} + η_i`.
    Setar,
    /// `ε_i = (a_1 η_{i-1} + a_2) ε_{i-1} + η_i`.
    Bilinear,
}

/// Innovation process with `a_1(t) = 0.3`, `a_2(t) = 0.3 sin(2πt)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InnovationModel {
    pub kind: InnovationKind,
}

impl InnovationModel {
    pub fn new(kind: InnovationKind) -> Self {
        Self { kind }
    }

    pub fn a1<T: Scalar>(&self, _t: T) -> T {
        lit(0.3)
    }

    pub fn a2<T: Scalar>(&self, t: T) -> T {
        lit::<T>(0.3) * (T::two_pi() * t).sin()
    }

    /// Coefficient applied to `ε_{i-1}` by the threshold model.
    pub fn setar_coefficient<T: Scalar>(&self, t: T, eps1: T) -> T {
        if eps1 >= T::zero() {
            self.a1(t)
        } else {
            self.a2(t)
        }
    }

    /// One recursion step given the two previous innovations and the current
    /// and previous shocks.
    pub fn step<T: Scalar>(&self, t: T, eps1: T, eps2: T, eta: T, eta1: T) -> T {
        match self.kind {
            InnovationKind::TvAr2 => self.a1(t) * eps1 + self.a2(t) * eps2 + eta,
            InnovationKind::Setar => self.setar_coefficient(t, eps1) * eps1 + eta,
            InnovationKind::Bilinear => (self.a1(t) * eta1 + self.a2(t)) * eps1 + eta,
        }
    }

    /// Innovation path driven by explicit shocks `η`; `times[i]` is the time
    /// argument of step `i`.
    pub fn from_shocks<T: Scalar>(&self, shocks: &[T], times: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(shocks.len());
        let (mut e1, mut e2, mut h1) = (T::zero(), T::zero(), T::zero());
        for (&eta, &t) in shocks.iter().zip(times) {
            let e = self.step(t, e1, e2, eta, h1);
            out.push(e);
            e2 = e1;
            e1 = e;
            h1 = eta;
        }
        out
    }
}

/// Time argument of step `s` (1-based) of a path with `burn_in` discarded
/// steps: frozen at 0 during burn-in, then `(s - burn_in) / n`.
fn step_time<T: Scalar>(s: usize, burn_in: usize, n: usize) -> T {
    if s <= burn_in {
        T::zero()
    } else {
        lit((s - burn_in) as f64 / n as f64)
    }
}

fn draw_shocks<T: Scalar, R: Rng + ?Sized>(rng: &mut R, len: usize, zero: bool) -> Vec<T> {
    if zero {
        vec![T::zero(); len]
    } else {
        (0..len).map(|_| T::standard_normal(rng)).collect()
    }
}

/// Length-`n` innovation path after discarding `burn_in` steps.
pub fn simulate_innovations<T: Scalar>(
    model: InnovationModel,
    n: usize,
    seed: u64,
    burn_in: usize,
) -> Vec<T> {
    innovations_with(model, n, burn_in, &mut stream(seed, 0), false)
}

/// As [`simulate_innovations`] with an explicit generator; `zero_shocks`
/// forces every `η_i` to zero.
pub fn innovations_with<T: Scalar, R: Rng + ?Sized>(
    model: InnovationModel,
    n: usize,
    burn_in: usize,
    rng: &mut R,
    zero_shocks: bool,
) -> Vec<T> {
    let mut path = full_innovation_path(model, n, burn_in, rng, zero_shocks);
    path.drain(..burn_in);
    path
}

/// Burn-in plus `n` innovations on one joint clock.
fn full_innovation_path<T: Scalar, R: Rng + ?Sized>(
    model: InnovationModel,
    n: usize,
    burn_in: usize,
    rng: &mut R,
    zero_shocks: bool,
) -> Vec<T> {
    let total = n + burn_in;
    let shocks = draw_shocks(rng, total, zero_shocks);
    let times: Vec<T> = (1..=total).map(|s| step_time(s, burn_in, n)).collect();
    model.from_shocks(&shocks, &times)
}

/// Regression and volatility pair of a simulation scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setup {
    /// Exact-form null: `(1+x²)^-4 + δ sin(2πt) e^{-x²}`.
    #[serde(rename = "1")]
    One,
    /// Homogeneity null: `(δ sin(2πt) + 1) e^{-x²/2}`.
    #[serde(rename = "2")]
    Two,
    /// Separability null: `2t(δ e^{-2tx²} + π^{-1/2} e^{-x²/2})`.
    #[serde(rename = "3")]
    Three,
    /// Two-lag analogue of setup 1.
    #[serde(rename = "I")]
    LagOne,
    /// Two-lag analogue of setup 2.
    #[serde(rename = "II")]
    LagTwo,
    /// Two-lag analogue of setup 3.
    #[serde(rename = "III")]
    LagThree,
}

impl Setup {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "1" => Setup::One,
            "2" => Setup::Two,
            "3" => Setup::Three,
            "I" | "i" => Setup::LagOne,
            "II" | "ii" => Setup::LagTwo,
            "III" | "iii" => Setup::LagThree,
            other => return Err(Error::Config(format!("unknown setup '{other}'"))),
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Setup::One => "1",
            Setup::Two => "2",
            Setup::Three => "3",
            Setup::LagOne => "I",
            Setup::LagTwo => "II",
            Setup::LagThree => "III",
        }
    }

    /// Number of lags entering the regression.
    pub fn lags(&self) -> usize {
        match self {
            Setup::One | Setup::Two | Setup::Three => 1,
            _ => 2,
        }
    }

    /// The one-lag setup whose volatility this setup borrows.
    fn base(&self) -> Setup {
        match self {
            Setup::One | Setup::LagOne => Setup::One,
            Setup::Two | Setup::LagTwo => Setup::Two,
            Setup::Three | Setup::LagThree => Setup::Three,
        }
    }
}

/// A simulation model `X_i = Σ_j m_j(t_i, X_{i-j}) + σ(t_i, X_{i-1}) ε_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub setup: Setup,
    pub delta: f64,
    pub innovation: InnovationModel,
}

impl Scenario {
    pub fn new(setup: Setup, delta: f64, innovation: InnovationKind) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Config(format!("delta must be a finite nonnegative real, got {delta}")));
        }
        Ok(Self {
            setup,
            delta,
            innovation: InnovationModel::new(innovation),
        })
    }

    pub fn lags(&self) -> usize {
        self.setup.lags()
    }

    /// Component that carries `δ` and is the target of inference.
    pub fn focus_component(&self) -> usize {
        self.lags()
    }

    /// `m(t, x)` of a one-lag setup, or the focus component of a two-lag setup.
    pub fn eval_true_m<T: Scalar>(&self, t: T, x: T) -> T {
        self.eval_component(self.focus_component(), t, x)
    }

    /// Component `j` of the additive mean: `j = 0` is the time trend.
    pub fn eval_component<T: Scalar>(&self, j: usize, t: T, x: T) -> T {
        let one = T::one();
        let d = lit::<T>(self.delta);
        let tp = T::two_pi() * t;
        let x2 = x * x;
        let inv_sqrt_pi = lit::<T>(1.0 / std::f64::consts::PI.sqrt());
        let two_t = lit::<T>(2.0) * t;
        match (self.setup, j) {
            (Setup::One, 1) => (one + x2).powi(-4) + d * tp.sin() * (-x2).exp(),
            (Setup::Two, 1) => (d * tp.sin() + one) * (-x2 * lit(0.5)).exp(),
            (Setup::Three, 1) | (Setup::LagThree, 2) => {
                two_t * (d * (-two_t * x2).exp() + inv_sqrt_pi * (-x2 * lit(0.5)).exp())
            }
            (Setup::One | Setup::Two | Setup::Three, _) => T::zero(),
            (Setup::LagOne, 0) => two_t * tp.cos(),
            (Setup::LagOne, 1) => (lit::<T>(2.0) + x2).powi(-4),
            (Setup::LagOne | Setup::LagTwo, 2) => (one + d * tp.sin()) * (-x2).exp(),
            (Setup::LagTwo, 0) => lit(2.0),
            (Setup::LagTwo, 1) => tp.cos() * (-x2).exp(),
            (Setup::LagThree, 0) => two_t,
            (Setup::LagThree, 1) => (-x2).exp(),
            _ => T::zero(),
        }
    }

    /// `σ(t, x)` evaluated at the first lag.
    pub fn eval_true_sigma<T: Scalar>(&self, t: T, x: T) -> T {
        let one = T::one();
        let x2 = x * x;
        let tp = T::two_pi() * t;
        match self.setup.base() {
            Setup::One => lit::<T>(1.5) * (-x2 * lit(0.5)).exp() * (lit::<T>(2.0) + tp.sin()),
            Setup::Two => lit::<T>(0.5) * (-x2).exp() * tp.cos() + one,
            _ => {
                if x.abs() <= one {
                    lit::<T>(0.7) * (one + x2)
                } else if t < lit(0.5) {
                    lit(1.4)
                } else {
                    lit(2.0)
                }
            }
        }
    }

    /// Conditional mean `Σ_j m_j(t, lags[j-1])` including the trend.
    pub fn eval_mean<T: Scalar>(&self, t: T, lags: &[T]) -> T {
        let mut acc = self.eval_component(0, t, T::zero());
        for (j, &x) in lags.iter().enumerate().take(self.lags()) {
            acc += self.eval_component(j + 1, t, x);
        }
        acc
    }
}

/// Simulated path `X_1..X_n` with `t_i = i / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedSeries<T> {
    pub values: Vec<T>,
    pub times: Vec<T>,
    pub seed: u64,
    pub burn_in: usize,
}

/// Knobs of [`simulate_scenario_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    pub burn_in: usize,
    /// Replicate stream under the master seed.
    pub stream: u64,
    /// Force all Gaussian shocks to zero.
    pub zero_shocks: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            burn_in: DEFAULT_BURN_IN,
            stream: 0,
            zero_shocks: false,
        }
    }
}

/// Simulate `n` observations with `X_0 = 0` and the default burn-in.
pub fn simulate_scenario<T: Scalar>(sc: &Scenario, n: usize, seed: u64) -> Result<SimulatedSeries<T>> {
    simulate_scenario_with(sc, n, seed, SimOptions::default())
}

pub fn simulate_scenario_with<T: Scalar>(
    sc: &Scenario,
    n: usize,
    seed: u64,
    opts: SimOptions,
) -> Result<SimulatedSeries<T>> {
    if n < 50 {
        return Err(Error::Config(format!("simulation length must be at least 50, got {n}")));
    }
    let mut rng = stream(seed, opts.stream);
    let total = n + opts.burn_in;
    let eps: Vec<T> = full_innovation_path(sc.innovation, n, opts.burn_in, &mut rng, opts.zero_shocks);
    let mut lags = vec![T::zero(); sc.lags()];
    let mut values = Vec::with_capacity(n);
    for s in 1..=total {
        let t: T = step_time(s, opts.burn_in, n);
        let x = sc.eval_mean(t, &lags) + sc.eval_true_sigma(t, lags[0]) * eps[s - 1];
        if !x.is_finite() {
            return Err(Error::SimulationDivergence { index: s });
        }
        lags.rotate_right(1);
        lags[0] = x;
        if s > opts.burn_in {
            values.push(x);
        }
    }
    let times = (1..=n).map(|i| lit(i as f64 / n as f64)).collect();
    Ok(SimulatedSeries {
        values,
        times,
        seed,
        burn_in: opts.burn_in,
    })
}

/// `E m_j(t, X)` under the law of the process with time frozen at `t`,
/// by a long Monte Carlo path.
pub fn stationary_mean(sc: &Scenario, component: usize, t: f64, samples: usize, seed: u64) -> f64 {
    let burn = 1000;
    let mut rng = stream(seed, 0x5eed_0000 ^ t.to_bits());
    let model = sc.innovation;
    let (mut e1, mut e2, mut h1) = (0.0f64, 0.0f64, 0.0f64);
    let mut lags = vec![0.0f64; sc.lags()];
    let mut acc = 0.0;
    for s in 0..burn + samples {
        let eta = f64::standard_normal(&mut rng);
        let e = model.step(t, e1, e2, eta, h1);
        e2 = e1;
        e1 = e;
        h1 = eta;
        if s >= burn {
            acc += sc.eval_component(component, t, lags[component.max(1) - 1]);
        }
        let x = sc.eval_mean(t, &lags) + sc.eval_true_sigma(t, lags[0]) * e;
        lags.rotate_right(1);
        lags[0] = if x.is_finite() { x } else { 0.0 };
    }
    acc / samples as f64
}

/// Centered truth `m_j(t, x) - E m_j(t, X)` with the centering cached per `t`.
#[derive(Debug)]
pub struct CenteredTruth {
    scenario: Scenario,
    component: usize,
    samples: usize,
    seed: u64,
    cache: Mutex<HashMap<u64, f64>>,
}

impl CenteredTruth {
    pub fn new(scenario: Scenario, component: usize, samples: usize, seed: u64) -> Self {
        Self {
            scenario,
            component,
            samples,
            seed,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn center(&self, t: f64) -> f64 {
        if let Some(v) = self.cache.lock().expect("cache poisoned").get(&t.to_bits()) {
            return *v;
        }
        let v = stationary_mean(&self.scenario, self.component, t, self.samples, self.seed);
        self.cache.lock().expect("cache poisoned").insert(t.to_bits(), v);
        v
    }

    pub fn eval<T: Scalar>(&self, t: T, x: T) -> T {
        let tf = to_f64(t);
        self.scenario.eval_component(self.component, t, x) - lit(self.center(tf))
    }
}
