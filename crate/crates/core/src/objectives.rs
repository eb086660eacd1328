//! Benchmark objectives behind a common noisy-evaluation interface.
//!
//! An objective is a pure function of `(point, stream)`: the stream id
//! seeds the noise generator, so a given pair always yields the same
//! value no matter which thread evaluates it or in what order.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::SearchSpace;

/// Ackley lower bounds used by the 3-D benchmark. The box is asymmetric so
/// the global minimum at the origin is not at the box center.
pub const ACKLEY3_LOWER: [f64; 3] = [-32.768, -12.21, -32.768];
pub const ACKLEY3_UPPER: [f64; 3] = [32.768, 32.768, 5.14];
pub const ACKLEY3_NOISE_VAR: f64 = 25.0;

/// Engagement cap in seconds.
pub const TTK_T_MAX: f64 = 300.0;

pub trait NoisyObjective: Send + Sync {
    fn name(&self) -> &str;

    fn space(&self) -> &SearchSpace;

    /// One noisy evaluation at a native-coordinate point.
    fn evaluate(&self, x: &[f64], stream: u64) -> Result<f64>;

    /// The noise-free value, when the objective has one.
    fn mean_value(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Known global minimizer and value.
    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        None
    }
}

fn noise_rng(stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream)
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> f64 {
    if var > 0.0 {
        var.sqrt() * rng.sample::<f64, _>(StandardNormal)
    } else {
        0.0
    }
}

/// Noise-free Ackley with `a = 20`, `b = 0.2`, `c = 2π`.
pub fn ackley_mean(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / d;
    let cs = x.iter().map(|v| (2.0 * std::f64::consts::PI * v).cos()).sum::<f64>() / d;
    // Grouped so each bracket is exactly zero at the origin and
    // non-negative elsewhere.
    20.0 * (1.0 - (-0.2 * sq.sqrt()).exp()) + (std::f64::consts::E - cs.exp())
}

pub fn ackley<R: Rng + ?Sized>(x: &[f64], noise_var: f64, rng: &mut R) -> f64 {
    ackley_mean(x) + gaussian(rng, noise_var)
}

pub fn forrester_mean(x: f64) -> f64 {
    (6.0 * x - 2.0).powi(2) * (12.0 * x - 4.0).sin()
}

pub fn forrester<R: Rng + ?Sized>(x: f64, noise_var: f64, rng: &mut R) -> f64 {
    forrester_mean(x) + gaussian(rng, noise_var)
}

/// Time-to-kill: the simulation time if Blue survived, otherwise folded
/// onto `[t_max, 2·t_max]` so that losing late beats losing early.
pub fn ttk_encode(blue_survived: bool, sim_time: f64, t_max: f64) -> Result<f64> {
    if !(t_max > 0.0) || !(0.0..=t_max).contains(&sim_time) {
        return Err(Error::arg(format!(
            "simulation time {sim_time} outside [0, {t_max}]"
        )));
    }
    Ok(if blue_survived { sim_time } else { 2.0 * t_max - sim_time })
}

/// Deterministic part of the synthetic engagement objective.
///
/// In scaled units `u = launch/5`, `v = intspeed/500`: a plateau that
/// ramps from about 300 s to about 560 s as `v` passes 0.55, minus two
/// Gaussian bumps at `(u, v) = (0.35, 0.2)` and `(0.7, 0.3)`.
pub fn synthetic_ttk_mean(launch: f64, intspeed: f64) -> f64 {
    let u = launch / 5.0;
    let v = intspeed / 500.0;
    let ramp = 300.0 + 260.0 / (1.0 + (-(v - 0.55) / 0.07).exp());
    let bump = |cu: f64, cv: f64, su: f64, sv: f64, depth: f64| {
        depth * (-((u - cu).powi(2) / (2.0 * su * su) + (v - cv).powi(2) / (2.0 * sv * sv))).exp()
    };
    ramp - bump(0.35, 0.2, 0.09, 0.08, 220.0) - bump(0.7, 0.3, 0.08, 0.07, 160.0)
}

/// Noise standard deviation, growing linearly with intercept speed.
pub fn synthetic_ttk_noise_sd(intspeed: f64) -> f64 {
    15.0 + 60.0 * intspeed / 500.0
}

pub fn synthetic_ttk<R: Rng + ?Sized>(launch: f64, intspeed: f64, rng: &mut R) -> Result<f64> {
    if !(0.0..=5.0).contains(&launch) || !(0.0..=500.0).contains(&intspeed) {
        return Err(Error::arg(format!(
            "synthetic engagement input ({launch}, {intspeed}) outside [0,5]x[0,500]"
        )));
    }
    let y = synthetic_ttk_mean(launch, intspeed) + synthetic_ttk_noise_sd(intspeed) * rng.sample::<f64, _>(StandardNormal);
    Ok(y.clamp(0.0, 2.0 * TTK_T_MAX))
}

pub struct Ackley {
    space: SearchSpace,
    noise_var: f64,
}

impl Ackley {
    pub fn new(space: SearchSpace, noise_var: f64) -> Result<Self> {
        if !(noise_var >= 0.0) {
            return Err(Error::arg("noise variance must be non-negative"));
        }
        Ok(Ackley { space, noise_var })
    }

    /// The 3-D benchmark box with noise variance 25.
    pub fn benchmark3() -> Self {
        let space = SearchSpace::with_names(
            ACKLEY3_LOWER.to_vec(),
            ACKLEY3_UPPER.to_vec(),
            vec!["x1".into(), "x2".into(), "x3".into()],
        )
        .expect("static bounds");
        Ackley {
            space,
            noise_var: ACKLEY3_NOISE_VAR,
        }
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }
}

impl NoisyObjective for Ackley {
    fn name(&self) -> &str {
        "ackley"
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, x: &[f64], stream: u64) -> Result<f64> {
        self.space.check(x)?;
        Ok(ackley(x, self.noise_var, &mut noise_rng(stream)))
    }

    fn mean_value(&self, x: &[f64]) -> Option<f64> {
        Some(ackley_mean(x))
    }

    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        let zero = vec![0.0; self.space.dims()];
        self.space.contains(&zero).then_some((zero, 0.0))
    }
}

pub struct Forrester {
    space: SearchSpace,
    noise_var: f64,
}

impl Forrester {
    pub fn new(noise_var: f64) -> Result<Self> {
        if !(noise_var >= 0.0) {
            return Err(Error::arg("noise variance must be non-negative"));
        }
        Ok(Forrester {
            space: SearchSpace::with_names(vec![0.0], vec![1.0], vec!["x".into()])?,
            noise_var,
        })
    }
}

impl NoisyObjective for Forrester {
    fn name(&self) -> &str {
        "forrester"
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, x: &[f64], stream: u64) -> Result<f64> {
        self.space.check(x)?;
        Ok(forrester(x[0], self.noise_var, &mut noise_rng(stream)))
    }

    fn mean_value(&self, x: &[f64]) -> Option<f64> {
        Some(forrester_mean(x[0]))
    }
}

pub struct SyntheticTtk {
    space: SearchSpace,
}

impl Default for SyntheticTtk {
    fn default() -> Self {
        SyntheticTtk {
            space: SearchSpace::with_names(
                vec![0.0, 0.0],
                vec![5.0, 500.0],
                vec!["launch".into(), "intspeed".into()],
            )
            .expect("static bounds"),
        }
    }
}

impl NoisyObjective for SyntheticTtk {
    fn name(&self) -> &str {
        "synthetic_ttk"
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, x: &[f64], stream: u64) -> Result<f64> {
        self.space.check(x)?;
        synthetic_ttk(x[0], x[1], &mut noise_rng(stream))
    }

    fn mean_value(&self, x: &[f64]) -> Option<f64> {
        Some(synthetic_ttk_mean(x[0], x[1]))
    }
}

#[derive(Serialize)]
struct Request<'a> {
    x: &'a [f64],
    stream: u64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Response {
    Value(f64),
    Record { y: f64 },
    Failure { error: String },
}

struct Pipe {
    _child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// An objective served by an external process over standard I/O.
///
/// Each request is one JSON line `{"x": [...], "stream": n}`; the reply is
/// one line holding either a bare number, `{"y": number}`, or
/// `{"error": "message"}`. Requests are serialized through one pipe.
pub struct ExternalObjective {
    name: String,
    space: SearchSpace,
    pipe: Mutex<Pipe>,
}

impl ExternalObjective {
    pub fn spawn(name: &str, space: SearchSpace, command: &[String]) -> Result<Self> {
        let (prog, args) = command
            .split_first()
            .ok_or_else(|| Error::arg("external objective needs a command"))?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().ok_or_else(|| Error::Objective("no stdin pipe".into()))?;
        let stdout = child.stdout.take().ok_or_else(|| Error::Objective("no stdout pipe".into()))?;
        Ok(ExternalObjective {
            name: name.to_string(),
            space,
            pipe: Mutex::new(Pipe {
                _child: child,
                stdin,
                stdout: BufReader::new(stdout),
            }),
        })
    }
}

impl Drop for Pipe {
    fn drop(&mut self) {
        let _ = self._child.kill();
        let _ = self._child.wait();
    }
}

impl NoisyObjective for ExternalObjective {
    fn name(&self) -> &str {
        &self.name
    }

    fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn evaluate(&self, x: &[f64], stream: u64) -> Result<f64> {
        self.space.check(x)?;
        let mut pipe = self
            .pipe
            .lock()
            .map_err(|_| Error::Objective("external objective pipe poisoned".into()))?;
        let line = serde_json::to_string(&Request { x, stream })?;
        writeln!(pipe.stdin, "{line}")?;
        pipe.stdin.flush()?;
        let mut reply = String::new();
        if pipe.stdout.read_line(&mut reply)? == 0 {
            return Err(Error::Objective("external objective closed its output".into()));
        }
        let y = match serde_json::from_str::<Response>(reply.trim())? {
            Response::Value(y) | Response::Record { y } => y,
            Response::Failure { error } => return Err(Error::Objective(error)),
        };
        if !y.is_finite() {
            return Err(Error::Objective(format!("non-finite reply {y}")));
        }
        Ok(y)
    }
}

/// Built-in objective by name: `ackley3`, `forrester` or `synthetic_ttk`.
/// `noise_var` overrides the default noise level where one applies.
pub fn builtin(name: &str, noise_var: Option<f64>) -> Result<Box<dyn NoisyObjective>> {
    match name {
        "ackley3" => {
            let base = Ackley::benchmark3();
            Ok(Box::new(Ackley::new(base.space, noise_var.unwrap_or(ACKLEY3_NOISE_VAR))?))
        }
        "forrester" => Ok(Box::new(Forrester::new(noise_var.unwrap_or(1.0))?)),
        "synthetic_ttk" => {
            if noise_var.is_some() {
                return Err(Error::arg("synthetic_ttk has a fixed noise model"));
            }
            Ok(Box::new(SyntheticTtk::default()))
        }
        other => Err(Error::arg(format!("unknown objective `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ackley_origin_and_symmetry() {
        assert_eq!(ackley_mean(&[0.0, 0.0, 0.0]), 0.0);
        for x in [[1.3, -2.2, 0.4], [10.0, 5.5, -30.0]] {
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            assert_eq!(ackley_mean(&x), ackley_mean(&neg));
        }
    }

    #[test]
    fn forrester_values() {
        assert!(forrester_mean(1.0 / 3.0).abs() < 1e-14);
        assert!((forrester_mean(0.0) - 4.0 * (-4f64).sin()).abs() < 1e-12);
        assert!((forrester_mean(0.0) - 3.0272).abs() < 1e-4);
    }

    #[test]
    fn ttk_cases() {
        assert_eq!(ttk_encode(true, 23.4, 300.0).unwrap(), 23.4);
        assert_eq!(ttk_encode(false, 196.05, 300.0).unwrap(), 403.95);
        assert_eq!(ttk_encode(true, 300.0, 300.0).unwrap(), 300.0);
        assert_eq!(ttk_encode(false, 300.0, 300.0).unwrap(), 300.0);
        assert!(ttk_encode(true, 300.5, 300.0).is_err());
        assert!(ttk_encode(true, -0.1, 300.0).is_err());
    }

    #[test]
    fn same_stream_same_value() {
        let a = Ackley::benchmark3();
        let x = [1.0, 2.0, -3.0];
        assert_eq!(a.evaluate(&x, 99).unwrap(), a.evaluate(&x, 99).unwrap());
        assert_ne!(a.evaluate(&x, 99).unwrap(), a.evaluate(&x, 100).unwrap());
    }

    #[test]
    fn out_of_box_rejected() {
        assert!(Ackley::benchmark3().evaluate(&[0.0, -20.0, 0.0], 0).is_err());
        assert!(synthetic_ttk(5.1, 10.0, &mut noise_rng(0)).is_err());
    }

    #[test]
    fn builtin_names() {
        assert_eq!(builtin("ackley3", None).unwrap().space().dims(), 3);
        assert_eq!(builtin("forrester", None).unwrap().space().dims(), 1);
        assert_eq!(builtin("synthetic_ttk", None).unwrap().space().dims(), 2);
        assert!(builtin("rosenbrock", None).is_err());
    }
}
