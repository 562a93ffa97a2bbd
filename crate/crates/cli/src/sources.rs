//! Source terms and the manufactured exact solution.

use std::f64::consts::PI;
use std::sync::Arc;

use evalexpr::{ContextWithMutableFunctions, ContextWithMutableVariables, HashMapContext, Node, Value};
use serde::{Deserialize, Serialize};
use stiga_core::solver::Source;
use stiga_core::Parameters;

use crate::error::CliError;

/// Characteristic function of `[lo, hi]`: exactly 1 inside, 0 outside.
pub fn indicator(lo: f64, hi: f64, v: f64) -> f64 {
    if (lo..=hi).contains(&v) {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceTerm {
    Zero,
    /// Forcing of the manufactured solution on `(0,1) × (0,1)`.
    #[serde(rename = "manufactured_1d")]
    Manufactured1d,
    #[serde(rename = "gaussian_pulse_2d")]
    GaussianPulse2d {
        #[serde(default = "default_amp_2d")]
        amplitude: f64,
        #[serde(default = "default_sharpness")]
        sharpness: f64,
        #[serde(default = "default_l1")]
        l1: f64,
        #[serde(default = "default_l2")]
        l2: f64,
        #[serde(default = "default_window_2d")]
        window: [f64; 2],
    },
    #[serde(rename = "layer_pulse_3d")]
    LayerPulse3d {
        #[serde(default = "default_amp_3d")]
        amplitude: f64,
        #[serde(default = "default_layer")]
        layer: [f64; 2],
        #[serde(default = "default_window_3d")]
        window: [f64; 2],
    },
    /// Expression in `x`, `y`, `z` (physical), `eta1..eta3` (parametric)
    /// and `t`; `chi(lo, hi, v)` is the characteristic function.
    Custom { expression: String },
}

fn default_amp_2d() -> f64 {
    0.25
}
fn default_sharpness() -> f64 {
    500.0
}
fn default_l1() -> f64 {
    1.5
}
fn default_l2() -> f64 {
    0.125
}
fn default_window_2d() -> [f64; 2] {
    [90.0, 100.0]
}
fn default_amp_3d() -> f64 {
    0.1
}
fn default_layer() -> [f64; 2] {
    [0.9, 1.0]
}
fn default_window_3d() -> [f64; 2] {
    [45.0, 60.0]
}

impl SourceTerm {
    pub fn gaussian_pulse_2d() -> Self {
        Self::GaussianPulse2d {
            amplitude: default_amp_2d(),
            sharpness: default_sharpness(),
            l1: default_l1(),
            l2: default_l2(),
            window: default_window_2d(),
        }
    }

    pub fn layer_pulse_3d() -> Self {
        Self::LayerPulse3d {
            amplitude: default_amp_3d(),
            layer: default_layer(),
            window: default_window_3d(),
        }
    }

    /// Earliest time at which the source can be nonzero (`None` if it may
    /// act from the start).
    pub fn activation_time(&self) -> Option<f64> {
        match self {
            Self::GaussianPulse2d { window, .. } | Self::LayerPulse3d { window, .. } => Some(window[0]),
            Self::Zero => Some(f64::INFINITY),
            _ => None,
        }
    }

    pub fn build(&self, params: &Parameters, final_time: f64) -> Result<Source, CliError> {
        Ok(match self.clone() {
            Self::Zero => Arc::new(|_: &[f64], _: &[f64], _| 0.0),
            Self::Manufactured1d => {
                let p = *params;
                Arc::new(move |x: &[f64], _: &[f64], t| manufactured_forcing(&p, x[0], t))
            }
            Self::GaussianPulse2d {
                amplitude,
                sharpness,
                l1,
                l2,
                window,
            } => Arc::new(move |x: &[f64], _: &[f64], t| {
                let chi = indicator(window[0], window[1], t);
                if chi == 0.0 {
                    return 0.0;
                }
                let dy = x[1] - l2 / 2.0;
                let dx = x[0] - 8.0 / 15.0 * l1 / final_time * t;
                amplitude * (-(sharpness * (dy * dy + dx * dx))).exp()
            }),
            Self::LayerPulse3d {
                amplitude,
                layer,
                window,
            } => Arc::new(move |_: &[f64], eta: &[f64], t| {
                let e = *eta.last().expect("nonempty parametric point");
                amplitude * indicator(layer[0], layer[1], e) * indicator(window[0], window[1], t)
            }),
            Self::Custom { expression } => {
                let node = evalexpr::build_operator_tree::<evalexpr::DefaultNumericTypes>(&expression)
                    .map_err(|e| CliError::Config(format!("source expression: {e}")))?;
                // fail early on unknown identifiers
                eval_custom(&node, &[0.0; 3], &[0.0; 3], 0.0)?;
                Arc::new(move |x: &[f64], eta: &[f64], t| eval_custom(&node, x, eta, t).unwrap_or(f64::NAN))
            }
        })
    }
}

fn eval_custom(node: &Node, x: &[f64], eta: &[f64], t: f64) -> Result<f64, CliError> {
    let mut ctx = HashMapContext::<evalexpr::DefaultNumericTypes>::new();
    let names = [("x", "eta1"), ("y", "eta2"), ("z", "eta3")];
    for (l, (xn, en)) in names.iter().enumerate() {
        let set = |ctx: &mut HashMapContext, name: &str, v: f64| {
            ctx.set_value(name.into(), Value::Float(v))
                .map_err(|e| CliError::Config(format!("source expression: {e}")))
        };
        set(&mut ctx, xn, x.get(l).copied().unwrap_or(0.0))?;
        set(&mut ctx, en, eta.get(l).copied().unwrap_or(0.0))?;
    }
    ctx.set_value("t".into(), Value::Float(t))
        .map_err(|e| CliError::Config(format!("source expression: {e}")))?;
    ctx.set_function(
        "chi".into(),
        evalexpr::Function::new(|arg| {
            let args = arg.as_fixed_len_tuple(3)?;
            let f = |v: &Value| v.as_number();
            Ok(Value::Float(indicator(f(&args[0])?, f(&args[1])?, f(&args[2])?)))
        }),
    )
    .map_err(|e| CliError::Config(format!("source expression: {e}")))?;
    node.eval_number_with_context(&ctx)
        .map_err(|e| CliError::Config(format!("source expression: {e}")))
}

/// `u_ex = 10 sin(πx) sin(πt) (1 - e^{-x}) (1 - e^{x-1}) (1 - e^{t-1})`.
pub fn manufactured_solution(x: f64, t: f64) -> f64 {
    10.0 * space_profile(x).0 * time_profile(t).0
}

/// `A(x) = sin(πx)(1 - e^{-x})(1 - e^{x-1})` with `A'`, `A''`.
fn space_profile(x: f64) -> (f64, f64, f64) {
    let (s, s1, s2) = ((PI * x).sin(), PI * (PI * x).cos(), -PI * PI * (PI * x).sin());
    let (g, g1, g2) = (1.0 - (-x).exp(), (-x).exp(), -(-x).exp());
    let (h, h1, h2) = (1.0 - (x - 1.0).exp(), -(x - 1.0).exp(), -(x - 1.0).exp());
    let v = s * g * h;
    let d1 = s1 * g * h + s * g1 * h + s * g * h1;
    let d2 = s2 * g * h + s * g2 * h + s * g * h2 + 2.0 * (s1 * g1 * h + s1 * g * h1 + s * g1 * h1);
    (v, d1, d2)
}

/// `B(t) = sin(πt)(1 - e^{t-1})` with `B'`.
fn time_profile(t: f64) -> (f64, f64) {
    let (s, s1) = ((PI * t).sin(), PI * (PI * t).cos());
    let (h, h1) = (1.0 - (t - 1.0).exp(), -(t - 1.0).exp());
    (s * h, s1 * h + s * h1)
}

/// `C_m ∂_t u - D ∂_xx u + c1 u (u - a)(u - 1)` for `u = u_ex`, `w = 0`.
pub fn manufactured_forcing(p: &Parameters, x: f64, t: f64) -> f64 {
    let (a, _, a2) = space_profile(x);
    let (b, b1) = time_profile(t);
    let u = 10.0 * a * b;
    p.c_m * 10.0 * a * b1 - p.d * 10.0 * a2 * b + p.ionic(u, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forcing_matches_finite_differences() {
        let p = Parameters::default();
        let (x, t) = (0.37, 0.61);
        let h = 1e-4;
        let dt = (manufactured_solution(x, t + h) - manufactured_solution(x, t - h)) / (2.0 * h);
        let dxx = (manufactured_solution(x + h, t) - 2.0 * manufactured_solution(x, t) + manufactured_solution(x - h, t)) / (h * h);
        let u = manufactured_solution(x, t);
        let fd = p.c_m * dt - p.d * dxx + p.ionic(u, 0.0);
        assert!((fd - manufactured_forcing(&p, x, t)).abs() < 1e-5);
    }

    #[test]
    fn indicator_is_closed_interval() {
        assert_eq!(indicator(1.0, 2.0, 1.0), 1.0);
        assert_eq!(indicator(1.0, 2.0, 2.0), 1.0);
        assert_eq!(indicator(1.0, 2.0, 2.0001), 0.0);
    }

    #[test]
    fn custom_expression() {
        let s = SourceTerm::Custom {
            expression: "x * t + chi(0.0, 1.0, eta2)".into(),
        }
        .build(&Parameters::default(), 1.0)
        .unwrap();
        assert_eq!(s(&[2.0, 0.0], &[0.5, 0.5], 3.0), 7.0);
        assert!(SourceTerm::Custom {
            expression: "unknown_var + 1".into()
        }
        .build(&Parameters::default(), 1.0)
        .is_err());
    }
}
