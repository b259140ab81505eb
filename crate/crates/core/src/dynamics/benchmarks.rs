//! Registry of benchmark systems.
//!
//! Dynamics use the usual literature parameter values; step sizes and
//! horizons follow the published training settings. Domains and initial sets
//! are conventional choices that keep trajectories from Θ inside D over the
//! default horizon.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{ControllerSpec, FieldFn, GuardFn, ModeSpec, ReferenceMetrics, SystemMeta, SystemSpec};
use crate::linalg::Matrix;
use crate::{BoxRegion, Error, Result};

const MOUNTAIN_CAR_CONTROLLER: &str = include_str!("../../data/mountain_car_controller.json");

type Builder = fn() -> Result<SystemSpec>;

const REGISTRY: &[(&str, Builder)] = &[
    ("Brusselator", brusselator),
    ("Buckling", buckling),
    ("Lotka", lotka),
    ("Jetengine", jetengine),
    ("Vanderpol", vanderpol),
    ("Lacoperon", lacoperon),
    ("Roesseler", roesseler),
    ("Steam", steam),
    ("Lorentz", lorentz),
    ("CoupledVanderpol", coupled_vanderpol),
    ("HybridOscillator", hybrid_oscillator),
    ("SmoothHybridOscillator", smooth_hybrid_oscillator),
    ("MountainCar", mountain_car),
    ("linear-rotation", linear_rotation),
    ("linear-stable", linear_stable),
];

const ALIASES: &[(&str, &str)] = &[
    ("brussellator", "Brusselator"),
    ("lotkavolterra", "Lotka"),
    ("roessler", "Roesseler"),
    ("rossler", "Roesseler"),
    ("lorenz", "Lorentz"),
    ("cvanderpol", "CoupledVanderpol"),
    ("hybridosc", "HybridOscillator"),
    ("smoothosc", "SmoothHybridOscillator"),
];

fn normalize(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

/// Canonical names of every registered system.
pub fn builtin_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

/// Looks up a registered system. Matching ignores case and punctuation.
pub fn builtin_system(name: &str) -> Result<SystemSpec> {
    let key = normalize(name);
    let canonical = ALIASES
        .iter()
        .find(|(alias, _)| *alias == key)
        .map(|(_, c)| *c);
    REGISTRY
        .iter()
        .find(|(n, _)| Some(*n) == canonical || normalize(n) == key)
        .map(|(_, build)| build())
        .unwrap_or_else(|| {
            Err(Error::NotFound {
                name: name.to_string(),
                available: builtin_names().iter().map(|s| s.to_string()).collect(),
            })
        })
}

fn bx(bounds: &[(f64, f64)]) -> BoxRegion {
    BoxRegion::from_bounds(bounds).expect("registry boxes are valid")
}

struct Meta {
    step: Option<f64>,
    horizon: usize,
    init: BoxRegion,
    params: Vec<(&'static str, f64)>,
    description: &'static str,
    forward: Option<(f64, f64)>,
    inverse: Option<(f64, f64)>,
}

fn attach(sys: SystemSpec, m: Meta) -> Result<SystemSpec> {
    let params: BTreeMap<String, f64> = m.params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let reference = |r: Option<(f64, f64)>| r.map(|(mse, mre)| ReferenceMetrics { mse, mre });
    sys.with_meta(SystemMeta {
        step: m.step,
        horizon: m.horizon,
        init_set: m.init,
        params,
        description: m.description.to_string(),
        reference_forward: reference(m.forward),
        reference_inverse: reference(m.inverse),
    })
}

fn field(f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> FieldFn {
    Arc::new(move |x, _u, out| f(x, out))
}

fn brusselator() -> Result<SystemSpec> {
    let (a, b) = (1.0, 1.5);
    let sys = SystemSpec::continuous(
        "Brusselator",
        bx(&[(0.0, 4.0), (0.0, 4.0)]),
        field(move |x, o| {
            o[0] = a + x[0] * x[0] * x[1] - (b + 1.0) * x[0];
            o[1] = b * x[0] - x[0] * x[0] * x[1];
        }),
    )?;
    attach(
        sys,
        Meta {
            step: Some(0.01),
            horizon: 500,
            init: bx(&[(0.5, 1.5), (0.0, 1.0)]),
            params: vec![("a", a), ("b", b)],
            description: "Brusselator chemical oscillator, x' = a + x²y − (b+1)x, y' = bx − x²y",
            forward: Some((0.14, 0.34)),
            inverse: Some((1.01, 0.29)),
        },
    )
}

fn buckling() -> Result<SystemSpec> {
    let sys = SystemSpec::continuous(
        "Buckling",
        bx(&[(-3.0, 3.0), (-4.0, 4.0)]),
        field(|x, o| {
            o[0] = x[1];
            o[1] = 2.0 * x[0] - x[0].powi(3) - 0.2 * x[1] + 0.1;
        }),
    )?;
    attach(
        sys,
        Meta {
            step: Some(0.01),
            horizon: 500,
            init: bx(&[(-0.5, 0.5), (-0.5, 0.5)]),
            params: vec![("damping", 0.2), ("load", 0.1)],
            description: "buckling column, x' = y, y' = 2x − x³ − 0.2y + 0.1",
            forward: Some((2.38, 0.18)),
            inverse: Some((0.59, 0.17)),
        },
    )
}

fn lotka() -> Result<SystemSpec> {
    let sys = SystemSpec::continuous(
        "Lotka",
        bx(&[(0.0, 10.0), (0.0, 10.0)]),
        field(|x, o| {
            o[0] = 1.5 * x[0] - x[0] * x[1];
            o[1] = -3.0 * x[1] + x[0] * x[1];
        }),
    )?;
    attach(
        sys,
        Meta {
            step: Some(0.01),
            horizon: 500,
            init: bx(&[(4.8, 5.2), (1.8, 2.2)]),
            params: vec![("alpha", 1.5), ("beta", 1.0), ("gamma", 3.0), ("delta", 1.0)],
            description: "Lotka-Volterra predator-prey, x' = 1.5x − xy, y' = −3y + xy",
            forward: Some((0.38, 0.31)),
            inverse: Some((0.50, 0.13)),
        },
    )
}

fn jetengine() -> Result<SystemSpec> {
    let sys = SystemSpec::continuous(
        "Jetengine",
        bx(&[(-2.0, 2.0), (-2.0, 2.0)]),
        field(|x, o| {
            o[0] = -x[1] - 1.5 * x[0] * x[0] - 0.5 * x[0].powi(3) - 0.5;
            o[1] = 3.0 * x[0] - x[1];
        }),
    )?;
    attach(
        sys,
        Meta {
            step: Some(0.02),
            horizon: 300,
            init: bx(&[(0.8, 1.2), (0.8, 1.2)]),
            params: vec![],
            description: "Moore-Greitzer jet engine, x' = −y − 1.5x² − 0.5x³ − 0.5, y' = 3x − y",
            forward: Some((0.086, 0.63)),
            inverse: Some((1.002, 0.26)),
        },
    )
}

fn vanderpol() -> Result<SystemSpec> {
    let mu = 1.0;
    let sys = SystemSpec::continuous(
        "Vanderpol",
        bx(&[(-4.0, 4.0), (-4.0, 4.0)]),
        field(move |x, o| {
            o[0] = x[1];
            o[1] = mu * (1.0 - x[0] * x[0]) * x[1] - x[0];
        }),
    )?;
    attach(
        sys,
        Meta {
            step: Some(0.01),
            horizon: 500,
            init: bx(&[(-2.0, 2.0), (-2.0, 2.0)]),
            params: vec![("mu", mu)],
            description: "Van der Pol oscillator, x' = y, y' = μ(1 − x²)y − x",
            forward: Some((0.15, 0.29)),
            inverse: Some((0.23, 0.23)),
        },
    )
}

fn lacoperon() -> Result<SystemSpec> {
    let sys = SystemSpec::continuous(
        "Lacoperon",
        bx(&[(0.0, 5.0), (0.0, 40.0)]),
        field(|x, o| {
            let (i, g) = (x[0], x[1]);
            let den = 0.00036 * g * g + 0.00960018 + 0.000000018 * g * g * i * i;
            o[0] = -0.4 * i * i * ((0.0003 * g * g + 0.008) / (0.2 * i * i + 2.00001))
                + 0.012
                + (0.0000003 * (54660.0 - 5000.006 * i) * (0.2 * i * i + 2.00001)) / den;
            o[1] = -0.0006 * g * g + (0.000000006 * g * g + 0.0015015) * i * g / den;
        }),
    )?;
    attach(
        sys,
        Meta {
            step: Some(0.1),
            horizon: 500,
            init: bx(&[(1.0, 2.0), (1.0, 2.0)]),
            params: vec![],
            description: "two-variable lac operon (internal inducer I, β-galactosidase G)",
            forward: Some((0.12, 0.33)),
            inverse: Some((1.8, 0.46)),
        },
    )
}

fn roesseler() -> Result<SystemSpec> {
    let (a, b, c) = (0.2, 0.2, 5.7);
    let sys = SystemSpec::continuous(
        "Roesseler",
        bx(&[(-15.0, 15.0), (-15.0, 15.0), (-1.0, 30.0)]),
        field(move |x, o| {
            o[0] = -x[1] - x[2];
            o[1] = x[0] + a * x[1];
            o[2] = b + x[2] * (x[0] - c);
        }),
    )?;
    attach(
        sys,
        Meta {
            step: Some(0.02),
            horizon: 500,
            init: bx(&[(-2.0, 2.0), (-2.0, 2.0), (0.0, 1.0)]),
            params: vec![("a", a), ("b", b), ("c", c)],
            description: "Rössler attractor, x' = −y − z, y' = x + ay, z' = b + z(x − c)",
            forward: Some((0.58, 0.087)),
            inverse: Some((0.44, 0.07)),
        },
    )
}

fn steam() -> Result<SystemSpec> {
    let (eps, alpha, beta) = (3.0, 1.0, 1.0);
    let sys = SystemSpec::continuous(
        "Steam",
        bx(&[(-3.0, 3.0), (-3.0, 3.0), (-3.0, 3.0)]),
        field(move |x, o| {
            let (s, c) = x[0].sin_cos();
            o[0] = x[1];
            o[1] = x[2] * x[2] * s * c - s - eps * x[1];
            o[2] = alpha * (c - beta);
        }),
    )?;
    attach(
        sys,
        Meta {
            step: Some(0.01),
            horizon: 500,
            init: bx(&[(0.9, 1.1), (0.9, 1.1), (0.9, 1.1)]),
            params: vec![("epsilon", eps), ("alpha", alpha), ("beta", beta)],
            description: "steam governor, x' = y, y' = z² sin x cos x − sin x − εy, z' = α(cos x − β)",
            forward: Some((0.34, 0.07)),
            inverse: Some((0.13, 0.057)),
        },
    )
}

fn lorentz() -> Result<SystemSpec> {
    let (sigma, rho, beta) = (10.0, 28.0, 8.0 / 3.0);
    let sys = SystemSpec::continuous(
        "Lorentz",
        bx(&[(-30.0, 30.0), (-40.0, 40.0), (-5.0, 60.0)]),
        field(move |x, o| {
            o[0] = sigma * (x[1] - x[0]);
            o[1] = x[0] * (rho - x[2]) - x[1];
            o[2] = x[0] * x[1] - beta * x[2];
        }),
    )?;
    attach(
        sys,
        Meta {
            step: Some(0.01),
            horizon: 500,
            init: bx(&[(-2.0, 2.0), (-2.0, 2.0), (20.0, 25.0)]),
            params: vec![("sigma", sigma), ("rho", rho), ("beta", beta)],
            description: "Lorenz attractor, x' = σ(y − x), y' = x(ρ − z) − y, z' = xy − βz",
            forward: Some((1.08, 0.11)),
            inverse: Some((0.48, 0.08)),
        },
    )
}

fn coupled_vanderpol() -> Result<SystemSpec> {
    let mu = 1.0;
    let sys = SystemSpec::continuous(
        "CoupledVanderpol",
        bx(&[(-4.0, 4.0), (-4.0, 4.0), (-4.0, 4.0), (-4.0, 4.0)]),
        field(move |x, o| {
            o[0] = x[1];
            o[1] = mu * (1.0 - x[0] * x[0]) * x[1] - x[0] + (x[2] - x[0]);
            o[2] = x[3];
            o[3] = mu * (1.0 - x[2] * x[2]) * x[3] - x[2] + (x[0] - x[2]);
        }),
    )?;
    attach(
        sys,
        Meta {
            step: Some(0.01),
            horizon: 500,
            init: bx(&[(1.25, 1.55), (2.28, 2.32), (1.25, 1.55), (2.28, 2.32)]),
            params: vec![("mu", mu), ("coupling", 1.0)],
            description: "two diffusively coupled Van der Pol oscillators",
            forward: Some((0.18, 0.15)),
            inverse: Some((0.34, 0.16)),
        },
    )
}

fn right_half() -> GuardFn {
    Arc::new(|x: &[f64]| x[0] >= 0.0)
}

fn left_half() -> GuardFn {
    Arc::new(|x: &[f64]| x[0] < 0.0)
}

fn hybrid_oscillator() -> Result<SystemSpec> {
    let right = field(|x, o| {
        o[0] = -0.1 * x[0] + x[1];
        o[1] = -4.0 * x[0] - 0.1 * x[1];
    });
    let left = field(|x, o| {
        o[0] = -0.1 * x[0] + 4.0 * x[1];
        o[1] = -x[0] - 0.1 * x[1];
    });
    let sys = SystemSpec::hybrid(
        "HybridOscillator",
        bx(&[(-3.0, 3.0), (-3.0, 3.0)]),
        vec![
            ModeSpec::guarded("right", right, right_half()),
            ModeSpec::guarded("left", left, left_half()),
        ],
    )?;
    attach(
        sys,
        Meta {
            step: Some(0.01),
            horizon: 500,
            init: bx(&[(0.5, 1.0), (0.5, 1.0)]),
            params: vec![("damping", 0.1), ("stiffness_ratio", 4.0)],
            description: "piecewise-linear damped oscillator switching on the sign of x",
            forward: Some((0.35, 0.11)),
            inverse: Some((0.31, 0.077)),
        },
    )
}

fn smooth_hybrid_oscillator() -> Result<SystemSpec> {
    let right = field(|x, o| {
        o[0] = x[1];
        o[1] = -x[0] * (1.0 + x[0] * x[0]) - 0.1 * x[1];
    });
    let left = field(|x, o| {
        o[0] = x[1];
        o[1] = -x[0] - 0.1 * x[1];
    });
    let sys = SystemSpec::hybrid(
        "SmoothHybridOscillator",
        bx(&[(-3.0, 3.0), (-4.0, 4.0)]),
        vec![
            ModeSpec::guarded("hardening", right, right_half()),
            ModeSpec::guarded("linear", left, left_half()),
        ],
    )?;
    attach(
        sys,
        Meta {
            step: Some(0.01),
            horizon: 500,
            init: bx(&[(0.5, 1.0), (0.5, 1.0)]),
            params: vec![("damping", 0.1)],
            description: "oscillator with a cubic hardening spring for x ≥ 0, continuous across the switch",
            forward: Some((0.40, 0.096)),
            inverse: Some((0.23, 0.063)),
        },
    )
}

/// The continuous-action mountain car under the bundled sigmoid controller.
fn mountain_car() -> Result<SystemSpec> {
    const POWER: f64 = 0.0015;
    let map: FieldFn = Arc::new(|x, u, o| mountain_car_step(x, u[0], POWER, o));
    let controller = ControllerSpec::from_json(MOUNTAIN_CAR_CONTROLLER)?;
    let sys = SystemSpec::discrete("MountainCar", bx(&[(-1.2, 0.6), (-0.07, 0.07)]), map)?
        .with_controller(controller)?;
    attach(
        sys,
        Meta {
            step: None,
            horizon: 100,
            init: bx(&[(-0.55, -0.45), (0.0, 0.0)]),
            params: vec![("power", POWER), ("gravity", 0.0025), ("goal", 0.45)],
            description: "mountain car (position, velocity) under a 2-16-1 sigmoid controller",
            forward: Some((0.015, 0.79)),
            inverse: Some((0.005, 0.70)),
        },
    )
}

/// One environment step; the action is clipped to [−1, 1].
pub(crate) fn mountain_car_step(x: &[f64], action: f64, power: f64, out: &mut [f64]) {
    let force = action.clamp(-1.0, 1.0);
    let mut velocity = x[1] + force * power - 0.0025 * (3.0 * x[0]).cos();
    velocity = velocity.clamp(-0.07, 0.07);
    let mut position = (x[0] + velocity).clamp(-1.2, 0.6);
    if position <= -1.2 && velocity < 0.0 {
        velocity = 0.0;
        position = -1.2;
    }
    out[0] = position;
    out[1] = velocity;
}

fn linear_rotation() -> Result<SystemSpec> {
    let sys = SystemSpec::linear(
        "linear-rotation",
        Matrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]),
        bx(&[(-10.0, 10.0), (-10.0, 10.0)]),
    )?;
    attach(
        sys,
        Meta {
            step: Some(0.01),
            horizon: 630,
            init: bx(&[(-1.0, 1.0), (-1.0, 1.0)]),
            params: vec![],
            description: "rotation x' = Ax, A = [[0, 1], [−1, 0]]",
            forward: None,
            inverse: None,
        },
    )
}

fn linear_stable() -> Result<SystemSpec> {
    let sys = SystemSpec::linear(
        "linear-stable",
        Matrix::from_rows(&[vec![-0.5, 1.0], vec![-1.0, -0.5]]),
        bx(&[(-10.0, 10.0), (-10.0, 10.0)]),
    )?;
    attach(
        sys,
        Meta {
            step: Some(0.01),
            horizon: 500,
            init: bx(&[(-1.0, 1.0), (-1.0, 1.0)]),
            params: vec![],
            description: "contracting spiral x' = Ax, A = [[−0.5, 1], [−1, −0.5]]",
            forward: None,
            inverse: None,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::SystemKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_registered_name_builds() {
        for name in builtin_names() {
            let sys = builtin_system(name).unwrap();
            assert_eq!(sys.name(), name);
            assert!(sys.meta().init_set.is_subset_of(sys.domain()), "{name}");
        }
    }

    #[test]
    fn lookup_is_forgiving_about_spelling() {
        assert_eq!(builtin_system("vanderpol").unwrap().name(), "Vanderpol");
        assert_eq!(builtin_system("Linear_Rotation").unwrap().name(), "linear-rotation");
        assert_eq!(builtin_system("Lorenz").unwrap().name(), "Lorentz");
        assert_eq!(builtin_system("Brussellator").unwrap().name(), "Brusselator");
    }

    #[test]
    fn quadrotor_is_not_registered() {
        match builtin_system("Quadrotor") {
            Err(Error::NotFound { available, .. }) => {
                assert!(available.iter().any(|n| n == "Vanderpol"))
            }
            other => panic!("expected NotFound, got {other:?}"),
        }
    }

    #[test]
    fn vanderpol_defaults() {
        let sys = builtin_system("Vanderpol").unwrap();
        assert_eq!(sys.dim(), 2);
        assert_eq!(sys.kind(), SystemKind::Continuous);
        assert_eq!(sys.meta().step, Some(0.01));
        assert_eq!(sys.meta().horizon, 500);
        assert_eq!(sys.eval_field(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn linear_rotation_field() {
        let sys = builtin_system("linear-rotation").unwrap();
        assert_eq!(sys.eval_field(&[1.0, 0.0]).unwrap(), vec![0.0, -1.0]);
        assert!(sys.linear_matrix().is_some());
    }

    #[test]
    fn fields_are_finite_and_deterministic_over_domains() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for name in builtin_names() {
            let sys = builtin_system(name).unwrap();
            for _ in 0..10_000 {
                let x = sys.domain().sample(&mut rng);
                let a = sys.eval_field(&x).unwrap();
                let b = sys.eval_field(&x).unwrap();
                assert_eq!(a.len(), sys.dim());
                assert!(a.iter().all(|v| v.is_finite()), "{name} at {x:?}");
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn hybrid_mode_selection_is_total() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for name in ["HybridOscillator", "SmoothHybridOscillator"] {
            let sys = builtin_system(name).unwrap();
            assert_eq!(sys.kind(), SystemKind::Hybrid);
            for _ in 0..10_000 {
                let x = sys.domain().sample(&mut rng);
                let holding = sys
                    .modes()
                    .iter()
                    .filter(|m| m.guard.as_ref().unwrap()(&x))
                    .count();
                assert!(holding >= 1);
                let chosen = sys.select_mode(&x).unwrap();
                assert!(sys.modes()[chosen].guard.as_ref().unwrap()(&x));
                assert!(sys.modes()[..chosen].iter().all(|m| !m.guard.as_ref().unwrap()(&x)));
            }
            // the switching surface itself belongs to the first mode
            assert_eq!(sys.select_mode(&[0.0, 1.0]).unwrap(), 0);
        }
    }

    #[test]
    fn mountain_car_step_goes_through_the_controller_file() {
        let sys = builtin_system("MountainCar").unwrap();
        assert_eq!(sys.kind(), SystemKind::Discrete);
        // Independent evaluation straight from the JSON text.
        let v: serde_json::Value = serde_json::from_str(MOUNTAIN_CAR_CONTROLLER).unwrap();
        let x = [-0.5, 0.0];
        let mut h: Vec<f64> = x.to_vec();
        let layers = v["layers"].as_array().unwrap();
        for (li, layer) in layers.iter().enumerate() {
            let w = layer["weights"].as_array().unwrap();
            let b = layer["bias"].as_array().unwrap();
            h = w
                .iter()
                .zip(b)
                .map(|(row, bias)| {
                    let z: f64 = row
                        .as_array()
                        .unwrap()
                        .iter()
                        .zip(&h)
                        .map(|(wij, xj)| wij.as_f64().unwrap() * xj)
                        .sum::<f64>()
                        + bias.as_f64().unwrap();
                    if li + 1 < layers.len() {
                        1.0 / (1.0 + (-z).exp())
                    } else {
                        z
                    }
                })
                .collect();
        }
        let u = h[0].clamp(-1.0, 1.0);
        let vel = (0.0 + u * 0.0015 - 0.0025 * (3.0f64 * -0.5).cos()).clamp(-0.07, 0.07);
        let want = [-0.5 + vel, vel];
        let got = sys.eval_field(&x).unwrap();
        assert!((got[0] - want[0]).abs() < 1e-15 && (got[1] - want[1]).abs() < 1e-15);
    }
}
