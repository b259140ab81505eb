//! Closed-loop systems behind one evaluation interface.
//!
//! A [`SystemSpec`] is continuous (`ẋ = f(x, g(x))`), hybrid (several
//! continuous modes selected by guard predicates, first match wins) or
//! discrete (`x⁺ = F(x, g(x))`). The optional feedback law `g` is a
//! [`ControllerSpec`], usually a small neural network loaded from JSON.

mod benchmarks;
mod controller;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{BoxRegion, Error, Result};

pub use benchmarks::{builtin_system, builtin_names};
pub use controller::{load_controller, ControllerSpec};

/// `field(x, u, out)` writes the derivative (or next state) of `x` under
/// control input `u` into `out`.
pub type FieldFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

pub type GuardFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Continuous,
    Hybrid,
    Discrete,
}

#[derive(Clone)]
pub struct ModeSpec {
    pub name: String,
    pub field: FieldFn,
    /// `None` holds everywhere.
    pub guard: Option<GuardFn>,
}

impl ModeSpec {
    pub fn new(name: impl Into<String>, field: FieldFn) -> Self {
        Self {
            name: name.into(),
            field,
            guard: None,
        }
    }

    pub fn guarded(name: impl Into<String>, field: FieldFn, guard: GuardFn) -> Self {
        Self {
            name: name.into(),
            field,
            guard: Some(guard),
        }
    }

    fn holds(&self, x: &[f64]) -> bool {
        self.guard.as_ref().is_none_or(|g| g(x))
    }
}

impl fmt::Debug for ModeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModeSpec")
            .field("name", &self.name)
            .field("guarded", &self.guard.is_some())
            .finish()
    }
}

/// Published training metrics `(mse, mre)` for a benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMetrics {
    pub mse: f64,
    pub mre: f64,
}

/// Registry metadata: defaults used when a configuration leaves them out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemMeta {
    /// Integration step in seconds; `None` for discrete systems, whose step is
    /// one map application.
    pub step: Option<f64>,
    /// Default number of steps per trajectory.
    pub horizon: usize,
    /// Default initial set Θ.
    pub init_set: BoxRegion,
    pub params: BTreeMap<String, f64>,
    pub description: String,
    pub reference_forward: Option<ReferenceMetrics>,
    pub reference_inverse: Option<ReferenceMetrics>,
}

#[derive(Clone)]
pub struct SystemSpec {
    name: String,
    kind: SystemKind,
    dim: usize,
    domain: BoxRegion,
    modes: Vec<ModeSpec>,
    controller: Option<ControllerSpec>,
    control_dim: usize,
    linear: Option<Matrix>,
    meta: SystemMeta,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("modes", &self.modes)
            .field("controller", &self.controller.is_some())
            .finish()
    }
}

impl SystemSpec {
    fn build(
        name: impl Into<String>,
        kind: SystemKind,
        domain: BoxRegion,
        modes: Vec<ModeSpec>,
    ) -> Result<Self> {
        let dim = domain.dim();
        let name = name.into();
        if kind == SystemKind::Hybrid {
            if modes.len() < 2 {
                return Err(Error::Config(format!(
                    "hybrid system `{name}` needs at least two modes"
                )));
            }
            if let Some(m) = modes.iter().find(|m| m.guard.is_none()) {
                return Err(Error::Config(format!(
                    "hybrid system `{name}`: mode `{}` has no guard",
                    m.name
                )));
            }
        } else if modes.len() != 1 {
            return Err(Error::Config(format!(
                "system `{name}` must have exactly one mode"
            )));
        }
        let meta = SystemMeta {
            step: (kind != SystemKind::Discrete).then_some(0.01),
            horizon: 500,
            init_set: domain.clone(),
            params: BTreeMap::new(),
            description: String::new(),
            reference_forward: None,
            reference_inverse: None,
        };
        Ok(Self {
            name,
            kind,
            dim,
            domain,
            modes,
            controller: None,
            control_dim: 0,
            linear: None,
            meta,
        })
    }

    /// `ẋ = field(x, u)` on `domain`; the dimension is the domain's.
    pub fn continuous(name: impl Into<String>, domain: BoxRegion, field: FieldFn) -> Result<Self> {
        Self::build(name, SystemKind::Continuous, domain, vec![ModeSpec::new("flow", field)])
    }

    pub fn hybrid(name: impl Into<String>, domain: BoxRegion, modes: Vec<ModeSpec>) -> Result<Self> {
        Self::build(name, SystemKind::Hybrid, domain, modes)
    }

    /// `x⁺ = map(x, u)`.
    pub fn discrete(name: impl Into<String>, domain: BoxRegion, map: FieldFn) -> Result<Self> {
        Self::build(name, SystemKind::Discrete, domain, vec![ModeSpec::new("map", map)])
    }

    /// `ẋ = A x`. Remembers `A` so exact sensitivity oracles can be built.
    pub fn linear(name: impl Into<String>, a: Matrix, domain: BoxRegion) -> Result<Self> {
        if a.dim() != domain.dim() {
            return Err(Error::dim("linear system matrix", domain.dim(), a.dim()));
        }
        let m = a.clone();
        let field: FieldFn = Arc::new(move |x, _u, out| {
            let y = m.mul_vec(x);
            out.copy_from_slice(&y);
        });
        let mut sys = Self::continuous(name, domain, field)?;
        sys.linear = Some(a);
        Ok(sys)
    }

    /// Attaches the feedback law `u = g(x)`; its input width must be `n`.
    pub fn with_controller(mut self, controller: ControllerSpec) -> Result<Self> {
        if controller.input_width() != self.dim {
            return Err(Error::dim(
                "controller input",
                self.dim,
                controller.input_width(),
            ));
        }
        self.control_dim = controller.output_width();
        self.controller = Some(controller);
        Ok(self)
    }

    pub fn with_meta(mut self, meta: SystemMeta) -> Result<Self> {
        if meta.init_set.dim() != self.dim {
            return Err(Error::dim("initial set", self.dim, meta.init_set.dim()));
        }
        self.meta = meta;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &BoxRegion {
        &self.domain
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn controller(&self) -> Option<&ControllerSpec> {
        self.controller.as_ref()
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    /// `Some(A)` for systems built with [`SystemSpec::linear`].
    pub fn linear_matrix(&self) -> Option<&Matrix> {
        self.linear.as_ref()
    }

    pub fn meta(&self) -> &SystemMeta {
        &self.meta
    }

    /// Default step: the registry value, or 1 for discrete systems.
    pub fn default_step(&self) -> f64 {
        self.meta.step.unwrap_or(1.0)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::dim(format!("state of `{}`", self.name), self.dim, x.len()));
        }
        Ok(())
    }

    /// Index of the active mode at `x` (first guard that holds).
    pub fn select_mode(&self, x: &[f64]) -> Result<usize> {
        self.check_dim(x)?;
        self.modes
            .iter()
            .position(|m| m.holds(x))
            .ok_or_else(|| Error::NoMode(x.to_vec()))
    }

    /// `g(x)`, or an empty vector without a controller.
    pub fn control(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.controller {
            Some(c) => c.forward(x),
            None => Ok(Vec::new()),
        }
    }

    /// `f(x, g(x))` for continuous and hybrid systems, `F(x, g(x))` for discrete ones.
    pub fn eval_field(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mode = self.select_mode(x)?;
        let mut out = vec![0.0; self.dim];
        self.eval_mode_into(mode, x, &mut out)?;
        Ok(out)
    }

    /// Evaluates mode `mode` at `x` regardless of its guard.
    pub(crate) fn eval_mode_into(&self, mode: usize, x: &[f64], out: &mut [f64]) -> Result<()> {
        let u = self.control(x)?;
        (self.modes[mode].field)(x, &u, out);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(n: usize) -> BoxRegion {
        BoxRegion::new(vec![-1.0; n], vec![1.0; n]).unwrap()
    }

    #[test]
    fn hybrid_needs_two_guarded_modes() {
        let f: FieldFn = Arc::new(|_, _, out: &mut [f64]| out.fill(0.0));
        let g: GuardFn = Arc::new(|x: &[f64]| x[0] >= 0.0);
        assert!(SystemSpec::hybrid("h", unit_box(1), vec![ModeSpec::guarded("a", f.clone(), g.clone())]).is_err());
        assert!(SystemSpec::hybrid(
            "h",
            unit_box(1),
            vec![ModeSpec::guarded("a", f.clone(), g), ModeSpec::new("b", f)]
        )
        .is_err());
    }

    #[test]
    fn mode_selection_is_first_match() {
        let f: FieldFn = Arc::new(|_, _, out: &mut [f64]| out.fill(1.0));
        let h: FieldFn = Arc::new(|_, _, out: &mut [f64]| out.fill(2.0));
        let sys = SystemSpec::hybrid(
            "h",
            unit_box(1),
            vec![
                ModeSpec::guarded("a", f, Arc::new(|x: &[f64]| x[0] >= 0.0)),
                ModeSpec::guarded("b", h, Arc::new(|x: &[f64]| x[0] <= 0.0)),
            ],
        )
        .unwrap();
        assert_eq!(sys.select_mode(&[0.0]).unwrap(), 0);
        assert_eq!(sys.select_mode(&[-0.5]).unwrap(), 1);
        assert_eq!(sys.eval_field(&[-0.5]).unwrap(), vec![2.0]);
    }

    #[test]
    fn eval_field_checks_dimension() {
        let sys = builtin_system("linear-rotation").unwrap();
        assert!(matches!(sys.eval_field(&[1.0]), Err(Error::Dimension { .. })));
    }
}
