//! Boundary lifting.
//!
//! A lift `Y(t,x) = g(t)·P_g(x) + h(t)·P_h(x)` with polynomials `P_g, P_h` of
//! degree at most two absorbs the non-homogeneous boundary data, so that
//! `V = U − Y` solves the same equation with homogeneous boundaries and the
//! effective forcing `f̃ = f − ∂ₜY + bY`.
//!
//! The catalog is closed: the main Neumann-Dirichlet case plus the eight
//! tabulated rows. Each lift is certified by [`verify_boundary`], which
//! evaluates the boundary operators directly instead of trusting the formula.

use crate::error::{Error, InvalidParameter, Result};
use crate::model::{Forcing, TimeSignal};

const DEGENERATE_DENOMINATOR: f64 = 1e-14;

/// Boundary conditions. `g` is the data at `x = 0` and `h` at `x = 1` for the
/// eight tabulated rows; the main case swaps them: `∂ₓU(t,0) = h`, `U(t,1) = g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    MainNeumannDirichlet,
    /// Row 1: `U(0) = g`, `U(1) = h`.
    DirichletDirichlet,
    /// Row 2: `U(0) = g`, `∂ₓU(1) = h`.
    DirichletNeumann,
    /// Row 3: `∂ₓU(0) = g`, `∂ₓU(1) = h`.
    NeumannNeumann,
    /// Row 4: `U(0) = g`, `(∂ₓU + γU)(1) = h`.
    DirichletRobin { gamma: f64 },
    /// Row 5: `∂ₓU(0) = g`, `(∂ₓU + γU)(1) = h`.
    NeumannRobin { gamma: f64 },
    /// Row 6: `(∂ₓU − γU)(0) = g`, `U(1) = h`.
    RobinDirichlet { gamma: f64 },
    /// Row 7: `(∂ₓU − γU)(0) = g`, `∂ₓU(1) = h`.
    RobinNeumann { gamma: f64 },
    /// Row 8: `(∂ₓU − γ₁U)(0) = g`, `(∂ₓU + γ₂U)(1) = h`.
    RobinRobin { gamma1: f64, gamma2: f64 },
}

impl BoundaryCondition {
    /// Builds a tabulated row (1..=8); Robin parameters are read as needed.
    pub fn table_row(row: u8, gamma: f64, gamma1: f64, gamma2: f64) -> Option<Self> {
        use BoundaryCondition::*;
        Some(match row {
            1 => DirichletDirichlet,
            2 => DirichletNeumann,
            3 => NeumannNeumann,
            4 => DirichletRobin { gamma },
            5 => NeumannRobin { gamma },
            6 => RobinDirichlet { gamma },
            7 => RobinNeumann { gamma },
            8 => RobinRobin { gamma1, gamma2 },
            _ => return None,
        })
    }

    pub fn row(&self) -> Option<u8> {
        use BoundaryCondition::*;
        match self {
            MainNeumannDirichlet => None,
            DirichletDirichlet => Some(1),
            DirichletNeumann => Some(2),
            NeumannNeumann => Some(3),
            DirichletRobin { .. } => Some(4),
            NeumannRobin { .. } => Some(5),
            RobinDirichlet { .. } => Some(6),
            RobinNeumann { .. } => Some(7),
            RobinRobin { .. } => Some(8),
        }
    }

    pub fn name(&self) -> &'static str {
        use BoundaryCondition::*;
        match self {
            MainNeumannDirichlet => "main Neumann-Dirichlet",
            DirichletDirichlet => "row 1 (Dirichlet-Dirichlet)",
            DirichletNeumann => "row 2 (Dirichlet-Neumann)",
            NeumannNeumann => "row 3 (Neumann-Neumann)",
            DirichletRobin { .. } => "row 4 (Dirichlet-Robin)",
            NeumannRobin { .. } => "row 5 (Neumann-Robin)",
            RobinDirichlet { .. } => "row 6 (Robin-Dirichlet)",
            RobinNeumann { .. } => "row 7 (Robin-Neumann)",
            RobinRobin { .. } => "row 8 (Robin-Robin)",
        }
    }

    /// The denominator of the row's lift, if it has one.
    fn denominator(&self) -> Option<f64> {
        use BoundaryCondition::*;
        match *self {
            DirichletRobin { gamma } | RobinDirichlet { gamma } => Some(1.0 + gamma),
            NeumannRobin { gamma } | RobinNeumann { gamma } => Some(gamma),
            RobinRobin { gamma1, gamma2 } => Some(gamma1 + gamma2 + gamma1 * gamma2),
            _ => None,
        }
    }

    /// Operators `(slope·∂ₓ + value·I)` at `x = 0` and `x = 1`, and which
    /// datum each side is matched against.
    fn operators(&self) -> [(Edge, BoundaryOperator, Datum); 2] {
        use BoundaryCondition::*;
        let dirichlet = BoundaryOperator {
            slope: 0.0,
            value: 1.0,
        };
        let neumann = BoundaryOperator {
            slope: 1.0,
            value: 0.0,
        };
        let robin = |value| BoundaryOperator { slope: 1.0, value };
        let (left, right) = match *self {
            MainNeumannDirichlet => {
                return [
                    (Edge::Left, neumann, Datum::H),
                    (Edge::Right, dirichlet, Datum::G),
                ]
            }
            DirichletDirichlet => (dirichlet, dirichlet),
            DirichletNeumann => (dirichlet, neumann),
            NeumannNeumann => (neumann, neumann),
            DirichletRobin { gamma } => (dirichlet, robin(gamma)),
            NeumannRobin { gamma } => (neumann, robin(gamma)),
            RobinDirichlet { gamma } => (robin(-gamma), dirichlet),
            RobinNeumann { gamma } => (robin(-gamma), neumann),
            RobinRobin { gamma1, gamma2 } => (robin(-gamma1), robin(gamma2)),
        };
        [(Edge::Left, left, Datum::G), (Edge::Right, right, Datum::H)]
    }
}

#[derive(Debug, Clone, Copy)]
enum Edge {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy)]
enum Datum {
    G,
    H,
}

#[derive(Debug, Clone, Copy)]
struct BoundaryOperator {
    slope: f64,
    value: f64,
}

/// Boundary condition together with its data `g(t)`, `h(t)`.
#[derive(Debug, Clone)]
pub struct BoundaryCase {
    pub condition: BoundaryCondition,
    pub g: TimeSignal,
    pub h: TimeSignal,
}

impl BoundaryCase {
    pub fn new(condition: BoundaryCondition, g: TimeSignal, h: TimeSignal) -> Self {
        Self { condition, g, h }
    }

    pub fn homogeneous(condition: BoundaryCondition) -> Self {
        Self::new(condition, TimeSignal::zero(), TimeSignal::zero())
    }

    pub(crate) fn violations(&self) -> Vec<InvalidParameter> {
        let mut out = Vec::new();
        if let Some(d) = self.condition.denominator() {
            if !d.is_finite() || d.abs() <= DEGENERATE_DENOMINATOR {
                out.push(InvalidParameter::new(
                    "boundary.gamma",
                    format!("{} has vanishing Robin denominator {d}", self.condition.name()),
                ));
            }
        }
        out
    }
}

/// Quadratic `c0 + c1·x + c2·x²`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quadratic(pub [f64; 3]);

impl Quadratic {
    pub fn eval(&self, x: f64) -> f64 {
        let [c0, c1, c2] = self.0;
        c0 + x * (c1 + x * c2)
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.0[1] + 2.0 * self.0[2] * x
    }

    /// `max_{x∈[0,1]} |p(x)|`, exact for a quadratic.
    pub fn max_abs_unit(&self) -> f64 {
        let mut m = self.eval(0.0).abs().max(self.eval(1.0).abs());
        if self.0[2] != 0.0 {
            let vertex = -self.0[1] / (2.0 * self.0[2]);
            if (0.0..=1.0).contains(&vertex) {
                m = m.max(self.eval(vertex).abs());
            }
        }
        m
    }
}

/// `Y(t,x) = g(t)·P_g(x) + h(t)·P_h(x)`.
#[derive(Debug, Clone)]
pub struct LiftFunction {
    pub g_profile: Quadratic,
    pub h_profile: Quadratic,
    pub g: TimeSignal,
    pub h: TimeSignal,
}

impl LiftFunction {
    pub fn value(&self, t: f64, x: f64) -> f64 {
        self.g.eval(t) * self.g_profile.eval(x) + self.h.eval(t) * self.h_profile.eval(x)
    }

    pub fn dt(&self, t: f64, x: f64) -> f64 {
        self.g.derivative(t) * self.g_profile.eval(x) + self.h.derivative(t) * self.h_profile.eval(x)
    }

    pub fn dx(&self, t: f64, x: f64) -> f64 {
        self.g.eval(t) * self.g_profile.slope(x) + self.h.eval(t) * self.h_profile.slope(x)
    }

    /// `max_{x∈[0,1]} |Y(t,x)|`.
    pub fn max_abs(&self, t: f64) -> f64 {
        let g = self.g.eval(t);
        let h = self.h.eval(t);
        let [a0, a1, a2] = self.g_profile.0;
        let [b0, b1, b2] = self.h_profile.0;
        Quadratic([g * a0 + h * b0, g * a1 + h * b1, g * a2 + h * b2]).max_abs_unit()
    }

    pub fn is_zero(&self) -> bool {
        (self.g.is_zero() || self.g_profile == Quadratic::default())
            && (self.h.is_zero() || self.h_profile == Quadratic::default())
    }

    pub fn has_analytic_time_derivative(&self) -> bool {
        self.g.has_analytic_derivative() && self.h.has_analytic_derivative()
    }
}

/// Lift for a boundary case, exactly as catalogued.
pub fn build_lift(case: &BoundaryCase) -> Result<LiftFunction> {
    use BoundaryCondition::*;
    if let Some(d) = case.condition.denominator() {
        if !d.is_finite() || d.abs() <= DEGENERATE_DENOMINATOR {
            return Err(Error::DegenerateRobin {
                condition: case.condition.name(),
                denominator: d,
            });
        }
    }
    let q = |c0: f64, c1: f64, c2: f64| Quadratic([c0, c1, c2]);
    let (g_profile, h_profile) = match case.condition {
        // h(t)(x − 1) + g(t)
        MainNeumannDirichlet => (q(1.0, 0.0, 0.0), q(-1.0, 1.0, 0.0)),
        // [h − g]x + g
        DirichletDirichlet => (q(1.0, -1.0, 0.0), q(0.0, 1.0, 0.0)),
        // h x + g
        DirichletNeumann => (q(1.0, 0.0, 0.0), q(0.0, 1.0, 0.0)),
        // (h − g)/2 x² + g x
        NeumannNeumann => (q(0.0, 1.0, -0.5), q(0.0, 0.0, 0.5)),
        // (h − γg)/(1 + γ) x + g
        DirichletRobin { gamma } => (q(1.0, -gamma / (1.0 + gamma), 0.0), q(0.0, 1.0 / (1.0 + gamma), 0.0)),
        // g x + [h − (1 + γ)g]/γ
        NeumannRobin { gamma } => (q(-(1.0 + gamma) / gamma, 1.0, 0.0), q(1.0 / gamma, 0.0, 0.0)),
        // (g + γh)/(1 + γ) x + (h − g)/(1 + γ)
        RobinDirichlet { gamma } => {
            let d = 1.0 + gamma;
            (q(-1.0 / d, 1.0 / d, 0.0), q(1.0 / d, gamma / d, 0.0))
        }
        // h x + (h − g)/γ
        RobinNeumann { gamma } => (q(-1.0 / gamma, 0.0, 0.0), q(1.0 / gamma, 1.0, 0.0)),
        // (γ₁h + γ₂g)/D x + (h − (1 + γ₂)g)/D, D = γ₁ + γ₂ + γ₁γ₂
        RobinRobin { gamma1, gamma2 } => {
            let d = gamma1 + gamma2 + gamma1 * gamma2;
            (q(-(1.0 + gamma2) / d, gamma2 / d, 0.0), q(1.0 / d, gamma1 / d, 0.0))
        }
    };
    Ok(LiftFunction {
        g_profile,
        h_profile,
        g: case.g.clone(),
        h: case.h.clone(),
    })
}

/// Effective forcing `f̃(t,x) = f(t,x) − ∂ₜY(t,x) + b·Y(t,x)`.
#[derive(Debug, Clone)]
pub struct EffectiveForcing {
    pub forcing: Forcing,
    pub lift: LiftFunction,
    pub b: f64,
}

impl EffectiveForcing {
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.forcing.eval(t, x) - self.lift.dt(t, x) + self.b * self.lift.value(t, x)
    }
}

pub fn effective_forcing(f: &Forcing, lift: &LiftFunction, b: f64) -> EffectiveForcing {
    EffectiveForcing {
        forcing: f.clone(),
        lift: lift.clone(),
        b,
    }
}

/// Largest absolute boundary residual of `lift` against `case` over `t_samples`.
pub fn verify_boundary(lift: &LiftFunction, case: &BoundaryCase, t_samples: &[f64]) -> f64 {
    let ops = case.condition.operators();
    t_samples
        .iter()
        .flat_map(|&t| {
            ops.iter().map(move |(edge, op, datum)| {
                let x = match edge {
                    Edge::Left => 0.0,
                    Edge::Right => 1.0,
                };
                let data = match datum {
                    Datum::G => case.g.eval(t),
                    Datum::H => case.h.eval(t),
                };
                (op.slope * lift.dx(t, x) + op.value * lift.value(t, x) - data).abs()
            })
        })
        .fold(0.0, f64::max)
}
