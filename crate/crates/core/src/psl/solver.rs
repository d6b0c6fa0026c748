//! Convex MAP inference for ground programs.
//!
//! Two solvers share one contract: consensus ADMM (default) splits every
//! potential into a local copy of its atoms, each with a closed-form
//! proximal update, and averages the copies into a box-projected consensus;
//! projected subgradient descent uses a `step / √k` schedule. Both keep the
//! best assignment seen, so the reported objective never increases.

use serde::{Deserialize, Serialize};

use super::{AtomKey, GroundProgram, InferenceResult};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    Admm,
    Subgradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// ADMM penalty.
    pub rho: f64,
    /// Initial subgradient step.
    pub step_size: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: SolverMethod::Admm,
            max_iterations: 2500,
            tolerance: 1e-5,
            rho: 1.0,
            step_size: 0.5,
        }
    }
}

/// `weight · max(0, Σ coefs·x[vars] + constant)^p`
struct Potential {
    vars: Vec<usize>,
    coefs: Vec<f64>,
    constant: f64,
    weight: f64,
    rule: usize,
}

impl Potential {
    fn linear(&self, x: &[f64]) -> f64 {
        self.constant
            + self
                .vars
                .iter()
                .zip(&self.coefs)
                .map(|(&i, &a)| a * x[i])
                .sum::<f64>()
    }
}

struct Problem {
    potentials: Vec<Potential>,
    /// Contribution of potentials without free atoms.
    constant: f64,
    power: i32,
    n: usize,
}

impl Problem {
    fn new(program: &GroundProgram) -> Result<Self> {
        let power = i32::from(program.hinge_power);
        let mut potentials = Vec::with_capacity(program.rules.len());
        let mut constant = 0.0;
        for (i, r) in program.rules.iter().enumerate() {
            if !(r.weight.is_finite() && r.weight >= 0.0) {
                return Err(numeric(program, i, "non-finite or negative weight"));
            }
            let (vars, c) = r.linear_form();
            if vars.is_empty() {
                constant += r.weight * c.max(0.0).powi(power);
                continue;
            }
            potentials.push(Potential {
                vars: vars.iter().map(|&(v, _)| v as usize).collect(),
                coefs: vars.iter().map(|&(_, a)| a).collect(),
                constant: c,
                weight: r.weight,
                rule: i,
            });
        }
        if !constant.is_finite() {
            return Err(Error::Numeric("non-finite constant objective term".into()));
        }
        Ok(Problem {
            potentials,
            constant,
            power,
            n: program.atoms.len(),
        })
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.constant
            + self
                .potentials
                .iter()
                .map(|p| p.weight * p.linear(x).max(0.0).powi(self.power))
                .sum::<f64>()
    }

    fn check_finite(&self, program: &GroundProgram, x: &[f64], obj: f64) -> Result<()> {
        if obj.is_finite() {
            return Ok(());
        }
        let bad = self
            .potentials
            .iter()
            .find(|p| !(p.weight * p.linear(x).max(0.0).powi(self.power)).is_finite())
            .map(|p| p.rule)
            .unwrap_or(0);
        Err(numeric(program, bad, "objective became non-finite"))
    }
}

fn numeric(program: &GroundProgram, rule: usize, what: &str) -> Error {
    let r = &program.rules[rule];
    let head = match program.atoms.key(r.head) {
        AtomKey::Rel(t) => format!("REL({}, {}, {})", t.subject.0, t.relation.0, t.object.0),
        AtomKey::Lbl(e, l) => format!("LBL({}, {})", e.0, l.0),
    };
    Error::Numeric(format!(
        "{what} at rule #{rule} ({:?} ⇒ {head})",
        r.template
    ))
}

/// Minimises the program objective over [0,1]ⁿ.
pub fn map_inference(program: &GroundProgram) -> Result<InferenceResult> {
    let problem = Problem::new(program)?;
    let cfg = &program.solver;
    let bad = |v: f64, floor_ok: bool| v.is_nan() || v < 0.0 || (v == 0.0 && !floor_ok);
    if bad(cfg.tolerance, true) || bad(cfg.rho, false) || bad(cfg.step_size, false) {
        return Err(Error::Config(
            "solver tolerance, rho and step size must be positive".into(),
        ));
    }
    let (x, objective, iterations, trace) = if problem.n == 0 {
        (Vec::new(), problem.constant, 0, Vec::new())
    } else {
        match cfg.method {
            SolverMethod::Admm => admm(&problem, program)?,
            SolverMethod::Subgradient => subgradient(&problem, program)?,
        }
    };

    let mut out = InferenceResult {
        objective,
        iterations,
        trace,
        ..Default::default()
    };
    for (i, key) in program.atoms.keys().iter().enumerate() {
        match *key {
            AtomKey::Rel(t) => {
                out.rel_scores.insert(t, x[i]);
            }
            AtomKey::Lbl(e, l) => {
                out.lbl_scores.insert((e, l), x[i]);
            }
        }
    }
    Ok(out)
}

type Solution = (Vec<f64>, f64, usize, Vec<f64>);

fn prox(p: &Potential, target: &[f64], rho: f64, power: i32, out: &mut [f64]) {
    out.copy_from_slice(target);
    let lin = p.constant + p.coefs.iter().zip(target).map(|(a, v)| a * v).sum::<f64>();
    if lin <= 0.0 {
        return;
    }
    let norm2: f64 = p.coefs.iter().map(|a| a * a).sum();
    let shift = if power == 1 {
        // Either the full gradient step stays on the active side, or the
        // minimiser sits on the hinge.
        let full = p.weight / rho;
        if lin - full * norm2 >= 0.0 {
            full
        } else {
            lin / norm2
        }
    } else {
        let lin_star = lin / (1.0 + 2.0 * p.weight * norm2 / rho);
        2.0 * p.weight * lin_star / rho
    };
    for (o, a) in out.iter_mut().zip(&p.coefs) {
        *o -= shift * a;
    }
}

fn admm(problem: &Problem, program: &GroundProgram) -> Result<Solution> {
    let cfg = &program.solver;
    let rho = cfg.rho;
    let n = problem.n;

    let mut count = vec![0usize; n];
    for p in &problem.potentials {
        for &i in &p.vars {
            count[i] += 1;
        }
    }
    let offsets: Vec<usize> = problem
        .potentials
        .iter()
        .scan(0, |acc, p| {
            let o = *acc;
            *acc += p.vars.len();
            Some(o)
        })
        .collect();
    let m: usize = problem.potentials.iter().map(|p| p.vars.len()).sum();

    let mut z = vec![0.0; n];
    let mut y = vec![0.0; m];
    let mut u = vec![0.0; m];
    let mut target = Vec::new();
    let mut sum = vec![0.0; n];

    let mut best = problem.objective(&z);
    problem.check_finite(program, &z, best)?;
    let mut best_z = z.clone();
    let mut trace = Vec::new();
    let mut iterations = 0;

    for _ in 0..cfg.max_iterations {
        iterations += 1;
        for (p, &off) in problem.potentials.iter().zip(&offsets) {
            let k = p.vars.len();
            target.clear();
            target.extend(
                p.vars
                    .iter()
                    .enumerate()
                    .map(|(j, &i)| z[i] - u[off + j] / rho),
            );
            prox(p, &target, rho, problem.power, &mut y[off..off + k]);
        }

        sum.iter_mut().for_each(|s| *s = 0.0);
        for (p, &off) in problem.potentials.iter().zip(&offsets) {
            for (j, &i) in p.vars.iter().enumerate() {
                sum[i] += y[off + j] + u[off + j] / rho;
            }
        }
        let mut dual = 0.0;
        for i in 0..n {
            let zi = if count[i] == 0 {
                z[i]
            } else {
                (sum[i] / count[i] as f64).clamp(0.0, 1.0)
            };
            dual += count[i] as f64 * (zi - z[i]).powi(2);
            z[i] = zi;
        }
        let mut primal = 0.0;
        for (p, &off) in problem.potentials.iter().zip(&offsets) {
            for (j, &i) in p.vars.iter().enumerate() {
                let r = y[off + j] - z[i];
                u[off + j] += rho * r;
                primal += r * r;
            }
        }

        let obj = problem.objective(&z);
        problem.check_finite(program, &z, obj)?;
        if obj < best {
            best = obj;
            best_z.copy_from_slice(&z);
        }
        trace.push(best);

        let primal_rms = (primal / m as f64).sqrt();
        let dual_rms = rho * (dual / m as f64).sqrt();
        if primal_rms <= cfg.tolerance && dual_rms <= cfg.tolerance {
            break;
        }
    }
    Ok((best_z, best, iterations, trace))
}

fn subgradient(problem: &Problem, program: &GroundProgram) -> Result<Solution> {
    const WINDOW: usize = 100;
    let cfg = &program.solver;
    let mut x = vec![0.0; problem.n];
    let mut best = problem.objective(&x);
    problem.check_finite(program, &x, best)?;
    let mut best_x = x.clone();
    let mut trace: Vec<f64> = Vec::new();
    let mut g = vec![0.0; problem.n];
    let mut iterations = 0;

    for k in 1..=cfg.max_iterations {
        iterations = k;
        g.iter_mut().for_each(|v| *v = 0.0);
        for p in &problem.potentials {
            let lin = p.linear(&x);
            if lin <= 0.0 {
                continue;
            }
            let scale = if problem.power == 2 {
                2.0 * p.weight * lin
            } else {
                p.weight
            };
            for (&i, &a) in p.vars.iter().zip(&p.coefs) {
                g[i] += scale * a;
            }
        }
        let step = cfg.step_size / (k as f64).sqrt();
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi = (*xi - step * gi).clamp(0.0, 1.0);
        }
        let obj = problem.objective(&x);
        problem.check_finite(program, &x, obj)?;
        if obj < best {
            best = obj;
            best_x.copy_from_slice(&x);
        }
        trace.push(best);
        if k > WINDOW && trace[k - 1 - WINDOW] - best < cfg.tolerance {
            break;
        }
    }
    Ok((best_x, best, iterations, trace))
}
