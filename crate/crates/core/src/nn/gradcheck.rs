//! Central finite-difference checks of tape gradients.

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::Result;

/// Gradients smaller than this are compared in absolute rather than relative terms.
pub const GRAD_SCALE_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckEntry {
    pub name: String,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub step: f64,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.max_rel_err < self.tol)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_err).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &GradCheckEntry> {
        self.entries.iter().filter(|e| !(e.max_rel_err < self.tol))
    }
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(GRAD_SCALE_FLOOR)
}

fn evaluate<F>(f: &F, inputs: &[Tensor], with_grad: bool) -> Result<(Tape, Vec<Var>, Var)>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), with_grad)).collect();
    let out = f(&mut tape, &vars)?;
    Ok((tape, vars, out))
}

/// Gradients of the scalar `f` with respect to each input, by reverse mode.
pub fn analytic_gradients<F>(f: &F, inputs: &[Tensor]) -> Result<Vec<Tensor>>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let (mut tape, vars, out) = evaluate(f, inputs, true)?;
    tape.backward(out)?;
    Ok(vars
        .iter()
        .zip(inputs)
        .map(|(v, t)| match tape.grad(*v) {
            Some(g) => Tensor::new(t.shape().to_vec(), g.to_vec()).unwrap(),
            None => Tensor::zeros(t.shape()),
        })
        .collect())
}

/// Central differences `(f(x + h) − f(x − h)) / 2h`, one coordinate at a time.
pub fn numeric_gradients<F>(f: &F, inputs: &[Tensor], step: f64) -> Result<Vec<Tensor>>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut work: Vec<Tensor> = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut g = Tensor::zeros(inputs[i].shape());
        for j in 0..inputs[i].len() {
            let x0 = inputs[i].data()[j];
            work[i].data_mut()[j] = x0 + step;
            let (tape, _, o) = evaluate(f, &work, false)?;
            let plus = tape.value(o).item();
            work[i].data_mut()[j] = x0 - step;
            let (tape, _, o) = evaluate(f, &work, false)?;
            let minus = tape.value(o).item();
            work[i].data_mut()[j] = x0;
            g.data_mut()[j] = (plus - minus) / (2.0 * step);
        }
        out.push(g);
    }
    Ok(out)
}

pub fn compare(names: &[String], analytic: &[Tensor], numeric: &[Tensor], step: f64, tol: f64) -> GradCheckReport {
    let entries = names
        .iter()
        .zip(analytic.iter().zip(numeric))
        .map(|(name, (a, n))| {
            let mut worst = GradCheckEntry { name: name.clone(), max_rel_err: 0.0, worst_index: 0, analytic: 0.0, numeric: 0.0 };
            for (j, (x, y)) in a.data().iter().zip(n.data()).enumerate() {
                let e = relative_error(*x, *y);
                if !(e <= worst.max_rel_err) {
                    worst = GradCheckEntry { name: name.clone(), max_rel_err: e, worst_index: j, analytic: *x, numeric: *y };
                }
            }
            worst
        })
        .collect();
    GradCheckReport { entries, step, tol }
}

/// Compares reverse-mode and finite-difference gradients of `f` for every input.
pub fn grad_check<F>(f: F, inputs: &[(String, Tensor)], step: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let names: Vec<String> = inputs.iter().map(|(n, _)| n.clone()).collect();
    let tensors: Vec<Tensor> = inputs.iter().map(|(_, t)| t.clone()).collect();
    let analytic = analytic_gradients(&f, &tensors)?;
    let numeric = numeric_gradients(&f, &tensors, step)?;
    Ok(compare(&names, &analytic, &numeric, step, tol))
}
