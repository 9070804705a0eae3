use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Gradient magnitudes below this, times `max(1, |f|)`, are compared in
/// absolute terms. Scaling with the output keeps the measure invariant to
/// rescaling the loss and tracks the roundoff of the central difference.
pub const GRAD_CHECK_FLOOR: f64 = 1e-4;

/// Compares reverse-mode gradients with central differences.
///
/// `build` constructs a scalar-valued computation from the given inputs, which
/// are inserted as parameters. Every input entry is perturbed by
/// `perturbation` in both directions. Returns the worst
/// `|analytic - numeric| / max(|analytic|, |numeric|, GRAD_CHECK_FLOOR * max(1, |f|))`.
pub fn grad_check<F>(build: F, inputs: &[Tensor], perturbation: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<(Graph, Vec<Var>, Var)> {
        let mut graph = Graph::new();
        let vars: Vec<Var> = values.iter().map(|t| graph.param(t.clone())).collect();
        let out = build(&mut graph, &vars)?;
        if graph.value(out).numel() != 1 {
            return Err(Error::Dimension("gradient check needs a scalar output".into()));
        }
        Ok((graph, vars, out))
    };

    let (mut graph, vars, out) = eval(inputs)?;
    let floor = GRAD_CHECK_FLOOR * graph.value(out).data()[0].abs().max(1.0);
    graph.backward(out)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(v, t)| graph.grad(*v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();

    let mut worst = 0.0_f64;
    let mut values = inputs.to_vec();
    for i in 0..values.len() {
        for j in 0..values[i].numel() {
            let original = values[i].data()[j];
            values[i].data_mut()[j] = original + perturbation;
            let (g, _, o) = eval(&values)?;
            let plus = g.value(o).data()[0];
            values[i].data_mut()[j] = original - perturbation;
            let (g, _, o) = eval(&values)?;
            let minus = g.value(o).data()[0];
            values[i].data_mut()[j] = original;

            let numeric = (plus - minus) / (2.0 * perturbation);
            let a = analytic[i].data()[j];
            let scale = a.abs().max(numeric.abs()).max(floor);
            let err = (a - numeric).abs() / scale;
            if !err.is_finite() {
                return Ok(f64::INFINITY);
            }
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
