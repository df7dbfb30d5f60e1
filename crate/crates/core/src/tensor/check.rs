use super::{Result, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct GradientReport {
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    /// `(input index, flat element index)` of the worst coordinate.
    pub worst: (usize, usize),
}

/// Compares reverse-mode gradients of a scalar function against central
/// differences, one coordinate at a time.
///
/// Relative error is `|a - n| / max(|a| + |n|, 1e-6)`; the floor keeps
/// vanishing gradients from amplifying round-off.
pub fn gradient_check<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<GradientReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).data()[0])
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut report = GradientReport {
        max_relative_error: 0.0,
        max_absolute_error: 0.0,
        worst: (0, 0),
    };
    let mut probe = inputs.to_vec();
    for (k, &v) in vars.iter().enumerate() {
        let analytic = grads.get(v);
        for i in 0..inputs[k].len() {
            let orig = inputs[k].data()[i];
            probe[k].data_mut()[i] = orig + eps;
            let plus = eval(&probe)?;
            probe[k].data_mut()[i] = orig - eps;
            let minus = eval(&probe)?;
            probe[k].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.data()[i];
            let abs = (a - numeric).abs();
            let rel = abs / (a.abs() + numeric.abs()).max(1e-6);
            report.max_absolute_error = report.max_absolute_error.max(abs);
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst = (k, i);
            }
        }
    }
    Ok(report)
}
