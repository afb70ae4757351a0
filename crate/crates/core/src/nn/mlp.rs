use super::{MlpSpec, NnError, ParameterVector};

/// Activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    params_id: u64,
    batch: usize,
    /// Input to each affine layer; `inputs[0]` is the network input.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<f64>>,
}

impl Tape {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }
}

/// `c = a·b` (beta = 0) or `c += a·b` (beta = 1) for strided row/column
/// layouts; see `matrixmultiply::dgemm`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the slices cover every index addressed by the given dimensions
    // and strides, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn check_input(
    spec: &MlpSpec,
    params: &ParameterVector,
    input: &[f64],
    batch: usize,
) -> Result<(), NnError> {
    spec.validate()?;
    if params.len() != spec.param_count() {
        return Err(NnError::DimensionMismatch {
            expected: spec.param_count(),
            got: params.len(),
        });
    }
    if input.len() != batch * spec.input_dim() {
        return Err(NnError::DimensionMismatch {
            expected: batch * spec.input_dim(),
            got: input.len(),
        });
    }
    if input.iter().any(|x| !x.is_finite()) {
        return Err(NnError::NonFiniteInput);
    }
    Ok(())
}

fn run(
    spec: &MlpSpec,
    params: &ParameterVector,
    input: &[f64],
    batch: usize,
    record: bool,
) -> Result<(Vec<f64>, Option<Tape>), NnError> {
    check_input(spec, params, input, batch)?;
    let theta = params.values();
    let layers = spec.layers();
    let mut inputs = Vec::new();
    let mut pre = Vec::new();
    let mut x = input.to_vec();
    for (l, layer) in layers.iter().enumerate() {
        let w = &theta[layer.weights()];
        let bias = &theta[layer.bias()];
        let mut z: Vec<f64> = bias
            .iter()
            .copied()
            .cycle()
            .take(batch * layer.fan_out)
            .collect();
        // Z = X·Wᵀ + b
        gemm(
            batch,
            layer.fan_in,
            layer.fan_out,
            &x,
            (layer.fan_in, 1),
            w,
            (1, layer.fan_in),
            1.0,
            &mut z,
        );
        let hidden = l + 1 < layers.len();
        let next = if hidden {
            z.iter().map(|v| v.max(0.0)).collect()
        } else {
            Vec::new()
        };
        if record {
            inputs.push(std::mem::take(&mut x));
            if hidden {
                pre.push(z.clone());
            }
        }
        x = if hidden { next } else { z };
    }
    let tape = record.then(|| Tape {
        params_id: params.id(),
        batch,
        inputs,
        pre,
    });
    Ok((x, tape))
}

/// Single-sample forward pass.
pub fn forward(
    spec: &MlpSpec,
    params: &ParameterVector,
    input: &[f64],
) -> Result<(Vec<f64>, Tape), NnError> {
    forward_batch(spec, params, input, 1)
}

/// Forward pass over `batch` row-major inputs, returning `batch × output`
/// values and the tape for [`backward`].
pub fn forward_batch(
    spec: &MlpSpec,
    params: &ParameterVector,
    input: &[f64],
    batch: usize,
) -> Result<(Vec<f64>, Tape), NnError> {
    let (out, tape) = run(spec, params, input, batch, true)?;
    Ok((out, tape.expect("tape recorded")))
}

/// Forward pass without recording a tape.
pub fn predict_batch(
    spec: &MlpSpec,
    params: &ParameterVector,
    input: &[f64],
    batch: usize,
) -> Result<Vec<f64>, NnError> {
    Ok(run(spec, params, input, batch, false)?.0)
}

/// Reverse pass. Returns the parameter gradient summed over the batch and
/// the per-sample input gradient (`batch × input`). The ReLU derivative at
/// zero is taken as 0.
pub fn backward(
    spec: &MlpSpec,
    params: &ParameterVector,
    tape: &Tape,
    output_grad: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), NnError> {
    if tape.params_id != params.id() {
        return Err(NnError::StaleTape);
    }
    let layers = spec.layers();
    if tape.inputs.len() != layers.len() {
        return Err(NnError::StaleTape);
    }
    let batch = tape.batch;
    if output_grad.len() != batch * spec.output_dim() {
        return Err(NnError::DimensionMismatch {
            expected: batch * spec.output_dim(),
            got: output_grad.len(),
        });
    }
    if output_grad.iter().any(|g| !g.is_finite()) {
        return Err(NnError::NonFiniteGradient);
    }
    let theta = params.values();
    let mut grad = vec![0.0; params.len()];
    let mut dz = output_grad.to_vec();
    for (l, layer) in layers.iter().enumerate().rev() {
        let x = &tape.inputs[l];
        let (fan_in, fan_out) = (layer.fan_in, layer.fan_out);
        // dW = dZᵀ·X
        gemm(
            fan_out,
            batch,
            fan_in,
            &dz,
            (1, fan_out),
            x,
            (fan_in, 1),
            0.0,
            &mut grad[layer.weights()],
        );
        let db = &mut grad[layer.bias()];
        for row in dz.chunks_exact(fan_out) {
            for (b, g) in db.iter_mut().zip(row) {
                *b += g;
            }
        }
        // dX = dZ·W
        let mut dx = vec![0.0; batch * fan_in];
        gemm(
            batch,
            fan_out,
            fan_in,
            &dz,
            (fan_out, 1),
            &theta[layer.weights()],
            (fan_in, 1),
            0.0,
            &mut dx,
        );
        if l > 0 {
            for (g, z) in dx.iter_mut().zip(&tape.pre[l - 1]) {
                if *z <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        dz = dx;
    }
    Ok((grad, dz))
}
