//! Finite-difference checking of [`QNetwork::backward`].

use super::network::{GradientBuffer, QNetwork, Workspace};
use crate::error::Result;

/// `sum(forward(input) * output_grad)`, the scalar whose gradient
/// `backward(output_grad)` computes.
pub fn probe_loss(net: &QNetwork<f64>, ws: &mut Workspace<f64>, input: &[f64], batch: usize, output_grad: &[f64]) -> Result<f64> {
    let q = net.forward(ws, input, batch)?;
    Ok(q.iter().zip(output_grad).map(|(a, b)| a * b).sum())
}

/// Central-difference estimate of every parameter derivative.
pub fn numeric_gradient(net: &mut QNetwork<f64>, input: &[f64], batch: usize, output_grad: &[f64], step: f64) -> Result<Vec<f64>> {
    let mut ws = Workspace::new(net, batch);
    let mut out = Vec::with_capacity(net.num_params());
    for i in 0..net.num_params() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + step;
        let plus = probe_loss(net, &mut ws, input, batch, output_grad)?;
        net.params_mut()[i] = orig - step;
        let minus = probe_loss(net, &mut ws, input, batch, output_grad)?;
        net.params_mut()[i] = orig;
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(out)
}

pub fn analytic_gradient(net: &QNetwork<f64>, input: &[f64], batch: usize, output_grad: &[f64]) -> Result<Vec<f64>> {
    let mut ws = Workspace::new(net, batch);
    net.forward(&mut ws, input, batch)?;
    let mut g = GradientBuffer::for_network(net);
    net.backward(&mut ws, output_grad, &mut g)?;
    Ok(g.as_slice().to_vec())
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Smallest absolute pre-activation feeding any ReLU in the last forward
/// pass. Finite differences straddling a kink are meaningless, so callers
/// reject instances where this is below the step size.
pub fn min_relu_margin(net: &QNetwork<f64>, input: &[f64], batch: usize) -> Result<f64> {
    let mut ws = Workspace::new(net, batch);
    net.forward(&mut ws, input, batch)?;
    let mut margin = f64::INFINITY;
    for (i, layer) in net.topology().layers.iter().enumerate() {
        if *layer == super::topology::LayerSpec::Relu {
            for &v in ws.activation(i) {
                margin = margin.min(v.abs());
            }
        }
    }
    Ok(margin)
}
