//! Half-perimeter wirelength and its log-sum-exp smoothing.
//!
//! Pin positions depend on module centers and, through the percent offsets,
//! on soft module widths, so the smooth model also yields a width gradient.

use crate::model::{Floorplan, PinRef};

/// Exact half-perimeter wirelength over all nets.
pub fn hpwl(fp: &Floorplan) -> f64 {
    let mut total = 0.0;
    for net in &fp.netlist.nets {
        if net.pins.is_empty() {
            continue;
        }
        let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for pin in &net.pins {
            let (px, py) = fp.pin_position(pin);
            xmin = xmin.min(px);
            xmax = xmax.max(px);
            ymin = ymin.min(py);
            ymax = ymax.max(py);
        }
        total += (xmax - xmin) + (ymax - ymin);
    }
    total
}

/// Smoothed span of one coordinate list:
/// `gamma ln sum exp(c/gamma) + gamma ln sum exp(-c/gamma)`.
/// The largest (resp. smallest) value is factored out before exponentiation.
fn lse_span(coords: &[f64], gamma: f64) -> f64 {
    let mut cmax = f64::NEG_INFINITY;
    let mut cmin = f64::INFINITY;
    for &c in coords {
        cmax = cmax.max(c);
        cmin = cmin.min(c);
    }
    let mut s_hi = 0.0;
    let mut s_lo = 0.0;
    for &c in coords {
        s_hi += ((c - cmax) / gamma).exp();
        s_lo += ((cmin - c) / gamma).exp();
    }
    gamma * s_hi.ln() + cmax + gamma * s_lo.ln() - cmin
}

/// Gradients of the smooth wirelength with respect to module centers and
/// soft module widths.
#[derive(Debug, Clone)]
pub struct WlGrad {
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub gw: Vec<f64>,
}

impl WlGrad {
    pub fn zeros(n: usize) -> Self {
        WlGrad { gx: vec![0.0; n], gy: vec![0.0; n], gw: vec![0.0; n] }
    }
}

/// Smooth wirelength of the whole netlist.
pub fn lse(fp: &Floorplan, gamma: f64) -> f64 {
    let mut total = 0.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for net in &fp.netlist.nets {
        if net.pins.len() < 2 {
            continue;
        }
        xs.clear();
        ys.clear();
        for pin in &net.pins {
            let (px, py) = fp.pin_position(pin);
            xs.push(px);
            ys.push(py);
        }
        total += lse_span(&xs, gamma) + lse_span(&ys, gamma);
    }
    total
}

/// Smooth wirelength together with its gradient. Pads contribute to the
/// softmax weights but receive no gradient; hard modules get no width term.
pub fn lse_grad(fp: &Floorplan, gamma: f64) -> (f64, WlGrad) {
    let n = fp.len();
    let mut grad = WlGrad::zeros(n);
    let mut total = 0.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut wx = Vec::new();
    let mut wy = Vec::new();

    for net in &fp.netlist.nets {
        if net.pins.len() < 2 {
            continue;
        }
        xs.clear();
        ys.clear();
        for pin in &net.pins {
            let (px, py) = fp.pin_position(pin);
            xs.push(px);
            ys.push(py);
        }
        total += lse_span(&xs, gamma) + lse_span(&ys, gamma);

        for (coords, weights) in [(&xs, &mut wx), (&ys, &mut wy)] {
            weights.clear();
            let mut cmax = f64::NEG_INFINITY;
            let mut cmin = f64::INFINITY;
            for &c in coords.iter() {
                cmax = cmax.max(c);
                cmin = cmin.min(c);
            }
            let mut s_hi = 0.0;
            let mut s_lo = 0.0;
            for &c in coords.iter() {
                s_hi += ((c - cmax) / gamma).exp();
                s_lo += ((cmin - c) / gamma).exp();
            }
            for &c in coords.iter() {
                let d = ((c - cmax) / gamma).exp() / s_hi
                    - ((cmin - c) / gamma).exp() / s_lo;
                weights.push(d);
            }
        }

        for (k, pin) in net.pins.iter().enumerate() {
            let PinRef::Block(i) = pin.target else { continue };
            grad.gx[i] += wx[k];
            grad.gy[i] += wy[k];
            if fp.specs[i].is_soft() {
                let st = &fp.states[i];
                let h = fp.height(i);
                grad.gw[i] += wx[k] * pin.fx - wy[k] * pin.fy * h / st.w;
            }
        }
    }
    (total, grad)
}
