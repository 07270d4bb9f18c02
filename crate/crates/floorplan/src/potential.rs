//! Potential energy of one module in the solved field and its partial
//! derivatives, in two flavors: the exact spectral sums and a bin-based
//! approximation whose cost is linear in the number of spanned bins.

use std::f64::consts::PI;

use crate::field::FieldGrid;
use crate::model::{ModuleSpec, ModuleState};

/// Index of the bin whose interior contains coordinates just below x.
/// At exact bin boundaries this picks the lower bin, except at 0.
pub fn up(x: f64) -> usize {
    assert!(x >= 0.0, "up({x})");
    if x == 0.0 {
        0
    } else {
        (x.ceil() as usize) - 1
    }
}

pub fn down(x: f64) -> usize {
    assert!(x >= 0.0, "down({x})");
    x.floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinSpan {
    pub x_lo: usize,
    pub x_hi: usize,
    pub y_lo: usize,
    pub y_hi: usize,
}

/// Inclusive bin index ranges covered by the module rectangle. Coordinates
/// are clamped so that excursions outside the outline (which happen on trial
/// points of the line search) still map to valid indices.
pub fn bin_span(spec: &ModuleSpec, st: &ModuleState, grid: &FieldGrid) -> BinSpan {
    let h = spec.area / st.w;
    let kmax = grid.k - 1;
    let x0 = ((st.x - st.w / 2.0) / grid.bin_w).max(0.0);
    let x1 = ((st.x + st.w / 2.0) / grid.bin_w).max(0.0);
    let y0 = ((st.y - h / 2.0) / grid.bin_h).max(0.0);
    let y1 = ((st.y + h / 2.0) / grid.bin_h).max(0.0);
    let x_lo = down(x0).min(kmax);
    let x_hi = up(x1).clamp(x_lo, kmax);
    let y_lo = down(y0).min(kmax);
    let y_hi = up(y1).clamp(y_lo, kmax);
    BinSpan { x_lo, x_hi, y_lo, y_hi }
}

/// Widths of the uncovered strips between the module edges and the outer
/// edges of its boundary bins, clamped to one bin so that out-of-outline
/// trial states degrade to the clipped rectangle.
struct Strips {
    left: f64,
    right: f64,
    bot: f64,
    top: f64,
}

fn strips(spec: &ModuleSpec, st: &ModuleState, span: &BinSpan, grid: &FieldGrid) -> Strips {
    let h = spec.area / st.w;
    Strips {
        left: ((st.x - st.w / 2.0) - span.x_lo as f64 * grid.bin_w).clamp(0.0, grid.bin_w),
        right: ((span.x_hi + 1) as f64 * grid.bin_w - (st.x + st.w / 2.0))
            .clamp(0.0, grid.bin_w),
        bot: ((st.y - h / 2.0) - span.y_lo as f64 * grid.bin_h).clamp(0.0, grid.bin_h),
        top: ((span.y_hi + 1) as f64 * grid.bin_h - (st.y + h / 2.0)).clamp(0.0, grid.bin_h),
    }
}

/// Per-axis sine differences over the module edges, used by the exact sums:
/// `dsx[u] = sin(u pi (x+w/2)/W) - sin(u pi (x-w/2)/W)` and the matching
/// cosine difference and cosine sum.
fn axis_tables(lo: f64, hi: f64, extent: f64, k: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut dsin = vec![0.0; k];
    let mut dcos = vec![0.0; k];
    let mut scos = vec![0.0; k];
    for u in 1..k {
        let a = u as f64 * PI * hi / extent;
        let b = u as f64 * PI * lo / extent;
        dsin[u] = a.sin() - b.sin();
        dcos[u] = a.cos() - b.cos();
        scos[u] = a.cos() + b.cos();
    }
    (dsin, dcos, scos)
}

/// Integral of the spectral potential over the module rectangle.
pub fn energy_exact(spec: &ModuleSpec, st: &ModuleState, grid: &FieldGrid) -> f64 {
    let k = grid.k;
    let h = spec.area / st.w;
    let (dsx, _, _) = axis_tables(st.x - st.w / 2.0, st.x + st.w / 2.0, grid.w, k);
    let (dsy, _, _) = axis_tables(st.y - h / 2.0, st.y + h / 2.0, grid.h, k);
    let mut total = 0.0;
    for u in 1..k {
        let fu = grid.w / (u as f64 * PI);
        let row = &grid.coeff[u * k..(u + 1) * k];
        let mut inner = 0.0;
        for p in 1..k {
            inner += row[p] * (grid.h / (p as f64 * PI)) * dsy[p];
        }
        total += fu * dsx[u] * inner;
        total += row[0] * fu * dsx[u] * h;
    }
    for p in 1..k {
        total += grid.coeff[p] * (grid.h / (p as f64 * PI)) * dsy[p] * st.w;
    }
    total
}

/// Closed-form partial derivatives of `energy_exact` with respect to the
/// center coordinates and (for soft modules) the width.
pub fn grad_exact(spec: &ModuleSpec, st: &ModuleState, grid: &FieldGrid) -> (f64, f64, f64) {
    let k = grid.k;
    let h = spec.area / st.w;
    let dh_dw = -spec.area / (st.w * st.w);
    let (dsx, dcx, scx) = axis_tables(st.x - st.w / 2.0, st.x + st.w / 2.0, grid.w, k);
    let (dsy, dcy, scy) = axis_tables(st.y - h / 2.0, st.y + h / 2.0, grid.h, k);
    let soft = spec.is_soft();

    let mut gx = 0.0;
    let mut gy = 0.0;
    let mut gw = 0.0;
    for u in 1..k {
        let uf = u as f64;
        let fu = grid.w / (uf * PI);
        let row = &grid.coeff[u * k..(u + 1) * k];
        let mut sum_sy = 0.0; // sum_p a_up (H/p pi) dsy[p]
        let mut sum_dy = 0.0; // sum_p a_up dcy[p]
        let mut sum_cy = 0.0; // sum_p a_up (H/p pi) dsx-partner for width: scy with p pi/2H factor
        for p in 1..k {
            let fp = grid.h / (p as f64 * PI);
            sum_sy += row[p] * fp * dsy[p];
            sum_dy += row[p] * dcy[p];
            sum_cy += row[p] * scy[p];
        }
        gx += dcx[u] * sum_sy + row[0] * dcx[u] * h;
        gy += fu * dsx[u] * sum_dy;
        if soft {
            // d(dsx)/dw = (u pi / 2W) scx ; d(dsy)/dw = (p pi / 2H) scy dh_dw
            gw += (scx[u] / 2.0) * sum_sy + fu * dsx[u] * (dh_dw / 2.0) * sum_cy;
            gw += row[0] * fu * ((uf * PI / (2.0 * grid.w)) * scx[u] * h + dsx[u] * dh_dw);
        }
    }
    let mut sum0_dy = 0.0;
    let mut sum0_sy = 0.0;
    let mut sum0_cy = 0.0;
    for p in 1..k {
        let fp = grid.h / (p as f64 * PI);
        sum0_dy += grid.coeff[p] * dcy[p];
        sum0_sy += grid.coeff[p] * fp * dsy[p];
        sum0_cy += grid.coeff[p] * scy[p];
    }
    gy += sum0_dy * st.w;
    if soft {
        gw += sum0_sy + (dh_dw / 2.0) * sum0_cy * st.w;
    }
    (gx, gy, if soft { gw } else { 0.0 })
}

/// Rectangle-rule approximation of the energy: full spanned bins, minus the
/// four uncovered edge strips, plus the doubly subtracted corners. The box
/// sums come from precomputed prefix sums, so one call is O(1).
pub fn energy_fast(spec: &ModuleSpec, st: &ModuleState, grid: &FieldGrid) -> f64 {
    let span = bin_span(spec, st, grid);
    let s = strips(spec, st, &span, grid);
    let (bw, bh) = (grid.bin_w, grid.bin_h);
    let full = grid.psi_box_sum(span.x_lo, span.x_hi, span.y_lo, span.y_hi) * bw * bh;
    let left = grid.psi_box_sum(span.x_lo, span.x_lo, span.y_lo, span.y_hi) * s.left * bh;
    let right = grid.psi_box_sum(span.x_hi, span.x_hi, span.y_lo, span.y_hi) * s.right * bh;
    let bot = grid.psi_box_sum(span.x_lo, span.x_hi, span.y_lo, span.y_lo) * s.bot * bw;
    let top = grid.psi_box_sum(span.x_lo, span.x_hi, span.y_hi, span.y_hi) * s.top * bw;
    let corners = s.left * s.bot * grid.psi_at(span.x_lo, span.y_lo)
        + s.left * s.top * grid.psi_at(span.x_lo, span.y_hi)
        + s.right * s.bot * grid.psi_at(span.x_hi, span.y_lo)
        + s.right * s.top * grid.psi_at(span.x_hi, span.y_hi);
    full - left - right - bot - top + corners
}

#[derive(Debug, Clone, Copy)]
pub struct FastGrad {
    pub gx: f64,
    pub gy: f64,
    pub gw: f64,
    /// Number of potential samples read; bounded by twice the span
    /// perimeter plus the four corners.
    pub samples: usize,
}

/// Derivatives of `energy_fast` at fixed bin span. Walks the two boundary
/// bin columns and the two boundary bin rows once each.
pub fn grad_fast(spec: &ModuleSpec, st: &ModuleState, grid: &FieldGrid) -> FastGrad {
    let span = bin_span(spec, st, grid);
    let s = strips(spec, st, &span, grid);
    let (bw, bh) = (grid.bin_w, grid.bin_h);
    let soft = spec.is_soft();
    let area = spec.area;
    let w2 = st.w * st.w;
    let mut samples = 0usize;

    let mut col_diff = 0.0; // sum_q psi(x_hi,q) - psi(x_lo,q)
    let mut col_sum = 0.0; // sum_q psi(x_lo,q) + psi(x_hi,q)
    for q in span.y_lo..=span.y_hi {
        let lo = grid.psi_at(span.x_lo, q);
        let hi = grid.psi_at(span.x_hi, q);
        samples += 2;
        col_diff += hi - lo;
        col_sum += hi + lo;
    }
    let mut row_diff = 0.0; // sum_p psi(p,y_hi) - psi(p,y_lo)
    let mut row_sum = 0.0;
    for p in span.x_lo..=span.x_hi {
        let lo = grid.psi_at(p, span.y_lo);
        let hi = grid.psi_at(p, span.y_hi);
        samples += 2;
        row_diff += hi - lo;
        row_sum += hi + lo;
    }
    let c_ll = grid.psi_at(span.x_lo, span.y_lo);
    let c_lu = grid.psi_at(span.x_lo, span.y_hi);
    let c_ul = grid.psi_at(span.x_hi, span.y_lo);
    let c_uu = grid.psi_at(span.x_hi, span.y_hi);
    samples += 4;

    let gx = bh * col_diff + s.bot * (c_ll - c_ul) + s.top * (c_lu - c_uu);
    let gy = bw * row_diff + s.left * (c_ll - c_lu) + s.right * (c_ul - c_uu);
    let gw = if soft {
        (bh / 2.0) * col_sum - (area * bw / (2.0 * w2)) * row_sum
            - (s.bot / 2.0) * (c_ll + c_ul)
            - (s.top / 2.0) * (c_lu + c_uu)
            + (area / (2.0 * w2)) * (s.left * (c_ll + c_lu) + s.right * (c_ul + c_uu))
    } else {
        0.0
    };
    FastGrad { gx, gy, gw, samples }
}
