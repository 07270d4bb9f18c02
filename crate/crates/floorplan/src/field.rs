//! Density rasterization onto a K x K bin grid and the spectral solution of
//! the Neumann Poisson problem driven by that density.
//!
//! The solve expands the mean-free density in the half-sample cosine basis,
//! divides each mode by pi^2 (u^2/W^2 + p^2/H^2), and transforms back. The
//! zero mode is dropped, which is what makes the problem well posed.

use thiserror::Error;

use crate::dct::Dct2d;
use crate::model::Floorplan;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("module {0} lies fully outside the outline")]
    ModuleOutside(usize),
}

/// Smallest power of two at least sqrt(n), clamped to [64, 512].
pub fn default_grid_size(n: usize) -> usize {
    let root = (n as f64).sqrt().ceil() as usize;
    let pow2 = root.max(1).next_power_of_two();
    pow2.clamp(64, 512)
}

/// Bin densities: `rho[i*k+j]` is the covered fraction of the bin with x
/// index i and y index j. Values above 1 mean geometric overlap (or a bin
/// shared by more area than it holds); no clamping happens here.
pub fn rasterize_density(fp: &Floorplan, k: usize) -> Result<Vec<f64>, FieldError> {
    assert!(k >= 2);
    let (w, h) = (fp.outline.w, fp.outline.h);
    let (bw, bh) = (w / k as f64, h / k as f64);
    let inv_bin_area = 1.0 / (bw * bh);
    let mut rho = vec![0.0; k * k];
    for i in 0..fp.len() {
        let r = fp.rect(i);
        let lx = r.lx.max(0.0);
        let ux = r.ux.min(w);
        let ly = r.ly.max(0.0);
        let uy = r.uy.min(h);
        if lx >= ux || ly >= uy {
            return Err(FieldError::ModuleOutside(i));
        }
        let ix0 = ((lx / bw) as usize).min(k - 1);
        let ix1 = ((ux / bw) as usize).min(k - 1);
        let iy0 = ((ly / bh) as usize).min(k - 1);
        let iy1 = ((uy / bh) as usize).min(k - 1);
        for ix in ix0..=ix1 {
            let ow = ux.min((ix + 1) as f64 * bw) - lx.max(ix as f64 * bw);
            if ow <= 0.0 {
                continue;
            }
            for iy in iy0..=iy1 {
                let oh = uy.min((iy + 1) as f64 * bh) - ly.max(iy as f64 * bh);
                if oh > 0.0 {
                    rho[ix * k + iy] += ow * oh * inv_bin_area;
                }
            }
        }
    }
    Ok(rho)
}

pub fn subtract_mean(grid: &mut [f64]) {
    let mean = grid.iter().sum::<f64>() / grid.len() as f64;
    for v in grid.iter_mut() {
        *v -= mean;
    }
}

/// Spectral solve of `-laplace(psi) = rho'` with zero-flux boundaries.
/// Returns the normalized mode coefficients `a[u*k+p]` (so that
/// `psi(x,y) = sum a_up cos(pi u x / W) cos(pi p y / H)`) and the potential
/// sampled at bin centers, laid out like the input grid.
pub fn solve_potential(rho_mean_free: &[f64], k: usize, w: f64, h: f64) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(rho_mean_free.len(), k * k);
    let dct = Dct2d::new(k);
    let mut b = rho_mean_free.to_vec();
    dct.forward(&mut b);
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let mut coeff = vec![0.0; k * k];
    for u in 0..k {
        for p in 0..k {
            if u == 0 && p == 0 {
                b[0] = 0.0;
                continue;
            }
            let lambda = pi2 * ((u * u) as f64 / (w * w) + (p * p) as f64 / (h * h));
            b[u * k + p] /= lambda;
            let cu = if u == 0 { 1.0 } else { 2.0 } / k as f64;
            let cp = if p == 0 { 1.0 } else { 2.0 } / k as f64;
            coeff[u * k + p] = cu * cp * b[u * k + p];
        }
    }
    let mut psi = b;
    dct.inverse(&mut psi);
    (coeff, psi)
}

/// One built field: raw densities, mode coefficients, potential samples, and
/// inclusive prefix sums of the potential for O(1) box queries.
pub struct FieldGrid {
    pub k: usize,
    pub w: f64,
    pub h: f64,
    pub bin_w: f64,
    pub bin_h: f64,
    pub rho: Vec<f64>,
    pub coeff: Vec<f64>,
    pub psi: Vec<f64>,
    psi_prefix: Vec<f64>,
}

fn prefix_sums(k: usize, psi: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; (k + 1) * (k + 1)];
    for i in 0..k {
        for j in 0..k {
            p[(i + 1) * (k + 1) + (j + 1)] = psi[i * k + j] + p[i * (k + 1) + (j + 1)]
                + p[(i + 1) * (k + 1) + j]
                - p[i * (k + 1) + j];
        }
    }
    p
}

impl FieldGrid {
    pub fn build(fp: &Floorplan, k: usize) -> Result<FieldGrid, FieldError> {
        let rho = rasterize_density(fp, k)?;
        let mut balanced = rho.clone();
        subtract_mean(&mut balanced);
        let (coeff, psi) = solve_potential(&balanced, k, fp.outline.w, fp.outline.h);
        let psi_prefix = prefix_sums(k, &psi);
        Ok(FieldGrid {
            k,
            w: fp.outline.w,
            h: fp.outline.h,
            bin_w: fp.outline.w / k as f64,
            bin_h: fp.outline.h / k as f64,
            rho,
            coeff,
            psi,
            psi_prefix,
        })
    }

    /// Builds a grid around a given potential sample array; densities and
    /// coefficients stay empty. Only useful for targeted tests.
    #[cfg(test)]
    pub(crate) fn from_psi(k: usize, w: f64, h: f64, psi: Vec<f64>) -> FieldGrid {
        assert_eq!(psi.len(), k * k);
        let psi_prefix = prefix_sums(k, &psi);
        FieldGrid {
            k,
            w,
            h,
            bin_w: w / k as f64,
            bin_h: h / k as f64,
            rho: vec![0.0; k * k],
            coeff: vec![0.0; k * k],
            psi,
            psi_prefix,
        }
    }

    #[inline]
    pub fn psi_at(&self, ix: usize, iy: usize) -> f64 {
        self.psi[ix * self.k + iy]
    }

    /// Sum of psi over the inclusive bin box [x0..=x1] x [y0..=y1].
    #[inline]
    pub fn psi_box_sum(&self, x0: usize, x1: usize, y0: usize, y1: usize) -> f64 {
        let s = self.k + 1;
        self.psi_prefix[(x1 + 1) * s + (y1 + 1)] - self.psi_prefix[x0 * s + (y1 + 1)]
            - self.psi_prefix[(x1 + 1) * s + y0]
            + self.psi_prefix[x0 * s + y0]
    }

    /// Total density excess over capacity 1, summed across bins. Multiplied
    /// by 100 this is the percentage overlap-rate metric reported at exit.
    pub fn overflow_sum(&self) -> f64 {
        self.rho.iter().map(|&r| (r - 1.0).max(0.0)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Floorplan, ModuleKind, ModuleSpec, ModuleState, Netlist, Outline};
    use std::f64::consts::PI;

    fn plan_with_rects(outline: Outline, rects: &[(f64, f64, f64, f64)]) -> Floorplan {
        let mut specs = Vec::new();
        let mut states = Vec::new();
        for (i, &(lx, ly, w, h)) in rects.iter().enumerate() {
            specs.push(ModuleSpec {
                id: i,
                name: format!("m{i}"),
                kind: ModuleKind::Hard,
                area: w * h,
                w0: w,
                h0: h,
            });
            states.push(ModuleState { x: lx + w / 2.0, y: ly + h / 2.0, w });
        }
        Floorplan { outline, specs, states, netlist: Netlist::default() }
    }

    #[test]
    fn single_bin_module_rasterizes_to_one() {
        let fp = plan_with_rects(Outline::new(4.0, 4.0), &[(0.0, 0.0, 1.0, 1.0)]);
        let rho = rasterize_density(&fp, 4).unwrap();
        assert!((rho[0] - 1.0).abs() < 1e-12);
        assert!(rho[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn half_bin_coverage_is_half() {
        let fp = plan_with_rects(Outline::new(4.0, 4.0), &[(1.0, 1.0, 0.5, 1.0)]);
        let rho = rasterize_density(&fp, 4).unwrap();
        assert!((rho[4 + 1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rasterization_conserves_area() {
        let fp = plan_with_rects(
            Outline::new(10.0, 8.0),
            &[(0.3, 0.7, 2.9, 1.1), (4.0, 2.0, 3.0, 3.0), (6.1, 5.2, 2.7, 2.3)],
        );
        for k in [2, 7, 16, 33] {
            let rho = rasterize_density(&fp, k).unwrap();
            let bin_area = (10.0 / k as f64) * (8.0 / k as f64);
            let total: f64 = rho.iter().sum::<f64>() * bin_area;
            assert!(
                (total - fp.total_area()).abs() < 1e-9 * fp.total_area(),
                "k={k}: {total}"
            );
        }
    }

    #[test]
    fn module_outside_outline_is_an_error() {
        let fp = plan_with_rects(Outline::new(4.0, 4.0), &[(5.0, 1.0, 1.0, 1.0)]);
        assert!(matches!(rasterize_density(&fp, 4), Err(FieldError::ModuleOutside(0))));
    }

    #[test]
    fn mean_subtraction_examples() {
        let mut g = vec![3.0; 9];
        subtract_mean(&mut g);
        assert!(g.iter().all(|&v| v.abs() < 1e-15));

        let mut g = vec![0.0, 2.0];
        subtract_mean(&mut g);
        assert_eq!(g, vec![-1.0, 1.0]);

        let mut g = vec![0.5, 1.5, -3.0, 7.0];
        subtract_mean(&mut g);
        let twice = g.clone();
        subtract_mean(&mut g);
        for (a, b) in g.iter().zip(&twice) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_density_gives_zero_potential() {
        let (coeff, psi) = solve_potential(&vec![0.0; 64], 8, 2.0, 3.0);
        assert!(coeff.iter().all(|&v| v == 0.0));
        assert!(psi.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn cosine_eigenfunction_is_solved_exactly() {
        let (w, h, k) = (2.0, 1.0, 128);
        let mut rho = vec![0.0; k * k];
        for i in 0..k {
            let x = (i as f64 + 0.5) * w / k as f64;
            for j in 0..k {
                rho[i * k + j] = (PI * x / w).cos();
            }
        }
        let (_, psi) = solve_potential(&rho, k, w, h);
        let scale = w * w / (PI * PI);
        for i in 0..k {
            let x = (i as f64 + 0.5) * w / k as f64;
            let want = scale * (PI * x / w).cos();
            for j in 0..k {
                let got = psi[i * k + j];
                assert!(
                    (got - want).abs() <= 1e-9 * scale,
                    "bin ({i},{j}): {got} vs {want}"
                );
            }
        }
    }

    fn smooth_density(k: usize, w: f64, h: f64) -> Vec<f64> {
        let mut rho = vec![0.0; k * k];
        for i in 0..k {
            let x = (i as f64 + 0.5) * w / k as f64;
            for j in 0..k {
                let y = (j as f64 + 0.5) * h / k as f64;
                rho[i * k + j] =
                    (2.0 * PI * x / w).cos() * (PI * y / h).cos() + 0.3 * (3.0 * PI * x / w).cos();
            }
        }
        subtract_mean(&mut rho);
        rho
    }

    fn max_laplace_residual(k: usize, w: f64, h: f64) -> f64 {
        let rho = smooth_density(k, w, h);
        let (_, psi) = solve_potential(&rho, k, w, h);
        let (bw, bh) = (w / k as f64, h / k as f64);
        let mut worst: f64 = 0.0;
        for i in 1..k - 1 {
            for j in 1..k - 1 {
                let lap = (psi[(i + 1) * k + j] - 2.0 * psi[i * k + j] + psi[(i - 1) * k + j])
                    / (bw * bw)
                    + (psi[i * k + j + 1] - 2.0 * psi[i * k + j] + psi[i * k + j - 1]) / (bh * bh);
                worst = worst.max((-lap - rho[i * k + j]).abs());
            }
        }
        worst
    }

    #[test]
    fn laplacian_residual_shrinks_quadratically() {
        let (w, h) = (3.0, 2.0);
        let r32 = max_laplace_residual(32, w, h);
        let r64 = max_laplace_residual(64, w, h);
        let r128 = max_laplace_residual(128, w, h);
        assert!(r64 < 0.35 * r32, "{r32} -> {r64}");
        assert!(r128 < 0.35 * r64, "{r64} -> {r128}");
    }

    #[test]
    fn boundary_slope_vanishes_with_refinement() {
        let (w, h) = (3.0, 2.0);
        let k = 128;
        let rho = smooth_density(k, w, h);
        let (_, psi) = solve_potential(&rho, k, w, h);
        let mut interior: f64 = 0.0;
        for i in 1..k - 2 {
            for j in 0..k {
                interior = interior.max((psi[(i + 1) * k + j] - psi[i * k + j]).abs());
            }
        }
        let mut boundary: f64 = 0.0;
        for j in 0..k {
            boundary = boundary.max((psi[k + j] - psi[j]).abs());
            boundary = boundary.max((psi[(k - 1) * k + j] - psi[(k - 2) * k + j]).abs());
        }
        assert!(boundary <= 10.0 * interior / k as f64, "{boundary} vs {interior}");
    }

    #[test]
    fn field_energy_is_nonnegative_and_psi_mean_free() {
        let fp = plan_with_rects(
            Outline::new(6.0, 6.0),
            &[(0.0, 0.0, 2.0, 2.0), (1.0, 1.0, 2.5, 2.0), (4.0, 3.0, 1.5, 2.5)],
        );
        let grid = FieldGrid::build(&fp, 32).unwrap();
        let mut balanced = grid.rho.clone();
        subtract_mean(&mut balanced);
        let dot: f64 = balanced.iter().zip(&grid.psi).map(|(r, p)| r * p).sum();
        assert!(dot >= -1e-12);
        let mean: f64 = grid.psi.iter().sum::<f64>() / grid.psi.len() as f64;
        let scale: f64 = grid.psi.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(mean.abs() <= 1e-9 * scale.max(1e-300));
    }

    #[test]
    fn constant_shift_leaves_potential_unchanged() {
        let k = 16;
        let mut a = smooth_density(k, 1.0, 1.0);
        let (_, psi_a) = solve_potential(&a, k, 1.0, 1.0);
        for v in a.iter_mut() {
            *v += 5.0;
        }
        subtract_mean(&mut a);
        let (_, psi_b) = solve_potential(&a, k, 1.0, 1.0);
        for (x, y) in psi_a.iter().zip(&psi_b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn prefix_sums_answer_box_queries() {
        let fp = plan_with_rects(Outline::new(4.0, 4.0), &[(0.5, 0.5, 3.0, 2.0)]);
        let grid = FieldGrid::build(&fp, 8).unwrap();
        let direct: f64 = (2..=5)
            .flat_map(|i| (1..=6).map(move |j| (i, j)))
            .map(|(i, j)| grid.psi_at(i, j))
            .sum();
        assert!((grid.psi_box_sum(2, 5, 1, 6) - direct).abs() < 1e-12);
    }

    #[test]
    fn default_grid_sizes() {
        assert_eq!(default_grid_size(10), 64);
        assert_eq!(default_grid_size(5000), 128);
        assert_eq!(default_grid_size(40000), 256);
        assert_eq!(default_grid_size(1_000_000), 512);
    }

    #[test]
    fn overflow_sum_counts_density_excess() {
        let fp = plan_with_rects(
            Outline::new(2.0, 2.0),
            &[(0.0, 0.0, 1.0, 1.0), (0.0, 0.0, 1.0, 1.0)],
        );
        let grid = FieldGrid::build(&fp, 2).unwrap();
        assert!((grid.overflow_sum() - 1.0).abs() < 1e-12);
    }
}
