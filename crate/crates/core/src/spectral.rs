//! Neumann Poisson solver on a cell-centered grid.
//!
//! The 5-point Laplacian with mirrored ghost cells is diagonalized by the
//! type-II cosine transform, so a solve is forward transform, division by
//! the discrete eigenvalues, inverse transform. Coefficients carry a factor
//! `sqrt(hx * hy)` so that `Σ α² = ∫ f²` holds literally on the grid.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{PefError, Result};
use crate::field::{Grid, ScalarField};
use crate::par;

/// Relative tolerance on the mean of a field that is meant to be zero-mean.
pub const ZERO_MEAN_TOLERANCE: f64 = 1e-10;

/// How the 1-D cosine transforms are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransformBackend {
    /// FFT-based transforms from `rustdct`.
    #[default]
    Fast,
    /// Products with precomputed orthogonal cosine matrices.
    Dense,
}

enum AxisTransform {
    Fast {
        dct2: Arc<dyn TransformType2And3<f64>>,
        scratch_len: usize,
    },
    Dense {
        // row k holds s_k cos(π (i + ½) k / n)
        matrix: Array2<f64>,
    },
}

impl AxisTransform {
    fn new(n: usize, backend: TransformBackend) -> Self {
        match backend {
            TransformBackend::Fast => {
                let dct2 = DctPlanner::new().plan_dct2(n);
                let scratch_len = dct2.get_scratch_len();
                AxisTransform::Fast { dct2, scratch_len }
            }
            TransformBackend::Dense => {
                let nf = n as f64;
                let matrix = Array2::from_shape_fn((n, n), |(k, i)| {
                    let s = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                    s * (PI * (i as f64 + 0.5) * k as f64 / nf).cos()
                });
                AxisTransform::Dense { matrix }
            }
        }
    }

    fn forward(&self, row: &mut [f64]) {
        let n = row.len();
        match self {
            AxisTransform::Fast { dct2, scratch_len } => {
                let mut scratch = vec![0.0; *scratch_len];
                dct2.process_dct2_with_scratch(row, &mut scratch);
                let nf = n as f64;
                row[0] *= (1.0 / nf).sqrt();
                let s = (2.0 / nf).sqrt();
                row[1..].iter_mut().for_each(|v| *v *= s);
            }
            AxisTransform::Dense { matrix } => {
                let input = row.to_vec();
                for (k, out) in row.iter_mut().enumerate() {
                    *out = matrix.row(k).iter().zip(&input).map(|(c, x)| c * x).sum();
                }
            }
        }
    }

    fn inverse(&self, row: &mut [f64]) {
        let n = row.len();
        match self {
            AxisTransform::Fast { dct2, scratch_len } => {
                // rustdct's type-III halves the constant term
                let nf = n as f64;
                row[0] *= 2.0 * (1.0 / nf).sqrt();
                let s = (2.0 / nf).sqrt();
                row[1..].iter_mut().for_each(|v| *v *= s);
                let mut scratch = vec![0.0; *scratch_len];
                dct2.process_dct3_with_scratch(row, &mut scratch);
            }
            AxisTransform::Dense { matrix } => {
                let input = row.to_vec();
                for (i, out) in row.iter_mut().enumerate() {
                    *out = matrix.column(i).iter().zip(&input).map(|(c, x)| c * x).sum();
                }
            }
        }
    }
}

/// Cosine-basis coefficients of a field together with the matching
/// discrete Neumann eigenvalues.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub grid: Grid,
    pub coefficients: Array2<f64>,
    pub eigenvalues: Arc<Array2<f64>>,
}

impl Spectrum {
    /// Σ α² over all modes.
    pub fn parseval_sum(&self) -> f64 {
        self.coefficients.iter().map(|a| a * a).sum()
    }

    /// Σ α²/λ over the nonconstant modes.
    pub fn hminus1_norm_sq(&self) -> f64 {
        self.coefficients
            .iter()
            .zip(self.eigenvalues.iter())
            .skip(1)
            .map(|(a, l)| a * a / l)
            .sum()
    }
}

/// One cosine mode in the ascending eigenvalue order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub k: usize,
    pub l: usize,
    pub lambda: f64,
    pub lambda_continuum: f64,
    pub alpha: f64,
}

/// Precomputed transforms and eigenvalues for one grid. Immutable and
/// shareable across threads once built.
pub struct PoissonSolver {
    grid: Grid,
    backend: TransformBackend,
    x_axis: AxisTransform,
    y_axis: AxisTransform,
    eigenvalues: Arc<Array2<f64>>,
    // positive modes sorted by (λ, k, l)
    order: Vec<(usize, usize)>,
}

impl std::fmt::Debug for PoissonSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonSolver")
            .field("grid", &self.grid)
            .field("backend", &self.backend)
            .finish()
    }
}

/// `(2 − 2cos(kπ/n)) / h²`, written in the cancellation-free sine form.
pub fn discrete_eigenvalue_1d(k: usize, n: usize, h: f64) -> f64 {
    let s = (k as f64 * PI / (2.0 * n as f64)).sin();
    4.0 * s * s / (h * h)
}

impl PoissonSolver {
    pub fn new(grid: Grid) -> Self {
        Self::with_backend(grid, TransformBackend::Fast)
    }

    pub fn with_backend(grid: Grid, backend: TransformBackend) -> Self {
        let (hx, hy) = (grid.hx(), grid.hy());
        let ex: Vec<f64> = (0..grid.nx).map(|k| discrete_eigenvalue_1d(k, grid.nx, hx)).collect();
        let ey: Vec<f64> = (0..grid.ny).map(|l| discrete_eigenvalue_1d(l, grid.ny, hy)).collect();
        let eigenvalues = Array2::from_shape_fn((grid.nx, grid.ny), |(k, l)| ex[k] + ey[l]);
        let mut order: Vec<(usize, usize)> = (0..grid.nx)
            .flat_map(|k| (0..grid.ny).map(move |l| (k, l)))
            .filter(|&kl| kl != (0, 0))
            .collect();
        order.sort_by(|a, b| eigenvalues[*a].total_cmp(&eigenvalues[*b]).then(a.cmp(b)));
        Self {
            grid,
            backend,
            x_axis: AxisTransform::new(grid.nx, backend),
            y_axis: AxisTransform::new(grid.ny, backend),
            eigenvalues: Arc::new(eigenvalues),
            order,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn backend(&self) -> TransformBackend {
        self.backend
    }

    /// Discrete eigenvalues `λ_kl`, with `λ_00 = 0`.
    pub fn eigenvalues(&self) -> &Array2<f64> {
        &self.eigenvalues
    }

    /// `π²((k/W)² + (l/H)²)`, the eigenvalue of the continuous problem.
    pub fn continuum_eigenvalue(&self, k: usize, l: usize) -> f64 {
        let a = k as f64 / self.grid.width;
        let b = l as f64 / self.grid.height;
        PI * PI * (a * a + b * b)
    }

    /// Smallest positive discrete eigenvalue.
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[self.order[0]]
    }

    /// Largest discrete eigenvalue.
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[*self.order.last().expect("at least 4 modes")]
    }

    /// Number of nonconstant modes.
    pub fn positive_modes(&self) -> usize {
        self.order.len()
    }

    fn check_grid(&self, f: &ScalarField) -> Result<()> {
        if f.grid.nx != self.grid.nx || f.grid.ny != self.grid.ny {
            return Err(PefError::ShapeMismatch {
                what: "field grid",
                expected: self.grid.len(),
                actual: f.grid.len(),
            });
        }
        Ok(())
    }

    pub fn check_zero_mean(&self, f: &ScalarField) -> Result<()> {
        let mean = f.mean();
        let tolerance = ZERO_MEAN_TOLERANCE * f.max_abs();
        if mean.abs() > tolerance {
            return Err(PefError::NonZeroMeanInput { mean, tolerance });
        }
        Ok(())
    }

    fn transform(&self, values: &mut Array2<f64>, inverse: bool) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let apply = |axis: &AxisTransform, row: &mut [f64]| {
            if inverse {
                axis.inverse(row)
            } else {
                axis.forward(row)
            }
        };
        par::for_each_row(values.as_slice_mut().expect("standard layout"), ny, |_, row| {
            apply(&self.y_axis, row)
        });
        let mut t = values.t().as_standard_layout().into_owned();
        par::for_each_row(t.as_slice_mut().expect("standard layout"), nx, |_, row| {
            apply(&self.x_axis, row)
        });
        values.assign(&t.t());
    }

    /// Orthonormal type-II cosine transform scaled so that `Σ α² = ∫ f²`.
    pub fn cosine_forward(&self, f: &ScalarField) -> Result<Spectrum> {
        self.check_grid(f)?;
        let mut values = f.values.as_standard_layout().into_owned();
        self.transform(&mut values, false);
        values *= self.grid.cell_area().sqrt();
        Ok(Spectrum {
            grid: self.grid,
            coefficients: values,
            eigenvalues: Arc::clone(&self.eigenvalues),
        })
    }

    /// Inverse of [`cosine_forward`](Self::cosine_forward).
    pub fn cosine_inverse(&self, s: &Spectrum) -> ScalarField {
        let mut values = s.coefficients.as_standard_layout().into_owned();
        values /= self.grid.cell_area().sqrt();
        self.transform(&mut values, true);
        ScalarField {
            grid: self.grid,
            values,
        }
    }

    /// Spectrum of a zero-mean field with the constant mode cleared.
    pub fn zero_mean_spectrum(&self, f: &ScalarField) -> Result<Spectrum> {
        self.check_grid(f)?;
        self.check_zero_mean(f)?;
        let mut s = self.cosine_forward(f)?;
        s.coefficients[[0, 0]] = 0.0;
        Ok(s)
    }

    /// Solves `−Δφ = f` with Neumann boundary conditions and `Σ φ = 0`,
    /// returning `φ` and the spectrum of `f`.
    pub fn solve_with_spectrum(&self, f: &ScalarField) -> Result<(ScalarField, Spectrum)> {
        let s = self.zero_mean_spectrum(f)?;
        let mut phi_hat = s.coefficients.clone();
        phi_hat
            .iter_mut()
            .zip(self.eigenvalues.iter())
            .skip(1)
            .for_each(|(a, l)| *a /= l);
        let phi = self.cosine_inverse(&Spectrum {
            grid: self.grid,
            coefficients: phi_hat,
            eigenvalues: Arc::clone(&self.eigenvalues),
        });
        Ok((phi, s))
    }

    pub fn solve_poisson(&self, f: &ScalarField) -> Result<ScalarField> {
        self.solve_with_spectrum(f).map(|(phi, _)| phi)
    }

    /// The Green operator `(−Δ_N)⁻¹` on zero-mean fields.
    pub fn green_apply(&self, f: &ScalarField) -> Result<ScalarField> {
        self.solve_poisson(f)
    }

    /// `‖f‖²_{H⁻¹} = Σ α²/λ` over the nonconstant modes.
    pub fn hminus1_norm_sq(&self, f: &ScalarField) -> Result<f64> {
        Ok(self.zero_mean_spectrum(f)?.hminus1_norm_sq())
    }

    /// The `n` lowest nonconstant modes of `f`, ascending in `λ` with ties
    /// broken by `(k, l)`.
    pub fn spectral_coefficients(&self, f: &ScalarField, n: usize) -> Result<Vec<Mode>> {
        let s = self.zero_mean_spectrum(f)?;
        Ok(self.lowest_modes(&s, n))
    }

    pub fn lowest_modes(&self, s: &Spectrum, n: usize) -> Vec<Mode> {
        self.order
            .iter()
            .take(n)
            .map(|&(k, l)| Mode {
                k,
                l,
                lambda: self.eigenvalues[[k, l]],
                lambda_continuum: self.continuum_eigenvalue(k, l),
                alpha: s.coefficients[[k, l]],
            })
            .collect()
    }

    /// Every nonconstant mode in ascending order.
    pub fn all_modes(&self, s: &Spectrum) -> Vec<Mode> {
        self.lowest_modes(s, self.order.len())
    }
}

/// Cell-centered differences of `φ`; boundary cells use the mirrored ghost
/// value, so the normal derivative there is half a one-sided difference.
pub fn gradient_field(phi: &ScalarField) -> (ScalarField, ScalarField) {
    let g = phi.grid;
    let (nx, ny) = (g.nx, g.ny);
    let v = &phi.values;
    let (hx, hy) = (g.hx(), g.hy());
    let dx = Array2::from_shape_fn((nx, ny), |(i, j)| {
        let lo = if i == 0 { v[[0, j]] } else { v[[i - 1, j]] };
        let hi = if i + 1 == nx { v[[i, j]] } else { v[[i + 1, j]] };
        (hi - lo) / (2.0 * hx)
    });
    let dy = Array2::from_shape_fn((nx, ny), |(i, j)| {
        let lo = if j == 0 { v[[i, 0]] } else { v[[i, j - 1]] };
        let hi = if j + 1 == ny { v[[i, j]] } else { v[[i, j + 1]] };
        (hi - lo) / (2.0 * hy)
    });
    (
        ScalarField { grid: g, values: dx },
        ScalarField { grid: g, values: dy },
    )
}

/// `−Δ_h φ` with the 5-point stencil and mirrored ghost cells.
pub fn neumann_laplacian(phi: &ScalarField) -> ScalarField {
    let g = phi.grid;
    let (nx, ny) = (g.nx, g.ny);
    let v = &phi.values;
    let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let values = Array2::from_shape_fn((nx, ny), |(i, j)| {
        let c = v[[i, j]];
        let w = if i == 0 { c } else { v[[i - 1, j]] };
        let e = if i + 1 == nx { c } else { v[[i + 1, j]] };
        let s = if j == 0 { c } else { v[[i, j - 1]] };
        let n = if j + 1 == ny { c } else { v[[i, j + 1]] };
        (2.0 * c - w - e) * ihx2 + (2.0 * c - s - n) * ihy2
    });
    ScalarField { grid: g, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_zero_mean(grid: Grid, seed: u64) -> ScalarField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let f = ScalarField::from_values(
            grid,
            Array2::from_shape_fn((grid.nx, grid.ny), |_| rng.gen_range(-1.0..1.0)),
        )
        .unwrap();
        crate::field::residual(&f, 0.0)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn constant_field_has_only_the_constant_mode() {
        let g = Grid::new(12, 9, 2.0, 1.5).unwrap();
        let s = PoissonSolver::new(g).cosine_forward(&ScalarField::constant(g, 3.0)).unwrap();
        for ((k, l), a) in s.coefficients.indexed_iter() {
            if (k, l) == (0, 0) {
                // ∫ 3² over a 2 x 1.5 domain
                assert!((a * a - 27.0).abs() < 1e-12);
            } else {
                assert!(a.abs() < 1e-13, "({k},{l}) = {a}");
            }
        }
    }

    #[test]
    fn first_cosine_row_mode_is_a_single_coefficient() {
        let g = Grid::unit_square(16);
        let f = ScalarField::from_values(
            g,
            Array2::from_shape_fn((16, 16), |(i, _)| (PI * (i as f64 + 0.5) / 16.0).cos()),
        )
        .unwrap();
        let s = PoissonSolver::new(g).cosine_forward(&f).unwrap();
        for ((k, l), a) in s.coefficients.indexed_iter() {
            if (k, l) != (1, 0) {
                assert!(a.abs() < 1e-13);
            }
        }
        assert!(s.coefficients[[1, 0]].abs() > 0.1);
    }

    #[test]
    fn round_trip_and_backends_agree() {
        for (nx, ny) in [(16, 16), (24, 10), (7, 13)] {
            let g = Grid::new(nx, ny, 1.3, 0.7).unwrap();
            let f = random_zero_mean(g, nx as u64 * 31 + ny as u64);
            let fast = PoissonSolver::new(g);
            let dense = PoissonSolver::with_backend(g, TransformBackend::Dense);
            let a = fast.cosine_forward(&f).unwrap();
            let b = dense.cosine_forward(&f).unwrap();
            let scale = a.coefficients.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (x, y) in a.coefficients.iter().zip(b.coefficients.iter()) {
                assert!((x - y).abs() <= 1e-12 * scale);
            }
            for solver in [&fast, &dense] {
                let back = solver.cosine_inverse(&solver.cosine_forward(&f).unwrap());
                let err = (&back.values - &f.values).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(err <= 1e-13 * f.max_abs(), "{err}");
            }
            let pa = fast.solve_poisson(&f).unwrap();
            let pb = dense.solve_poisson(&f).unwrap();
            let err = (&pa.values - &pb.values).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err <= 1e-12 * pa.max_abs());
        }
    }

    #[test]
    fn eigenvalue_table() {
        let g = Grid::new(8, 4, 2.0, 1.0).unwrap();
        let s = PoissonSolver::new(g);
        assert_eq!(s.eigenvalues()[[0, 0]], 0.0);
        let hx = 0.25;
        let expect = (2.0 - 2.0 * (PI / 8.0).cos()) / (hx * hx);
        assert!(rel(s.eigenvalues()[[1, 0]], expect) < 1e-14);
        assert_eq!(s.lambda1(), s.eigenvalues()[[1, 0]]);
        let modes = s.all_modes(&s.cosine_forward(&ScalarField::zeros(g)).unwrap());
        assert_eq!(modes.len(), 31);
        assert!(modes.windows(2).all(|w| w[0].lambda <= w[1].lambda));
        // continuum limit of λ₁ on the unit square
        let fine = PoissonSolver::new(Grid::unit_square(512));
        assert!((fine.lambda1() - PI * PI).abs() < 1e-4);
    }

    #[test]
    fn zero_field_solves_to_zero() {
        let g = Grid::unit_square(16);
        let s = PoissonSolver::new(g);
        let phi = s.solve_poisson(&ScalarField::zeros(g)).unwrap();
        assert_eq!(phi.max_abs(), 0.0);
        assert_eq!(s.hminus1_norm_sq(&ScalarField::zeros(g)).unwrap(), 0.0);
    }

    #[test]
    fn nonzero_mean_is_rejected() {
        let g = Grid::unit_square(8);
        let s = PoissonSolver::new(g);
        let f = ScalarField::from_fn(g, |x, _| x);
        assert!(matches!(s.solve_poisson(&f), Err(PefError::NonZeroMeanInput { .. })));
        assert!(matches!(s.hminus1_norm_sq(&f), Err(PefError::NonZeroMeanInput { .. })));
    }

    #[test]
    fn eigenmode_is_scaled_by_its_eigenvalue() {
        let g = Grid::new(32, 20, 1.0, 0.6).unwrap();
        let s = PoissonSolver::new(g);
        let mode = ScalarField::from_values(
            g,
            Array2::from_shape_fn((32, 20), |(i, j)| {
                (PI * (i as f64 + 0.5) / 32.0).cos() * (2.0 * PI * (j as f64 + 0.5) / 20.0).cos()
            }),
        )
        .unwrap();
        let lam = s.eigenvalues()[[1, 2]];
        let phi = s.solve_poisson(&mode).unwrap();
        for (p, m) in phi.values.iter().zip(mode.values.iter()) {
            assert!((p - m / lam).abs() < 1e-14);
        }
        // G(λ ψ) = ψ
        let back = s.green_apply(&mode.scaled(lam)).unwrap();
        for (p, m) in back.values.iter().zip(mode.values.iter()) {
            assert!((p - m).abs() < 1e-12);
        }
        let a = s.spectral_coefficients(&mode, s.positive_modes()).unwrap();
        assert_eq!(a.iter().filter(|m| m.alpha.abs() > 1e-12).count(), 1);
    }

    #[test]
    fn analytic_cosine_converges_at_second_order() {
        let mut errs = Vec::new();
        for n in [32, 64, 128] {
            let g = Grid::unit_square(n);
            let f = ScalarField::from_fn(g, |x, _| (PI * x).cos());
            let phi = PoissonSolver::new(g).solve_poisson(&f).unwrap();
            let exact = ScalarField::from_fn(g, |x, _| (PI * x).cos() / (PI * PI));
            errs.push((&phi.values - &exact.values).iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        for w in errs.windows(2) {
            let r = w[0] / w[1];
            assert!((3.5..4.5).contains(&r), "{r}");
        }
    }

    #[test]
    fn gradient_field_examples() {
        let g = Grid::unit_square(64);
        let (dx, dy) = gradient_field(&ScalarField::constant(g, 2.0));
        assert_eq!(dx.max_abs() + dy.max_abs(), 0.0);
        let (dx, _) = gradient_field(&ScalarField::from_fn(g, |x, _| x));
        for i in 1..63 {
            assert!((dx.values[[i, 5]] - 1.0).abs() < 1e-12);
        }
        let mut prev = f64::INFINITY;
        for n in [64, 128, 256] {
            let g = Grid::unit_square(n);
            let (dx, _) = gradient_field(&ScalarField::from_fn(g, |x, _| (PI * x).cos()));
            let exact = ScalarField::from_fn(g, |x, _| -PI * (PI * x).sin());
            let err = (&dx.values - &exact.values).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err < prev / 3.5);
            prev = err;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn stencil_reproduces_the_right_hand_side(seed in any::<u64>(), nx in 4usize..24, ny in 4usize..24) {
            let g = Grid::new(nx, ny, 1.0 + nx as f64 / 10.0, 1.0).unwrap();
            let f = random_zero_mean(g, seed);
            let phi = PoissonSolver::new(g).solve_poisson(&f).unwrap();
            let lap = neumann_laplacian(&phi);
            let err = (&lap.values - &f.values).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            prop_assert!(err <= 1e-11 * f.max_abs());
            prop_assert!(phi.mean().abs() <= 1e-13 * phi.max_abs().max(1e-300));
        }

        #[test]
        fn green_operator_is_symmetric_and_bounded(seed in any::<u64>()) {
            let g = Grid::new(20, 14, 1.0, 0.7).unwrap();
            let s = PoissonSolver::new(g);
            let f = random_zero_mean(g, seed);
            let h = random_zero_mean(g, seed ^ 0x9e37_79b9);
            let fgh = f.dot(&s.green_apply(&h).unwrap());
            let gfh = s.green_apply(&f).unwrap().dot(&h);
            let fgf = f.dot(&s.green_apply(&f).unwrap());
            let hgh = h.dot(&s.green_apply(&h).unwrap());
            // scaled by the Cauchy-Schwarz bound, since ⟨f, Gh⟩ itself can be near zero
            prop_assert!((fgh - gfh).abs() < 1e-12 * (fgf * hgh).sqrt());
            prop_assert!(fgf >= 0.0);
            prop_assert!(fgf <= f.dot(&f) / s.lambda1() * (1.0 + 1e-12));
            prop_assert!(rel(fgf, s.hminus1_norm_sq(&f).unwrap()) < 1e-12);
            let all = s.spectral_coefficients(&f, s.positive_modes()).unwrap();
            let parseval: f64 = all.iter().map(|m| m.alpha * m.alpha).sum();
            prop_assert!(rel(parseval, crate::field::variance(&f)) < 1e-12);
        }
    }
}
