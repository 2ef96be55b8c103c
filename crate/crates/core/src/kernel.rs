//! Scalar Mercer kernels, the induced diagonal operator-valued kernel, center
//! sets with their Grammian, and the power function.
//!
//! Coefficient vectors are laid out center-major: `alpha = [alpha_1; ...; alpha_N]`
//! with each `alpha_j` in `R^m`. Entry `(j*m + a)` is component `a` of the
//! coefficient attached to center `j`. The kernel matrix `K(y)` and the
//! Grammian use the same block ordering.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_finite, check_len, Error, Result};
use crate::special::matern_profile;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// Sobolev-Matérn kernel of order `order` on `R^dimension`; smoothness `nu = order - dimension/2`.
    SobolevMatern {
        order: u32,
        dimension: u32,
        length_scale: f64,
    },
    /// `exp(-r^2 / (2 l^2))`.
    Gaussian { length_scale: f64 },
}

/// A radial scalar kernel `k(y1, y2) = sigma(|y1 - y2|)` together with the
/// output dimension `m` of the diagonal operator-valued kernel `k(y1, y2) I_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    family: KernelFamily,
    output_dim: usize,
}

impl KernelModel {
    pub fn new(family: KernelFamily, output_dim: usize) -> Result<Self> {
        if output_dim == 0 {
            return Err(Error::InputDomain("kernel output dimension must be positive".into()));
        }
        match family {
            KernelFamily::SobolevMatern {
                order,
                dimension,
                length_scale,
            } => {
                if order == 0 || dimension == 0 || 2 * order <= dimension {
                    return Err(Error::InputDomain(format!(
                        "Sobolev-Matérn kernel needs order > dimension/2, got order {order}, dimension {dimension}"
                    )));
                }
                check_length_scale(length_scale)?;
            }
            KernelFamily::Gaussian { length_scale } => check_length_scale(length_scale)?,
        }
        Ok(Self { family, output_dim })
    }

    pub fn sobolev_matern(order: u32, dimension: u32, length_scale: f64, output_dim: usize) -> Result<Self> {
        Self::new(
            KernelFamily::SobolevMatern {
                order,
                dimension,
                length_scale,
            },
            output_dim,
        )
    }

    pub fn gaussian(length_scale: f64, output_dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Gaussian { length_scale }, output_dim)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Radial profile `sigma(r)`, normalized so that `sigma(0) = 1`.
    pub fn radial(&self, r: f64) -> f64 {
        match self.family {
            KernelFamily::SobolevMatern {
                order,
                dimension,
                length_scale,
            } => matern_profile(2 * order - dimension, r / length_scale),
            KernelFamily::Gaussian { length_scale } => {
                let s = r / length_scale;
                libm::exp(-0.5 * s * s)
            }
        }
    }

    /// Scalar kernel value `k(y1, y2)`.
    pub fn scalar(&self, y1: &[f64], y2: &[f64]) -> Result<f64> {
        check_len("kernel argument", self.output_dim, y1.len())?;
        check_len("kernel argument", self.output_dim, y2.len())?;
        check_finite("kernel argument", y1)?;
        check_finite("kernel argument", y2)?;
        Ok(self.eval(y1, y2))
    }

    /// The `m x m` block `k(y1, y2) I_m`.
    pub fn block(&self, y1: &[f64], y2: &[f64]) -> Result<DMatrix<f64>> {
        let k = self.scalar(y1, y2)?;
        Ok(DMatrix::identity(self.output_dim, self.output_dim) * k)
    }

    pub(crate) fn eval(&self, y1: &[f64], y2: &[f64]) -> f64 {
        self.radial(distance(y1, y2))
    }
}

fn check_length_scale(l: f64) -> Result<()> {
    if l.is_finite() && l > 0.0 {
        Ok(())
    } else {
        Err(Error::InputDomain(format!("length scale must be positive and finite, got {l}")))
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Diagonal jitter escalation used when a Cholesky factorization fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterPolicy {
    pub initial: f64,
    pub max: f64,
    pub growth: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self {
            initial: 1e-10,
            max: 1e-6,
            growth: 10.0,
        }
    }
}

/// Cholesky-factorize `m`, adding `lambda * scale * I` with escalating `lambda` on failure.
/// Returns the factor and the absolute jitter that was added (zero if none).
pub(crate) fn factor_with_jitter(
    m: &DMatrix<f64>,
    policy: JitterPolicy,
    scale: f64,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if !(policy.initial > 0.0 && policy.max >= policy.initial && policy.growth > 1.0 && policy.max.is_finite()) {
        return Err(Error::InputDomain(format!(
            "jitter policy needs 0 < initial <= max and growth > 1, got {policy:?}"
        )));
    }
    if let Some(c) = m.clone().cholesky() {
        return Ok((c, 0.0));
    }
    let n = m.nrows();
    let mut lambda = policy.initial;
    while lambda <= policy.max * (1.0 + 1e-12) {
        let shifted = m + DMatrix::identity(n, n) * (lambda * scale);
        if let Some(c) = shifted.cholesky() {
            return Ok((c, lambda * scale));
        }
        lambda *= policy.growth;
    }
    let min_eigenvalue = m.clone().symmetric_eigenvalues().min();
    Err(Error::IllConditionedCenters {
        min_eigenvalue,
        jitter: policy.max * scale,
    })
}

/// An axis-aligned box used as operating domain, probe region or lattice support.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ProbeBox {
    /// Axes with `lower == upper` are allowed and collapse to a single coordinate.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_len("box bounds", lower.len(), upper.len())?;
        check_finite("box bounds", &lower)?;
        check_finite("box bounds", &upper)?;
        if lower.is_empty() {
            return Err(Error::InputDomain("box must have at least one axis".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::InputDomain("box lower bound exceeds upper bound".into()));
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Self::new(alloc::vec![lo; dim], alloc::vec![hi; dim])
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Tensor grid with `points_per_axis` points per axis, first axis varying slowest.
    /// A single point per axis places it at the midpoint.
    pub fn grid(&self, points_per_axis: usize) -> Vec<DVector<f64>> {
        let dim = self.dim();
        let axis = |a: usize, i: usize| -> f64 {
            if points_per_axis == 1 {
                0.5 * (self.lower[a] + self.upper[a])
            } else {
                let frac = i as f64 / (points_per_axis - 1) as f64;
                self.lower[a] + frac * (self.upper[a] - self.lower[a])
            }
        };
        let total = points_per_axis.pow(dim as u32);
        let mut out = Vec::with_capacity(total);
        let mut index = alloc::vec![0usize; dim];
        for _ in 0..total {
            out.push(DVector::from_iterator(dim, (0..dim).map(|a| axis(a, index[a]))));
            for a in (0..dim).rev() {
                index[a] += 1;
                if index[a] < points_per_axis {
                    break;
                }
                index[a] = 0;
            }
        }
        out
    }

    pub fn spacing(&self, points_per_axis: usize) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| if points_per_axis > 1 { (u - l) / (points_per_axis - 1) as f64 } else { 0.0 })
            .collect()
    }
}

/// Regular lattice of centers on `domain`.
pub fn lattice_centers(domain: &ProbeBox, points_per_axis: usize) -> Result<Vec<DVector<f64>>> {
    if points_per_axis == 0 {
        return Err(Error::InputDomain("lattice needs at least one point per axis".into()));
    }
    Ok(domain.grid(points_per_axis))
}

/// Ordered centers `xi_1..xi_N` in the output space together with the
/// assembled `mN x mN` Grammian and its Cholesky factor.
#[derive(Debug, Clone)]
pub struct CenterSet {
    kernel: KernelModel,
    centers: Vec<DVector<f64>>,
    grammian: DMatrix<f64>,
    factor: Option<Cholesky<f64, Dyn>>,
    jitter: f64,
}

/// Result of a grid search for the supremum of the power function.
///
/// The grid maximum is a lower bound of the true supremum over the box.
#[derive(Debug, Clone, PartialEq)]
pub struct SupPower {
    pub value: f64,
    pub argmax: DVector<f64>,
    pub points_per_axis: usize,
    pub spacing: Vec<f64>,
}

impl CenterSet {
    /// Assemble the Grammian with the default jitter policy.
    pub fn assemble(kernel: KernelModel, centers: Vec<DVector<f64>>) -> Result<Self> {
        Self::assemble_with(kernel, centers, JitterPolicy::default())
    }

    pub fn assemble_with(kernel: KernelModel, centers: Vec<DVector<f64>>, policy: JitterPolicy) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Design("center set must contain at least one center".into()));
        }
        let m = kernel.output_dim();
        for c in &centers {
            check_len("center", m, c.len())?;
            check_finite("center", c.as_slice())?;
        }
        for i in 0..centers.len() {
            for j in (i + 1)..centers.len() {
                if centers[i] == centers[j] {
                    return Err(Error::DuplicateCenters { first: i, second: j });
                }
            }
        }
        let n = centers.len();
        let mut grammian = DMatrix::zeros(m * n, m * n);
        for i in 0..n {
            for j in i..n {
                let k = kernel.eval(centers[i].as_slice(), centers[j].as_slice());
                for a in 0..m {
                    grammian[(i * m + a, j * m + a)] = k;
                    grammian[(j * m + a, i * m + a)] = k;
                }
            }
        }
        let (factor, jitter) = factor_with_jitter(&grammian, policy, 1.0)?;
        Ok(Self {
            kernel,
            centers,
            grammian,
            factor: Some(factor),
            jitter,
        })
    }

    /// The empty approximation space (`N = 0`). Only the power-function query path is meaningful.
    pub fn empty(kernel: KernelModel) -> Self {
        Self {
            kernel,
            centers: Vec::new(),
            grammian: DMatrix::zeros(0, 0),
            factor: None,
            jitter: 0.0,
        }
    }

    pub fn kernel(&self) -> &KernelModel {
        &self.kernel
    }

    pub fn centers(&self) -> &[DVector<f64>] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn output_dim(&self) -> usize {
        self.kernel.output_dim()
    }

    /// Dimension `mN` of the coefficient space.
    pub fn coeff_dim(&self) -> usize {
        self.output_dim() * self.len()
    }

    pub fn grammian(&self) -> &DMatrix<f64> {
        &self.grammian
    }

    /// Diagonal jitter added before factorization (zero when none was needed).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Ratio of extreme Grammian eigenvalues.
    pub fn condition_estimate(&self) -> f64 {
        if self.is_empty() {
            return 1.0;
        }
        let ev = self.grammian.clone().symmetric_eigenvalues();
        ev.max() / ev.min()
    }

    /// Scalar sections `k(y, xi_j)` for every center.
    pub fn kernel_values(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("query point", self.output_dim(), y.len())?;
        check_finite("query point", y)?;
        Ok(self.centers.iter().map(|c| self.kernel.eval(y, c.as_slice())).collect())
    }

    /// `K(y) = [k(y, xi_1) I_m, ..., k(y, xi_N) I_m]`, an `m x mN` matrix.
    pub fn kernel_matrix(&self, y: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.output_dim();
        let values = self.kernel_values(y)?;
        let mut out = DMatrix::zeros(m, m * self.len());
        for (j, k) in values.iter().enumerate() {
            for a in 0..m {
                out[(a, j * m + a)] = *k;
            }
        }
        Ok(out)
    }

    /// `K^{-1} v` through the stored Cholesky factor.
    pub fn solve_grammian(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("Grammian solve", self.coeff_dim(), v.len())?;
        match &self.factor {
            Some(f) => Ok(f.solve(v)),
            None => Ok(DVector::zeros(0)),
        }
    }

    /// Evaluate `sum_j k(y, xi_j) alpha_j`.
    pub fn evaluate(&self, alpha: &DVector<f64>, y: &[f64]) -> Result<DVector<f64>> {
        check_len("coefficient vector", self.coeff_dim(), alpha.len())?;
        let m = self.output_dim();
        let values = self.kernel_values(y)?;
        let mut out = DVector::zeros(m);
        for (j, k) in values.iter().enumerate() {
            for a in 0..m {
                out[a] += k * alpha[j * m + a];
            }
        }
        Ok(out)
    }

    /// Native-space norm squared `alpha^T K alpha`.
    pub fn native_norm_squared(&self, alpha: &DVector<f64>) -> Result<f64> {
        check_len("coefficient vector", self.coeff_dim(), alpha.len())?;
        Ok(alpha.dot(&(&self.grammian * alpha)))
    }

    /// Diagonal of `K(y,y) - K_N(y,y)` for every output component.
    ///
    /// `K_N(y,y) = K(y) Kinv K(y)^T` is evaluated as the native norm of the
    /// interpolation residual, `k(y,y) - 2 K(y) U + U^T K U` with `U = Kinv K(y)^T`,
    /// which is insensitive to first-order errors in `U` and keeps the value
    /// accurate at the centers.
    pub fn power_function_diagonal(&self, y: &[f64]) -> Result<DVector<f64>> {
        let m = self.output_dim();
        check_len("query point", m, y.len())?;
        check_finite("query point", y)?;
        let kyy = self.kernel.eval(y, y);
        let factor = match &self.factor {
            Some(f) => f,
            None => return Ok(DVector::from_element(m, kyy)),
        };
        let ky = self.kernel_matrix(y)?;
        let kyt = ky.transpose();
        let u = factor.solve(&kyt);
        let cross = &ky * &u;
        let quad = u.transpose() * (&self.grammian * &u);
        Ok(DVector::from_iterator(
            m,
            (0..m).map(|i| kyy - 2.0 * cross[(i, i)] + quad[(i, i)]),
        ))
    }

    /// Power function `max_i sqrt(|K_ii(y,y) - K_N,ii(y,y)|)`.
    pub fn power_function(&self, y: &[f64]) -> Result<f64> {
        let diag = self.power_function_diagonal(y)?;
        debug_assert!(
            diag.iter().all(|d| (d - diag[0]).abs() <= 1e-12),
            "diagonal kernel produced unequal power-function components"
        );
        Ok(diag.iter().map(|d| libm::sqrt(d.abs())).fold(0.0, f64::max))
    }

    /// Maximum of the power function over a tensor grid on `domain`.
    pub fn sup_power_function(&self, domain: &ProbeBox, points_per_axis: usize) -> Result<SupPower> {
        check_len("probe box", self.output_dim(), domain.dim())?;
        if points_per_axis < 2 {
            return Err(Error::InputDomain("probe grid needs at least 2 points per axis".into()));
        }
        let mut best = SupPower {
            value: -1.0,
            argmax: DVector::zeros(domain.dim()),
            points_per_axis,
            spacing: domain.spacing(points_per_axis),
        };
        for p in domain.grid(points_per_axis) {
            let v = self.power_function(p.as_slice())?;
            if v > best.value {
                best.value = v;
                best.argmax = p;
            }
        }
        Ok(best)
    }
}

/// An element `sum_j K_{xi_j}(.) alpha_j` of the finite-dimensional native space.
#[derive(Debug, Clone)]
pub struct RkhsElement {
    centers: Arc<CenterSet>,
    coeffs: DVector<f64>,
}

impl RkhsElement {
    pub fn new(centers: Arc<CenterSet>, coeffs: DVector<f64>) -> Result<Self> {
        check_len("coefficient vector", centers.coeff_dim(), coeffs.len())?;
        Ok(Self { centers, coeffs })
    }

    pub fn zero(centers: Arc<CenterSet>) -> Self {
        let n = centers.coeff_dim();
        Self {
            centers,
            coeffs: DVector::zeros(n),
        }
    }

    pub fn center_set(&self) -> &Arc<CenterSet> {
        &self.centers
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    /// `K(y) alpha`.
    pub fn evaluate(&self, y: &[f64]) -> Result<DVector<f64>> {
        self.centers.evaluate(&self.coeffs, y)
    }

    pub fn native_norm_squared(&self) -> f64 {
        self.coeffs.dot(&(self.centers.grammian() * &self.coeffs))
    }
}

/// Fit quality of [`project_into_span`] on its sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionReport {
    /// Largest Euclidean error over the samples.
    pub max_error: f64,
    pub rms_error: f64,
    pub samples: usize,
    pub jitter: f64,
}

/// Least-squares surrogate for the native-space projection of `target` onto
/// the span of the kernel sections.
///
/// Because the kernel is diagonal the fit decouples into one scalar
/// least-squares problem per output component; the normal equations are
/// factored with the jitter policy, scaled by the mean diagonal of the
/// normal matrix.
pub fn project_into_span<F>(
    centers: &Arc<CenterSet>,
    target: F,
    samples: &[DVector<f64>],
    policy: JitterPolicy,
) -> Result<(RkhsElement, ProjectionReport)>
where
    F: Fn(&[f64]) -> DVector<f64>,
{
    if samples.is_empty() {
        return Err(Error::InputDomain("projection needs at least one sample".into()));
    }
    if centers.is_empty() {
        return Err(Error::InputDomain("projection needs a non-empty center set".into()));
    }
    let m = centers.output_dim();
    let n = centers.len();
    let s = samples.len();
    let mut phi = DMatrix::zeros(s, n);
    let mut values = DMatrix::zeros(s, m);
    for (row, y) in samples.iter().enumerate() {
        let ks = centers.kernel_values(y.as_slice())?;
        for (j, k) in ks.into_iter().enumerate() {
            phi[(row, j)] = k;
        }
        let f = target(y.as_slice());
        check_len("projection target value", m, f.len())?;
        check_finite("projection target value", f.as_slice())?;
        for a in 0..m {
            values[(row, a)] = f[a];
        }
    }
    let normal = phi.transpose() * &phi;
    let scale = normal.diagonal().mean();
    let (factor, jitter) = factor_with_jitter(&normal, policy, scale)?;
    let coeffs_by_component = factor.solve(&(phi.transpose() * &values)); // n x m
    let mut alpha = DVector::zeros(n * m);
    for j in 0..n {
        for a in 0..m {
            alpha[j * m + a] = coeffs_by_component[(j, a)];
        }
    }
    let fitted = &phi * &coeffs_by_component;
    let mut max_error: f64 = 0.0;
    let mut sum_sq = 0.0;
    for row in 0..s {
        let e2: f64 = (0..m)
            .map(|a| {
                let d = fitted[(row, a)] - values[(row, a)];
                d * d
            })
            .sum();
        max_error = max_error.max(libm::sqrt(e2));
        sum_sq += e2;
    }
    let element = RkhsElement::new(Arc::clone(centers), alpha)?;
    Ok((
        element,
        ProjectionReport {
            max_error,
            rms_error: libm::sqrt(sum_sq / s as f64),
            samples: s,
            jitter,
        },
    ))
}
