use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Relative gap below which adjacent squared singular values count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Regression data in the singular basis of its input matrix, with the
/// quadratic parametrization `θ = ½ Σ w_λ² v_λ` and its initialization.
///
/// Mode vectors are columns of `u` (n×n) and `v` (d×d). Signs are chosen so
/// that every label component `u_λᵀ y` is nonnegative. Within a block of
/// tied singular values the basis is rotated so that the label projection
/// onto the block lies on its first vector.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    x: Matrix,
    y: Vec<f64>,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    mu: Vec<f64>,
    rank: usize,
    w0: Vec<f64>,
    theta0: Vec<f64>,
    theta_star: Vec<f64>,
    y_mode: Vec<f64>,
    y_tilde: Vec<f64>,
    linear_rate_factor: f64,
    warnings: Vec<String>,
}

/// Appends orthonormal columns to `basis` until it spans `R^dim`.
fn complete_basis(basis: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let mut cols: Vec<DVector<f64>> = basis.column_iter().map(|c| c.into_owned()).collect();
    let mut e = 0;
    while cols.len() < dim && e < dim {
        let mut c = DVector::from_element(dim, 0.0);
        c[e] = 1.0;
        e += 1;
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for q in &cols {
                let proj = q.dot(&c);
                c.axpy(-proj, q, 1.0);
            }
        }
        let norm = c.norm();
        if norm > 1e-8 {
            cols.push(c / norm);
        }
    }
    DMatrix::from_columns(&cols)
}

/// Householder rotation within a block of tied modes so that the block's
/// label projection lands on the block's first column.
fn align_block(u: &mut DMatrix<f64>, v: &mut DMatrix<f64>, y: &DVector<f64>, start: usize, len: usize) {
    let c: DVector<f64> = DVector::from_iterator(len, (start..start + len).map(|k| u.column(k).dot(y)));
    let norm = c.norm();
    if norm == 0.0 {
        return;
    }
    let mut h = c / norm;
    h[0] -= 1.0;
    let hh = h.dot(&h);
    if hh < 1e-30 {
        return;
    }
    let reflect = DMatrix::<f64>::identity(len, len) - (&h * h.transpose()) * (2.0 / hh);
    let ub = u.columns(start, len) * &reflect;
    u.columns_mut(start, len).copy_from(&ub);
    let vb = v.columns(start, len) * &reflect;
    v.columns_mut(start, len).copy_from(&vb);
}

pub fn build_problem(x: &Matrix, y: &[f64], w0: &[f64]) -> Result<QuadraticProblem> {
    let (n, d) = (x.rows(), x.cols());
    if n == 0 || d == 0 {
        return Err(Error::Shape("empty input matrix".into()));
    }
    if y.len() != n {
        return Err(Error::Shape(format!("{n} inputs but {} labels", y.len())));
    }
    if w0.len() != d {
        return Err(Error::Shape(format!(
            "w0 has {} entries, inputs have dimension {d}",
            w0.len()
        )));
    }
    if let Some(i) = w0.iter().position(|&w| w == 0.0) {
        return Err(Error::Assumption(format!("w0[{i}] is zero")));
    }
    if !x.is_finite() || y.iter().chain(w0).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite problem data".into()));
    }

    let xm = x.to_nalgebra();
    let svd = xm
        .clone()
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let (thin_u, thin_vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Numeric("SVD did not produce singular vectors".into())),
    };
    let m = n.min(d);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let tol = sigma[0] * f64::EPSILON * n.max(d) as f64;
    let rank = sigma.iter().take_while(|&&s| s > tol).count();

    let ycol = DVector::from_column_slice(y);
    let mut u_r = DMatrix::from_columns(
        &order[..rank]
            .iter()
            .map(|&k| thin_u.column(k).into_owned())
            .collect::<Vec<_>>(),
    );
    let mut v_r = DMatrix::from_columns(
        &order[..rank]
            .iter()
            .map(|&k| thin_vt.row(k).transpose())
            .collect::<Vec<_>>(),
    );
    if rank == 0 {
        u_r = DMatrix::zeros(n, 0);
        v_r = DMatrix::zeros(d, 0);
    }
    let mu_r: Vec<f64> = sigma[..rank].iter().map(|s| s * s).collect();

    let mut warnings = Vec::new();
    let mut start = 0;
    while start < rank {
        let mut end = start + 1;
        while end < rank && (mu_r[end - 1] - mu_r[end]).abs() < TIE_TOLERANCE * mu_r[0] {
            end += 1;
        }
        if end - start > 1 {
            warnings.push(format!(
                "modes {}..={} share singular value {:.6e}; basis aligned with the labels",
                start + 1,
                end,
                sigma[start]
            ));
            align_block(&mut u_r, &mut v_r, &ycol, start, end - start);
        }
        start = end;
    }

    for k in 0..rank {
        if u_r.column(k).dot(&ycol) < 0.0 {
            u_r.column_mut(k).neg_mut();
            v_r.column_mut(k).neg_mut();
        }
    }
    let mut u = complete_basis(&u_r, n);
    let v = complete_basis(&v_r, d);
    for k in rank..n {
        if u.column(k).dot(&ycol) < 0.0 {
            u.column_mut(k).neg_mut();
        }
    }

    let y_mode: Vec<f64> = (0..n).map(|k| u.column(k).dot(&ycol)).collect();
    let mut mu = vec![0.0; d];
    mu[..rank].copy_from_slice(&mu_r);
    let y_tilde: Vec<f64> = (0..d)
        .map(|k| if k < rank { mu[k].sqrt() * y_mode[k] } else { 0.0 })
        .collect();
    let theta0: Vec<f64> = w0.iter().map(|w| 0.5 * w * w).collect();
    let theta_star = (0..d)
        .map(|k| if k < rank { y_mode[k] / mu[k].sqrt() } else { theta0[k] })
        .collect();

    Ok(QuadraticProblem {
        x: x.clone(),
        y: y.to_vec(),
        u,
        v,
        mu,
        rank,
        w0: w0.to_vec(),
        theta0,
        theta_star,
        y_mode,
        y_tilde,
        linear_rate_factor: 2.0,
        warnings,
    })
}

/// `θ*` in mode coordinates: `y_λ/√μ_λ` on the range of X, `θ⁰_λ` on its null space.
pub fn theta_star(problem: &QuadraticProblem) -> Vec<f64> {
    problem.theta_star.clone()
}

impl QuadraticProblem {
    pub fn inputs(&self) -> &Matrix {
        &self.x
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn left_vectors(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn right_vectors(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// Squared singular values, one per mode of θ (length d, zero past the rank).
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Nonincreasing singular values, length `min(n, d)`.
    pub fn singular_values(&self) -> Vec<f64> {
        let m = self.n().min(self.d());
        self.mu[..m].iter().map(|v| v.sqrt()).collect()
    }

    pub fn w0(&self) -> &[f64] {
        &self.w0
    }

    pub fn theta0(&self) -> &[f64] {
        &self.theta0
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    /// `y_λ = u_λᵀ y`, length n.
    pub fn y_mode(&self) -> &[f64] {
        &self.y_mode
    }

    /// `ỹ_λ = √μ_λ y_λ`, length d.
    pub fn y_tilde(&self) -> &[f64] {
        &self.y_tilde
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Rate multiplier `c` in the linearized solution `exp(−c μ θ⁰ t)`.
    pub fn linear_rate_factor(&self) -> f64 {
        self.linear_rate_factor
    }

    pub fn set_linear_rate_factor(&mut self, c: f64) -> Result<()> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Config(format!("linear rate factor must be > 0, got {c}")));
        }
        self.linear_rate_factor = c;
        Ok(())
    }

    /// Same data with initialization scaled to `θ⁰ ← σ θ⁰`.
    pub fn rescaled_init(&self, sigma: f64) -> Result<QuadraticProblem> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("init scale must be > 0, got {sigma}")));
        }
        let mut p = self.clone();
        let s = sigma.sqrt();
        p.w0.iter_mut().for_each(|w| *w *= s);
        p.theta0 = p.w0.iter().map(|w| 0.5 * w * w).collect();
        for k in self.rank..self.d() {
            p.theta_star[k] = p.theta0[k];
        }
        Ok(p)
    }

    /// Ambient parameter vector `Σ θ_λ v_λ`.
    pub fn to_ambient(&self, modes: &[f64]) -> Vec<f64> {
        (&self.v * DVector::from_column_slice(modes)).as_slice().to_vec()
    }

    /// Mode coefficients `v_λᵀ θ`.
    pub fn to_modes(&self, ambient: &[f64]) -> Vec<f64> {
        (self.v.transpose() * DVector::from_column_slice(ambient))
            .as_slice()
            .to_vec()
    }

    /// `X V`: predictions are `(X V) θ_modes`.
    pub(crate) fn inputs_in_mode_basis(&self) -> DMatrix<f64> {
        self.x.to_nalgebra() * &self.v
    }

    pub fn predictions(&self, modes: &[f64]) -> Vec<f64> {
        (self.inputs_in_mode_basis() * DVector::from_column_slice(modes))
            .as_slice()
            .to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruction_error(p: &QuadraticProblem) -> f64 {
        let (n, d) = (p.n(), p.d());
        let mut m = DMatrix::zeros(n, d);
        for k in 0..p.rank() {
            m += p.left_vectors().column(k) * p.right_vectors().column(k).transpose() * p.mu()[k].sqrt();
        }
        (p.inputs().to_nalgebra() - m).norm()
    }

    #[test]
    fn diagonal_problem_by_hand() {
        let x = Matrix::from_rows(&[[2.0, 0.0], [0.0, 1.0]]).unwrap();
        let p = build_problem(&x, &[2.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((p.mu()[0] - 4.0).abs() < 1e-14 && (p.mu()[1] - 1.0).abs() < 1e-14);
        assert!((p.y_mode()[0] - 2.0).abs() < 1e-14 && (p.y_mode()[1] - 1.0).abs() < 1e-14);
        assert!((p.left_vectors()[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((p.left_vectors()[(1, 1)] - 1.0).abs() < 1e-14);
        // θ*_λ = y_λ/√μ_λ = (1, 1)
        assert!((p.theta_star()[0] - 1.0).abs() < 1e-14);
        assert!((p.theta_star()[1] - 1.0).abs() < 1e-14);
        assert_eq!(p.theta0(), &[0.5, 0.5]);
    }

    #[test]
    fn negative_label_component_is_flipped() {
        let x = Matrix::from_rows(&[[2.0, 0.0, 0.5], [0.3, -1.0, 0.0]]).unwrap();
        let p = build_problem(&x, &[-2.0, -1.0], &[1.0, 0.5, 0.7]).unwrap();
        assert!(p.y_mode().iter().all(|&v| v >= 0.0));
        assert!(reconstruction_error(&p) < 1e-10 * p.inputs().to_nalgebra().norm());
    }

    #[test]
    fn zero_init_entry_rejected() {
        let x = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        assert!(matches!(
            build_problem(&x, &[1.0], &[1.0, 0.0]),
            Err(Error::Assumption(_))
        ));
    }

    #[test]
    fn null_space_modes_keep_init() {
        let x = Matrix::from_rows(&[[1.0, 1.0, 0.0]]).unwrap();
        let p = build_problem(&x, &[1.0], &[0.3, 0.4, 0.5]).unwrap();
        assert_eq!(p.rank(), 1);
        for k in 1..3 {
            assert_eq!(p.theta_star()[k], p.theta0()[k]);
            assert_eq!(p.y_tilde()[k], 0.0);
        }
        // μ = 2, y₁ = 1 -> θ* = 1/√2
        assert!((p.theta_star()[0] - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn zero_labels_give_zero_targets_on_range() {
        let x = Matrix::from_rows(&[[1.0, 0.2, 0.0], [0.0, 1.0, 0.4]]).unwrap();
        let p = build_problem(&x, &[0.0, 0.0], &[0.3, 0.4, 0.5]).unwrap();
        assert_eq!(&p.theta_star()[..2], &[0.0, 0.0]);
    }

    #[test]
    fn theta_star_formula() {
        // μ = 4, y = 2 -> θ* = 1
        let x = Matrix::from_rows(&[[2.0]]).unwrap();
        let p = build_problem(&x, &[2.0], &[0.1]).unwrap();
        assert!((theta_star(&p)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tie_warning_and_alignment() {
        let x = Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let p = build_problem(&x, &[1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(p.warnings().len(), 1);
        assert!((p.y_mode()[0] - 2f64.sqrt()).abs() < 1e-14);
        assert!(p.y_mode()[1].abs() < 1e-14);
        assert!(reconstruction_error(&p) < 1e-12);
    }

    #[test]
    fn bases_are_orthogonal() {
        let x = Matrix::from_rows(&[[1.0, 2.0, 0.5, -1.0], [0.0, 1.0, 3.0, 0.2], [1.0, 3.0, 3.5, -0.8]]).unwrap();
        let p = build_problem(&x, &[1.0, -2.0, 0.5], &[0.1; 4]).unwrap();
        assert_eq!(p.rank(), 2);
        let u = p.left_vectors();
        let v = p.right_vectors();
        assert!((u.transpose() * u - DMatrix::identity(3, 3)).norm() < 1e-12);
        assert!((v.transpose() * v - DMatrix::identity(4, 4)).norm() < 1e-12);
        assert!(reconstruction_error(&p) < 1e-10 * x.to_nalgebra().norm());
    }

    #[test]
    fn rescaling_init_scales_theta0() {
        let x = Matrix::from_rows(&[[1.0, 0.0, 0.0]]).unwrap();
        let p = build_problem(&x, &[1.0], &[1.0, 1.0, 1.0]).unwrap();
        let q = p.rescaled_init(1e-4).unwrap();
        for k in 0..3 {
            assert!((q.theta0()[k] - 0.5e-4).abs() < 1e-18);
        }
        assert_eq!(q.theta_star()[0], p.theta_star()[0]);
        assert_eq!(q.theta_star()[2], q.theta0()[2]);
    }
}
