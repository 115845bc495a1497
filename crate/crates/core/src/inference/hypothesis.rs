use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::BasisFamily;
use crate::error::{Error, Result};
use crate::estimator::{build_design, ols, SieveConfig, SieveFit};
use crate::scalar::{lit, to_f64, Scalar};

use super::ScrGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisKind {
    Exact,
    Homogeneity,
    Separability,
}

impl HypothesisKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "homogeneity" => Ok(Self::Homogeneity),
            "separability" => Ok(Self::Separability),
            other => Err(Error::Config(format!("unknown test kind `{other}`"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Homogeneity => "homogeneity",
            Self::Separability => "separability",
        }
    }
}

/// Outcome of embedding a restricted surface in a confidence region.
#[derive(Debug, Clone, Serialize)]
pub struct TestReport<T> {
    pub kind: HypothesisKind,
    pub component: usize,
    /// `𝒯_obs = max over the grid of √n |m̂ − m̃| / ĥ`.
    pub statistic: T,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub c_alpha: T,
    /// Grid points where the restricted surface leaves the band.
    pub violations: usize,
    /// Restricted surface on the region's grid.
    pub restricted: Vec<T>,
}

/// Compare a restricted surface, given on the region's grid, with the region.
pub fn compare_surface<T: Scalar>(
    scr: &ScrGrid<T>,
    restricted: Vec<T>,
    kind: HypothesisKind,
) -> Result<TestReport<T>> {
    if restricted.len() != scr.len() {
        return Err(Error::LengthMismatch {
            what: "restricted surface",
            expected: scr.len(),
            found: restricted.len(),
        });
    }
    let z: Vec<T> = restricted
        .iter()
        .enumerate()
        .map(|(k, &v)| scr.normalized_deviation(k, v))
        .collect();
    let statistic = z.iter().fold(T::zero(), |a, &b| a.max(b));
    let violations = z.iter().filter(|&&v| v > scr.c_alpha).count();
    let exceed = scr.sup_stats.iter().filter(|&&s| s >= statistic).count();
    Ok(TestReport {
        kind,
        component: scr.component,
        statistic,
        p_value: exceed as f64 / scr.sup_stats.len() as f64,
        reject: statistic > scr.c_alpha,
        alpha: scr.alpha,
        c_alpha: scr.c_alpha,
        violations,
        restricted,
    })
}

/// Test `m_j = m0` on the region's grid.
pub fn test_exact_form<T: Scalar, F: Fn(T, T) -> T>(scr: &ScrGrid<T>, m0: F) -> Result<TestReport<T>> {
    let restricted = scr.points().into_iter().map(|(t, x)| m0(t, x)).collect();
    compare_surface(scr, restricted, HypothesisKind::Exact)
}

/// Test that component `j` does not vary with time.
///
/// The restricted model keeps the other components and replaces the tensor
/// block of `j` by its state functions times the constant; the fitted surface
/// is corrected by time-varying mean shifts of the original sizes.
pub fn test_homogeneity<T: Scalar>(fit: &SieveFit<T>, scr: &ScrGrid<T>) -> Result<TestReport<T>> {
    let j = scr.component;
    let restricted_cfg = homogeneous_config(fit, j)?;
    let restricted_fit = SieveFit::fit(fit.data().clone(), &restricted_cfg)?;
    let restricted = scr
        .points()
        .into_iter()
        .map(|(t, x)| restricted_fit.eval_corrected(j, t, x))
        .collect::<Result<_>>()?;
    compare_surface(scr, restricted, HypothesisKind::Homogeneity)
}

fn homogeneous_config<T: Scalar>(fit: &SieveFit<T>, j: usize) -> Result<SieveConfig<T>> {
    if j == 0 || j > fit.r() {
        return Err(Error::NoSuchComponent(j));
    }
    let mut cfg = fit.config().clone();
    let comp = &mut cfg.components[j - 1];
    comp.c = 1;
    comp.time_family = Some(BasisFamily::Fourier);
    comp.start = Some(fit.bases().blocks[j - 1].start());
    comp.shift_sizes = Some(fit.bases().shift_sizes[j - 1].clone());
    Ok(cfg)
}

/// Test that component `j` factorizes as `f(t) g(x)`.
pub fn test_separability<T: Scalar>(fit: &SieveFit<T>, scr: &ScrGrid<T>) -> Result<TestReport<T>> {
    let restricted = separable_surface(fit, scr)?;
    compare_surface(scr, restricted, HypothesisKind::Separability)
}

/// Iteration cap of the alternating least squares in [`separable_fit`].
pub const SEPARABLE_MAX_ITER: usize = 500;
/// Relative change of the residual sum of squares that stops the iteration.
pub const SEPARABLE_TOL: f64 = 1e-12;

/// Least-squares refit with the tensor coefficients of component `j`
/// constrained to an outer product `a bᵀ`, so that its pilot surface is
/// `(Σ a_{ℓ1} φ_{ℓ1}(t)) (Σ b_ℓ ϕ_ℓ(x))`. The intercept and the other blocks
/// stay free. Solved by alternating least squares started from the leading
/// singular pair of the unrestricted block; the mean shifts of `fit` are kept.
pub fn separable_fit<T: Scalar>(fit: &SieveFit<T>, j: usize) -> Result<SieveFit<T>> {
    if j == 0 || j > fit.r() {
        return Err(Error::NoSuchComponent(j));
    }
    let design = build_design(fit.data(), fit.config())?;
    let w = &design.matrix;
    let range = fit.block_range(j)?;
    let block = &fit.bases().blocks[j - 1];
    let (c, sd) = (block.time().count(), block.state_dim());
    let (n, p) = w.shape();
    let y = DVector::from_column_slice(&fit.data().y);
    let others: Vec<usize> = (0..p).filter(|k| !range.contains(k)).collect();
    let po = others.len();

    let pilot = DMatrix::from_fn(c, sd, |l1, l| fit.beta()[range.start + l1 * sd + l]);
    let svd = pilot.svd(true, true);
    let top = (0..svd.singular_values.len())
        .max_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap())
        .expect("block has coefficients");
    let s0 = svd.singular_values[top];
    if !(s0 >= lit(1e-8)) {
        return Err(Error::DegenerateNormalization(to_f64(s0)));
    }
    let mut a: Vec<T> = svd.u.as_ref().expect("u requested").column(top).iter().map(|&v| v * s0).collect();
    let mut b: Vec<T> = svd.v_t.as_ref().expect("v requested").row(top).iter().copied().collect();

    // Design with the other columns first and `k` columns built by `col`.
    let reduced = |k: usize, col: &dyn Fn(usize, usize) -> T| {
        DMatrix::from_fn(n, po + k, |i, q| if q < po { w[(i, others[q])] } else { col(i, q - po) })
    };
    let mut rss_prev = lit::<T>(f64::INFINITY);
    let mut rest = DVector::<T>::zeros(po);
    for _ in 0..SEPARABLE_MAX_ITER {
        let wb = reduced(sd, &|i, l| (0..c).fold(T::zero(), |acc, l1| acc + a[l1] * w[(i, range.start + l1 * sd + l)]));
        let sol = ols(&wb, &y)?;
        b = sol.beta.as_slice()[po..].to_vec();
        let wa = reduced(c, &|i, l1| (0..sd).fold(T::zero(), |acc, l| acc + b[l] * w[(i, range.start + l1 * sd + l)]));
        let sol = ols(&wa, &y)?;
        a = sol.beta.as_slice()[po..].to_vec();
        rest = sol.beta.rows(0, po).into_owned();
        let rss = (&y - &wa * &sol.beta).norm_squared();
        if (rss_prev - rss).abs() <= lit::<T>(SEPARABLE_TOL) * rss.max(lit(f64::MIN_POSITIVE)) {
            break;
        }
        rss_prev = rss;
    }

    let mut beta = DVector::<T>::zeros(p);
    for (q, &k) in others.iter().enumerate() {
        beta[k] = rest[q];
    }
    for l1 in 0..c {
        for l in 0..sd {
            beta[range.start + l1 * sd + l] = a[l1] * b[l];
        }
    }
    let mut restricted = fit.clone();
    restricted.set_coefficients(beta)?;
    Ok(restricted)
}

/// Corrected surface of the separable refit on the region's grid.
pub fn separable_surface<T: Scalar>(fit: &SieveFit<T>, scr: &ScrGrid<T>) -> Result<Vec<T>> {
    let restricted = separable_fit(fit, scr.component)?;
    scr.points()
        .into_iter()
        .map(|(t, x)| restricted.eval_corrected(scr.component, t, x))
        .collect()
}
