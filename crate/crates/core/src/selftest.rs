//! Fast invariant checks behind `optrf selftest`.
//!
//! Each check compares an implementation route against an independent one on
//! a small grid; the whole suite runs in well under a second when optimized.

use crate::error::Result;
use crate::grid::{ingest_samples, GridDomain};
use crate::kernels::{
    gram_periodized, gram_reconstructed, p_tau, KernelSpec, DEFAULT_PERIOD_RADIUS,
};
use crate::learn::{exact_gradient, gradient_estimate};
use crate::oracle::{
    degree_of_freedom, optimized_distribution, optimized_distribution_unsymmetrized,
    symmetrized_sigma,
};
use crate::qsim::{
    be_sigma_eps, be_sqrt_qtau, prepare_psi, InvSqrtPoly, Tier, DEFAULT_DELTA, FEATURE_REGISTER,
};
use crate::total_variation;

/// Outcome of one invariant check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, measured: Result<f64>, bound: f64) -> Check {
    match measured {
        Ok(value) => Check {
            name,
            passed: value <= bound,
            detail: format!("{value:.3e} <= {bound:.0e}"),
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn reconstruction() -> Result<f64> {
    let domain = GridDomain::new(1, 8)?;
    let kernel = KernelSpec::gaussian(1.0)?;
    let fourier = gram_reconstructed(&kernel, &domain)?;
    Ok(fourier.max_abs_diff(&gram_periodized(&kernel, &domain, DEFAULT_PERIOD_RADIUS)?))
}

fn setup() -> Result<(KernelSpec, GridDomain, crate::grid::EmpiricalDist)> {
    let domain = GridDomain::new(1, 8)?;
    let qhat = ingest_samples(&domain, &[0, 1, 1, 3, 4, 4, 4, 6, 7])?;
    Ok((KernelSpec::laplacian(1.0)?, domain, qhat))
}

fn oracle_routes() -> Result<f64> {
    let (kernel, domain, qhat) = setup()?;
    let a = optimized_distribution(&kernel, &domain, &qhat, 0.1)?;
    let b = optimized_distribution_unsymmetrized(&kernel, &domain, &qhat, 0.1)?;
    Ok(a.probs.total_variation(&b.probs))
}

fn sampling_state() -> Result<f64> {
    let (kernel, domain, qhat) = setup()?;
    let exact = optimized_distribution(&kernel, &domain, &qhat, 0.1)?;
    let (psi, _) = prepare_psi(&kernel, &domain, &qhat, 0.1, Tier::Oracle, DEFAULT_DELTA)?;
    Ok(total_variation(
        &psi.marginal(FEATURE_REGISTER)?,
        exact.probs.probs(),
    ))
}

fn block_encodings() -> Result<f64> {
    let (kernel, domain, qhat) = setup()?;
    // construction verifies the residual against the declared delta
    let a = be_sqrt_qtau(&kernel, &domain, 1e-3)?;
    let b = be_sigma_eps(&kernel, &domain, &qhat, 0.1, 1e-3)?;
    let q = kernel.q_tau_vector(&domain)?;
    let q_max = kernel.q_tau_max(&domain)?;
    let roots: Vec<f64> = q.iter().map(|w| (w / q_max).sqrt()).collect();
    let first = a.residual(&crate::kernels::DenseOperator::from_real_diagonal(&roots));
    let sigma =
        crate::oracle::sigma_eps(&gram_reconstructed(&kernel, &domain)?, &qhat, 0.1, q_max)?;
    Ok(first.max(b.residual(&sigma.normalized())))
}

fn polynomial() -> Result<f64> {
    Ok(InvSqrtPoly::fit(8.0, 1e-3)?.grid_error())
}

fn gradient() -> Result<f64> {
    let domain = GridDomain::new(1, 8)?;
    let density = crate::kernels::ProbVector::new((1..=8).map(f64::from).collect())?;
    let target: Vec<f64> = (0..8).map(|x| (0.9 * x as f64).cos()).collect();
    let features = [1, 2, 6, 6];
    let alpha = [0.3, -0.1, 0.2, 0.05];
    let mut mean = vec![0.0; features.len()];
    for x in 0..8 {
        for m in 0..features.len() {
            let g = gradient_estimate(&domain, &alpha, (x, target[x]), m, &features)?;
            for (acc, gi) in mean.iter_mut().zip(g) {
                *acc += density.probs()[x] / features.len() as f64 * gi;
            }
        }
    }
    let exact = exact_gradient(&domain, &alpha, &features, &target, &density)?;
    Ok(mean
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

fn degree_monotone() -> Result<f64> {
    let (kernel, domain, qhat) = setup()?;
    let sigma = symmetrized_sigma(&gram_reconstructed(&kernel, &domain)?, &qhat)?;
    let grid = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2];
    let values = grid
        .iter()
        .map(|&e| degree_of_freedom(&sigma, e))
        .collect::<Result<Vec<_>>>()?;
    // worst non-decrease; negative when strictly decreasing
    Ok(values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max))
}

fn large_eps() -> Result<f64> {
    let (kernel, domain, qhat) = setup()?;
    let q_max = kernel.q_tau_max(&domain)?;
    let opt = optimized_distribution(&kernel, &domain, &qhat, 1e8 * q_max)?;
    Ok(opt.probs.total_variation(&p_tau(&kernel, &domain)?))
}

/// Runs every check; never panics on a failed invariant.
pub fn run_all() -> Vec<Check> {
    vec![
        check(
            "fourier gram matches periodized sum",
            reconstruction(),
            1e-8,
        ),
        check("cholesky and lu routes agree", oracle_routes(), 1e-10),
        check(
            "oracle-tier marginal is optimized law",
            sampling_state(),
            1e-10,
        ),
        check(
            "block encodings within declared delta",
            block_encodings(),
            1e-3,
        ),
        check("inverse-root polynomial sup error", polynomial(), 1e-3),
        check("gradient estimate is unbiased", gradient(), 1e-12),
        check(
            "degree of freedom strictly decreasing",
            degree_monotone(),
            -1e-15,
        ),
        check("huge eps recovers P", large_eps(), 1e-6),
    ]
}
