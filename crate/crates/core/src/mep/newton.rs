//! Newton iteration on the square augmented system
//! `[sum lambda_j A_j v; c_v . v - 1; c_l . lambda - 1] = 0`, seeded by root
//! distributions, with concurrent per-seed solves and a sequential dedup pass.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    build, build_conditioned, eigenvalue_formula, expected_count, normalize_lambda, ray_angle, root_signature,
    solve_k2, Eigenpair, JointSystem, RectMEP, TAU_DUP,
};
use crate::error::{JopError, Result};
use crate::forms::InnerProductFamily;
use crate::poly::Polynomial;

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    /// Seed for the normalization covectors and fallback root placements.
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once the relative residual drops to this level.
    pub tol: f64,
    /// Largest residual still accepted when the iteration stalls.
    pub accept: f64,
    pub tau_dup: f64,
    /// Rounds of random extra seeds tried when the structured seeds fall short.
    pub extra_rounds: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { seed: 0, max_iter: 50, tol: 1e-11, accept: 1e-9, tau_dup: TAU_DUP, extra_rounds: 4 }
    }
}

/// All compositions of `n` into `k` nonnegative parts, leftmost part largest first.
pub fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return if n == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    if k == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in (0..=n).rev() {
        for mut rest in compositions(n - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Window in which seed roots for an interval are placed.
fn seed_windows(lo: f64, hi: f64) -> Vec<(f64, f64)> {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => vec![(lo, hi)],
        (true, false) => vec![(lo, lo + 3.0)],
        (false, true) => vec![(hi - 3.0, hi)],
        (false, false) => vec![(-2.0, -0.5), (0.5, 2.0)],
    }
}

fn split_count(count: usize, windows: usize) -> Vec<usize> {
    if windows == 1 {
        vec![count]
    } else {
        vec![count.div_ceil(2), count / 2]
    }
}

fn fallback_lambda(k: usize) -> Vec<f64> {
    normalize_lambda(&(0..k).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect::<Vec<_>>())
}

fn seed_pair(fam: &InnerProductFamily, roots: &[f64]) -> (Polynomial, Vec<f64>) {
    let v = Polynomial::from_roots(roots, 1.0);
    let lambda = eigenvalue_formula(fam, &v).unwrap_or_else(|_| fallback_lambda(fam.k()));
    (v, lambda)
}

/// Monic seed with `counts[j]` roots equispaced inside interval `j`, and the
/// eigenvalue predicted for it.
pub fn seed_from_distribution(fam: &InnerProductFamily, n: usize, counts: &[usize]) -> Result<(Polynomial, Vec<f64>)> {
    if counts.len() != fam.k() || counts.iter().sum::<usize>() != n {
        return Err(JopError::InvalidConfig(format!(
            "counts {counts:?} are not a {}-part composition of {n}",
            fam.k()
        )));
    }
    let mut roots = Vec::with_capacity(n);
    for (&(lo, hi), &c) in fam.intervals().iter().zip(counts) {
        let windows = seed_windows(lo, hi);
        for ((a, b), c) in windows.iter().zip(split_count(c, windows.len())) {
            roots.extend((1..=c).map(|i| a + (b - a) * i as f64 / (c + 1) as f64));
        }
    }
    Ok(seed_pair(fam, &roots))
}

fn random_seed(fam: &InnerProductFamily, counts: &[usize], rng: &mut ChaCha8Rng) -> (Polynomial, Vec<f64>) {
    let mut roots = Vec::new();
    for (&(lo, hi), &c) in fam.intervals().iter().zip(counts) {
        let windows = seed_windows(lo, hi);
        for ((a, b), c) in windows.iter().zip(split_count(c, windows.len())) {
            roots.extend((0..c).map(|_| a + (b - a) * rng.random_range(0.02..0.98)));
        }
    }
    seed_pair(fam, &roots)
}

fn unit_random(dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let v = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
    let n = v.norm();
    if n == 0.0 {
        DVector::from_element(dim, 1.0 / (dim as f64).sqrt())
    } else {
        v / n
    }
}

/// Affine normalization `c . x = 1` near the seed direction: the unit seed
/// plus a fixed random perturbation of half its length.
fn covector(x0: &DVector<f64>, perturb: &DVector<f64>) -> DVector<f64> {
    let n = x0.norm();
    if n == 0.0 {
        return perturb.clone();
    }
    x0 / n + perturb * 0.5
}

/// Refines one seed; returns the pair and the number of Newton steps taken.
pub fn newton_refine(
    mep: &RectMEP,
    v0: &Polynomial,
    lambda0: &[f64],
    opts: &NewtonOptions,
) -> Result<(Eigenpair, usize)> {
    let (nv, k, m) = (mep.cols(), mep.k, mep.rows());
    if v0.coeffs().len() > nv || lambda0.len() != k {
        return Err(JopError::InvalidConfig("seed does not match problem size".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let r_v = unit_random(nv, &mut rng);
    let r_l = unit_random(k, &mut rng);

    let v_seed = mep.to_coords(v0);
    let l_seed = DVector::from_column_slice(lambda0);
    let c_v = covector(&v_seed, &r_v);
    let c_l = covector(&l_seed, &r_l);
    let mut v = &v_seed / c_v.dot(&v_seed);
    let mut lam = &l_seed / c_l.dot(&l_seed);
    if !v.iter().chain(lam.iter()).all(|x| x.is_finite()) {
        return Err(JopError::ConvergenceFailure("seed lies on the normalization hyperplane".into()));
    }

    let scale = mep.scale();
    let merit = |v: &DVector<f64>, lam: &DVector<f64>| {
        let top = mep.combined(lam.as_slice()) * v;
        let rel = top.norm() / (scale * v.norm() * lam.norm()).max(f64::MIN_POSITIVE);
        (rel * rel + (c_v.dot(v) - 1.0).powi(2) + (c_l.dot(lam) - 1.0).powi(2)).sqrt()
    };

    let mut converged_at = None;
    let mut last = f64::INFINITY;
    for it in 0..=opts.max_iter {
        let rel = mep.residual(v.as_slice(), lam.as_slice());
        if let Some(at) = converged_at {
            // polish steps stop once they no longer pay off
            if rel >= 0.5 * last || it >= at + 3 {
                return Ok((mep.eigenpair(v.as_slice(), lam.as_slice()), at));
            }
        } else if rel <= opts.tol {
            converged_at = Some(it);
        }
        last = rel;
        if it == opts.max_iter {
            if converged_at.is_some() {
                return Ok((mep.eigenpair(v.as_slice(), lam.as_slice()), it));
            }
            break;
        }
        let comb = mep.combined(lam.as_slice());
        let mut jac = DMatrix::zeros(m + 2, nv + k);
        let mut f = DVector::zeros(m + 2);
        jac.view_mut((0, 0), (m, nv)).copy_from(&(&comb / scale));
        for j in 0..k {
            jac.view_mut((0, nv + j), (m, 1)).copy_from(&(&mep.a[j] * &v / scale));
        }
        f.rows_mut(0, m).copy_from(&(&comb * &v / scale));
        for s in 0..nv {
            jac[(m, s)] = c_v[s];
        }
        for j in 0..k {
            jac[(m + 1, nv + j)] = c_l[j];
        }
        f[m] = c_v.dot(&v) - 1.0;
        f[m + 1] = c_l.dot(&lam) - 1.0;
        let dx = jac
            .full_piv_lu()
            .solve(&(-f))
            .ok_or_else(|| JopError::ConvergenceFailure("singular Newton Jacobian".into()))?;
        let dv = dx.rows(0, nv).into_owned();
        let dl = dx.rows(nv, k).into_owned();

        let current = merit(&v, &lam);
        let mut t = 1.0;
        loop {
            let (vt, lt) = (&v + &dv * t, &lam + &dl * t);
            if merit(&vt, &lt) <= current || t < 1e-3 {
                v = vt;
                lam = lt;
                break;
            }
            t *= 0.5;
        }
    }
    let rel = mep.residual(v.as_slice(), lam.as_slice());
    if rel <= opts.accept {
        warn!("Newton stalled at residual {rel:e}; accepted");
        return Ok((mep.eigenpair(v.as_slice(), lam.as_slice()), opts.max_iter));
    }
    Err(JopError::ConvergenceFailure(format!("residual {rel:e} after {} iterations", opts.max_iter)))
}

/// Damped Newton on `(roots of v, lambda)` with `v` monic: `n + k - 1` equations
/// plus `c_l . lambda = 1` in `n + k` unknowns. Root coordinates keep the iterate
/// near the seed's root distribution; the result is polished by [`newton_refine`].
fn root_newton(mep: &RectMEP, roots0: &[f64], lambda0: &[f64], opts: &NewtonOptions) -> Option<Eigenpair> {
    let (n, k, m) = (roots0.len(), mep.k, mep.rows());
    if n != mep.n {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let l_seed = DVector::from_column_slice(lambda0);
    let c_l = covector(&l_seed, &unit_random(k, &mut rng));
    let mut sorted = roots0.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut roots = DVector::from_column_slice(&sorted);
    let mut lam = &l_seed / c_l.dot(&l_seed);
    let gaps = confinement(mep.intervals().unwrap_or(&[]), &sorted);
    let scale = mep.scale();
    let coeffs = |r: &DVector<f64>| mep.to_coords(&Polynomial::from_roots(r.as_slice(), 1.0));
    let merit = |r: &DVector<f64>, lam: &DVector<f64>| {
        let v = coeffs(r);
        let top = mep.combined(lam.as_slice()) * &v;
        let rel = top.norm() / (scale * v.norm() * lam.norm()).max(f64::MIN_POSITIVE);
        (rel * rel + (c_l.dot(lam) - 1.0).powi(2)).sqrt()
    };
    for _ in 0..opts.max_iter {
        let v = coeffs(&roots);
        if mep.residual(v.as_slice(), lam.as_slice()) <= opts.tol {
            break;
        }
        let comb = mep.combined(lam.as_slice());
        let mut jac = DMatrix::zeros(m + 1, n + k);
        for i in 0..n {
            let others: Vec<f64> = (0..n).filter(|&l| l != i).map(|l| roots[l]).collect();
            let dv = mep.to_coords(&Polynomial::from_roots(&others, -1.0));
            jac.view_mut((0, i), (m, 1)).copy_from(&(&comb * dv / scale));
        }
        for j in 0..k {
            jac.view_mut((0, n + j), (m, 1)).copy_from(&(&mep.a[j] * &v / scale));
            jac[(m, n + j)] = c_l[j];
        }
        let mut f = DVector::zeros(m + 1);
        f.rows_mut(0, m).copy_from(&(&comb * &v / scale));
        f[m] = c_l.dot(&lam) - 1.0;
        let dx = jac.full_piv_lu().solve(&(-f))?;
        let dr = dx.rows(0, n).into_owned();
        let dl = dx.rows(n, k).into_owned();
        let current = merit(&roots, &lam);
        let mut t: f64 = 1.0;
        for g in &gaps {
            let (g0, gd) = (g.a.dot(&roots) + g.b, g.a.dot(&dr));
            if gd < 0.0 {
                t = t.min(0.9 * g0 / -gd);
            }
        }
        loop {
            let (rt, lt) = (&roots + &dr * t, &lam + &dl * t);
            if merit(&rt, &lt) <= current || t < 1e-3 {
                roots = rt;
                lam = lt;
                break;
            }
            t *= 0.5;
        }
        if !roots.iter().chain(lam.iter()).all(|x| x.is_finite()) {
            return None;
        }
    }
    Some(mep.eigenpair(coeffs(&roots).as_slice(), lam.as_slice()))
}

/// Affine functional `a . r + b` on the root vector.
struct Gap {
    a: DVector<f64>,
    b: f64,
}

/// Functionals that stay positive while every root keeps its interval and the
/// roots inside one interval keep their order.
fn confinement(intervals: &[(f64, f64)], roots: &[f64]) -> Vec<Gap> {
    let n = roots.len();
    let unit = |i: usize, s: f64| {
        let mut a = DVector::zeros(n);
        a[i] = s;
        a
    };
    let home = |x: f64| intervals.iter().position(|&(lo, hi)| x > lo && x < hi);
    let mut gaps = Vec::new();
    for (i, &x) in roots.iter().enumerate() {
        let Some(j) = home(x) else { continue };
        let (lo, hi) = intervals[j];
        if lo.is_finite() {
            gaps.push(Gap { a: unit(i, 1.0), b: -lo });
        }
        if hi.is_finite() {
            gaps.push(Gap { a: unit(i, -1.0), b: hi });
        }
        if i + 1 < n && home(roots[i + 1]) == Some(j) {
            gaps.push(Gap { a: unit(i + 1, 1.0) - unit(i, 1.0), b: 0.0 });
        }
    }
    gaps
}

/// Root-coordinate stage followed by the coefficient polish; falls back to the
/// plain polish from the seed when the first stage breaks down.
fn refine_from_roots(mep: &RectMEP, roots: &[f64], lambda: &[f64], opts: &NewtonOptions) -> Result<Eigenpair> {
    if let Some(p) = root_newton(mep, roots, lambda, opts) {
        if let Ok((q, _)) = newton_refine(mep, &p.vector, &p.lambda, opts) {
            return Ok(q);
        }
    }
    newton_refine(mep, &Polynomial::from_roots(roots, 1.0), lambda, opts).map(|(p, _)| p)
}

/// Converges one seed: root coordinates first when the seed has `n` real roots,
/// then the coefficient polish.
pub fn refine_seed(mep: &RectMEP, v: &Polynomial, lambda: &[f64], opts: &NewtonOptions) -> Result<Eigenpair> {
    let roots = v.real_roots().unwrap_or_default();
    if roots.len() == mep.n && v.degree() == Some(mep.n) {
        refine_from_roots(mep, &roots, lambda, opts)
    } else {
        newton_refine(mep, v, lambda, opts).map(|(p, _)| p)
    }
}

fn vector_angle(a: &Polynomial, b: &Polynomial) -> f64 {
    let n = a.coeffs().len().max(b.coeffs().len());
    ray_angle(&a.padded(n), &b.padded(n))
}

/// Merges `new` into `kept`; a pair is a duplicate when both its eigenvalue
/// ray and its vector line coincide with a kept pair.
fn merge_distinct(kept: &mut Vec<Eigenpair>, new: Vec<Eigenpair>, tau: f64) {
    for p in new {
        let dup = kept
            .iter_mut()
            .find(|q| ray_angle(&q.lambda, &p.lambda) < tau && vector_angle(&q.vector, &p.vector) < tau.sqrt());
        match dup {
            Some(q) if p.residual < q.residual => *q = p,
            Some(_) => {}
            None => kept.push(p),
        }
    }
}

fn run_seeds(mep: &RectMEP, seeds: &[(Polynomial, Vec<f64>)], opts: &NewtonOptions) -> (Vec<Eigenpair>, usize) {
    let results: Vec<Result<Eigenpair>> = seeds.par_iter().map(|(v, l)| refine_seed(mep, v, l, opts)).collect();
    let mut pairs = Vec::new();
    let mut failures = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => pairs.push(p),
            Err(e) => {
                debug!("seed {i} failed: {e}");
                failures += 1;
            }
        }
    }
    (pairs, failures)
}

/// Newton from every seed, deduplicated. Fails with `IncompleteSystem` when
/// fewer than `C(n+k-1, k-1)` distinct pairs survive.
pub fn solve_newton(mep: &RectMEP, seeds: &[(Polynomial, Vec<f64>)], opts: &NewtonOptions) -> Result<JointSystem> {
    let (found, failures) = run_seeds(mep, seeds, opts);
    let mut kept = Vec::new();
    merge_distinct(&mut kept, found, opts.tau_dup);
    let expected = expected_count(mep.n, mep.k);
    if kept.len() < expected {
        return Err(JopError::IncompleteSystem { found: kept.len(), expected });
    }
    Ok(JointSystem::assemble(mep, kept, failures))
}

/// Full degree-`n` solve for a family in orthonormal coordinates: the pencil
/// path for `k = 2`, otherwise Newton from every root distribution, topped up by
/// random seeds if needed. Residuals refer to the monomial moment problem and
/// the returned system carries its orthogonality matrices.
pub fn solve(fam: &InnerProductFamily, n: usize, opts: &NewtonOptions) -> Result<JointSystem> {
    let mep = build_conditioned(fam, n)?;
    let k = fam.k();
    let (pairs, failures) = if k == 2 { (solve_k2(&mep)?.pairs, 0) } else { newton_all(fam, &mep, opts)? };
    // report residuals against the monomial moment problem
    let mono = build(fam, n)?;
    let pairs = pairs
        .into_iter()
        .map(|p| {
            let residual = mono.residual(&p.vector.padded(n + 1), &p.lambda);
            Eigenpair { residual, ..p }
        })
        .collect();
    JointSystem::assemble(&mep, pairs, failures).with_orthogonality(fam)
}

const SEEDS_PER_TARGET: usize = 8;

fn newton_all(fam: &InnerProductFamily, mep: &RectMEP, opts: &NewtonOptions) -> Result<(Vec<Eigenpair>, usize)> {
    let (n, k) = (mep.n, mep.k);
    let comps = compositions(n, k);
    let seeds = comps.iter().map(|c| seed_from_distribution(fam, n, c)).collect::<Result<Vec<_>>>()?;
    let expected = expected_count(n, k);
    let (found, mut failures) = run_seeds(mep, &seeds, opts);
    let mut kept = Vec::new();
    merge_distinct(&mut kept, found, opts.tau_dup);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    for round in 0..opts.extra_rounds {
        if kept.len() >= expected {
            break;
        }
        debug!("round {round}: {} of {expected} pairs, adding random seeds", kept.len());
        let intervals = fam.intervals();
        let seen: Vec<Vec<usize>> = kept.iter().map(|p| root_signature(&p.vector, &intervals)).collect();
        let missing: Vec<&Vec<usize>> = comps.iter().filter(|c| !seen.contains(c)).collect();
        let targets = if missing.is_empty() { comps.iter().collect() } else { missing };
        let extra: Vec<_> = targets
            .iter()
            .flat_map(|c| (0..SEEDS_PER_TARGET).map(|_| random_seed(fam, c, &mut rng)).collect::<Vec<_>>())
            .collect();
        let (found, f) = run_seeds(mep, &extra, opts);
        failures += f;
        merge_distinct(&mut kept, found, opts.tau_dup);
    }
    if kept.len() < expected {
        return Err(JopError::IncompleteSystem { found: kept.len(), expected });
    }
    if kept.len() > expected {
        warn!("found {} distinct pairs, expected {expected}", kept.len());
    }
    Ok((kept, failures))
}
