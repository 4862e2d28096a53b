//! Rank-one Gram–Schmidt: degree by degree, the members of degree `n` are the
//! monic polynomials `v` with `<v^(k), E^(k)> = 0` for every member `E` of
//! degree `n - 1`. Candidates come from the eigenvalue solver and are then
//! refined and certified against these homogeneous equations.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{JopError, Result};
use crate::forms::InnerProductFamily;
use crate::mep::{self, binomial, ray_angle, Eigenpair, JointSystem, NewtonOptions};
use crate::poly::Polynomial;

/// Acceptance threshold for scaled residuals.
pub const GS_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct GSLedger {
    /// Systems of degree `0..=n_max`.
    pub systems: Vec<JointSystem>,
    /// `residuals[n][(a, b)]`: scaled `<E_{n,b}^(k), E_{n-1,a}^(k)>`. Empty for `n = 0`.
    pub residuals: Vec<DMatrix<f64>>,
}

impl GSLedger {
    pub fn counts(&self) -> Vec<usize> {
        self.systems.iter().map(JointSystem::len).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.iter().fold(0.0f64, |a, &x| a.max(x))).fold(0.0, f64::max)
    }

    /// Largest coefficient difference to `other`, member by member in canonical
    /// order; `None` when the shapes differ.
    pub fn max_difference(&self, other: &GSLedger) -> Option<f64> {
        if self.counts() != other.counts() {
            return None;
        }
        let mut worst = 0.0f64;
        for (a, b) in self.systems.iter().zip(&other.systems) {
            for (p, q) in a.pairs.iter().zip(&b.pairs) {
                let len = p.vector.coeffs().len().max(q.vector.coeffs().len());
                for (x, y) in p.vector.padded(len).iter().zip(q.vector.padded(len)) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        Some(worst)
    }
}

/// Scaled residual matrix: rows are members of `previous`, columns candidates.
pub fn gs_residuals(
    fam: &InnerProductFamily,
    candidates: &[Polynomial],
    previous: &JointSystem,
) -> Result<DMatrix<f64>> {
    let mut r = DMatrix::zeros(previous.len(), candidates.len());
    for (a, e) in previous.pairs.iter().enumerate() {
        for (b, v) in candidates.iter().enumerate() {
            let value = fam.rank_one_form(v, &e.vector)?;
            let scale = fam.rank_one_scale(v, &e.vector)?;
            r[(a, b)] = if scale > 0.0 { value.abs() / scale } else { value.abs() };
        }
    }
    Ok(r)
}

/// Signed cofactor matrix of a small square matrix.
fn cofactors(m: &DMatrix<f64>) -> DMatrix<f64> {
    let k = m.nrows();
    if k == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    DMatrix::from_fn(k, k, |a, b| {
        let minor = m.clone().remove_row(a).remove_column(b).determinant();
        if (a + b) % 2 == 0 {
            minor
        } else {
            -minor
        }
    })
}

fn monic(n: usize, low: &DVector<f64>) -> Polynomial {
    let mut c: Vec<f64> = low.iter().copied().collect();
    c.push(1.0);
    debug_assert_eq!(c.len(), n + 1);
    Polynomial::new(c)
}

/// Gauss–Newton on the rank-one equations against `previous`, in the free
/// coefficients of the monic `candidate`.
pub fn gs_refine(fam: &InnerProductFamily, candidate: &Polynomial, previous: &JointSystem) -> Result<Polynomial> {
    let n = candidate.degree().ok_or(JopError::ZeroPolynomial)?;
    let k = fam.k();
    let equations = previous.len();
    if n == 0 {
        return Ok(Polynomial::constant(1.0));
    }
    if equations != binomial(n + k - 2, k - 1) {
        return Err(JopError::IncompleteSystem { found: equations, expected: binomial(n + k - 2, k - 1) });
    }
    if equations < n {
        return Err(JopError::UnderdeterminedSystem { equations, unknowns: n });
    }
    let v0 = candidate.normalize()?;
    let weights: Vec<f64> = previous
        .pairs
        .iter()
        .map(|e| fam.rank_one_scale(&v0, &e.vector).map(|s| if s > 0.0 { 1.0 / s } else { 1.0 }))
        .collect::<Result<_>>()?;
    // dM/dc_s is the pairing matrix of x^s, the same at every iterate
    let basis_mats: Vec<Vec<DMatrix<f64>>> = previous
        .pairs
        .iter()
        .map(|e| (0..n).map(|s| fam.pairing_matrix(&Polynomial::monomial(s, 1.0), &e.vector, k)).collect())
        .collect::<Result<_>>()?;
    let system = |low: &DVector<f64>| -> Result<(DVector<f64>, DMatrix<f64>)> {
        let v = monic(n, low);
        let mut f = DVector::zeros(equations);
        let mut jac = DMatrix::zeros(equations, n);
        for (a, e) in previous.pairs.iter().enumerate() {
            let m = fam.pairing_matrix(&v, &e.vector, k)?;
            let w = weights[a] * fam.sign();
            f[a] = w * m.determinant();
            let cof = cofactors(&m);
            for s in 0..n {
                jac[(a, s)] = w * cof.component_mul(&basis_mats[a][s]).sum();
            }
        }
        Ok((f, jac))
    };
    let mut low = DVector::from_column_slice(&v0.coeffs()[..n]);
    let (mut f, mut jac) = system(&low)?;
    for _ in 0..60 {
        let step = jac
            .clone()
            .svd(true, true)
            .solve(&(-&f), 1e-14)
            .map_err(|e| JopError::ConvergenceFailure(e.to_string()))?;
        let current = f.norm();
        let mut t = 1.0;
        let mut moved = false;
        while t >= 1e-4 {
            let trial = &low + &step * t;
            let (ft, jt) = system(&trial)?;
            if ft.norm() < current {
                low = trial;
                f = ft;
                jac = jt;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved || step.norm() * t <= 1e-15 * (1.0 + low.norm()) {
            break;
        }
    }
    let v = monic(n, &low);
    let worst = gs_residuals(fam, std::slice::from_ref(&v), previous)?.max();
    if !(worst <= GS_TOL) {
        return Err(JopError::ConvergenceFailure(format!(
            "rank-one residual {worst:e} after refinement at degree {n}"
        )));
    }
    Ok(v)
}

/// Builds the ledger for degrees `0..=n_max`: eigenvalue-solver candidates,
/// refined and certified against the previous degree.
pub fn gs_drive(fam: &InnerProductFamily, n_max: usize, opts: &NewtonOptions) -> Result<GSLedger> {
    let mut systems: Vec<JointSystem> = Vec::with_capacity(n_max + 1);
    let mut residuals = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut sys = mep::solve(fam, n, opts)?;
        if n == 0 {
            sys.pairs = vec![Eigenpair { vector: Polynomial::constant(1.0), ..sys.pairs[0].clone() }];
            residuals.push(DMatrix::zeros(0, 1));
            systems.push(sys);
            continue;
        }
        let previous = &systems[n - 1];
        let refined: Vec<Polynomial> =
            sys.pairs.par_iter().map(|p| gs_refine(fam, &p.vector, previous)).collect::<Result<_>>()?;
        for (p, v) in sys.pairs.iter_mut().zip(refined) {
            let len = n + 1;
            let drift = ray_angle(&p.vector.padded(len), &v.padded(len));
            if drift > 1e-6 {
                return Err(JopError::ConvergenceFailure(format!(
                    "refinement moved a degree-{n} member by {drift:e} rad"
                )));
            }
            p.vector = v;
        }
        let candidates: Vec<Polynomial> = sys.pairs.iter().map(|p| p.vector.clone()).collect();
        residuals.push(gs_residuals(fam, &candidates, previous)?);
        systems.push(sys);
    }
    Ok(GSLedger { systems, residuals })
}

/// Largest scaled `|<E^(k), q^(k)>|` over the members `E` of `system` and
/// `trials` random `q` of degree `n - 1`; zero at degree 0.
pub fn complement_residual(fam: &InnerProductFamily, system: &JointSystem, trials: usize, seed: u64) -> Result<f64> {
    if system.n == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let q = Polynomial::new((0..system.n).map(|_| rng.random_range(-1.0..1.0)).collect());
        for p in &system.pairs {
            let scale = fam.rank_one_scale(&p.vector, &q)?;
            let value = fam.rank_one_form(&p.vector, &q)?.abs();
            worst = worst.max(if scale > 0.0 { value / scale } else { value });
        }
    }
    Ok(worst)
}

/// Largest scaled `|<E_a^(k), E_b^(k)>|` over distinct members.
pub fn mutual_rank_one(fam: &InnerProductFamily, system: &JointSystem) -> Result<f64> {
    let mut worst = 0.0f64;
    for (a, p) in system.pairs.iter().enumerate() {
        for q in &system.pairs[a + 1..] {
            let scale = fam.rank_one_scale(&p.vector, &q.vector)?;
            let value = fam.rank_one_form(&p.vector, &q.vector)?.abs();
            worst = worst.max(if scale > 0.0 { value / scale } else { value });
        }
    }
    Ok(worst)
}

/// Rank-one vectors orthogonal to `e_3` in the three-dimensional space spanned
/// by `e_1 = x1 x2`, `e_2 = x1 + x2`, `e_3 = 1`.
#[derive(Debug, Clone)]
pub struct ToyReport {
    pub epsilon: f64,
    pub lambda: f64,
    pub gram: Matrix3<f64>,
    /// Coordinates in `(e_1, e_2, e_3)`.
    pub vectors: Vec<Vector3<f64>>,
    /// Gram product of the two vectors when there are two.
    pub mutual_product: Option<f64>,
    /// `1 - eps^4 - lambda eps^2`.
    pub criterion: f64,
    pub orthogonal: bool,
}

impl ToyReport {
    pub fn count(&self) -> usize {
        self.vectors.len()
    }
}

/// The rank-one vectors are `(x1 - a)(x2 - a) = e_1 - a e_2 + a^2 e_3`; the
/// condition `<., e_3> = 0` is a quadratic in `a`.
pub fn toy_example(epsilon: f64, lambda: f64) -> ToyReport {
    let e2 = epsilon * epsilon;
    let gram = Matrix3::new(1.0, 0.0, -e2, 0.0, lambda, 0.0, -e2, 0.0, 1.0);
    let (c2, c1, c0) = (gram[(2, 2)], -gram[(2, 1)], gram[(2, 0)]);
    let disc = c1 * c1 - 4.0 * c2 * c0;
    let roots = if disc.abs() <= 1e-14 * (c1 * c1 + (c2 * c0).abs()).max(f64::MIN_POSITIVE) {
        vec![-c1 / (2.0 * c2)]
    } else if disc > 0.0 {
        let s = disc.sqrt();
        vec![(-c1 + s) / (2.0 * c2), (-c1 - s) / (2.0 * c2)]
    } else {
        Vec::new()
    };
    let vectors: Vec<Vector3<f64>> = roots.iter().map(|&a| Vector3::new(1.0, -a, a * a)).collect();
    let mutual_product = (vectors.len() == 2).then(|| (vectors[0].transpose() * gram * vectors[1])[0]);
    let criterion = 1.0 - e2 * e2 - lambda * e2;
    let orthogonal = mutual_product.is_some_and(|p| p.abs() <= 1e-12);
    ToyReport { epsilon, lambda, gram, vectors, mutual_product, criterion, orthogonal }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::IntervalMeasure;
    use proptest::prelude::*;

    fn heun() -> InnerProductFamily {
        let e = [0.0, 1.0, 2.0];
        let measures = (1..3)
            .map(|j| e.iter().fold(IntervalMeasure::uniform(e[j - 1], e[j]), |m, &x| m.with_factor(x, -0.5)))
            .collect();
        InnerProductFamily::new(measures, 4).unwrap()
    }

    fn hs3() -> InnerProductFamily {
        let e = [0.0, 1.0, 2.0, 3.0];
        let measures = (1..4).map(|j| IntervalMeasure::uniform(e[j - 1], e[j])).collect();
        InnerProductFamily::new(measures, 3).unwrap()
    }

    #[test]
    fn solver_members_satisfy_the_rank_one_equations() {
        let fam = hs3();
        let o = NewtonOptions::default();
        for n in 1..=3 {
            let prev = mep::solve(&fam, n - 1, &o).unwrap();
            let cur = mep::solve(&fam, n, &o).unwrap();
            let cands: Vec<_> = cur.pairs.iter().map(|p| p.vector.clone()).collect();
            assert!(gs_residuals(&fam, &cands, &prev).unwrap().max() < 1e-8);
        }
    }

    #[test]
    fn degree_one_from_the_pencil_is_orthogonal_to_one() {
        let fam = heun();
        let prev = mep::solve(&fam, 0, &NewtonOptions::default()).unwrap();
        let cur = mep::solve_k2(&mep::build(&fam, 1).unwrap()).unwrap();
        let cands: Vec<_> = cur.pairs.iter().map(|p| p.vector.clone()).collect();
        assert!(gs_residuals(&fam, &cands, &prev).unwrap().max() < 1e-12);
    }

    #[test]
    fn off_solution_candidates_leave_residuals() {
        // scan x + c away from the two solutions
        let fam = heun();
        let o = NewtonOptions::default();
        let prev = mep::solve(&fam, 0, &o).unwrap();
        let cur = mep::solve(&fam, 1, &o).unwrap();
        let sols: Vec<f64> = cur.pairs.iter().map(|p| p.vector.coeff(0)).collect();
        for i in 0..41 {
            let c = -3.0 + 0.15 * i as f64;
            if sols.iter().all(|s| (s - c).abs() > 0.05) {
                let r = gs_residuals(&fam, &[Polynomial::new(vec![c, 1.0])], &prev).unwrap();
                assert!(r.max() > 1e-4, "c = {c}");
            }
        }
    }

    #[test]
    fn refine_fixes_solver_output_and_recovers_perturbations() {
        let o = NewtonOptions::default();
        for fam in [heun(), hs3()] {
            for n in 1..=3 {
                let prev = mep::solve(&fam, n - 1, &o).unwrap();
                let cur = mep::solve(&fam, n, &o).unwrap();
                for (i, p) in cur.pairs.iter().enumerate() {
                    let fixed = gs_refine(&fam, &p.vector, &prev).unwrap();
                    let mut c = p.vector.coeffs().to_vec();
                    for (s, x) in c.iter_mut().take(n).enumerate() {
                        *x += 1e-3 * if (s + i) % 2 == 0 { 1.0 } else { -1.0 };
                    }
                    let back = gs_refine(&fam, &Polynomial::new(c), &prev).unwrap();
                    for s in 0..=n {
                        assert!((fixed.coeff(s) - p.vector.coeff(s)).abs() < 1e-10);
                        assert!((back.coeff(s) - p.vector.coeff(s)).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn solved_systems_are_rank_one_complements() {
        let o = NewtonOptions::default();
        for fam in [heun(), hs3()] {
            for n in 0..=3 {
                let sys = mep::solve(&fam, n, &o).unwrap();
                assert!(complement_residual(&fam, &sys, 50, 3).unwrap() < 1e-8);
                assert!(mutual_rank_one(&fam, &sys).unwrap() < 1e-8);
            }
        }
        // a perturbed member is caught
        let mut sys = mep::solve(&hs3(), 2, &o).unwrap();
        let c = sys.pairs[0].vector.coeffs().to_vec();
        sys.pairs[0].vector = Polynomial::new(vec![c[0] + 1e-2, c[1], c[2]]);
        assert!(complement_residual(&hs3(), &sys, 50, 3).unwrap() > 1e-4);
    }

    #[test]
    fn drive_counts_follow_the_dimension() {
        let o = NewtonOptions::default();
        let l2 = gs_drive(&heun(), 3, &o).unwrap();
        assert_eq!(l2.counts(), vec![1, 2, 3, 4]);
        assert_eq!(l2.systems[0].pairs[0].vector.coeffs(), &[1.0]);
        assert!(l2.max_residual() < GS_TOL);
        let l3 = gs_drive(&hs3(), 2, &o).unwrap();
        assert_eq!(l3.counts(), vec![1, 3, 6]);
        assert!(l3.max_residual() < GS_TOL);
    }

    #[test]
    fn ledgers_do_not_depend_on_the_seed() {
        let a = gs_drive(&hs3(), 2, &NewtonOptions { seed: 1, ..Default::default() }).unwrap();
        let b = gs_drive(&hs3(), 2, &NewtonOptions { seed: 977, ..Default::default() }).unwrap();
        assert!(a.max_difference(&b).unwrap() < 1e-8);
    }

    #[test]
    fn toy_counts_and_orthogonality() {
        assert_eq!(toy_example(0.0, 2.0).count(), 1);
        assert_eq!(toy_example(0.0, 2.0).vectors[0], Vector3::new(1.0, 0.0, 0.0));
        let hit = toy_example(0.5, 3.75);
        assert_eq!(hit.count(), 2);
        assert!(hit.orthogonal && hit.criterion.abs() < 1e-15);
        let miss = toy_example(0.5, 1.0);
        assert!(!miss.orthogonal);
        assert!((miss.mutual_product.unwrap() - 11.0 / 16.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn toy_product_matches_the_closed_form(eps in 0.01f64..0.99, lambda in 0.01f64..10.0) {
            let r = toy_example(eps, lambda);
            prop_assert_eq!(r.count(), 2);
            // each vector is rank one and orthogonal to e_3
            for v in &r.vectors {
                prop_assert!((v[0] * v[2] - v[1] * v[1]).abs() < 1e-12);
                prop_assert!((r.gram.row(2) * v)[0].abs() < 1e-12);
            }
            prop_assert!((r.mutual_product.unwrap() - r.criterion).abs() < 1e-12);
        }
    }
}
