use super::*;
use crate::measure::IntervalMeasure;
use proptest::prelude::*;

fn two_unit(n_max: usize) -> InnerProductFamily {
    InnerProductFamily::new(vec![IntervalMeasure::uniform(-2.0, -1.0), IntervalMeasure::uniform(1.0, 2.0)], n_max)
        .unwrap()
}

/// Intervals `(e_{j-1}, e_j)` with weight `prod |x - e_i|^{m_i - 1}`.
fn hs_family(e: &[f64], m: &[f64], n_max: usize) -> InnerProductFamily {
    let measures = (1..e.len())
        .map(|j| {
            e.iter()
                .zip(m)
                .fold(IntervalMeasure::uniform(e[j - 1], e[j]), |acc, (&ei, &mi)| acc.with_factor(ei, mi - 1.0))
        })
        .collect();
    InnerProductFamily::new(measures, n_max).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn build_matches_closed_form_moments() {
    let mep = build(&two_unit(2), 1).unwrap();
    let a1 = DMatrix::from_row_slice(2, 2, &[1.0, -1.5, -1.5, 7.0 / 3.0]);
    let a2 = DMatrix::from_row_slice(2, 2, &[1.0, 1.5, 1.5, 7.0 / 3.0]);
    assert!((&mep.a[0] - a1).norm() < 1e-14);
    assert!((&mep.a[1] - a2).norm() < 1e-14);
    assert!(mep.is_hankel(1e-14));

    let fam = hs_family(&[0.0, 1.0, 2.0, 3.0], &[1.0; 4], 3);
    for n in 0..=3 {
        let mep = build(&fam, n).unwrap();
        assert_eq!((mep.rows(), mep.cols()), (n + 2, n + 1));
        assert_eq!(mep.rows() - mep.cols(), mep.k - 2);
        assert!(mep.is_hankel(1e-14));
        assert!(mep.is_symmetric(1e-14));
    }
    assert!(matches!(build(&fam, 4), Err(JopError::InsufficientMoments { .. })));
}

#[test]
fn pencil_matches_dense_quadratic() {
    let fam = two_unit(2);
    let mep = build(&fam, 1).unwrap();
    let sys = solve_k2(&mep).unwrap();
    assert_eq!(sys.len(), 2);
    assert!(sys.max_residual() < 1e-12);

    // det(A - mu B) = det(B) mu^2 + b mu + det(A)
    let (a, b) = (&mep.a[0], &mep.a[1]);
    let qa = b.determinant();
    let qb = -(a[(0, 0)] * b[(1, 1)] + a[(1, 1)] * b[(0, 0)] - a[(0, 1)] * b[(1, 0)] - a[(1, 0)] * b[(0, 1)]);
    let qc = a.determinant();
    let disc = (qb * qb - 4.0 * qa * qc).sqrt();
    let mut expect = [(-qb - disc) / (2.0 * qa), (-qb + disc) / (2.0 * qa)];
    expect.sort_by(f64::total_cmp);
    let mut got: Vec<f64> = sys.pairs.iter().map(|p| -p.lambda[1] / p.lambda[0]).collect();
    got.sort_by(f64::total_cmp);
    for (g, e) in got.iter().zip(&expect) {
        assert!(close(*g, *e, 1e-12), "{g} vs {e}");
    }

    let (e1, e2) = (&sys.pairs[0].vector, &sys.pairs[1].vector);
    for j in 1..=2 {
        let ip = fam.inner(j, e1, e2).unwrap();
        let scale = (fam.inner(j, e1, e1).unwrap() * fam.inner(j, e2, e2).unwrap()).sqrt();
        assert!(ip.abs() < 1e-12 * scale);
    }
    for p in &sys.pairs {
        assert_eq!(p.vector.leading(), 1.0);
        assert!((p.lambda.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(p.lambda[0] > 0.0);
    }
}

#[test]
fn degree_zero_is_the_constant() {
    let fam = two_unit(2);
    let sys = solve_k2(&build(&fam, 0).unwrap()).unwrap();
    assert_eq!(sys.len(), 1);
    assert_eq!(sys.pairs[0].vector.coeffs(), &[1.0]);
    let fam = hs_family(&[0.0, 1.0, 2.0, 3.0], &[1.0; 4], 1);
    let sys = solve(&fam, 0, &NewtonOptions::default()).unwrap();
    assert_eq!(sys.len(), 1);
    assert_eq!(sys.pairs[0].vector.coeffs(), &[1.0]);
}

#[test]
fn mirrored_layout_is_closed_under_reflection() {
    // x -> -x swaps the two products, so v(x) with ratio mu maps to (-1)^n v(-x)
    // with ratio 1/mu; for even n the middle pair is its own mirror image.
    let fam = two_unit(4);
    for n in [3, 4] {
        let sys = solve_k2(&build(&fam, n).unwrap()).unwrap();
        for p in &sys.pairs {
            let mirrored: Vec<f64> = p
                .vector
                .padded(n + 1)
                .iter()
                .enumerate()
                .map(|(s, c)| if (n - s) % 2 == 0 { *c } else { -c })
                .collect();
            let partner = sys.pairs.iter().find(|q| {
                q.vector.padded(n + 1).iter().zip(&mirrored).all(|(a, b)| (a - b).abs() < 1e-8 * (1.0 + b.abs()))
            });
            let q = partner.expect("mirror image missing");
            assert!((q.lambda[0] - p.lambda[1].abs()).abs() < 1e-8);
        }
        if n % 2 == 0 {
            let c = sys.pairs[n / 2].vector.padded(n + 1);
            let odd: f64 = c.iter().skip(1).step_by(2).map(|x| x.abs()).sum();
            assert!(odd < 1e-9, "{c:?}");
        }
    }
}

#[test]
fn pencil_rejects_bad_input() {
    let mep = build(&hs_family(&[0.0, 1.0, 2.0, 3.0], &[1.0; 4], 2), 1).unwrap();
    assert!(matches!(solve_k2(&mep), Err(JopError::NotK2(3))));
    let neg = RectMEP::custom(vec![DMatrix::identity(2, 2), -DMatrix::identity(2, 2)]).unwrap();
    assert!(matches!(solve_k2(&neg), Err(JopError::CholeskyFailure)));
}

#[test]
fn newton_finds_one_root_per_interval() {
    let fam = hs_family(&[0.0, 1.0, 2.0, 3.0], &[1.0; 4], 2);
    let sys = solve(&fam, 1, &NewtonOptions::default()).unwrap();
    assert_eq!(sys.len(), 3);
    let sigs: Vec<Vec<usize>> = sys.pairs.iter().map(|p| root_signature(&p.vector, &fam.intervals())).collect();
    assert_eq!(sigs, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
    assert!(sys.max_residual() < 1e-11);
    assert!(sys.max_orthogonality() < 1e-10);
    assert!(sys.min_angle > TAU_DUP);
}

#[test]
fn seeds_follow_root_distributions() {
    let fam = hs_family(&[0.0, 1.0, 2.0, 3.0], &[1.0; 4], 2);
    let (v, lambda) = seed_from_distribution(&fam, 1, &[1, 0, 0]).unwrap();
    assert_eq!(v.coeffs(), &[-0.5, 1.0]);
    assert_eq!(lambda.len(), 3);
    let (v, _) = seed_from_distribution(&fam, 0, &[0, 0, 0]).unwrap();
    assert_eq!(v.coeffs(), &[1.0]);
    assert!(seed_from_distribution(&fam, 2, &[1, 0, 0]).is_err());
    for (n, k) in [(0, 2), (3, 2), (2, 3), (4, 3), (2, 4)] {
        assert_eq!(compositions(n, k).len(), expected_count(n, k));
    }
    assert_eq!(compositions(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);

    // half-line: (1, inf) seeds inside (1, 4)
    let fam = InnerProductFamily::new(
        vec![IntervalMeasure::uniform(-1.0, 1.0), IntervalMeasure::uniform(1.0, f64::INFINITY).with_exp_linear(-1.0)],
        3,
    )
    .unwrap();
    let (v, _) = seed_from_distribution(&fam, 2, &[0, 2]).unwrap();
    let roots = v.real_roots().unwrap();
    assert!(roots.iter().all(|&r| r > 1.0 && r < 4.0));
}

#[test]
fn cross_solver_agreement_k2() {
    let fam = InnerProductFamily::new(
        vec![
            IntervalMeasure::uniform(-1.0, 0.0).with_factor(-1.0, -0.5),
            IntervalMeasure::uniform(0.5, 2.0).with_factor(2.0, 0.5),
        ],
        4,
    )
    .unwrap();
    let opts = NewtonOptions::default();
    for n in 0..=4 {
        let mep = build(&fam, n).unwrap();
        let pencil = solve_k2(&mep).unwrap();
        let seeds: Vec<_> = compositions(n, 2).iter().map(|c| seed_from_distribution(&fam, n, c).unwrap()).collect();
        let newton = solve_newton(&mep, &seeds, &opts).unwrap();
        assert_eq!(pencil.len(), newton.len());
        for (p, q) in pencil.pairs.iter().zip(&newton.pairs) {
            assert!(ray_angle(&p.lambda, &q.lambda) < 1e-8);
            let diff: f64 = p
                .vector
                .padded(n + 1)
                .iter()
                .zip(q.vector.padded(n + 1))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-8 * p.vector.norm(), "n = {n}: {diff}");
        }
    }
}

#[test]
fn count_law_across_dimensions() {
    let opts = NewtonOptions::default();
    let fam2 = hs_family(&[-1.0, 0.0, 1.5], &[0.5, 1.0, 1.5], 4);
    let fam3 = hs_family(&[0.0, 1.0, 2.0, 3.0], &[0.5, 1.0, 1.5, 1.0], 3);
    let fam4 = hs_family(&[0.0, 1.0, 2.0, 3.0, 4.0], &[1.0; 5], 2);
    let cases = (0..=4).map(|n| (&fam2, n)).chain((0..=3).map(|n| (&fam3, n))).chain((0..=2).map(|n| (&fam4, n)));
    for (fam, n) in cases {
        let sys = solve(fam, n, &opts).unwrap();
        let k = fam.k();
        assert_eq!(sys.len(), expected_count(n, k), "n = {n}, k = {k}");
        assert!(sys.max_residual() < 1e-9);
        assert!(sys.max_formula_angle(fam).unwrap() < 1e-8);
        assert!(sys.max_orthogonality() < 1e-8, "n = {n}, k = {k}");
        for p in &sys.pairs {
            assert!(p.lambda.iter().all(|&l| l != 0.0));
            assert_eq!(root_signature(&p.vector, &fam.intervals()).iter().sum::<usize>(), n);
        }
    }
}

#[test]
fn eigenvalue_formula_for_two_products() {
    let fam = two_unit(3);
    let v = Polynomial::new(vec![0.3, -0.2, 1.0]);
    let lambda = eigenvalue_formula(&fam, &v).unwrap();
    let expect = [fam.inner(2, &v, &v).unwrap(), -fam.inner(1, &v, &v).unwrap()];
    assert!(ray_angle(&lambda, &expect) < 1e-14);
    assert!(lambda.iter().all(|&l| l != 0.0));
    assert!(matches!(eigenvalue_formula(&fam, &Polynomial::zero()), Err(JopError::DegenerateVector)));
}

#[test]
fn mu_vector_agrees_with_formula() {
    let fam = hs_family(&[0.0, 1.0, 2.0, 3.0], &[0.5, 1.0, 1.5, 1.0], 3);
    let mep = build(&fam, 3).unwrap();
    let v = Polynomial::new(vec![0.1, -0.7, 0.2, 1.0]);
    let mu = mep.mu_vector(&v.padded(4), &v.padded(4));
    assert!(ray_angle(&mu, &eigenvalue_formula(&fam, &v).unwrap()) < 1e-12);
}

#[test]
fn m_matrix_minors_are_deleted_forms() {
    let fam = hs_family(&[0.0, 1.0, 2.0, 3.0], &[1.0, 0.5, 1.0, 1.5], 3);
    let n = 2;
    let mep = build(&fam, n).unwrap();
    let u = Polynomial::new(vec![0.4, -1.0, 1.0]);
    let (m, minors) = m_matrix_minors(&mep, &fam, &u, &u).unwrap();
    for j in 1..=3 {
        let d = fam.deleted_form(j, &u, &u).unwrap();
        assert!(close(minors[j - 1], d, 1e-12));
        assert!(d.abs() > 0.0);
    }
    assert!(close(m.determinant(), fam.rank_one_form(&u, &u).unwrap(), 1e-10));

    let sys = solve(&fam, n, &NewtonOptions::default()).unwrap();
    for a in 0..sys.len() {
        for b in a + 1..sys.len() {
            let (u, v) = (&sys.pairs[a].vector, &sys.pairs[b].vector);
            let (_, minors) = m_matrix_minors(&mep, &fam, u, v).unwrap();
            let (_, mu) = m_matrix_minors(&mep, &fam, u, u).unwrap();
            let (_, mv) = m_matrix_minors(&mep, &fam, v, v).unwrap();
            for j in 0..3 {
                let scale = (mu[j] * mv[j]).abs().sqrt();
                assert!(minors[j].abs() < 1e-8 * scale);
            }
        }
    }
}

#[test]
fn m_matrix_for_two_products_is_simultaneous_orthogonality() {
    let fam = two_unit(3);
    let mep = build(&fam, 3).unwrap();
    let sys = solve_k2(&mep).unwrap();
    let (u, v) = (&sys.pairs[0].vector, &sys.pairs[2].vector);
    let (_, minors) = m_matrix_minors(&mep, &fam, u, v).unwrap();
    assert!(close(minors[0], fam.inner(2, u, v).unwrap(), 1e-12));
    assert!(close(minors[1], fam.inner(1, u, v).unwrap(), 1e-12));
    let scale = (fam.inner(1, u, u).unwrap() * fam.inner(1, v, v).unwrap()).sqrt();
    assert!(minors[1].abs() < 1e-10 * scale);
}

#[test]
fn appendix_b_template_small_case() {
    let mep = appendix_b_build(1, 2);
    let c = mep.combined(&[2.0, 5.0]);
    assert_eq!(c, DMatrix::from_row_slice(2, 2, &[2.0, 5.0, 5.0, 2.0]));
    for (n, k) in [(1, 2), (3, 2), (2, 3), (1, 4), (4, 4)] {
        let mep = appendix_b_build(n, k);
        assert_eq!((mep.rows(), mep.cols()), (n + k - 1, n + 1));
        assert!(mep.a.iter().all(|m| m.iter().all(|&x| x == 0.0 || x == 1.0)));
        assert!(symmetrize(&mep).is_symmetric(0.0));
    }
    // row j holds lambda_1 v_j + lambda_2 v_{j-1} + lambda_3 v_{j-2}, row 0 wraps lambda_3 v_n
    let mep = appendix_b_build(2, 3);
    let lam = [1.0, 10.0, 100.0];
    let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
    let got = mep.combined(&lam) * v;
    assert_eq!(got.as_slice(), &[1.0 + 300.0, 2.0 + 10.0, 3.0 + 20.0 + 100.0, 30.0 + 200.0]);
}

#[test]
fn appendix_b_roots_of_unity_examples() {
    let p = appendix_b_closed_form(1, 2, &[0]).unwrap();
    let re = |z: &[Complex64]| z.iter().map(|c| c.re).collect::<Vec<_>>();
    assert_eq!(re(&p.lambda), vec![1.0, -1.0]);
    assert_eq!(re(&p.vector), vec![1.0, 1.0]);
    assert!(p.residual < 1e-15);
    let p = appendix_b_closed_form(1, 2, &[1]).unwrap();
    assert!((p.lambda[0] - 1.0).norm() < 1e-15 && (p.lambda[1] - 1.0).norm() < 1e-15);
    assert!((p.vector[0] + 1.0).norm() < 1e-15 && (p.vector[1] - 1.0).norm() < 1e-15);
    assert!(matches!(appendix_b_closed_form(3, 3, &[1, 1]), Err(JopError::DuplicateRoots)));
}

use num_complex::Complex64;

#[test]
fn appendix_b_complete_and_distinct() {
    for (n, k) in [(1, 2), (3, 2), (2, 3), (1, 4), (3, 3)] {
        let pairs = appendix_b_all(n, k).unwrap();
        assert_eq!(pairs.len(), binomial(n + k - 1, k - 1));
        for p in &pairs {
            assert!(p.residual < 1e-12, "(n, k) = ({n}, {k}) {:?}", p.choice);
            assert!((p.lambda[0] - 1.0).norm() < 1e-15);
        }
        for a in 0..pairs.len() {
            for b in a + 1..pairs.len() {
                let d: f64 = pairs[a].lambda.iter().zip(&pairs[b].lambda).map(|(x, y)| (x - y).norm()).sum();
                assert!(d > 1e-6);
            }
        }
    }
}

#[test]
fn appendix_b_k2_vectors_are_fourier() {
    let n = 4;
    let pairs = appendix_b_all(n, 2).unwrap();
    for p in &pairs {
        let zeta = Complex64::from_polar(1.0, std::f64::consts::TAU * p.choice[0] as f64 / (n + 1) as f64);
        for (j, vj) in p.vector.iter().enumerate() {
            assert!((vj - zeta.powu(j as u32 + 1)).norm() < 1e-14);
        }
    }
}

#[test]
fn appendix_b_real_pair_is_a_newton_fixed_point() {
    let mep = appendix_b_build(2, 3);
    let pair = appendix_b_closed_form(2, 3, &[1, 3]).unwrap();
    assert!(pair.is_real);
    let real = pair.to_eigenpair().unwrap();
    assert!(mep.residual(&real.vector.padded(3), &real.lambda) < 1e-14);
    let (refined, iters) = newton_refine(&mep, &real.vector, &real.lambda, &NewtonOptions::default()).unwrap();
    assert!(iters <= 2);
    assert!(ray_angle(&refined.lambda, &real.lambda) < 1e-12);
    assert!(!appendix_b_closed_form(2, 3, &[0, 1]).unwrap().is_real);
}

#[test]
fn ray_angle_resolves_small_angles() {
    let a = [1.0, 0.0];
    let b = [1.0, 1e-12];
    assert!((ray_angle(&a, &b) - 1e-12).abs() < 1e-20);
    assert!(ray_angle(&a, &[-2.0, 0.0]) == 0.0);
    assert_eq!(binomial(6, 2), 15);
    assert_eq!(expected_count(2, 4), 10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn normalized_lambda_is_canonical(v in prop::collection::vec(-5.0..5.0f64, 2..6)) {
        prop_assume!(v.iter().any(|x| x.abs() > 1e-3));
        let l = normalize_lambda(&v);
        prop_assert!((l.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
        prop_assert!(l.iter().find(|&&x| x != 0.0).unwrap() > &0.0);
        let neg: Vec<f64> = v.iter().map(|x| -3.0 * x).collect();
        let l2 = normalize_lambda(&neg);
        for (a, b) in l.iter().zip(&l2) {
            prop_assert!((a - b).abs() < 1e-14);
        }
    }
}
