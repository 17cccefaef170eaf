use mihs_core::estimate::{hutchinson_sd, sd_exact};
use mihs_core::linalg::{compact_svd, relative_error, DenseMatrix};
use mihs_core::problems::{generate_problem, SingularProfile, SpectralOracle};
use mihs_core::sketch::build_sketch;
use mihs_core::solvers::{
    baseline_lsqr, dual_m_ihs, m_ihs, pd_m_ihs_over, MomentumRule, RunOptions, Scheme, SolveReport, SolverConfig,
};
use mihs_core::subsolver::{aab_solve, AabOptions};
use mihs_core::{FlopCategory, FlopCounter, RngState, SketchKind};
use proptest::prelude::*;

fn kinds() -> impl Strategy<Value = SketchKind> {
    prop_oneof![
        Just(SketchKind::Gaussian),
        Just(SketchKind::CountSketch),
        Just(SketchKind::Srht),
        (1usize..4).prop_map(|s| SketchKind::Osnap { s }),
    ]
}

/// Smallest sketch size the kind accepts on top of `m`.
fn admissible_m(kind: SketchKind, n: usize, m: usize) -> usize {
    match kind {
        SketchKind::Srht => m.min(n),
        SketchKind::Osnap { s } => m.max(s),
        _ => m,
    }
}

fn matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = RngState::new(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.normal())
}

/// Gaussian elimination with partial pivoting on `(AᵀA + λI) x = b`.
fn normal_equations_oracle(a: &DenseMatrix, b: &[f64], lambda: f64) -> Vec<f64> {
    let d = a.cols();
    let mut m: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut row: Vec<f64> = (0..d)
                .map(|j| (0..a.rows()).map(|k| a[(k, i)] * a[(k, j)]).sum::<f64>())
                .collect();
            row[i] += lambda;
            row.push(b[i]);
            row
        })
        .collect();
    for c in 0..d {
        let piv = (c..d).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, piv);
        let pivot = m[c].clone();
        for row in &mut m[c + 1..] {
            let f = row[c] / pivot[c];
            for (v, p) in row[c..].iter_mut().zip(&pivot[c..]) {
                *v -= f * p;
            }
        }
    }
    let mut x = vec![0.0; d];
    for r in (0..d).rev() {
        let s: f64 = (r + 1..d).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][d] - s) / m[r][r];
    }
    x
}

fn check_flops(rep: &SolveReport) {
    let f = &rep.flops;
    let sum: u64 = FlopCategory::ALL.iter().map(|&c| f.get(c)).sum();
    assert_eq!(sum, f.total());
    assert!(rep.records.windows(2).all(|w| w[0].flops <= w[1].flops));
    assert!(rep.records.last().unwrap().flops <= f.total());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sketches_are_linear(kind in kinds(), n in 4usize..40, m in 1usize..12, seed in any::<u64>(),
                           alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let m = admissible_m(kind, n, m);
        let s = build_sketch(kind, n, m, seed).unwrap();
        let x = matrix(n, 1, seed ^ 1).into_vec();
        let y = matrix(n, 1, seed ^ 2).into_vec();
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
        let mut f = FlopCounter::new();
        let (sx, sy, sz) = (s.apply_vec(&x, &mut f).unwrap(), s.apply_vec(&y, &mut f).unwrap(), s.apply_vec(&z, &mut f).unwrap());
        for i in 0..m {
            let want = alpha * sx[i] + beta * sy[i];
            prop_assert!((sz[i] - want).abs() <= 1e-12 * (1.0 + want.abs() + sx[i].abs() + sy[i].abs()));
        }
        // the dense form agrees with the fast application
        let dense = s.to_dense().mul_vec(&x);
        prop_assert!(relative_error(&dense, &sx) < 1e-12 || dense.iter().all(|v| v.abs() < 1e-300));
    }

    #[test]
    fn sketches_are_deterministic_in_the_seed(kind in kinds(), n in 2usize..30, seed in any::<u64>()) {
        let m = admissible_m(kind, n, n.min(7));
        prop_assert_eq!(build_sketch(kind, n, m, seed).unwrap(), build_sketch(kind, n, m, seed).unwrap());
    }

    #[test]
    fn aab_matches_dense_oracle(rows in 2usize..30, cols in 1usize..12, lambda in 1e-2f64..10.0, seed in any::<u64>()) {
        let rows = rows.max(cols);
        let a = matrix(rows, cols, seed);
        let b = matrix(cols, 1, seed.wrapping_add(7)).into_vec();
        let r = aab_solve(&a, &b, lambda, AabOptions::new(1e-13).with_max_iter(10 * cols), &mut FlopCounter::new()).unwrap();
        let x = normal_equations_oracle(&a, &b, lambda);
        prop_assert!(relative_error(&r.x, &x) < 1e-9, "{}", relative_error(&r.x, &x));
    }

    #[test]
    fn sd_bounds_and_monotonicity(rows in 1usize..20, cols in 1usize..20, l1 in 1e-6f64..1e3, l2 in 1e-6f64..1e3, seed in any::<u64>()) {
        let sigma = compact_svd(&matrix(rows, cols, seed)).singular_values;
        let (lo, hi) = if l1 < l2 { (l1, l2) } else { (l2, l1) };
        let (s_lo, s_hi) = (sd_exact(&sigma, lo), sd_exact(&sigma, hi));
        prop_assert!(s_hi >= 0.0 && s_lo <= rows.min(cols) as f64 + 1e-12);
        prop_assert!(s_hi <= s_lo + 1e-12);
        prop_assert!((sd_exact(&sigma, 0.0) - rows.min(cols) as f64).abs() < 1e-12);
    }

    #[test]
    fn hutchinson_stays_in_range(m in 4usize..30, d in 1usize..12, lambda in 1e-4f64..10.0, t in 1usize..5, seed in any::<u64>()) {
        let sa = matrix(m, d, seed);
        let est = hutchinson_sd(&sa, lambda, t, 0.5, seed, &mut FlopCounter::new()).unwrap();
        prop_assert!(est.value >= 0.0 && est.value <= d as f64);
        let mv = est.for_momentum();
        prop_assert!(mv >= 1.0 && mv <= d as f64);
        prop_assert_eq!(est.traces.len(), t);
    }

    #[test]
    fn flops_are_monotone_and_additive(seed in 0u64..1000, kind in kinds(), inexact in any::<bool>()) {
        let p = generate_problem(96, 12, SingularProfile::Geometric, 100.0, 0.01, seed).unwrap();
        let lambda = 1e-3;
        let sd = SpectralOracle::new(&p.a).statistical_dimension(lambda);
        let cfg = SolverConfig::new(kind, 48, lambda, 6, MomentumRule::Empirical { sd }).with_seed(seed);
        let scheme = if inexact { Scheme::Inexact } else { Scheme::Exact };
        check_flops(&m_ihs(&p, &cfg, scheme, RunOptions::default()).unwrap());
        check_flops(&baseline_lsqr(&p, 6, 0.0, RunOptions::default()).unwrap());
        // the second sketch acts on d = 12 rows
        let pd = SolverConfig { m: 10, momentum: MomentumRule::Theoretical { eps: 0.5 }, ..cfg.clone() }.with_inner(8, 5);
        check_flops(&pd_m_ihs_over(&p, &pd, RunOptions::default()).unwrap());
        let q = generate_problem(12, 96, SingularProfile::Geometric, 100.0, 0.01, seed).unwrap();
        let dcfg = SolverConfig::new(kind, 48, lambda, 6, MomentumRule::Empirical { sd }).with_seed(seed);
        check_flops(&dual_m_ihs(&q, &dcfg, scheme, RunOptions::default()).unwrap());
    }
}

#[test]
fn counter_absorb_is_additive() {
    let mut a = FlopCounter::new();
    let mut b = FlopCounter::new();
    a.charge(FlopCategory::MatVec, 10).unwrap();
    b.charge(FlopCategory::Subsolver, 7).unwrap();
    b.charge(FlopCategory::MatVec, 1).unwrap();
    a.absorb(&b).unwrap();
    assert_eq!(a.total(), 18);
    assert_eq!(a.get(FlopCategory::MatVec), 11);
    assert!(a.charge(FlopCategory::MatVec, u64::MAX).is_err());
}
