//! Acceptance gate: every shipped guarantee of the library, checked at its
//! stated tolerance and runtime budget. One printed line per check; the
//! test fails only after all checks have run and reported.

use std::collections::BTreeMap;
use std::error::Error;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use apdet_core::apop::{APOperator, ErrorBudget, DEFAULT_BAND_EXPONENTS};
use apdet_core::apseq::APSeq;
use apdet_core::fractal::{constant_fractal, fractal_from_cf_skipping};
use apdet_core::group::{
    compatibility_audit, FreqGroup, GroupElement, WeightSpec,
};
use apdet_core::limits::{
    paired_windows, ratio_flow, theta1, theta2, theta2_dual, uniform_sweep, ExpFactorization,
    Normalization, RowFlag, ThetaOptions,
};
use apdet_core::linalg::{hankel_comp, lu_det, materialize, toeplitz_comp, DenseMatrix};
use apdet_core::models::{
    block_to_apop, build_mathieu, factorize_shifted_mathieu, scalar_log_factorize, MatrixSymbol,
};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

type CheckResult = Result<String, Box<dyn Error>>;

/// Display name, wall-clock budget in seconds, check body.
type Check = (&'static str, u64, fn() -> CheckResult);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn golden_group() -> Arc<FreqGroup> {
    Arc::new(FreqGroup::new(vec![GOLDEN], 1).expect("golden generator is in range"))
}

fn mixed_group() -> Arc<FreqGroup> {
    Arc::new(FreqGroup::new(vec![GOLDEN], 3).expect("golden generator is in range"))
}

/// Random band operator with offsets in `[-span, span]`, frequency indices
/// in `[-deg, deg]`, and coefficients bounded by `scale`.
fn random_op(
    rng: &mut ChaCha8Rng,
    group: &Arc<FreqGroup>,
    span: i64,
    deg: i64,
    scale: f64,
) -> APOperator {
    let n_mod = group.modulus();
    let mut terms = Vec::new();
    for k in -span..=span {
        for al in -deg..=deg {
            for rho in 0..n_mod {
                if rng.gen_bool(0.6) {
                    continue;
                }
                let v = c(
                    rng.gen_range(-scale..scale),
                    rng.gen_range(-scale..scale),
                );
                let alpha = if group.generator_count() == 0 {
                    vec![]
                } else {
                    vec![al]
                };
                terms.push((k, group.element(alpha, rho).expect("indices in range"), v));
            }
        }
    }
    APOperator::from_terms(
        group.clone(),
        WeightSpec::power(1.0).expect("power weight"),
        DEFAULT_BAND_EXPONENTS,
        terms,
    )
    .expect("random terms are well formed")
}

/// The single-factor representation of exp((t + 1/t)/2) on the trivial group.
fn strong_szego_factor() -> ExpFactorization {
    let group = FreqGroup::trivial();
    let zero = group.zero();
    let b = APOperator::from_terms(
        group,
        WeightSpec::power(1.0).expect("power weight"),
        DEFAULT_BAND_EXPONENTS,
        [(1, zero.clone(), c(0.5, 0.0)), (-1, zero, c(0.5, 0.0))],
    )
    .expect("two-term band");
    ExpFactorization::new(vec![b], 1e-12, ErrorBudget::default()).expect("norm 1 factor")
}

/// Window sums computed directly and through the geometric closed form
/// agree to relative 1e-10 over random sequences and windows.
fn check_window_sums() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let groups = [golden_group(), mixed_group()];
    let mut worst = 0.0f64;
    for i in 0..20 {
        let group = &groups[i % 2];
        let n_mod = group.modulus();
        let mut coeffs: BTreeMap<(i64, u32), Complex64> = BTreeMap::new();
        for _ in 0..rng.gen_range(1..=6) {
            let al = rng.gen_range(-3..=3);
            let rho = rng.gen_range(0..n_mod);
            let v = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            *coeffs.entry((al, rho)).or_insert(c(0.0, 0.0)) += v;
        }
        let a = APSeq::from_coeffs(
            group.clone(),
            coeffs.into_iter().map(|((al, rho), v)| {
                (
                    group.element(vec![al], rho).expect("indices in range"),
                    v,
                )
            }),
        )?;
        for _ in 0..50 {
            let h1: i64 = rng.gen_range(-300..300);
            let h2 = h1 + rng.gen_range(1..200);
            let direct = a.window_sum(h1, h2)?;
            let closed = a.window_sum_closed(h1, h2)?;
            worst = worst.max((direct - closed).norm() / (1.0 + direct.norm()));
        }
    }
    if worst >= 1e-10 {
        return Err(format!("worst relative defect {worst:.3e}, bound 1e-10").into());
    }
    Ok(format!("20 sequences x 50 windows, worst defect {worst:.3e}"))
}

/// Along a fractal window pair (constant 0, deep Fibonacci denominators)
/// the window sum approaches h·M(a) + F_a(τ1) − F_a(τ2): the residual
/// drops by ≥ 10x from rung 8 to rung 16 and ends below 1e-6.
fn check_trace_asymptotics() -> CheckResult {
    let group = golden_group();
    let coeffs: Vec<_> = (1..=8)
        .map(|k| {
            (
                group.element(vec![k], 0).expect("index in range"),
                c(0.5f64.powi(k as i32), 0.0),
            )
        })
        .collect();
    let a = APSeq::from_coeffs(group.clone(), coeffs)?;
    let lower = constant_fractal(&group, 0, 20)?;
    let upper = fractal_from_cf_skipping(&group, 0, 0, 16, 20)?;
    let f1 = a.boundary_functional(lower.tau())?;
    let f2 = a.boundary_functional(upper.tau())?;
    let m = a.mean();
    let mut residuals = Vec::new();
    for (&h1, &h2) in lower.values().iter().zip(upper.values()) {
        let s = a.window_sum_closed(h1, h2)?;
        let h = (h2 - h1) as f64;
        residuals.push((s - m * h - f1 + f2).norm());
    }
    let drop = residuals[7] / residuals[15];
    let end = residuals[19];
    if drop < 10.0 {
        return Err(format!("rung 8 -> 16 residual drop {drop:.1}, need >= 10").into());
    }
    if end >= 1e-6 {
        return Err(format!("final residual {end:.3e}, bound 1e-6").into());
    }
    Ok(format!("residual drop {drop:.1}x, final {end:.3e}"))
}

/// Window determinants reduce to shifted corner sections: det over
/// [n1, n2) equals det of the gap-sized Toeplitz compression of the
/// conjugate-shifted operator, to relative 1e-9.
fn check_section_reduction() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let groups = [golden_group(), mixed_group()];
    let mut worst = 0.0f64;
    for i in 0..20 {
        let op = random_op(&mut rng, &groups[i % 2], 3, 2, 0.35);
        for _ in 0..3 {
            let n1: i64 = rng.gen_range(-64..64);
            let gap = rng.gen_range(1..=128i64);
            let d1 = lu_det(&materialize(&op, n1, n1 + gap)?);
            let d2 = lu_det(&toeplitz_comp(&op.conjugate_shift(n1), gap as usize)?);
            let scale = d1.norm().max(d2.norm()).max(f64::MIN_POSITIVE);
            worst = worst.max((d1 - d2).norm() / scale);
        }
    }
    if worst >= 1e-9 {
        return Err(format!("worst relative defect {worst:.3e}, bound 1e-9").into());
    }
    Ok(format!("20 operators x 3 windows, worst defect {worst:.3e}"))
}

/// T(AB) = T(A)T(B) + H(A)H(Ã) entrywise to 1e-10 on the part of the
/// window the finite sections determine exactly.
fn check_toeplitz_hankel_split() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let groups = [golden_group(), mixed_group()];
    let m = 40usize;
    let exact = m - 8;
    let mut worst = 0.0f64;
    for i in 0..20 {
        let group = &groups[i % 2];
        let a = random_op(&mut rng, group, 3, 1, 0.4);
        let b = random_op(&mut rng, group, 3, 1, 0.4);
        let mut budget = ErrorBudget::default();
        let ab = a.mul(&b, &mut budget)?;
        let t_ab = toeplitz_comp(&ab, m)?;
        let rhs = toeplitz_comp(&a, m)?
            .mul(&toeplitz_comp(&b, m)?)?
            .plus(&hankel_comp(&a, m)?.mul(&hankel_comp(&b.tilde(), m)?)?)?;
        for j in 0..exact {
            for k in 0..exact {
                worst = worst.max((t_ab.get(j, k) - rhs.get(j, k)).norm());
            }
        }
    }
    if worst >= 1e-10 {
        return Err(format!("worst entry defect {worst:.3e}, bound 1e-10").into());
    }
    Ok(format!("20 pairs, worst entry defect {worst:.3e}"))
}

/// Classical strong Szego limit for a(t) = exp((t + 1/t)/2): the n = 64
/// determinant ratio matches theta1·theta2, and both match e^{1/4}.
fn check_strong_szego() -> CheckResult {
    let f = strong_szego_factor();
    let tau = f.group().trivial_char();
    let opts = ThetaOptions::default();
    let prod = theta1(&f, &tau, &opts)?.value * theta2(&f, &tau, &opts)?.value;
    let rows = ratio_flow(&f, &[(0, 64)], Normalization::GrowthPower, Some(prod))?;
    let ratio = rows[0].ratio.expect("section of a near-identity symbol");
    let target = c(0.25f64.exp(), 0.0);
    let d_ratio = (ratio - prod).norm();
    let d_target = (prod - target).norm();
    if d_ratio >= 1e-4 {
        return Err(format!("|ratio - theta product| {d_ratio:.3e}, bound 1e-4").into());
    }
    if d_target >= 1e-4 {
        return Err(format!("|theta product - e^(1/4)| {d_target:.3e}, bound 1e-4").into());
    }
    Ok(format!(
        "|ratio - thetas| {d_ratio:.3e}, |thetas - e^(1/4)| {d_target:.3e}"
    ))
}

/// Tridiagonal oracle: for the symbol t + 1/t − 5, the determinant flow
/// matches the limit of D_n/G^n computed from the three-term recurrence
/// D_n = −5·D_{n−1} − D_{n−2}, and the growth constant matches the
/// recurrence growth rate.
fn check_tridiagonal_oracle() -> CheckResult {
    let a = MatrixSymbol::scalar([(1, c(1.0, 0.0)), (-1, c(1.0, 0.0)), (0, c(-5.0, 0.0))]);
    let (f, _residual) = scalar_log_factorize(&a, 64, 1e-10, ErrorBudget::default())?;

    // Recurrence oracle, no closed forms: growth rate from consecutive
    // determinants, then the rescaled sequence u_n = D_n / rate^n.
    let (mut d_prev, mut d) = (1.0f64, -5.0f64);
    for _ in 2..=200 {
        (d_prev, d) = (d, -5.0 * d - d_prev);
    }
    let rate = d / d_prev;
    let (mut u_prev, mut u) = (1.0f64, -5.0 / rate);
    for _ in 2..=200 {
        (u_prev, u) = (u, (-5.0 * u - u_prev / rate) / rate);
    }
    let expected = c(u, 0.0);

    let windows: Vec<(i64, i64)> = [10, 25, 50, 100, 200].iter().map(|&n| (0, n)).collect();
    let rows = ratio_flow(&f, &windows, Normalization::GrowthPower, Some(expected))?;
    let final_residual = rows
        .last()
        .and_then(|r| r.residual)
        .expect("nonsingular tridiagonal sections");
    let growth_defect = (f.growth() - c(rate, 0.0)).norm();
    if final_residual >= 1e-6 {
        return Err(format!("flow residual {final_residual:.3e} at n=200, bound 1e-6").into());
    }
    if growth_defect >= 1e-8 {
        return Err(format!("growth defect {growth_defect:.3e}, bound 1e-8").into());
    }
    Ok(format!(
        "flow residual {final_residual:.3e}, growth defect {growth_defect:.3e}"
    ))
}

/// theta2 through the direct chain and through the transposed chain agree
/// within twice the ladder tolerance on random factorizations.
fn check_theta2_duality() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let group = golden_group();
    let opts = ThetaOptions::default();
    let mut worst = 0.0f64;
    for trial in 0..5 {
        let factors: Vec<_> = (0..1 + trial % 3)
            .map(|_| random_op(&mut rng, &group, 2, 1, 0.2))
            .collect();
        let f = ExpFactorization::new(factors, 1e-10, ErrorBudget::default())?;
        let tau = group.char_of_shift(rng.gen_range(-50..50));
        let direct = theta2(&f, &tau, &opts)?.value;
        let dual = theta2_dual(&f, &tau, &opts)?.value;
        worst = worst.max((direct - dual).norm());
    }
    let bound = 2.0 * opts.tol;
    if worst >= bound {
        return Err(format!("worst route disagreement {worst:.3e}, bound {bound:.1e}").into());
    }
    Ok(format!("5 factorizations, worst disagreement {worst:.3e}"))
}

/// Periodic block symbols: diag(t, 1/t) embeds with exactly singular
/// sections (every ratio 0), and a random 2x2 symbol in exponential form
/// has sweep residuals below 1e-3 at gap 120 over both residue classes.
fn check_block_symbols() -> CheckResult {
    // Exact part: the four-factor rotation chain multiplying out to
    // diag(t, 1/t), whose every window contains a zero row.
    let group = Arc::new(FreqGroup::new(vec![], 2)?);
    let weight = WeightSpec::power(1.0)?;
    let r0 = group.element(vec![], 0)?;
    let r1 = group.element(vec![], 1)?;
    let op = |terms: &[(i64, &GroupElement, f64)]| {
        APOperator::from_terms(
            group.clone(),
            weight.clone(),
            DEFAULT_BAND_EXPONENTS,
            terms.iter().map(|&(k, g, v)| (k, g.clone(), c(v, 0.0))),
        )
        .expect("rotation chain terms")
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let b_up = op(&[(1, &r0, 0.5), (1, &r1, 0.5)]);
    let b_low = op(&[(-1, &r0, -0.5), (-1, &r1, 0.5)]);
    let b_turn = op(&[
        (-1, &r0, -0.5 * half_pi),
        (-1, &r1, -0.5 * half_pi),
        (1, &r0, 0.5 * half_pi),
        (1, &r1, -0.5 * half_pi),
    ]);
    let f = ExpFactorization::new(
        vec![b_up.clone(), b_low, b_up, b_turn],
        1e-12,
        ErrorBudget::default(),
    )?;
    let rows = ratio_flow(
        &f,
        &[(0, 4), (1, 7), (2, 10), (0, 12)],
        Normalization::GrowthPower,
        Some(c(0.0, 0.0)),
    )?;
    for row in &rows {
        let exact_zero = row.flag == RowFlag::Singular
            && row.ratio == Some(c(0.0, 0.0))
            && row.residual == Some(0.0);
        if !exact_zero {
            return Err(format!(
                "window [{}, {}) not exactly singular: ratio {:?}",
                row.h1, row.h2, row.ratio
            )
            .into());
        }
    }

    // Generic part: random trigonometric 2x2 exponent, all four residue
    // class combinations of window edges near gap 120.
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut blocks = Vec::new();
    for m in -1i64..=1 {
        let mut b = DenseMatrix::zero(2);
        for s in 0..2 {
            for t in 0..2 {
                b.set(s, t, c(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)));
            }
        }
        blocks.push((m, b));
    }
    let sym = MatrixSymbol::new(2, blocks)?;
    let bf = ExpFactorization::new(vec![block_to_apop(&sym)?], 1e-10, ErrorBudget::default())?;
    let reports = uniform_sweep(&bf, &[120, 121], &[0, 1], &ThetaOptions::default())?;
    let worst = reports
        .iter()
        .map(|r| r.max_residual)
        .fold(0.0f64, f64::max);
    if worst >= 1e-3 {
        return Err(format!("worst sweep residual {worst:.3e}, bound 1e-3").into());
    }
    Ok(format!(
        "{} singular windows exact, generic sweep residual {worst:.3e}",
        rows.len()
    ))
}

/// Almost Mathieu at coupling 1, golden frequency, shift 5: two fractal
/// window families sharing the same limit characters give determinant
/// ratios that agree with each other (1e-3) and with theta1·theta2 (1e-2).
fn check_mathieu_consistency() -> CheckResult {
    let mop = build_mathieu(1.0, GOLDEN, 0.0)?;
    let f = factorize_shifted_mathieu(&mop, c(5.0, 0.0), 1e-10, ErrorBudget::default())?;
    let group = f.group().clone();
    let opts = ThetaOptions::default();
    let tau = group.char_of_shift(0);
    let prod = theta1(&f, &tau, &opts)?.value * theta2(&f, &tau, &opts)?.value;

    // Family A: [0, q_j); family B: [q_j, q_{j+2}). All edges ride
    // Fibonacci denominators, so all limit characters are trivial.
    let l = 8;
    let pair_a = paired_windows(
        &constant_fractal(&group, 0, l)?,
        &fractal_from_cf_skipping(&group, 0, 0, 8, l)?,
    )?;
    let pair_b = paired_windows(
        &fractal_from_cf_skipping(&group, 0, 0, 8, l)?,
        &fractal_from_cf_skipping(&group, 0, 0, 10, l)?,
    )?;
    let last_ratio = |windows: &[(i64, i64)]| -> Result<Complex64, Box<dyn Error>> {
        let rows = ratio_flow(&f, windows, Normalization::GrowthPower, Some(prod))?;
        Ok(rows
            .last()
            .and_then(|r| r.ratio)
            .expect("shifted Mathieu sections are nonsingular"))
    };
    let ra = last_ratio(&pair_a)?;
    let rb = last_ratio(&pair_b)?;
    let between = (ra - rb).norm();
    let da = (ra - prod).norm();
    let db = (rb - prod).norm();
    if between >= 1e-3 {
        return Err(format!("families disagree by {between:.3e}, bound 1e-3").into());
    }
    if da >= 1e-2 || db >= 1e-2 {
        return Err(format!(
            "family defects vs thetas {da:.3e} / {db:.3e}, bound 1e-2"
        )
        .into());
    }
    Ok(format!(
        "families within {between:.3e} of each other, {da:.3e} / {db:.3e} of thetas"
    ))
}

/// Sweep residuals of the strong Szego symbol shrink by ≥ 5x from gap 24
/// to gap 96.
fn check_sweep_decay() -> CheckResult {
    let f = strong_szego_factor();
    let reports = uniform_sweep(
        &f,
        &[24, 96],
        &[0, 1, 2, 3, 4, 5, 6, 7],
        &ThetaOptions::default(),
    )?;
    let r24 = reports[0].max_residual;
    let r96 = reports[1].max_residual;
    if r24 < 5.0 * r96 {
        return Err(format!(
            "gap 24 residual {r24:.3e} vs gap 96 residual {r96:.3e}: ratio {:.2}, need >= 5",
            r24 / r96
        )
        .into());
    }
    Ok(format!(
        "gap 24 residual {r24:.3e}, gap 96 residual {r96:.3e}"
    ))
}

/// Algebra self-consistency over random operators: exp(A)·exp(−A) = I,
/// character application is multiplicative, and theta products do not
/// depend on how the exponent is split into factors.
fn check_algebra_consistency() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let group = golden_group();
    let opts = ThetaOptions::default();
    let tol = 1e-10;
    let mut worst_inv = 0.0f64;
    let mut worst_hom = 0.0f64;
    let mut worst_split = 0.0f64;
    for _ in 0..10 {
        let a = random_op(&mut rng, &group, 2, 1, 0.12);
        let b = random_op(&mut rng, &group, 2, 1, 0.12);

        let mut budget = ErrorBudget::default();
        let e = a.exp(tol, &mut budget)?;
        let em = a.scale(c(-1.0, 0.0)).exp(tol, &mut budget)?;
        worst_inv = worst_inv.max(e.mul(&em, &mut budget)?.plus_scalar(c(-1.0, 0.0))?.norm());

        let tau = group.char_of_shift(rng.gen_range(-100..100));
        let mut b1 = ErrorBudget::default();
        let mut b2 = ErrorBudget::default();
        let lhs = a.mul(&b, &mut b1)?.apply_char(&tau);
        let rhs = a.apply_char(&tau).mul(&b.apply_char(&tau), &mut b2)?;
        let hom_bound = 10.0 * (b1.accumulated + b2.accumulated) + 1e-12;
        let hom = lhs.minus(&rhs)?.norm();
        if hom >= hom_bound {
            return Err(format!(
                "character application defect {hom:.3e}, budget bound {hom_bound:.3e}"
            )
            .into());
        }
        worst_hom = worst_hom.max(hom);

        let tau0 = group.trivial_char();
        let whole = ExpFactorization::new(vec![a.clone()], tol, ErrorBudget::default())?;
        let split = ExpFactorization::new(
            vec![a.scale(c(0.5, 0.0)), a.scale(c(0.5, 0.0))],
            tol,
            ErrorBudget::default(),
        )?;
        let p_whole = theta1(&whole, &tau0, &opts)?.value * theta2(&whole, &tau0, &opts)?.value;
        let p_split = theta1(&split, &tau0, &opts)?.value * theta2(&split, &tau0, &opts)?.value;
        worst_split = worst_split.max((p_whole - p_split).norm());
    }
    if worst_inv >= 10.0 * tol {
        return Err(format!(
            "exp inverse defect {worst_inv:.3e}, bound {:.1e}",
            10.0 * tol
        )
        .into());
    }
    let split_bound = 1e-8 + opts.tol;
    if worst_split >= split_bound {
        return Err(format!(
            "theta split defect {worst_split:.3e}, bound {split_bound:.1e}"
        )
        .into());
    }
    Ok(format!(
        "inverse {worst_inv:.3e}, character {worst_hom:.3e}, split {worst_split:.3e}"
    ))
}

/// Exhaustive small-denominator audit of the golden power weight: the
/// measured infimum of β(ξ)·||ξ|| over |q| ≤ 1e5 sits in [0.44, 0.55].
fn check_weight_audit() -> CheckResult {
    let group = golden_group();
    let weight = WeightSpec::power(1.0)?;
    let audit = compatibility_audit(&group, &weight, 100_000)?;
    if !(0.44..=0.55).contains(&audit.c_est) {
        return Err(format!("c_est {:.4} outside [0.44, 0.55]", audit.c_est).into());
    }
    Ok(format!("c_est {:.4} over |q| <= 1e5", audit.c_est))
}

#[test]
fn acceptance() {
    let checks: Vec<Check> = vec![
        ("window sums match closed form", 5, check_window_sums),
        ("trace asymptotics on fractal windows", 5, check_trace_asymptotics),
        ("determinants reduce to corner sections", 10, check_section_reduction),
        ("Toeplitz-Hankel product splitting", 5, check_toeplitz_hankel_split),
        ("strong Szego limit at n = 64", 30, check_strong_szego),
        ("tridiagonal recurrence oracle", 10, check_tridiagonal_oracle),
        ("theta2 duality routes agree", 60, check_theta2_duality),
        ("periodic block symbols", 120, check_block_symbols),
        ("almost Mathieu fractal consistency", 300, check_mathieu_consistency),
        ("sweep residuals decay with gap", 120, check_sweep_decay),
        ("operator algebra self-consistency", 60, check_algebra_consistency),
        ("golden weight compatibility audit", 10, check_weight_audit),
    ];
    let mut failures = Vec::new();
    for (i, (name, cap_secs, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let overtime = elapsed > Duration::from_secs(*cap_secs);
        let (verdict, detail) = match (&outcome, overtime) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => (
                "FAIL",
                format!("{d} -- exceeded {cap_secs} s budget"),
            ),
            (Err(e), _) => ("FAIL", e.to_string()),
        };
        println!(
            "{:2}. {name:<40} {verdict}  {detail}  [{:.2?}]",
            i + 1,
            elapsed
        );
        if verdict == "FAIL" {
            failures.push(format!("{}. {name}: {detail}", i + 1));
        }
    }
    assert!(
        failures.is_empty(),
        "{} acceptance check(s) failed:\n{}",
        failures.len(),
        failures.join("\n")
    );
}
