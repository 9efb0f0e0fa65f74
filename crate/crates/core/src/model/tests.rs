use super::*;
use proptest::prelude::*;

/// Composite Simpson rule; independent of the library's quadrature.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}

/// `E[g(W); W < a]` for `P(W >= t) = exp(-sqrt(t))`, via `t = u^2`.
fn sqrt_weibull_expect<G: Fn(f64) -> f64>(g: G, a: f64) -> f64 {
    let umax = a.sqrt().min(80.0);
    // density of W at t = u^2 is e^{-u} / (2u); dt = 2u du
    simpson(|u| g(u * u) * (-u).exp(), 0.0, umax, 400_000)
}

#[test]
fn magnitude_from_uniform() {
    assert!((weibull_magnitude(1.0, 0.5, (-1.0f64).exp()) - 1.0).abs() < 1e-15);
    assert!((weibull_magnitude(1.0, 0.5, (-4.0f64).exp()) - 16.0).abs() < 1e-13);
}

#[test]
fn one_sided_gamma_moments() {
    let f = SemiexpFamily::one_sided_centered(0.5, 1.0, 1.0).unwrap();
    assert!((f.centering_shift() - 2.0).abs() < 1e-13);
    assert!((f.params().sigma2 - 20.0).abs() < 1e-12);
    // tail-integral oracle: E[W] = int P(W>t) dt, E[W^2] = int 2t P(W>t) dt
    let m1 = simpson(|u| (-u).exp() * 2.0 * u, 0.0, 80.0, 200_000);
    let m2 = simpson(|u| 2.0 * u * u * (-u).exp() * 2.0 * u, 0.0, 80.0, 200_000);
    assert!((m1 - 2.0).abs() < 1e-9);
    assert!((m2 - m1 * m1 - 20.0).abs() < 1e-8);
    let m = moments(&f, None).unwrap();
    assert!(m.mean.abs() < 1e-12);
    assert!((m.variance - 20.0).abs() < 1e-10);
}

#[test]
fn one_sided_abs_moment_matches_oracle() {
    let f = SemiexpFamily::one_sided_centered(0.5, 1.0, 0.5).unwrap();
    let m = moments(&f, None).unwrap();
    let oracle = sqrt_weibull_expect(|w| (w - 2.0).abs().powf(2.5), f64::INFINITY);
    assert!(
        (m.abs_moment_2_gamma - oracle).abs() < 1e-6 * oracle,
        "{} vs {}",
        m.abs_moment_2_gamma,
        oracle
    );
}

#[test]
fn symmetric_moments_closed_form() {
    let f = SemiexpFamily::symmetric(0.5, 1.0, 1.0).unwrap();
    let m = moments(&f, None).unwrap();
    assert_eq!(m.mean, 0.0);
    assert!((m.variance - 24.0).abs() < 1e-11);
    assert!((m.abs_moment_2_gamma - 720.0).abs() < 1e-9); // Gamma(7)
    assert_eq!(m.cutoff, f64::INFINITY);
}

#[test]
fn two_point_lattice_moments_and_tail() {
    let f = SemiexpFamily::lattice(LatticeDist::two_point(), 0.5, 1.0, 0.7).unwrap();
    let m = moments(&f, None).unwrap();
    assert_eq!((m.mean, m.variance, m.abs_moment_2_gamma), (0.0, 1.0, 1.0));
    assert!((tail_log_prob(&f, None, 1.0).unwrap() - 0.5f64.ln()).abs() < 1e-15);
}

#[test]
fn uncentered_lattice_rejected() {
    let d = LatticeDist::new(1.0, 0.0, vec![0.5, 0.5]).unwrap();
    assert!(SemiexpFamily::lattice(d, 0.5, 1.0, 1.0).is_err());
}

#[test]
fn invalid_parameters_rejected() {
    assert!(SemiexpFamily::symmetric(1.0, 1.0, 1.0).is_err());
    assert!(SemiexpFamily::symmetric(0.5, -1.0, 1.0).is_err());
    assert!(SemiexpFamily::one_sided_centered(0.5, 1.0, 0.0).is_err());
    assert!(TruncationParams::new(0.0, 1.0, 1).is_err());
    assert!(TruncationParams::new(1.0, 1.0, 0).is_err());
    assert!(ModelParams::new(0.5f32, 1.0, 0.0, 1.0).is_err());
}

#[test]
fn tails_match_defining_formula() {
    let s = SemiexpFamily::symmetric(0.5, 1.0, 1.0).unwrap();
    let o = SemiexpFamily::one_sided_centered(0.3, 2.0, 1.0).unwrap();
    let mu = o.centering_shift();
    for &y in &[0.1f64, 1.0, 7.5, 100.0, 1e4] {
        let want = 0.5f64.ln() - y.sqrt();
        let got = tail_log_prob(&s, None, y).unwrap();
        assert!(((got - want) / want).abs() < 1e-12);
        let want = -2.0 * (y + mu).powf(0.7);
        let got = tail_log_prob(&o, None, y).unwrap();
        assert!(((got - want) / want).abs() < 1e-12);
    }
    // asymptotic ratio to -q y^{1-eps}
    let r = tail_log_prob(&s, None, 1e8).unwrap() / -(1e8f64.sqrt());
    assert!((r - 1.0).abs() < 1e-4);
}

#[test]
fn truncated_tail() {
    let s = SemiexpFamily::symmetric(0.5, 1.0, 1.0).unwrap();
    let t = TruncationParams::new(1.0, 4.0, 1).unwrap();
    assert_eq!(tail_log_prob(&s, Some(&t), 4.0).unwrap(), f64::NEG_INFINITY);
    assert_eq!(tail_log_prob(&s, Some(&t), 5.0).unwrap(), f64::NEG_INFINITY);
    let y = 1.0;
    let want = ((0.5 * (-1.0f64).exp() - 0.5 * (-2.0f64).exp()) / (1.0 - 0.5 * (-2.0f64).exp())).ln();
    assert!((tail_log_prob(&s, Some(&t), y).unwrap() - want).abs() < 1e-14);
}

#[test]
fn sampling_is_deterministic() {
    let f = SemiexpFamily::symmetric(0.5, 1.0, 1.0).unwrap();
    assert_eq!(sample_base(&f, 7, 100).unwrap(), sample_base(&f, 7, 100).unwrap());
    assert_ne!(sample_base(&f, 7, 100).unwrap(), sample_base(&f, 8, 100).unwrap());
    assert!(sample_base(&f, 7, 0).is_err());
}

#[test]
fn truncation_above_every_draw_is_identity() {
    let f = SemiexpFamily::one_sided_centered(0.5, 1.0, 1.0).unwrap();
    let base = sample_base(&f, 99, 1000).unwrap();
    let t = TruncationParams::new(1.0, 1e9, 1).unwrap();
    assert!(base.iter().all(|&y| y < t.cutoff()));
    assert_eq!(sample_truncated(&f, &t, 99, 1000).unwrap(), base);
}

#[test]
fn truncated_support() {
    let f = SemiexpFamily::symmetric(0.5, 1.0, 1.0).unwrap();
    let t = TruncationParams::new(1.0, 1.0, 1).unwrap();
    let xs = sample_truncated(&f, &t, 3, 10_000).unwrap();
    assert!(xs.iter().all(|&y| y < 1.0));
}

#[test]
fn degenerate_truncation_is_an_error() {
    let s = SemiexpFamily::symmetric(0.5, 1.0, 1.0).unwrap();
    // P(Y < -400) = exp(-20) / 2 < 1e-6
    let t = TruncationParams {
        beta: 1.0,
        c: -400.0,
        n_index: 1,
    };
    assert!(matches!(
        BoundedSampler::new(&s, t.cutoff()),
        Err(Error::DegenerateTruncation(_))
    ));
    let o = SemiexpFamily::one_sided_centered(0.5, 1.0, 1.0).unwrap();
    assert!(matches!(
        BoundedSampler::new(&o, -3.0),
        Err(Error::DegenerateTruncation(_))
    ));
}

#[test]
fn truncated_mean_matches_quadrature() {
    let f = SemiexpFamily::one_sided_centered(0.5, 1.0, 1.0).unwrap();
    let t = TruncationParams::new(1.0, 16.0, 1).unwrap();
    // cutoff on Y is 16, so W < 18
    let z = sqrt_weibull_expect(|_| 1.0, 18.0);
    let exact_mean = sqrt_weibull_expect(|w| w, 18.0) / z - 2.0;
    let exact_var = sqrt_weibull_expect(|w| (w - 2.0 - exact_mean).powi(2), 18.0) / z;
    let m = moments(&f, Some(&t)).unwrap();
    assert!((m.mean - exact_mean).abs() < 1e-8);
    assert!((m.variance - exact_var).abs() < 1e-8);

    let n = 1_000_000;
    let xs = sample_truncated(&f, &t, 2024, n).unwrap();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let se = (exact_var / n as f64).sqrt();
    assert!((mean - exact_mean).abs() < 3.0 * se, "{mean} vs {exact_mean} (se {se})");
}

#[test]
fn truncated_variance_converges_monotonically() {
    let f = SemiexpFamily::symmetric(0.5, 1.0, 1.0).unwrap();
    let cutoffs = [2.0, 8.0, 32.0, 128.0, 512.0, 4096.0];
    let mut prev = 0.0;
    for &c in &cutoffs {
        let t = TruncationParams::new(1.0, c, 1).unwrap();
        let m = moments(&f, Some(&t)).unwrap();
        // quadrature oracle for E[Y^2 | Y < c] on the symmetric law
        let z = 1.0 - 0.5 * (-c.sqrt()).exp();
        let e2 = 0.5 * (24.0 + sqrt_weibull_expect(|w| w * w, c)) / z;
        let e1 = 0.5 * (-2.0 + sqrt_weibull_expect(|w| w, c)) / z;
        assert!((m.variance - (e2 - e1 * e1)).abs() < 1e-7, "cutoff {c}");
        assert!(m.variance > prev);
        prev = m.variance;
    }
    assert!((prev - 24.0).abs() < 1e-6);
}

#[test]
fn empirical_law_passes_ks() {
    for f in [
        SemiexpFamily::symmetric(0.5, 1.0, 1.0).unwrap(),
        SemiexpFamily::one_sided_centered(0.3, 1.5, 1.0).unwrap(),
    ] {
        let n = 100_000;
        let mut xs = sample_base(&f, 11, n).unwrap();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = f.log_cdf(x).exp();
                (cdf - i as f64 / n as f64)
                    .abs()
                    .max(((i + 1) as f64 / n as f64 - cdf).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.628 / (n as f64).sqrt(), "{:?}: KS distance {d}", f.kind());
    }
}

#[test]
fn draw_between_stays_in_stratum() {
    let f = SemiexpFamily::symmetric(0.5, 1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let y = f.draw_between(100.0, 120.0, &mut rng).unwrap();
        assert!((100.0..120.0).contains(&y));
        let y = f.draw_between(400.0, f64::INFINITY, &mut rng).unwrap();
        assert!(y >= 400.0);
    }
    let o = SemiexpFamily::one_sided_centered(0.5, 1.0, 1.0).unwrap();
    let y = o.draw_between(-1.0, 0.0, &mut rng).unwrap();
    assert!((-1.0..0.0).contains(&y));
    assert!(f.draw_between(-1.0, 1.0, &mut rng).is_err());
}

#[test]
fn draw_between_matches_conditional_law() {
    // P(W >= 9 | 4 <= W < 16) for W with tail e^{-sqrt t}
    let f = SemiexpFamily::symmetric(0.5, 1.0, 1.0).unwrap();
    let want = ((-3.0f64).exp() - (-4.0f64).exp()) / ((-2.0f64).exp() - (-4.0f64).exp());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 200_000;
    let hits = (0..n)
        .filter(|_| f.draw_between(4.0, 16.0, &mut rng).unwrap() >= 9.0)
        .count();
    let p = hits as f64 / n as f64;
    assert!((p - want).abs() < 4.0 * (want * (1.0 - want) / n as f64).sqrt());
}

#[test]
fn audit_symmetric_exact_tail() {
    let f = SemiexpFamily::symmetric(0.5, 1.0, 1.0).unwrap();
    let r = audit_assumptions(&f, None, 0.8, &[100, 1000, 10_000]).unwrap();
    assert_eq!(r.h1, Verdict::Pass);
    let last = r.rows.last().unwrap();
    assert!((last.h1_min - 1.0).abs() < 1e-12 && (last.h1_max - 1.0).abs() < 1e-12);
    assert!(last.h1_raw_max > 1.0);
    // alpha (1 + eps) = 1.2 > 1 with fixed variance: ratio vanishes
    assert_eq!(r.h2, Verdict::Pass);
    assert_eq!(r.h2plus, Verdict::Pass);
}

#[test]
fn audit_censored_tail() {
    let f = SemiexpFamily::symmetric(0.5, 1.0, 1.0).unwrap();
    let t = TruncationParams::new(0.1, 0.5, 1).unwrap();
    let r = audit_assumptions(&f, Some(&t), 0.9, &[1000]).unwrap();
    assert_eq!(r.h1, Verdict::Censored);
    assert_eq!(r.rows[0].censored_points, 17);
    assert!(audit_assumptions(&f, None, 0.8, &[]).is_err());
    assert!(audit_assumptions(&f, None, 0.8, &[10, 5]).is_err());
}

#[test]
fn family_spec_json() {
    let spec: FamilySpec =
        serde_json::from_str(r#"{"kind":"symmetric","epsilon":0.5,"q":1.0,"gamma":1.0,"beta":0.9,"c":1.0}"#).unwrap();
    let (f, t) = spec.build().unwrap();
    assert_eq!(f.kind(), FamilyKind::Symmetric);
    assert_eq!(t.unwrap().cutoff(), 1.0);
    let back = FamilySpec::from_parts(&f, t.as_ref());
    assert_eq!(
        serde_json::to_string(&back).unwrap(),
        r#"{"kind":"symmetric","epsilon":0.5,"q":1.0,"gamma":1.0,"beta":0.9,"c":1.0,"n_index":1}"#
    );

    let lat: FamilySpec = serde_json::from_str(
        r#"{"kind":"lattice","epsilon":0.5,"q":1.0,"lattice":{"step":2.0,"offset":-1.0,"masses":[0.5,0.5]}}"#,
    )
    .unwrap();
    assert_eq!(lat.build().unwrap().0.params().sigma2, 1.0);
    assert!(
        serde_json::from_str::<FamilySpec>(r#"{"kind":"lattice","epsilon":0.5,"q":1.0}"#)
            .unwrap()
            .build()
            .is_err()
    );
    assert!(serde_json::from_str::<FamilySpec>(r#"{"kind":"weird","epsilon":0.5,"q":1.0}"#).is_err());
}

proptest! {
    #[test]
    fn truncated_draws_respect_cutoff(seed in any::<u64>(), c in 0.2f64..20.0, eps in 0.1f64..0.9) {
        let f = SemiexpFamily::symmetric(eps, 1.0, 1.0).unwrap();
        let t = TruncationParams::new(1.0, c, 1).unwrap();
        let a = sample_truncated(&f, &t, seed, 64).unwrap();
        prop_assert!(a.iter().all(|&y| y < c));
        prop_assert_eq!(a, sample_truncated(&f, &t, seed, 64).unwrap());
    }

    #[test]
    fn truncated_tail_is_a_probability(y in 0.01f64..30.0, c in 0.5f64..40.0) {
        let f = SemiexpFamily::one_sided_centered(0.4, 1.0, 1.0).unwrap();
        let t = TruncationParams::new(1.0, c, 1).unwrap();
        let lp = tail_log_prob(&f, Some(&t), y).unwrap();
        prop_assert!(lp <= 1e-15);
        if y < c { prop_assert!(lp > f64::NEG_INFINITY); }
    }
}
