use ordwalk::density::{conditioned_density, g_killed, g_tilde, survival, SurvivalMethod};
use ordwalk::exittime::{p2_bessel, p2_series, rho_survival_pf};
use ordwalk::fredholm::{extreme_cdf, log_det_a, Extreme, KernelSpec};
use ordwalk::harmonic::{h_equal, h_equal_laguerre, h_equal_phi, h_hat};
use ordwalk::mathcore::special::reg_lower_gamma;
use ordwalk::mathcore::{
    chamber_integrate, chamber_integrate_refined, gamma_density, log_det, pfaffian, q_poly, ChamberSpec, SquareMatrix,
};
use ordwalk::mcsim::{
    coupling_check, htransform_estimate, lpp_dp, pushblock_evolve, queue_departures, sample_field, survival_estimate,
    Grid, SimConfig,
};
use ordwalk::rng::stream_rng;
use ordwalk::walkmodel::{vandermonde, GTPattern, KillKind, Rates};
use proptest::prelude::*;

fn chamber(d: usize) -> impl Strategy<Value = Vec<f64>> {
    (-3.0..3.0f64, prop::collection::vec(0.05..2.5f64, d - 1)).prop_map(|(x0, gaps)| {
        let mut x = vec![x0];
        for g in gaps {
            let last = *x.last().unwrap();
            x.push(last + g);
        }
        x
    })
}

fn any_chamber(max_d: usize) -> impl Strategy<Value = Vec<f64>> {
    (1..=max_d).prop_flat_map(chamber)
}

fn skew(n: usize) -> impl Strategy<Value = SquareMatrix> {
    prop::collection::vec(-2.0..2.0f64, n * n).prop_map(move |v| {
        SquareMatrix::from_fn(n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Less => v[i * n + j],
            std::cmp::Ordering::Greater => -v[j * n + i],
            std::cmp::Ordering::Equal => 0.0,
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pfaffian_squares_to_determinant(m in (1usize..=5).prop_flat_map(|k| skew(2 * k))) {
        let pf = pfaffian(&m).unwrap().value();
        let det = log_det(&m).unwrap().value();
        prop_assert!((pf * pf - det).abs() <= 1e-9 * det.abs().max(1e-300), "pf^2 {} det {}", pf * pf, det);
    }

    #[test]
    fn equal_rows_give_a_negligible_determinant(v in prop::collection::vec(-3.0..3.0f64, 16)) {
        let mut rows: Vec<Vec<f64>> = v.chunks(4).map(|c| c.to_vec()).collect();
        rows[3] = rows[1].clone();
        let m = SquareMatrix::from_rows(&rows).unwrap();
        let d = log_det(&m).unwrap();
        let scale: f64 = rows.iter().map(|r| r.iter().map(|a| a.abs()).fold(0.0, f64::max)).product();
        prop_assert!(d.sign == 0 || d.log_abs <= (1e-12 * scale).ln());
    }

    #[test]
    fn lower_gamma_is_a_cdf(a in 0.5..40.0f64, t in 0.0..80.0f64, dt in 0.0..5.0f64) {
        let p = reg_lower_gamma(a, t);
        let q = reg_lower_gamma(a, t + dt);
        prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&q));
        prop_assert!(q >= p - 1e-15);
    }

    #[test]
    fn gamma_density_is_poly_times_exponential(n in 1i64..60, t in 0.01..80.0f64) {
        let a = gamma_density(n, t);
        let b = q_poly(n, t) * (-t).exp();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
    }

    #[test]
    fn simplex_volume(d in 1usize..=4, a in -3.0..3.0f64, w in 0.1..4.0f64) {
        let spec = ChamberSpec::new(vec![a; d], vec![a + w; d]);
        let v = chamber_integrate(&|_: &[f64]| 1.0, &spec, 6).unwrap();
        let fact: f64 = (1..=d).map(|k| k as f64).product();
        let want = w.powi(d as i32) / fact;
        prop_assert!(((v - want) / want).abs() <= 1e-8);
    }

    #[test]
    fn vandermonde_flips_under_a_swap(x in any_chamber(6), i in 0usize..6, j in 0usize..6) {
        let d = x.len();
        let (i, j) = (i % d, j % d);
        prop_assume!(i != j);
        let mut y = x.clone();
        y.swap(i, j);
        prop_assert!((vandermonde(&y) + vandermonde(&x)).abs() <= 1e-12 * vandermonde(&x).abs());
    }

    #[test]
    fn harmonic_function_positive(x in any_chamber(8)) {
        prop_assert!(h_equal(&x).unwrap() > 0.0);
        prop_assert!(h_hat(&x).unwrap() > 0.0);
    }

    #[test]
    fn harmonic_function_shift_invariant(x in any_chamber(6), c in -10.0..10.0f64) {
        let y: Vec<f64> = x.iter().map(|v| v + c).collect();
        let (a, b) = (h_equal(&x).unwrap(), h_equal(&y).unwrap());
        prop_assert!(((a - b) / a).abs() <= 1e-9);
    }

    #[test]
    fn harmonic_representations_agree(x in any_chamber(6)) {
        let h = h_equal(&x).unwrap();
        prop_assert!(((h_equal_phi(&x).unwrap() - h) / h).abs() <= 1e-8);
        prop_assert!(((h_equal_laguerre(&x).unwrap() - h) / h).abs() <= 1e-8);
    }

    #[test]
    fn harmonic_function_grows_with_full_degree(x in (2usize..=5).prop_flat_map(chamber)) {
        // along a ray the log-slope tends to the total degree
        let d = x.len();
        let ray = |t: f64| -> f64 { h_equal(&x.iter().map(|v| t * (v - x[0]) + 1e-3 * *v).collect::<Vec<_>>()).unwrap() };
        let slope = (ray(2e4) / ray(1e4)).log2();
        prop_assert!((slope - (d * (d - 1) / 2) as f64).abs() < 1e-2, "slope {slope}");
    }

    #[test]
    fn killed_densities_nonnegative(x in any_chamber(5), gaps in prop::collection::vec(0.0..4.0f64, 5), n in 1u32..=50) {
        let d = x.len();
        let mut z = Vec::with_capacity(d);
        let mut acc = x[0] + gaps[0] * f64::from(n).sqrt();
        for j in 0..d {
            acc = acc.max(x[j]) + gaps[j];
            z.push(acc);
        }
        let r = Rates::equal(d, 1.0).unwrap();
        for v in [g_killed(&x, &z, n, &r).unwrap(), g_tilde(&x, &z, n, &r).unwrap()] {
            prop_assert!(v.sign >= 0);
        }
    }

    #[test]
    fn p2_monotone(a in -2.0..2.0f64, gap in 0.01..20.0f64, more in 0.0..3.0f64, n in 0u32..40) {
        let p = p2_series(a, a + gap, n).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(p2_series(a, a + gap, n + 1).unwrap() <= p + 1e-14);
        prop_assert!(p2_series(a, a + gap + more, n).unwrap() >= p - 1e-14);
        prop_assert_eq!(p2_series(a + gap, a, n).unwrap(), -p);
    }

    #[test]
    fn p2_forms_agree(gap in 0.01..20.0f64, n in 1u32..=30) {
        let a = p2_series(0.0, gap, n - 1).unwrap();
        let b = p2_bessel(0.0, gap, n).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-300) + 1e-15, "{a} {b}");
    }

    #[test]
    fn pfaffian_survival_reduces(gap in 0.01..10.0f64, n in 1u32..30, a in 0.05..4.0f64, b in 0.05..4.0f64) {
        prop_assert!((rho_survival_pf(&[0.0, gap], n).unwrap() - p2_series(0.0, gap, n - 1).unwrap()).abs() <= 1e-13);
        let want = (1.0 - (-a).exp()) * (1.0 - (-b).exp());
        prop_assert!((rho_survival_pf(&[0.0, a, a + b], 1).unwrap() - want).abs() <= 1e-10);
    }

    #[test]
    fn det_a_is_h(x in any_chamber(5), extra in 0u32..=10) {
        let n = x.len() as u32 + extra;
        let h = h_equal(&x).unwrap();
        prop_assert!(((log_det_a(&x, n).unwrap().exp() - h) / h).abs() <= 1e-9);
    }

    #[test]
    fn queues_are_last_passage(seed in any::<u64>(), rows in 1usize..8, d in 1usize..5) {
        let mut rng = stream_rng(seed, 0);
        let rates = Rates::equal(d, 1.3).unwrap();
        let f = sample_field(&mut rng, rows, &rates);
        prop_assert_eq!(queue_departures(&f), lpp_dp(&f).transpose());
    }

    #[test]
    fn push_block_stays_interlaced(seed in any::<u64>(), d in 1usize..=6, n in 1u32..=50) {
        let mut rng = stream_rng(seed, 3);
        let rates = Rates::equal(d, 1.0).unwrap();
        let pats = pushblock_evolve(n, &rates, &mut rng).unwrap();
        prop_assert_eq!(pats.len(), n as usize + 1);
        for p in &pats {
            prop_assert!(GTPattern::new(p.layers.clone()).is_ok());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn coupling_never_fails(seed in any::<u64>(), d in 2usize..=4, n in 1u32..=12) {
        let rates = Rates::equal(d, 1.0).unwrap();
        let rep = coupling_check(d, n, &rates, &SimConfig { seed, streams: 4, samples: 300 }).unwrap();
        prop_assert_eq!(rep.value_failures + rep.event_failures, 0);
    }

    #[test]
    fn largest_cdf_monotone(xi in 6.0..14.0f64, step in 0.2..3.0f64) {
        let a = extreme_cdf(&KernelSpec::new(vec![0.0, 1.0], vec![6], vec![xi], Extreme::Largest).unwrap()).unwrap();
        let b = extreme_cdf(&KernelSpec::new(vec![0.0, 1.0], vec![6], vec![xi + step], Extreme::Largest).unwrap()).unwrap();
        prop_assert!((0.0..=1.0 + 1e-9).contains(&a));
        prop_assert!(b >= a - 1e-7);
    }

    #[test]
    fn smallest_cdf_monotone(xi in 1.0..7.0f64, step in 0.2..2.0f64) {
        // lowering the floor relaxes the event
        let a = extreme_cdf(&KernelSpec::new(vec![0.0, 1.0], vec![3, 6], vec![1.0, xi], Extreme::Smallest).unwrap()).unwrap();
        let b = extreme_cdf(&KernelSpec::new(vec![0.0, 1.0], vec![3, 6], vec![1.0, xi - step], Extreme::Smallest).unwrap()).unwrap();
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&a));
        prop_assert!(b >= a - 1e-7);
    }
}

#[test]
fn grid_rejects_negative_weights() {
    assert!(Grid::new(1, 2, vec![1.0, -0.5]).is_err());
}

#[test]
fn survival_bounded_and_decreasing() {
    // three particles are expensive under quadrature, so they get a short horizon
    for (x, horizon) in [(vec![0.0, 0.8], 20), (vec![0.0, 0.8, 2.0], 3)] {
        let r = Rates::equal(x.len(), 1.0).unwrap();
        for kill in [KillKind::Tau, KillKind::Rho] {
            let mut prev = 1.0;
            for n in 1..=horizon {
                let p = survival(&x, n, &r, kill, SurvivalMethod::Quadrature, None).unwrap().value;
                assert!(p <= prev + 1e-9 && p <= 1.0 + 1e-9, "{kill:?} n={n}: {p} after {prev}");
                prev = p;
            }
        }
    }
}

#[test]
fn chamber_exit_no_sooner_than_interlacing_failure() {
    for (x, r) in [
        (vec![0.0, 1.0], Rates::equal(2, 1.0).unwrap()),
        (vec![0.0, 1.0], Rates::new(vec![2.0, 1.0]).unwrap()),
        (vec![0.0, 0.5, 1.7], Rates::equal(3, 1.0).unwrap()),
    ] {
        let ns: &[u32] = if x.len() > 2 { &[1, 3] } else { &[1, 3, 8] };
        for &n in ns {
            let tau = survival(&x, n, &r, KillKind::Tau, SurvivalMethod::Quadrature, None).unwrap().value;
            let rho = survival(&x, n, &r, KillKind::Rho, SurvivalMethod::Quadrature, None).unwrap().value;
            assert!(tau >= rho - 1e-9, "{x:?} n={n}: tau {tau} rho {rho}");
        }
    }
}

#[test]
fn conditioned_density_is_normalised() {
    let r = Rates::equal(2, 1.0).unwrap();
    for n in 1..=3 {
        let x = [0.0, 1.0];
        let f = |z: &[f64]| conditioned_density(&x, z, n, &r).unwrap_or(f64::NAN);
        let spec = ChamberSpec::new(vec![0.0, 1.0], vec![60.0, 61.0]).with_breakpoints([0.0, 1.0]).with_max_panel(2.0);
        let v = chamber_integrate_refined(&f, &spec, 12, 96, 1e-9, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-6, "n={n}: {v}");
    }
}

#[test]
fn htransform_is_unbiased_for_one() {
    let mut k = 0;
    for d in 1..=4 {
        for n in [1u32, 4, 10] {
            let x: Vec<f64> = (0..d).map(|j| j as f64 * 0.9).collect();
            let r = Rates::equal(d, 1.0).unwrap();
            let e = htransform_estimate(&x, n, &r, &|_| 1.0, &SimConfig { seed: 900 + k, streams: 8, samples: 40_000 }).unwrap();
            k += 1;
            assert!((e.value - 1.0).abs() <= 3.0 * e.stderr, "d={d} n={n}: {} +- {}", e.value, e.stderr);
        }
    }
}

#[test]
fn survival_intervals_have_nominal_coverage() {
    let truth = p2_series(0.0, 1.0, 2).unwrap();
    let r = Rates::equal(2, 1.0).unwrap();
    let mut hits = 0;
    for rep in 0..100 {
        let e = survival_estimate(&[0.0, 1.0], 3, &r, KillKind::Rho, &SimConfig { seed: 5000 + rep, streams: 4, samples: 4000 })
            .unwrap();
        if (e.value - truth).abs() <= 2.0 * e.stderr {
            hits += 1;
        }
    }
    assert!((90..=99).contains(&hits), "coverage {hits}/100");
}
