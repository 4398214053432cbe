//! Library results against independent, deliberately naive implementations.

use std::f64::consts::PI;

use gibbs_series::basis::{BasisKind, BasisSystem};
use gibbs_series::bessel::{j0, j1, BesselRootTable};
use gibbs_series::fit::{build_quadrature, fit_lpl, lpl_value, score_and_hessian, FitOptions};
use gibbs_series::gibbs::{suff_stats_into, InteractionFunction, ReferenceModel};
use gibbs_series::inference::{estimate_vcov, ise, ise_coefficients, select_k, SelectOptions};
use gibbs_series::irregular::{estimate_delta, ripley_k};
use gibbs_series::pattern::{NeighborIndex, Point, PointPattern, Window};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform_pattern(rng: &mut ChaCha8Rng, n: usize, w: Window) -> PointPattern {
    let pts = (0..n)
        .map(|_| Point::new(w.x_min + w.width() * rng.random::<f64>(), w.y_min + w.height() * rng.random::<f64>()))
        .collect();
    PointPattern::new(pts, w).unwrap()
}

/// `J_n(x) = 1/pi int_0^pi cos(n t - x sin t) dt`; the trapezoid rule is
/// spectrally accurate for this periodic integrand.
fn bessel_integral(n: u32, x: f64) -> f64 {
    let m = 4000;
    let h = PI / m as f64;
    let f = |t: f64| (n as f64 * t - x * t.sin()).cos();
    let mut s = 0.5 * (f(0.0) + f(PI));
    for i in 1..m {
        s += f(i as f64 * h);
    }
    s * h / PI
}

#[test]
fn bessel_matches_integral_representation() {
    let mut x = 0.0;
    while x < 60.0 {
        assert!((j0(x) - bessel_integral(0, x)).abs() < 1e-12, "J0({x})");
        assert!((j1(x) - bessel_integral(1, x)).abs() < 1e-12, "J1({x})");
        x += 0.37;
    }
}

#[test]
fn bessel_roots_match_oracle_bisection() {
    let table = BesselRootTable::new(15);
    for k in 1..=15 {
        // bracket from McMahon's asymptotic spacing
        let guess = (k as f64 - 0.25) * PI;
        let (mut a, mut b) = (guess - 0.5, guess + 0.5);
        let fa = bessel_integral(0, a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (bessel_integral(0, m) > 0.0) == (fa > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        assert!((table.root(k) - 0.5 * (a + b)).abs() < 1e-10, "root {k}");
    }
}

#[test]
fn neighbor_queries_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..20 {
        let w = Window::new(-0.3, 0.7 + 0.1 * case as f64, 0.2, 1.1).unwrap();
        let p = uniform_pattern(&mut rng, 50 + 10 * case, w);
        let r = 0.02 + 0.01 * case as f64;
        let idx = NeighborIndex::new(&p, r);
        for _ in 0..30 {
            let u = Point::new(w.x_min + w.width() * rng.random::<f64>(), w.y_min + w.height() * rng.random::<f64>());
            let r_lo = 0.3 * r * rng.random::<f64>();
            let mut got = idx.neighbors_within(&u, r_lo, r).unwrap();
            got.sort_by_key(|x| x.0);
            let want: Vec<(usize, f64)> = p
                .points()
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.distance(&u)))
                .filter(|(_, d)| *d > 0.0 && *d >= r_lo && *d <= r)
                .collect();
            assert_eq!(got, want);
        }
        let mut dmin = f64::INFINITY;
        for (i, a) in p.points().iter().enumerate() {
            for b in &p.points()[i + 1..] {
                dmin = dmin.min(a.distance(b));
            }
        }
        assert_eq!(p.min_interpoint_distance().unwrap(), dmin);
        let n = p.len() as f64;
        assert_eq!(estimate_delta(&p).unwrap(), dmin * n / (n + 1.0));
    }
}

#[test]
fn suff_stats_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w = Window::square(1.0).unwrap();
    let p = uniform_pattern(&mut rng, 300, w);
    for kind in BasisKind::ALL {
        let delta = 0.01;
        let basis = BasisSystem::new(kind, 0.07).unwrap();
        let idx = NeighborIndex::new(&p, 0.08);
        let mut s = vec![0.0; 9];
        for (i, u) in p.points().iter().enumerate().take(60) {
            suff_stats_into(&basis, delta, u, &idx, Some(i), &mut s);
            let mut want = [0.0; 9];
            for (j, v) in p.points().iter().enumerate() {
                let d = u.distance(v);
                if j != i && d >= delta && d <= 0.08 {
                    for (k, wk) in want.iter_mut().enumerate() {
                        *wk += basis.eval(k + 1, d - delta).unwrap();
                    }
                }
            }
            for k in 0..9 {
                assert!((s[k] - want[k]).abs() < 1e-9 * (1.0 + want[k].abs()), "{kind} k={}", k + 1);
            }
        }
    }
}

/// Midpoint Gram matrix on 2^16 panels, independent of the library's
/// quadrature helpers.
fn gram(basis: &BasisSystem, k: usize) -> Vec<Vec<f64>> {
    let n = 1 << 16;
    let h = basis.range() / n as f64;
    let mut g = vec![vec![0.0; k]; k];
    let mut phi = vec![0.0; k];
    for i in 0..n {
        let r = (i as f64 + 0.5) * h;
        basis.values_into(r, &mut phi);
        let w = basis.weight(r) * h;
        for a in 0..k {
            for b in 0..=a {
                g[a][b] += phi[a] * phi[b] * w;
            }
        }
    }
    g
}

#[test]
fn gram_matrices_are_identity() {
    for kind in BasisKind::ALL {
        let basis = BasisSystem::new(kind, 0.08).unwrap();
        let g = gram(&basis, 15);
        for (a, row) in g.iter().enumerate() {
            for (b, v) in row.iter().enumerate().take(a + 1) {
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 1e-6, "{kind} ({a},{b}) = {v}");
            }
        }
    }
}

#[test]
fn fourier_bessel_matches_oracle_functions() {
    let r_big = 0.08;
    let basis = BasisSystem::new(BasisKind::FourierBessel, r_big).unwrap();
    let table = BesselRootTable::new(6);
    for k in 1..=6 {
        let a = table.root(k);
        for i in 0..20 {
            let r = r_big * i as f64 / 19.0;
            let want = 2f64.sqrt() / (r_big * bessel_integral(1, a)) * bessel_integral(0, r * a / r_big);
            assert!((basis.value(k, r) - want).abs() < 1e-9 * (1.0 + want.abs()));
        }
    }
}

#[test]
fn haar_parseval_on_dyadic_steps() {
    // step function on the 1/16 grid lies in the span of the first 16 functions
    let basis = BasisSystem::new(BasisKind::Haar, 1.0).unwrap();
    let levels: Vec<f64> = (0..16).map(|i| ((i * 7) % 5) as f64 - 1.3).collect();
    let f = |r: f64| levels[((r * 16.0).floor() as usize).min(15)];
    let theta = basis.project_all(f, 0.0, 16).unwrap();
    let energy: f64 = levels.iter().map(|v| v * v / 16.0).sum();
    let sum: f64 = theta.iter().map(|t| t * t).sum();
    assert!((energy - sum).abs() < 1e-12);
    for r in [0.01, 0.3, 0.55, 0.97] {
        assert!((basis.series_value(&theta, r) - f(r)).abs() < 1e-12);
    }
    // further levels see nothing
    let more = basis.project_all(f, 0.0, 32).unwrap();
    assert!(more[16..].iter().all(|t| t.abs() < 1e-12));
}

#[test]
fn cosine_parseval() {
    // flat at both ends, so the cosine coefficients decay like k^-4
    let g = |r: f64| (1.0 - (r / 0.08).powi(2)).powi(2);
    let energy = {
        let n = 200_000;
        let h = 0.08 / n as f64;
        (0..n).map(|i| g((i as f64 + 0.5) * h).powi(2) * h).sum::<f64>()
    };
    let basis = BasisSystem::new(BasisKind::Cosine, 0.08).unwrap();
    let theta = basis.project_all(g, 0.0, 32).unwrap();
    let sum: f64 = theta.iter().map(|t| t * t).sum();
    assert!((energy - sum).abs() < 1e-6 * energy);
}

#[test]
fn ise_identity_for_span_members() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for kind in BasisKind::ALL {
        let basis = BasisSystem::new(kind, 0.07).unwrap();
        for _ in 0..5 {
            let truth: Vec<f64> = (0..10).map(|_| rng.random::<f64>() - 0.5).collect();
            let est: Vec<f64> = (0..6).map(|_| rng.random::<f64>() - 0.5).collect();
            let g = |r: f64| basis.series_value(&truth, r - 0.01);
            let q = ise(&basis, &est, g, 0.01);
            let c = ise_coefficients(&est, &truth);
            assert!((q - c).abs() < 1e-8, "{kind}: {q} vs {c}");
        }
    }
}

#[test]
fn pif2_is_in_the_haar_span() {
    let f = InteractionFunction::pif2();
    let basis = BasisSystem::new(BasisKind::Haar, 0.08).unwrap();
    let g = |r: f64| f.log_value(r);
    let theta = basis.project_all(g, 0.0, 8).unwrap();
    assert!(ise(&basis, &theta, g, 0.0) < 1e-10);
}

#[test]
fn score_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..20 {
        let w = Window::square(0.6).unwrap();
        let p = uniform_pattern(&mut rng, 20 + case * 3, w);
        let kind = BasisKind::ALL[case % 3];
        let basis = BasisSystem::new(kind, 0.08).unwrap();
        let k = 1 + case % 5;
        let design = build_quadrature(&p, &basis, 0.0, Some(40), k).unwrap();
        let theta: Vec<f64> = (0..=k).map(|j| if j == 0 { 4.0 } else { 0.2 * (rng.random::<f64>() - 0.5) }).collect();
        let (grad, hess) = score_and_hessian(&design, &theta).unwrap();
        let scale = grad.amax().max(1.0);
        for j in 0..=k {
            let h = 1e-6;
            let mut a = theta.clone();
            let mut b = theta.clone();
            a[j] += h;
            b[j] -= h;
            let fd = (lpl_value(&design, &a).unwrap() - lpl_value(&design, &b).unwrap()) / (2.0 * h);
            assert!((fd - grad[j]).abs() < 1e-5 * scale, "case {case} j {j}: {fd} vs {}", grad[j]);
        }
        let bound = 1e-9 * hess.amax().max(1.0);
        assert!(hess.symmetric_eigen().eigenvalues.max() <= bound);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lpl_is_concave_along_lines(seed in 0u64..1000, t in 0.05f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = uniform_pattern(&mut rng, 30, Window::square(0.5).unwrap());
        let basis = BasisSystem::new(BasisKind::Cosine, 0.06).unwrap();
        let design = build_quadrature(&p, &basis, 0.0, Some(32), 3).unwrap();
        let a: Vec<f64> = (0..4).map(|_| 2.0 * rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..4).map(|_| 2.0 * rng.random::<f64>()).collect();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        let fa = lpl_value(&design, &a).unwrap();
        let fb = lpl_value(&design, &b).unwrap();
        let fm = lpl_value(&design, &mix).unwrap();
        prop_assert!(fm >= t * fa + (1.0 - t) * fb - 1e-9 * (1.0 + fa.abs() + fb.abs()));
    }

    #[test]
    fn poisson_fit_is_exact(seed in 0u64..1000, n in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = uniform_pattern(&mut rng, n, Window::new(0.0, 1.3, 0.0, 0.9).unwrap());
        let basis = BasisSystem::new(BasisKind::Haar, 0.05).unwrap();
        let design = build_quadrature(&p, &basis, 0.0, None, 2).unwrap();
        prop_assume!(design.scheme.n_data > 0);
        let fit = fit_lpl(&design, 0, &FitOptions::default()).unwrap();
        let want = (design.scheme.n_data as f64 / design.scheme.area).ln();
        prop_assert!((fit.theta[0] - want).abs() < 1e-9);
    }
}

#[test]
fn fits_are_translation_equivariant_and_k_is_translation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = uniform_pattern(&mut rng, 400, Window::square(1.0).unwrap());
    let q = p.translate(3.25, -1.5);
    let basis = BasisSystem::new(BasisKind::Cosine, 0.05).unwrap();
    let opts = SelectOptions { k_max: 4, ..SelectOptions::default() };
    let a = select_k(&p, &basis, 0.0, &opts).unwrap();
    let b = select_k(&q, &basis, 0.0, &opts).unwrap();
    assert_eq!(a.chosen_k(), b.chosen_k());
    for (x, y) in a.fit.theta.iter().zip(&b.fit.theta) {
        assert!((x - y).abs() < 1e-8 * (1.0 + x.abs()));
    }
    let grid: Vec<f64> = (1..=50).map(|i| 0.004 * i as f64).collect();
    let ka = ripley_k(&p, &grid).unwrap();
    let kb = ripley_k(&q, &grid).unwrap();
    for (x, y) in ka.k_hat.iter().zip(&kb.k_hat) {
        assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
    }
    let s = p.scale(2.5);
    assert!((estimate_delta(&s).unwrap() - 2.5 * estimate_delta(&p).unwrap()).abs() < 1e-14);
}

#[test]
fn ripley_k_matches_naive_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let w = Window::new(0.0, 1.0, 0.0, 0.7).unwrap();
    let p = uniform_pattern(&mut rng, 150, w);
    let grid = [0.0, 0.01, 0.05, 0.1, 0.2, 0.3];
    let k = ripley_k(&p, &grid).unwrap();
    let n = p.len() as f64;
    let lambda = n / w.area();
    for (i, &r) in grid.iter().enumerate() {
        if r == 0.0 {
            assert_eq!(k.k_hat[i], 0.0);
            continue;
        }
        let er = w.erode(r).unwrap();
        let mut count = 0.0;
        for u in p.points() {
            if !er.contains(u) {
                continue;
            }
            for v in p.points() {
                let d = u.distance(v);
                if d > 0.0 && d <= r {
                    count += 1.0;
                }
            }
        }
        let want = w.area() / (n * lambda * er.area()) * count;
        assert!((k.k_hat[i] - want).abs() < 1e-12 * (1.0 + want));
    }
}

#[test]
fn vcov_matches_naive_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let w = Window::square(0.7).unwrap();
    let p = uniform_pattern(&mut rng, 120, w);
    let delta = 0.8 * p.min_interpoint_distance().unwrap();
    let basis = BasisSystem::new(BasisKind::Cosine, 0.06).unwrap();
    let design = build_quadrature(&p, &basis, delta, None, 3).unwrap();
    let fit = fit_lpl(&design, 3, &FitOptions::default()).unwrap();
    assert!(fit.converged);
    let v = estimate_vcov(&p, &fit, &basis, delta).unwrap();

    let reach = delta + 0.06;
    assert!(delta > 0.0);
    let er = w.erode(reach).unwrap();
    let area = er.area();
    let pts = p.points();
    let phi = |d: f64| -> Vec<f64> { (1..=3).map(|k| basis.eval(k, d - delta).unwrap()).collect() };
    // S(u, X \ excluded), brute force
    let stat = |u: usize, skip: &[usize]| -> Vec<f64> {
        let mut s = vec![1.0, 0.0, 0.0, 0.0];
        for (j, q) in pts.iter().enumerate() {
            let d = pts[u].distance(q);
            if !skip.contains(&j) && d >= delta && d <= reach && d > 0.0 {
                for (k, f) in phi(d).iter().enumerate() {
                    s[k + 1] += f;
                }
            }
        }
        s
    };
    let inside: Vec<usize> = (0..pts.len()).filter(|&i| er.contains(&pts[i])).collect();
    let mut a = [[0.0; 4]; 4];
    let mut b = [[0.0; 4]; 4];
    for &u in &inside {
        let s = stat(u, &[u]);
        for j in 0..4 {
            for k in 0..4 {
                a[j][k] += s[j] * s[k];
            }
        }
        for &x in &inside {
            let d = pts[u].distance(&pts[x]);
            if x == u || d < delta || d > reach {
                continue;
            }
            let su = stat(u, &[u, x]);
            let sv = stat(x, &[u, x]);
            let f = phi(d);
            let logphi: f64 = fit.theta[1..].iter().zip(&f).map(|(t, y)| t * y).sum();
            let tilde = [0.0, f[0], f[1], f[2]];
            for j in 0..4 {
                for k in 0..4 {
                    b[j][k] += su[j] * sv[k] * ((-logphi).exp() - 1.0) + tilde[j] * tilde[k];
                }
            }
        }
    }
    for j in 0..4 {
        for k in 0..4 {
            let aa = a[j][k] / area;
            let bb = 0.5 * (b[j][k] + b[k][j]) / area;
            assert!((v.a_hat[(j, k)] - aa).abs() < 1e-9 * (1.0 + aa.abs()));
            assert!((v.b_hat[(j, k)] - bb).abs() < 1e-9 * (1.0 + bb.abs()));
        }
    }
    assert!((v.a_hat[(0, 0)] - inside.len() as f64 / area).abs() < 1e-12);
}

#[test]
fn reference_model_counts_are_table_values() {
    assert_eq!(ReferenceModel::Pif2.reference_counts(), [190.0, 759.0, 1708.0]);
}
