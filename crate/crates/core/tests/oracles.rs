mod common;

use common::*;
use fasuav::blercore::{
    avg_bler_hop1, avg_bler_hop2, instantaneous_bler, linearized_bler, ChiVariant, FblParams, TrajectoryModel,
};
use fasuav::chanmodel::{cdf_hop1, cdf_hop2, FasSpectrum};
use fasuav::geometry::{dbm_to_watts, link_state, Hop, LinkType, ScenarioConfig};
use fasuav::mcoracle::{batch_rng, sample_fas_gain_model, sample_hop1_gain};
use fasuav::optimizer::{
    best_altitude, best_port_count, global_optimize, min_power, min_power_with, EeConfig, PowerSolution,
};
use fasuav::quadrature::ThetaRule;

fn fbl(l: u32) -> FblParams {
    FblParams::new(80.0, l, ChiVariant::RateGap).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn hop1_closed_form_matches_quadrature_oracle() {
    let p = fbl(100);
    for m in [1, 2, 3, 5, 8] {
        for vartheta in [1e-3, 1e-2, 0.1, 0.5, 1.0, 3.0, 10.0] {
            let got = avg_bler_hop1(&p, vartheta, m).unwrap();
            let want = hop1_oracle(&p, vartheta, m);
            assert!(rel_err(got, want) < 1e-8, "m={m} vartheta={vartheta}: {got} vs {want}");
        }
    }
    assert!((avg_bler_hop1(&p, 1.0, 1).unwrap() - hop1_oracle(&p, 1.0, 1)).abs() < 1e-10);
}

#[test]
fn hop2_closed_form_matches_quadrature_oracle() {
    let p = fbl(100);
    let mut rng = TestRng::new(11);
    for m in [1, 2, 5] {
        for n in 1..=4 {
            for _ in 0..3 {
                let lambdas: Vec<f64> = (0..n).map(|_| 0.05 + 2.0 * rng.uniform()).collect();
                let vartheta = 10f64.powf(-3.0 + 5.0 * rng.uniform());
                let got = avg_bler_hop2(&p, vartheta, m, &lambdas).unwrap();
                let want = hop2_oracle(&p, vartheta, m, &lambdas);
                assert!(rel_err(got, want) < 1e-8, "m={m} {lambdas:?} vartheta={vartheta}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn lemma_cdfs_match_statrs() {
    for m in 1..=8 {
        for i in 0..=50 {
            let x = f64::from(i);
            assert!((cdf_hop1(x, 0.3, m).unwrap() - hop1_cdf(x, 0.3, m)).abs() < 1e-12);
            let l = [1.4, 0.5, 0.1];
            assert!((cdf_hop2(x, 0.3, m, &l).unwrap() - hop2_cdf(x, 0.3, m, &l)).abs() < 1e-12);
        }
    }
}

#[test]
fn jakes_spectrum_matches_nalgebra() {
    for (n, w) in [(2, 0.5), (4, 1.0), (8, 0.5), (8, 2.0), (12, 4.0)] {
        let ours = FasSpectrum::new(n, w, 1e-9).unwrap();
        let reference = jakes_eigenvalues(n, w);
        for (a, b) in ours.eigenvalues.iter().zip(&reference) {
            assert!((a - b.max(0.0)).abs() < 1e-9, "N={n} W={w}: {a} vs {b}");
        }
    }
}

/// `E[Q(·)]` by integrating `F` against the exact BLER's density.
fn exact_average<F: Fn(f64) -> f64>(p: &FblParams, cdf: F) -> f64 {
    let eps = |x: f64| instantaneous_bler(x, p.rate, p.blocklength);
    let h = 1e-6 * p.tau;
    let density = |x: f64| (eps((x - h).max(0.0)) - eps(x + h)) / (2.0 * h);
    let upper = p.tau * 8.0 + 2.0;
    let panels = 400;
    let w = upper / f64::from(panels);
    (0..panels)
        .map(|i| {
            let a = f64::from(i) * w;
            simpson(|x| cdf(x) * density(x), a, a + w, 1e-10)
        })
        .sum()
}

#[test]
fn linearized_average_tracks_exact_average() {
    let cfg = ScenarioConfig::default();
    let fas = FasSpectrum::new(2, 0.5, 1e-9).unwrap();
    let mut worst: f64 = 0.0;
    for l in [100, 200, 300] {
        let p = fbl(l);
        for theta in [0.3, 1.7, 3.1, 4.6] {
            for p2_dbm in [10.0, 20.0, 30.0, 40.0] {
                for k in LinkType::BOTH {
                    let m = cfg.m_factor(k);
                    let s1 = link_state(&cfg, &fas, 1.0, theta, Hop::First, k).unwrap();
                    let s2 = link_state(&cfg, &fas, dbm_to_watts(p2_dbm), theta, Hop::Second, k).unwrap();
                    let lin1 = avg_bler_hop1(&p, s1.vartheta, m).unwrap();
                    let ex1 = exact_average(&p, |x| hop1_cdf(x, s1.vartheta, m));
                    let lin2 = avg_bler_hop2(&p, s2.vartheta, m, fas.retained()).unwrap();
                    let ex2 = exact_average(&p, |x| hop2_cdf(x, s2.vartheta, m, fas.retained()));
                    worst = worst.max((lin1 - ex1).abs()).max((lin2 - ex2).abs());
                }
            }
        }
    }
    assert!(worst < 1e-2, "worst linearization gap {worst}");
}

#[test]
fn monte_carlo_of_linearized_bler_matches_closed_forms() {
    let p = fbl(100);
    let n = 200_000;
    for (m, vartheta, lambdas) in [(1, 0.4, vec![1.3, 0.7]), (2, 0.2, vec![1.0]), (5, 5.0, vec![1.5, 0.9, 0.3])] {
        let mut rng = batch_rng(5, u64::from(m));
        let mut s1 = 0.0;
        let mut q1 = 0.0;
        let mut s2 = 0.0;
        let mut q2 = 0.0;
        for _ in 0..n {
            let x1 = sample_hop1_gain(m, &mut rng) * f64::from(m) / vartheta;
            let x2 = sample_fas_gain_model(m, &lambdas, &mut rng) * f64::from(m) / vartheta;
            let (e1, e2) = (linearized_bler(x1, &p), linearized_bler(x2, &p));
            s1 += e1;
            q1 += e1 * e1;
            s2 += e2;
            q2 += e2 * e2;
        }
        let nf = n as f64;
        let se = |s: f64, q: f64| ((q / nf - (s / nf).powi(2)) / nf).sqrt();
        let h1 = avg_bler_hop1(&p, vartheta, m).unwrap();
        let h2 = avg_bler_hop2(&p, vartheta, m, &lambdas).unwrap();
        assert!((s1 / nf - h1).abs() <= 3.0 * se(s1, q1), "hop1 m={m}");
        assert!(
            (s2 / nf - h2).abs() <= 3.0 * se(s2, q2),
            "hop2 m={m}: mc {} se {} closed {h2} oracle {}",
            s2 / nf,
            se(s2, q2),
            hop2_oracle(&p, vartheta, m, &lambdas)
        );
    }
}

fn fig3b_setup() -> (ScenarioConfig, FblParams, EeConfig) {
    let cfg = ScenarioConfig {
        p1: dbm_to_watts(46.0),
        ..ScenarioConfig::default()
    };
    (cfg, fbl(200), EeConfig::default())
}

#[test]
fn bisection_matches_fine_grid_scan() {
    let (cfg, p, ee) = fig3b_setup();
    let fas = FasSpectrum::new(8, 0.5, ee.rank_tolerance).unwrap();
    let cfg = ScenarioConfig {
        uav_altitude: 450.0,
        ..cfg
    };
    let model = TrajectoryModel::new(&cfg, &fas, &p, ThetaRule::GaussChebyshev(ee.theta_nodes)).unwrap();
    let PowerSolution::Feasible { p2, .. } = min_power_with(&model, &ee).unwrap() else {
        panic!("Fig. 3b point should be feasible");
    };
    let first_feasible = (0..8000)
        .map(|i| -30.0 + 0.01 * f64::from(i))
        .find(|&db| model.overall(dbm_to_watts(db)).unwrap() <= ee.bler_threshold)
        .unwrap();
    let grid_hi = dbm_to_watts(first_feasible);
    let grid_lo = dbm_to_watts(first_feasible - 0.01);
    assert!(p2 <= grid_hi * (1.0 + ee.bisect_tol), "{p2} vs grid {grid_hi}");
    assert!(p2 > grid_lo * (1.0 - ee.bisect_tol), "{p2} vs grid {grid_lo}");
    let direct = min_power(&cfg, &fas, &p, &ee, 450.0).unwrap();
    assert_eq!(direct.power(), Some(p2));
}

#[test]
fn port_search_matches_brute_force() {
    let cfg = ScenarioConfig::default();
    let ee = EeConfig {
        n_range: (1, 12),
        ..EeConfig::default()
    };
    let p = fbl(200);
    let search = best_port_count(&cfg, &p, &ee, 450.0, 0.5).unwrap();
    let mut best = 0.0;
    for n in 1..=12u32 {
        let fas = FasSpectrum::new(n as usize, 0.5, ee.rank_tolerance).unwrap();
        let ee_n = if ee.is_causal(n, 200) {
            match min_power(&cfg, &fas, &p, &ee, 450.0).unwrap() {
                PowerSolution::Feasible { p2, bler, .. } => ee.efficiency(bler, p2, 200, n).unwrap(),
                PowerSolution::Infeasible { .. } => 0.0,
            }
        } else {
            0.0
        };
        assert_eq!(search.points[(n - 1) as usize].ee, ee_n, "N={n}");
        if ee_n > best {
            best = ee_n;
        }
    }
    assert_eq!(search.best().ee, best);
    assert!(search.points.iter().filter(|q| q.n >= 10).all(|q| !q.causal && !q.feasible));
}

#[test]
fn altitude_argmax_and_global_consistency() {
    let cfg = ScenarioConfig::default();
    let ee = EeConfig {
        l_set: vec![400, 300],
        n_range: (1, 4),
        z_range: (200.0, 500.0),
        z_step: 50.0,
        theta_nodes: 16,
        ..EeConfig::default()
    };
    let alt = best_altitude(&cfg, &fbl(300), &ee, 0.5).unwrap();
    let tops: Vec<f64> = alt.altitudes.iter().map(|s| s.best().ee).collect();
    let i = alt.best;
    if i > 0 {
        assert!(tops[i] >= tops[i - 1]);
    }
    if i + 1 < tops.len() {
        assert!(tops[i] >= tops[i + 1]);
    }

    let sol = global_optimize(&cfg, &ee, 0.5).unwrap();
    let reversed = global_optimize(&cfg, &EeConfig { l_set: vec![300, 400], ..ee.clone() }, 0.5).unwrap();
    assert_eq!(sol, reversed);
    assert_eq!(sol.trace.len(), 2 * ee.altitude_grid().len() * 4);
    let again = ee.efficiency(sol.bler_star, sol.p2_star, sol.l_star, sol.n_star).unwrap();
    assert_eq!(again, sol.ee_star);
    let model = TrajectoryModel::new(
        &ScenarioConfig {
            uav_altitude: sol.z_star,
            ..cfg
        },
        &FasSpectrum::new(sol.n_star as usize, 0.5, ee.rank_tolerance).unwrap(),
        &fbl(sol.l_star),
        ThetaRule::GaussChebyshev(ee.theta_nodes),
    )
    .unwrap();
    assert_eq!(model.overall(sol.p2_star).unwrap(), sol.bler_star);
    assert!(sol.bler_star <= ee.bler_threshold);
    let single = global_optimize(&cfg, &EeConfig { l_set: vec![300], ..ee.clone() }, 0.5).unwrap();
    assert_eq!(single.ee_star, alt.best().ee);
}
