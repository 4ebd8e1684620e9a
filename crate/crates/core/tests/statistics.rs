//! Monte Carlo invariants. Each check uses a 3 sigma band unless stated.

use rayon::prelude::*;

use sheet_kalman::filter::FilterModel;
use sheet_kalman::grid::{Grid, Node};
use sheet_kalman::kernel::{KernelTable, KernelTruncation};
use sheet_kalman::moments::MomentSet;
use sheet_kalman::oracle::{build_joint_model, mc_compare, optimality_study};
use sheet_kalman::scenario::{Coefficient, Scenario};
use sheet_kalman::sheet::{replication_seed, sample_sheet};
use sheet_kalman::simulate::{innovation_from_increments, simulate_with};
use sheet_kalman::validation::mc_validate;

const SEED: u64 = 1;

fn trunc() -> KernelTruncation {
    KernelTruncation::default()
}

fn constant() -> Scenario {
    Scenario::constant_signal(0.0, 1.0).unwrap()
}

/// Sample mean and standard deviation.
fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

fn within(est: f64, truth: f64, se: f64) -> bool {
    (est - truth).abs() <= 3.0 * se
}

#[test]
fn rectangle_increments_follow_area_law() {
    let g = Grid::unit(16).unwrap();
    let reps = 20_000u64;
    // (s, a) -> (t, x) in node indices
    let rects = [((0, 0), (16, 16)), ((4, 2), (12, 10)), ((8, 8), (9, 9)), ((0, 5), (3, 16)), ((10, 0), (16, 4))];
    let mut samples = vec![Vec::with_capacity(reps as usize); rects.len()];
    for r in 0..reps {
        let b = sample_sheet(g, replication_seed(SEED, r));
        let v = &b.values;
        for (k, ((s, a), (t, x))) in rects.iter().enumerate() {
            samples[k].push(v.get(*t, *x) - v.get(*t, *a) - v.get(*s, *x) + v.get(*s, *a));
        }
    }
    let n = reps as f64;
    for (k, ((s, a), (t, x))) in rects.iter().enumerate() {
        let area = g.t(t - s) * g.x(x - a);
        let (m, sd) = mean_sd(&samples[k]);
        assert!(within(m, 0.0, sd / n.sqrt()), "rect {k}: mean {m}");
        let var = sd * sd;
        assert!(within(var, area, area * (2.0 / n).sqrt()), "rect {k}: var {var} vs {area}");
    }
}

fn moment_scenarios() -> Vec<(Scenario, usize)> {
    let product = Scenario::new(
        Coefficient::product(&[0.5, 0.5], &[1.0]),
        Coefficient::product(&[1.0], &[0.5, 0.5]),
        Coefficient::Constant(1.0),
        Coefficient::Constant(1.0),
        1.0,
        1.0,
        0.5,
    )
    .unwrap();
    vec![(constant(), 16), (Scenario::sheet_signal(), 16), (product, 64)]
}

#[test]
fn prior_moments_match_simulation() {
    let reps = 20_000u64;
    for (s, n) in moment_scenarios() {
        let g = Grid::unit(n).unwrap();
        let kernel = KernelTable::build(&s, g, &trunc()).unwrap();
        let m = MomentSet::new(&s, &kernel);
        let coeffs = s.discretize(g);
        let nodes = [Node::new(n, n), Node::new(n / 2, n), Node::new(n, n / 4), Node::new(n / 2, n / 2), Node::new(3 * n / 4, 1)];
        let mut samples = vec![Vec::new(); nodes.len()];
        for r in 0..reps {
            let b = simulate_with(&coeffs, &s, g, replication_seed(SEED, r));
            for (k, z) in nodes.iter().enumerate() {
                samples[k].push(b.y.at(*z));
            }
        }
        let rn = reps as f64;
        for (k, z) in nodes.iter().enumerate() {
            let (mean, sd) = mean_sd(&samples[k]);
            let var = m.var().at(*z);
            assert!(within(mean, m.mean().at(*z), sd / rn.sqrt()), "{} {z:?}: mean {mean} vs {}", s.preset.name(), m.mean().at(*z));
            assert!(within(sd * sd, var, var * (2.0 / rn).sqrt()), "{} {z:?}: var {} vs {var}", s.preset.name(), sd * sd);
        }
    }
}

#[test]
fn resolvent_variance_example() {
    // F = C = 1, sigma0^2 = 0: Var Y(1,1) = int K(u;(1,1))^2 du. The left-corner
    // recursion is biased by O(dt) here (about 4% at 64x64), hence the finer grid.
    let one = Coefficient::Constant(1.0);
    let s = Scenario::new(one.clone(), one.clone(), one.clone(), one, 1.0, 0.0, 0.0).unwrap();
    let g = Grid::unit(128).unwrap();
    let kernel = KernelTable::build(&s, g, &trunc()).unwrap();
    let var = MomentSet::new(&s, &kernel).var().at(g.terminal());
    let coeffs = s.discretize(g);
    let ys: Vec<f64> = (0..20_000u64)
        .into_par_iter()
        .map(|r| simulate_with(&coeffs, &s, g, replication_seed(SEED, r)).y.at(g.terminal()))
        .collect();
    let (_, sd) = mean_sd(&ys);
    assert!(within(sd * sd, var, var * (2.0f64 / 20_000.0).sqrt()), "{} vs {var}", sd * sd);
}

#[test]
fn signal_is_gaussian() {
    let s = Scenario::sheet_signal();
    let g = Grid::unit(16).unwrap();
    let coeffs = s.discretize(g);
    let reps = 20_000u64;
    let nodes = [Node::new(16, 16), Node::new(8, 12), Node::new(4, 4)];
    let mut samples = vec![Vec::new(); 3];
    for r in 0..reps {
        let b = simulate_with(&coeffs, &s, g, replication_seed(SEED, r));
        for (k, z) in nodes.iter().enumerate() {
            samples[k].push(b.y.at(*z));
        }
    }
    let n = reps as f64;
    for v in &samples {
        let (m, sd) = mean_sd(v);
        let skew = v.iter().map(|x| ((x - m) / sd).powi(3)).sum::<f64>() / n;
        let kurt = v.iter().map(|x| ((x - m) / sd).powi(4)).sum::<f64>() / n - 3.0;
        assert!(within(skew, 0.0, (6.0 / n).sqrt()), "skew {skew}");
        assert!(within(kurt, 0.0, (24.0 / n).sqrt()), "kurtosis {kurt}");
    }
}

#[test]
fn observation_covariance_matches_simulation() {
    let s = Scenario::sheet_signal();
    let g = Grid::unit(3).unwrap();
    let z = g.terminal();
    let model = build_joint_model(&s, g, z, &[z]).unwrap();
    let coeffs = s.discretize(g);
    let reps = 20_000u64;
    let obs: Vec<Vec<f64>> = (0..reps)
        .map(|r| model.observed(&simulate_with(&coeffs, &s, g, replication_seed(SEED, r)).du))
        .collect();
    let n = model.len();
    let rn = reps as f64;
    let means: Vec<f64> = (0..n).map(|a| obs.iter().map(|o| o[a]).sum::<f64>() / rn).collect();
    for a in 0..n {
        for b in a..n {
            let prod: Vec<f64> = obs.iter().map(|o| (o[a] - means[a]) * (o[b] - means[b])).collect();
            let (c, sd) = mean_sd(&prod);
            let want = model.sigma_uu[(a, b)];
            assert!(within(c, want, sd / rn.sqrt()), "entry ({a},{b}): {c} vs {want}");
        }
    }
}

#[test]
fn oracle_variance_matches_its_empirical_error() {
    for s in [constant(), Scenario::sheet_signal()] {
        let r = mc_compare(&s, Grid::unit(8).unwrap(), 2000, SEED, &trunc()).unwrap();
        let sq: Vec<f64> = r.records.iter().map(|x| (x.oracle - x.y).powi(2)).collect();
        let (mse, sd) = mean_sd(&sq);
        assert!(within(mse, r.oracle_var, sd / (sq.len() as f64).sqrt()), "{}: {mse} vs {}", s.preset.name(), r.oracle_var);
    }
}

#[test]
fn oracle_beats_perturbed_linear_estimators() {
    for s in [constant(), Scenario::sheet_signal()] {
        let r = optimality_study(&s, Grid::unit(8).unwrap(), 2000, SEED, 5, 0.25, &trunc()).unwrap();
        for m in &r.mse_perturbed {
            assert!(r.mse_oracle <= *m, "{}: oracle {} vs {m}", s.preset.name(), r.mse_oracle);
        }
    }
}

fn filter_optimality(s: &Scenario) {
    let r = optimality_study(s, Grid::unit(8).unwrap(), 2000, SEED, 5, 0.25, &trunc()).unwrap();
    assert!(r.mse_filter < r.mse_prior, "{r:?}");
    assert!(r.mse_filter < r.mse_raw, "{r:?}");
}

#[test]
fn sheet_filter_beats_prior_and_raw_observation() {
    filter_optimality(&Scenario::sheet_signal());
}

#[test]
#[ignore = "fails: for the constant signal the filter is not the conditional mean (see README)"]
fn constant_filter_beats_prior_and_raw_observation() {
    filter_optimality(&constant());
}

fn error_surface_consistency(s: &Scenario) {
    let fm = FilterModel::new(s, Grid::unit(16).unwrap(), &trunc()).unwrap();
    let r = mc_validate(&fm, 5000, SEED, 10).unwrap();
    for c in &r.consistency {
        assert!(c.agrees(0.10), "{c:?}");
    }
}

#[test]
fn sheet_error_surface_matches_filter_mse() {
    error_surface_consistency(&Scenario::sheet_signal());
}

#[test]
#[ignore = "fails: for the constant signal S is not the filter's mean-square error (see README)"]
fn constant_error_surface_matches_filter_mse() {
    error_surface_consistency(&constant());
}

#[test]
fn filter_is_unbiased() {
    for s in [constant(), Scenario::sheet_signal()] {
        let r = mc_compare(&s, Grid::unit(8).unwrap(), 2000, SEED, &trunc()).unwrap();
        let errs: Vec<f64> = r.records.iter().map(|x| x.filter - x.y).collect();
        let (m, sd) = mean_sd(&errs);
        assert!(within(m, 0.0, sd / (errs.len() as f64).sqrt()), "{}: bias {m}", s.preset.name());
    }
}

#[test]
fn innovation_has_mean_zero() {
    let g = Grid::unit(16).unwrap();
    let cells = [Node::new(0, 0), Node::new(15, 15), Node::new(7, 3), Node::new(2, 12), Node::new(10, 9)];
    for s in [constant(), Scenario::sheet_signal()] {
        let fm = FilterModel::new(&s, g, &trunc()).unwrap();
        let mut samples = vec![Vec::new(); cells.len()];
        for r in 0..5000u64 {
            let b = simulate_with(fm.coefficients(), &s, g, replication_seed(SEED, r));
            let yhat = fm.estimate(&b.du).unwrap();
            let inn = innovation_from_increments(fm.coefficients(), &b.du, &yhat).unwrap();
            for (k, c) in cells.iter().enumerate() {
                samples[k].push(inn.dn.get(c.i, c.j));
            }
        }
        for (k, v) in samples.iter().enumerate() {
            let (m, sd) = mean_sd(v);
            assert!(within(m, 0.0, sd / (v.len() as f64).sqrt()), "{} cell {:?}: {m}", s.preset.name(), cells[k]);
        }
    }
}

#[test]
fn sheet_innovation_is_white() {
    let fm = FilterModel::new(&Scenario::sheet_signal(), Grid::unit(16).unwrap(), &trunc()).unwrap();
    let w = mc_validate(&fm, 5000, SEED, 100).unwrap().whiteness;
    assert!(w.max_abs_corr <= w.bound, "{w:?}");
    assert!((w.var_ratio - 1.0).abs() <= 0.05, "{w:?}");
}
