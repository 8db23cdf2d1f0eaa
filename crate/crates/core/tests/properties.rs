#![allow(clippy::needless_range_loop)]

mod common;

use cellwise::cellhandler::{handle_row, trace_row};
use cellwise::estimator::{di_estimate, DiConfig};
use cellwise::evalkit::{
    contaminate_cellwise, contaminate_rowwise, discrepancy, discrepancy_symmetric, gaussian_sample,
    gen_a09, gen_randcorr, kl_gaussian, substream, ContaminationMode, ContaminationSpec, Stream,
    SymmetricKind,
};
use cellwise::model::CovModel;
use cellwise::numkit::{sym_eigen, SymMatrix};
use cellwise::table::DataTable;
use common::{kl_reference, partial_md2, random_spd};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const Q99: f64 = 6.6348966010212145;

fn random_row(seed: u64, d: usize) -> (Vec<f64>, CovModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = random_spd(d, &mut rng);
    let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let z = (0..d)
        .map(|j| mu[j] + rng.random_range(-6.0..6.0) * sigma.get(j, j).sqrt())
        .collect();
    (z, CovModel::new(mu, sigma).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn criterion_nonincreasing_and_flags_are_a_prefix(seed in any::<u64>(), d in 1usize..=8, q in 0.5f64..15.0) {
        let (z, model) = random_row(seed, d);
        let det = handle_row(&z, &model, q).unwrap();
        let along: Vec<f64> = det.path_order.iter().map(|&j| det.criteria[j]).collect();
        prop_assert!(along.windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(&det.flagged[..], &det.path_order[..det.flagged.len()]);
        for j in 0..d {
            prop_assert_eq!(det.is_flagged(j), det.criteria[j] > q);
        }
    }

    #[test]
    fn higher_cutoff_flags_a_subset(seed in any::<u64>(), d in 1usize..=8, q in 0.5f64..10.0, extra in 0.0f64..10.0) {
        let (z, model) = random_row(seed, d);
        let loose = handle_row(&z, &model, q).unwrap();
        let strict = handle_row(&z, &model, q + extra).unwrap();
        prop_assert!(strict.flagged.iter().all(|j| loose.flagged.contains(j)));
    }

    #[test]
    fn coordinatewise_scale_equivariance(seed in any::<u64>(), d in 1usize..=6, logs in prop::collection::vec(-1.5f64..1.5, 6)) {
        let (z, model) = random_row(seed, d);
        let s: Vec<f64> = logs[..d].iter().map(|l| 10f64.powf(*l)).collect();
        let zs: Vec<f64> = z.iter().zip(&s).map(|(a, b)| a * b).collect();
        let scaled = model.affine(&vec![0.0; d], &s).unwrap();
        let a = handle_row(&z, &model, Q99).unwrap();
        let b = handle_row(&zs, &scaled, Q99).unwrap();
        prop_assert_eq!(&a.flagged, &b.flagged);
        prop_assert_eq!(&a.path_order, &b.path_order);
        for j in 0..d {
            prop_assert!((a.residuals[j] - b.residuals[j]).abs() < 1e-8 * (1.0 + a.residuals[j].abs()));
            prop_assert!((a.cleaned[j] * s[j] - b.cleaned[j]).abs() < 1e-8 * (1.0 + b.cleaned[j].abs()));
        }
    }

    #[test]
    fn missing_cells_always_flagged(seed in any::<u64>(), d in 2usize..=8, mask in prop::collection::vec(any::<bool>(), 8)) {
        let (mut z, model) = random_row(seed, d);
        for j in 0..d {
            if mask[j] {
                z[j] = f64::NAN;
            }
        }
        let det = handle_row(&z, &model, Q99).unwrap();
        for j in 0..d {
            if mask[j] {
                prop_assert!(det.is_flagged(j));
                prop_assert!(det.criteria[j].is_infinite());
                prop_assert!(det.cleaned[j].is_finite());
                prop_assert_eq!(det.residuals[j], 0.0);
            }
        }
    }

    #[test]
    fn imputation_preserves_partial_distance(seed in any::<u64>(), d in 2usize..=7) {
        let (z, model) = random_row(seed, d);
        let det = handle_row(&z, &model, Q99).unwrap();
        let before = partial_md2(&z, model.mu(), model.sigma(), &det.flagged);
        let after = partial_md2(&det.cleaned, model.mu(), model.sigma(), &det.flagged);
        prop_assert_eq!(before, after);
        let rerun = trace_row(&det.cleaned, &model).unwrap();
        let full = model.mahalanobis2(&det.cleaned).unwrap();
        prop_assert!((full - before).abs() < 1e-8 * (1.0 + before));
        let k = det.flagged.len();
        if k < d {
            let rss_k = trace_row(&z, &model).unwrap().path.steps[k].rss;
            prop_assert!(rerun.criteria.iter().all(|&c| c <= rss_k + 1e-8 * (1.0 + rss_k)));
        }
    }

    #[test]
    fn discrepancy_properties(seed in any::<u64>(), d in 1usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_spd(d, &mut rng);
        let b = random_spd(d, &mut rng);
        let dab = discrepancy(&a, &b).unwrap();
        prop_assert!(dab > 0.0);
        prop_assert!(discrepancy(&a, &a).unwrap().abs() < 1e-8);
        prop_assert!((dab - kl_reference(&a, &b)).abs() < 1e-8 * (1.0 + dab));
        prop_assert!((dab - kl_gaussian(&a, &b).unwrap()).abs() < 1e-8 * (1.0 + dab));
        // D(B, A) from the eigenvalues of B^{-1/2} A B^{-1/2}
        let r = cellwise::numkit::pd_inverse_sqrt(&b).unwrap();
        let c = SymMatrix::new((r.as_matrix() * a.as_matrix() * r.as_matrix()).symmetric_part()).unwrap();
        let eta = sym_eigen(&c).unwrap().values;
        let swapped: f64 = eta.iter().map(|e| 1.0 / e - 1.0 + e.ln()).sum();
        let dba = discrepancy(&b, &a).unwrap();
        prop_assert!((dba - swapped).abs() < 1e-8 * (1.0 + dba));
        for kind in [SymmetricKind::PlusInverse, SymmetricKind::AbsLog] {
            let x = discrepancy_symmetric(&a, &b, kind).unwrap();
            let y = discrepancy_symmetric(&b, &a, kind).unwrap();
            prop_assert!((x - y).abs() < 1e-8 * (1.0 + x));
        }
    }

    #[test]
    fn randcorr_is_a_correlation_matrix(seed in any::<u64>(), d in 2usize..=12) {
        let r = gen_randcorr(d, seed).unwrap();
        prop_assert!(r.min_eigenvalue() > 0.0);
        for j in 0..d {
            prop_assert!((r.get(j, j) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn contamination_hits_the_target_distance(seed in any::<u64>(), gamma in 0.5f64..10.0) {
        let sigma = gen_a09(6);
        let clean = gaussian_sample(40, &sigma, &mut substream(seed, 0, Stream::Data)).unwrap();
        let spec = ContaminationSpec { epsilon: 0.2, gamma, mode: ContaminationMode::Cellwise, seed };
        let c = contaminate_cellwise(&clean, &sigma, &spec).unwrap();
        for i in 0..40 {
            let k: Vec<usize> = (0..6).filter(|&j| c.truth[i * 6 + j]).collect();
            if k.is_empty() {
                prop_assert_eq!(c.data.row(i), clean.row(i));
                continue;
            }
            let v: Vec<f64> = k.iter().map(|&j| c.data.value(i, j)).collect();
            let sk = sigma.submatrix(&k);
            let md2 = partial_md2(&v, &vec![0.0; k.len()], &sk, &[]);
            let want = gamma * gamma * k.len() as f64;
            prop_assert!((md2 - want).abs() < 1e-8 * want);
        }
        for j in 0..6 {
            prop_assert_eq!((0..40).filter(|&i| c.truth[i * 6 + j]).count(), 8);
        }
    }
}

#[test]
fn rowwise_target_distance_and_mixed_bookkeeping() {
    let sigma = gen_a09(2);
    let clean = gaussian_sample(30, &sigma, &mut substream(3, 0, Stream::Data)).unwrap();
    let spec = ContaminationSpec {
        epsilon: 0.1,
        gamma: 1.0,
        mode: ContaminationMode::Rowwise,
        seed: 9,
    };
    let c = contaminate_rowwise(&clean, &sigma, &spec).unwrap();
    assert_eq!(c.outlier_rows.len(), 3);
    let v = c.data.row(c.outlier_rows[0]).to_vec();
    let md = partial_md2(&v, &[0.0, 0.0], &sigma, &[]).sqrt();
    assert!((md - 2.0 * 2f64.sqrt()).abs() < 1e-10);

    let sigma = gen_a09(5);
    let clean = gaussian_sample(50, &sigma, &mut substream(3, 0, Stream::Data)).unwrap();
    let spec = ContaminationSpec {
        epsilon: 0.1,
        gamma: 3.0,
        mode: ContaminationMode::Mixed {
            cell_frac: 0.1,
            row_frac: 0.1,
        },
        seed: 4,
    };
    let c = contaminate_rowwise(&clean, &sigma, &spec).unwrap();
    assert_eq!(c.outlier_rows.len(), 5);
    for i in 0..50 {
        let hits = (0..5).filter(|&j| c.truth[i * 5 + j]).count();
        if c.outlier_rows.contains(&i) {
            assert_eq!(hits, 5);
        } else {
            assert!(hits < 5 || hits == 5 && !c.outlier_rows.contains(&i));
        }
    }
    let scattered = (0..50)
        .filter(|i| !c.outlier_rows.contains(i))
        .map(|i| (0..5).filter(|&j| c.truth[i * 5 + j]).count())
        .sum::<usize>();
    assert_eq!(scattered, 5 * 5);
}

#[test]
fn small_gamma_cells_are_often_not_marginal_outliers() {
    let sigma = gen_a09(10);
    let clean = gaussian_sample(200, &sigma, &mut substream(21, 0, Stream::Data)).unwrap();
    let spec = ContaminationSpec {
        epsilon: 0.2,
        gamma: 2.0,
        mode: ContaminationMode::Cellwise,
        seed: 22,
    };
    let c = contaminate_cellwise(&clean, &sigma, &spec).unwrap();
    let (mut big, mut total) = (0, 0);
    for i in 0..200 {
        let k: Vec<usize> = (0..10).filter(|&j| c.truth[i * 10 + j]).collect();
        if k.len() < 2 {
            continue;
        }
        for &j in &k {
            total += 1;
            big += usize::from(c.data.value(i, j).abs() > 2.57);
        }
    }
    assert!(total > 0);
    assert!((big as f64) < 0.5 * total as f64, "{big} of {total}");
}

fn contaminated(seed: u64, n: usize, d: usize) -> DataTable {
    let sigma = gen_a09(d);
    let clean = gaussian_sample(n, &sigma, &mut substream(seed, 0, Stream::Data)).unwrap();
    let spec = ContaminationSpec {
        epsilon: 0.1,
        gamma: 6.0,
        mode: ContaminationMode::Cellwise,
        seed,
    };
    contaminate_cellwise(&clean, &sigma, &spec).unwrap().data
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn di_respects_the_column_cap(seed in any::<u64>(), frac in 0.05f64..0.4, missing in 0.0f64..0.1) {
        let mut data = contaminated(seed, 60, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for i in 0..60 {
            for j in 0..5 {
                if rng.random_bool(missing) {
                    data.set(i, j, f64::NAN);
                }
            }
        }
        let config = DiConfig { max_col_frac: frac, ..DiConfig::default() };
        let cap = (60.0 * frac).floor() as usize;
        if let Ok(fit) = di_estimate(&data, &config) {
            prop_assert!(fit.flags.column_counts(fit.columns.len()).iter().all(|&c| c <= cap));
            prop_assert!(fit.model.sigma().min_eigenvalue() > 0.0);
            for row in &fit.flags.rows {
                prop_assert_eq!(&row.flagged[..], &row.path_order[..row.flagged.len()]);
            }
        }
    }

    #[test]
    fn di_is_scale_invariant(seed in any::<u64>(), col in 0usize..5, log_s in -3.0f64..3.0) {
        let data = contaminated(seed, 60, 5);
        let s = 10f64.powf(log_s);
        let scaled = data.map_observed(|_, j, v| if j == col { v * s } else { v });
        let a = di_estimate(&data, &DiConfig::default()).unwrap();
        let b = di_estimate(&scaled, &DiConfig::default()).unwrap();
        for (ra, rb) in a.flags.rows.iter().zip(&b.flags.rows) {
            prop_assert_eq!(&ra.flagged, &rb.flagged);
            for j in 0..5 {
                prop_assert!((ra.residuals[j] - rb.residuals[j]).abs() < 1e-8);
            }
        }
        for i in 0..5 {
            for j in 0..5 {
                let f = if i == col { s } else { 1.0 } * if j == col { s } else { 1.0 };
                let x = a.model.sigma().get(i, j) * f;
                prop_assert!((x - b.model.sigma().get(i, j)).abs() < 1e-6 * (x.abs() + f));
            }
        }
    }
}

#[test]
fn huge_cutoff_gives_ml_covariance() {
    let data = contaminated(8, 50, 4);
    let config = DiConfig {
        quantile: 1.0 - 1e-15,
        ..DiConfig::default()
    };
    let fit = di_estimate(&data, &config).unwrap();
    assert_eq!(fit.flags.flagged_count(), 0);
    let n = 50.0;
    for a in 0..4 {
        for b in 0..4 {
            let ma = data.observed_column(a).iter().sum::<f64>() / n;
            let mb = data.observed_column(b).iter().sum::<f64>() / n;
            let s: f64 = (0..50)
                .map(|i| (data.value(i, a) - ma) * (data.value(i, b) - mb))
                .sum::<f64>()
                / n;
            assert!((fit.model.sigma().get(a, b) - s).abs() < 1e-9 * (1.0 + s.abs()));
        }
    }
}
