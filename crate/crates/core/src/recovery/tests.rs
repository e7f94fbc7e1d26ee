use super::*;
use crate::estimation::empirical_sym_moment;
use crate::experiments::matched_l1_error;
use crate::model::{DominatingMeasure, MixtureSpec};
use crate::sampling::{draw_groups, GroupedDataset};

fn pv(x: &[f64]) -> ProbabilityVector {
    ProbabilityVector::new(x.to_vec()).unwrap()
}

fn two_point() -> MixtureSpec {
    MixtureSpec::new(vec![0.6, 0.4], vec![pv(&[1.0, 0.0]), pv(&[0.5, 0.5])]).unwrap()
}

fn fixed_xi() -> RecoveryConfig {
    let mut cfg = RecoveryConfig::new(3);
    cfg.dominating = DominatingScheme::Fixed(vec![9.0, 4.0, 1.0]);
    cfg
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn whiten_rank_one() {
    let p = [0.2, 0.5, 0.3];
    let mut c = MatOperator::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            c.set(i, j, p[i] * p[j]);
        }
    }
    let w = whiten(&c, 1, 1e-8).unwrap();
    let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    for i in 0..3 {
        for j in 0..3 {
            assert!((w.get(i, j) - p[i] * p[j] / norm.powi(3)).abs() < 1e-12);
        }
    }
    let wp = w.matvec(&p).unwrap();
    assert!((wp.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
}

#[test]
fn whiten_identity_and_rank_deficiency() {
    let w = whiten(&MatOperator::identity(4), 4, 1e-8).unwrap();
    assert!(w.sub(&MatOperator::identity(4)).unwrap().max_abs() < 1e-14);
    let c = MatOperator::from_diag(&[2.0, 1.0, 0.0]);
    assert!(matches!(
        whiten(&c, 3, 1e-8),
        Err(Error::RankDeficient {
            wanted: 3,
            available: 2
        })
    ));
}

#[test]
fn t_hat_first_order_is_mean() {
    let mix = two_point();
    let b = DiagonalMap::new(vec![2.0, 0.5]);
    let q = empirical_sym_moment(&mix, 1, Some(&b)).unwrap();
    let t = build_t_hat(&q, &MatOperator::identity(1)).unwrap();
    assert_eq!((t.rows(), t.cols()), (2, 1));
    assert!(close(t.as_slice(), &[2.0 * 0.8, 0.5 * 0.2], 1e-15));
}

#[test]
fn t_hat_spectrum_is_component_norms() {
    let mix = two_point();
    let b = DiagonalMap::identity(2);
    let c = build_c_hat(&mix, 2, Some(&b)).unwrap();
    // C = 0.6 e1 e1ᵀ + 0.4 (0.5,0.5)(0.5,0.5)ᵀ
    assert!(close(c.as_slice(), &[0.7, 0.1, 0.1, 0.1], 1e-15));
    let w = whiten(&c, 2, 1e-8).unwrap();
    let q = build_q_hat(&mix, 2, Some(&b)).unwrap();
    let t = build_t_hat(&q, &w).unwrap();
    assert_eq!((t.rows(), t.cols()), (4, 2));
    let eig = sym_eig(&tt_operator(&t).unwrap()).unwrap();
    assert!(close(&eig.eigenvalues, &[1.0, 0.5, 0.0, 0.0], 1e-10));

    let zero = build_t_hat(&q, &MatOperator::zeros(2, 2)).unwrap();
    assert_eq!(zero.max_abs(), 0.0);
    assert!(build_t_hat(&q, &MatOperator::identity(3)).is_err());
    let even = empirical_sym_moment(&mix, 2, None).unwrap();
    assert!(build_t_hat(&even, &w).is_err());
}

#[test]
fn extraction_on_population_input() {
    let mix = two_point();
    let b = DiagonalMap::identity(2);
    let w = whiten(&build_c_hat(&mix, 2, Some(&b)).unwrap(), 2, 1e-8).unwrap();
    let t = build_t_hat(&build_q_hat(&mix, 2, Some(&b)).unwrap(), &w).unwrap();
    for probe in [ProbeKind::Gaussian, ProbeKind::Singular] {
        let comps = extract_components(&t, 2, &b, probe, 7).unwrap();
        assert!(matched_l1_error(mix.components(), &comps).unwrap() < 1e-8);
    }
}

#[test]
fn extraction_first_order() {
    let mix = two_point();
    let b = b_map(&DominatingMeasure::new(vec![4.0, 1.0]).unwrap());
    let t = build_t_hat(
        &empirical_sym_moment(&mix, 1, Some(&b)).unwrap(),
        &MatOperator::identity(1),
    )
    .unwrap();
    let comps = extract_components(&t, 1, &b, ProbeKind::Gaussian, 0).unwrap();
    assert!(close(comps[0].as_slice(), &[0.8, 0.2], 1e-12));
}

#[test]
fn extraction_is_sign_invariant() {
    let binv = DiagonalMap::new(vec![3.0, 2.0, 1.0]);
    let v = MatOperator::from_row_major(3, 2, vec![0.3, -0.1, 0.2, 0.4, 0.05, 0.1]).unwrap();
    let mut neg = v.clone();
    neg.scale(-1.0);
    for probe in [ProbeKind::Gaussian, ProbeKind::Singular] {
        let a = component_from_eigenvector(&v, 0, &binv, probe, true, 3).unwrap();
        let b = component_from_eigenvector(&neg, 0, &binv, probe, true, 3).unwrap();
        assert!(close(a.as_slice(), b.as_slice(), 1e-14));
    }
}

#[test]
fn negative_entries() {
    let x = vec![0.5, -0.1, 0.6];
    let clipped = to_probability(x.clone(), 0, true).unwrap();
    assert!(close(
        clipped.as_slice(),
        &[5.0 / 11.0, 0.0, 6.0 / 11.0],
        1e-15
    ));
    assert!(matches!(
        to_probability(x, 0, false),
        Err(Error::NegativeComponent { index: 0, .. })
    ));
    let tiny = to_probability(vec![0.5, -1e-12, 0.5], 1, false).unwrap();
    assert_eq!(tiny.as_slice()[1], 0.0);
    let flipped = to_probability(vec![-0.25, -0.75], 0, true).unwrap();
    assert!(close(flipped.as_slice(), &[0.25, 0.75], 1e-15));
    assert!(matches!(
        to_probability(vec![0.0, 0.0], 4, true),
        Err(Error::DegenerateComponent { index: 4 })
    ));
}

#[test]
fn probe_retry_gives_up_on_zero_matrix() {
    let v = MatOperator::zeros(2, 3);
    assert!(matches!(
        gaussian_contraction(&v, 5, 1),
        Err(Error::DegenerateEigenvector { index: 5 })
    ));
}

/// Direct normal-equation solve for three unknowns by Cramer's rule.
fn cramer3(g: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(g);
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut gk = g;
        for i in 0..3 {
            gk[i][k] = b[i];
        }
        *o = det(gk) / d;
    }
    out
}

#[test]
fn weights_from_true_components() {
    let mix = MixtureSpec::reference_three_component();
    let e = build_e_hat(&mix, 3).unwrap();
    let fit = recover_weights(&e, mix.components(), WeightSolver::ClipRenormalize).unwrap();
    assert!(close(&fit.weights, &[0.5, 0.3, 0.2], 1e-10));
    assert!(fit.residual < 1e-12 && !fit.gram_singular);

    let c = mix.components();
    let dot2 = |a: &ProbabilityVector, b: &ProbabilityVector| {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| x * y)
            .sum::<f64>()
            .powi(2)
    };
    let mut g = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = dot2(&c[i], &c[j]);
        }
        rhs[i] = (0..3).map(|j| mix.weights()[j] * g[i][j]).sum();
    }
    assert!(close(&fit.weights, &cramer3(g, rhs), 1e-10));
}

#[test]
fn weights_trivial_cases() {
    let mix = MixtureSpec::reference_three_component();
    let single = build_e_hat(&mix, 1).unwrap();
    let fit = recover_weights(
        &single,
        &mix.components()[..1],
        WeightSolver::ClipRenormalize,
    )
    .unwrap();
    assert_eq!(fit.weights, vec![1.0]);

    let exact = MomentEstimate {
        tensor: outer_power(mix.components()[0].as_slice(), 2),
        order: 2,
        n_groups: 0,
        transform: None,
    };
    for solver in [
        WeightSolver::ClipRenormalize,
        WeightSolver::SimplexProjection,
    ] {
        let fit = recover_weights(&exact, mix.components(), solver).unwrap();
        assert!(close(&fit.weights, &[1.0, 0.0, 0.0], 1e-10));
    }
}

#[test]
fn weights_with_collinear_powers() {
    let p = pv(&[0.3, 0.7]);
    let e = MomentEstimate {
        tensor: outer_power(p.as_slice(), 1),
        order: 1,
        n_groups: 0,
        transform: None,
    };
    let comps = vec![p.clone(), pv(&[0.6, 0.4]), pv(&[0.9, 0.1])];
    let fit = recover_weights(&e, &comps, WeightSolver::SimplexProjection).unwrap();
    assert!(fit.gram_singular);
    assert!((fit.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn simplex_projection_examples() {
    assert!(close(&project_simplex(&[0.5, 0.5]), &[0.5, 0.5], 1e-15));
    assert!(close(&project_simplex(&[2.0, 0.0]), &[1.0, 0.0], 1e-15));
    assert!(close(
        &project_simplex(&[0.6, 0.6, -1.0]),
        &[0.5, 0.5, 0.0],
        1e-15
    ));
    assert!(close(
        &project_simplex(&[0.0, 0.0, 0.0]),
        &[1.0 / 3.0; 3],
        1e-15
    ));
}

#[test]
fn population_recovery_of_reference_mixture() {
    let mix = MixtureSpec::reference_three_component();
    let fit = recover_full(&mix, &fixed_xi()).unwrap();
    assert!(matched_l1_error(mix.components(), &fit.components).unwrap() < 1e-6);
    let mut w = fit.weights.clone();
    w.sort_by(f64::total_cmp);
    assert!(close(&w, &[0.2, 0.3, 0.5], 1e-6));
    assert_eq!(fit.diagnostics.dominating, vec![9.0, 4.0, 1.0]);
    assert_eq!(fit.diagnostics.tt_eigenvalues.len(), 27);
    assert_eq!(fit.diagnostics.whitening_spectrum.len(), 9);
}

#[test]
fn population_recovery_is_probe_invariant() {
    let mix = MixtureSpec::reference_three_component();
    let base = recover_full(&mix, &fixed_xi()).unwrap();
    for seed in [1, 2, 99] {
        let mut cfg = fixed_xi();
        cfg.seed = seed;
        let other = recover_full(&mix, &cfg).unwrap();
        assert!(matched_l1_error(&base.components, &other.components).unwrap() < 1e-6);
    }
    let mut cfg = fixed_xi();
    cfg.probe = ProbeKind::Singular;
    let singular = recover_full(&mix, &cfg).unwrap();
    assert!(matched_l1_error(&base.components, &singular.components).unwrap() < 1e-6);
}

#[test]
fn whitened_powers_are_orthonormal() {
    let mix = MixtureSpec::reference_three_component();
    let b = b_map(&DominatingMeasure::new(vec![9.0, 4.0, 1.0]).unwrap());
    let w = whiten(&build_c_hat(&mix, 3, Some(&b)).unwrap(), 3, 1e-8).unwrap();
    let u: Vec<Vec<f64>> = mix
        .weights()
        .iter()
        .zip(mix.components())
        .map(|(wi, p)| {
            let mut x = outer_power(&b.apply(p.as_slice()), 2).as_slice().to_vec();
            x.iter_mut().for_each(|a| *a *= wi.sqrt());
            w.matvec(&x).unwrap()
        })
        .collect();
    for i in 0..3 {
        for j in 0..3 {
            let g: f64 = u[i].iter().zip(&u[j]).map(|(a, b)| a * b).sum();
            assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-8);
        }
    }
}

#[test]
fn single_component_recovers_the_mean() {
    let ds = GroupedDataset::new(3, 2, &[vec![0, 1], vec![2, 2], vec![0, 0]]).unwrap();
    let mut cfg = RecoveryConfig::new(1);
    cfg.dominating = DominatingScheme::Uniform;
    let fit = recover_full(&ds, &cfg).unwrap();
    assert!(close(
        fit.components[0].as_slice(),
        &[0.5, 1.0 / 6.0, 1.0 / 3.0],
        1e-12
    ));
    assert_eq!(fit.weights, vec![1.0]);
}

#[test]
fn errors_carry_the_stage() {
    let ds = draw_groups(&MixtureSpec::reference_three_component(), 4, 100, 0).unwrap();
    match recover_full(&ds, &fixed_xi()) {
        Err(Error::Stage {
            stage: "config",
            source,
        }) => {
            assert!(matches!(
                *source,
                Error::OrderTooLarge {
                    order: 5,
                    group_size: 4
                }
            ))
        }
        other => panic!("{other:?}"),
    }
    let mut cfg = fixed_xi();
    cfg.m = 4;
    let mix = MixtureSpec::reference_three_component();
    assert!(matches!(
        recover_full(&mix, &cfg),
        Err(Error::Stage {
            stage: "whiten",
            ..
        })
    ));
    assert!(matches!(
        recover_full(&ds, &RecoveryConfig::new(0)),
        Err(Error::Stage {
            stage: "config",
            ..
        })
    ));
}

#[test]
fn recovery_is_deterministic_and_serialises() {
    let ds = draw_groups(&MixtureSpec::reference_three_component(), 5, 3000, 4).unwrap();
    let mut cfg = fixed_xi();
    cfg.dominating = DominatingScheme::SquaredGaussian { sigma: 0.03 };
    cfg.seed = 8;
    let a = recover_full(&ds, &cfg).unwrap();
    let b = recover_full(&ds, &cfg).unwrap();
    assert_eq!(a, b);
    let text = serde_json::to_string(&a).unwrap();
    assert!(text.contains("\"probe\":\"gaussian\""));
    assert!(text.contains("\"weight_solver\":\"clip-renormalize\""));
    assert!(text.contains("\"dominating\":\"sqgauss:0.03\""));
    let back: RecoveryResult = serde_json::from_str(&text).unwrap();
    assert_eq!(back, a);
}

#[test]
fn config_defaults_from_json() {
    let cfg: RecoveryConfig = serde_json::from_str(r#"{"m": 2, "probe": "singular"}"#).unwrap();
    assert_eq!(cfg.m, 2);
    assert_eq!(cfg.probe, ProbeKind::Singular);
    assert!(cfg.clip_negatives);
    assert_eq!(cfg.eig_floor, 1e-8);
}

fn independent_mixture() -> MixtureSpec {
    MixtureSpec::new(
        vec![0.3, 0.3, 0.4],
        vec![
            pv(&[0.7, 0.2, 0.1]),
            pv(&[0.1, 0.6, 0.3]),
            pv(&[0.2, 0.2, 0.6]),
        ],
    )
    .unwrap()
}

#[test]
fn four_sample_recovery() {
    let mix = independent_mixture();
    let mut cfg = RecoveryConfig::new(3);
    cfg.dominating = DominatingScheme::Unit;
    let norms =
        crate::model::check_distinct_norms(&mix, &DominatingMeasure::unit(3), 1e-6).unwrap();
    assert!(norms.distinct);
    let fit = li_recover_4(&mix, &cfg, false).unwrap();
    assert!(matched_l1_error(mix.components(), &fit.components).unwrap() < 1e-6);
    let mut w = fit.weights.clone();
    w.sort_by(f64::total_cmp);
    assert!(close(&w, &[0.3, 0.3, 0.4], 1e-6));
}

#[test]
fn four_sample_single_component() {
    let mix = MixtureSpec::new(vec![1.0], vec![pv(&[0.375, 0.625])]).unwrap();
    let fit = li_recover_4(&mix, &RecoveryConfig::new(1), false).unwrap();
    assert!(close(fit.components[0].as_slice(), &[0.375, 0.625], 1e-12));
    assert_eq!(fit.weights, vec![1.0]);
}

#[test]
fn four_sample_refuses_equal_norms() {
    let mix = MixtureSpec::new(
        vec![0.3, 0.3, 0.4],
        vec![
            pv(&[0.7, 0.2, 0.1]),
            pv(&[0.1, 0.2, 0.7]),
            pv(&[0.2, 0.6, 0.2]),
        ],
    )
    .unwrap();
    assert!(
        !crate::model::check_distinct_norms(&mix, &DominatingMeasure::unit(3), 1e-9)
            .unwrap()
            .distinct
    );
    let cfg = RecoveryConfig::new(3);
    assert!(matches!(
        li_recover_4(&mix, &cfg, false),
        Err(Error::Stage { stage: "extract", ref source }) if matches!(**source, Error::EqualNorms { .. })
    ));
    assert!(li_recover_4(&mix, &cfg, true).is_ok());
    let short = GroupedDataset::new(2, 3, &[vec![0, 1, 1]]).unwrap();
    assert!(li_recover_4(&short, &RecoveryConfig::new(1), false).is_err());
}

/// Rank of the Gram matrix `⟨μ_i, μ_j⟩^n` by elimination with partial pivoting.
fn gram_rank_oracle(mix: &MixtureSpec, n: i32, tol: f64) -> usize {
    let c = mix.components();
    let m = c.len();
    let mut g: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    c[i].as_slice()
                        .iter()
                        .zip(c[j].as_slice())
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        .powi(n)
                })
                .collect()
        })
        .collect();
    let scale = g.iter().flatten().fold(0.0f64, |s, x| s.max(x.abs()));
    let mut rank = 0;
    for col in 0..m {
        let Some(piv) = (rank..m).max_by(|&a, &b| g[a][col].abs().total_cmp(&g[b][col].abs()))
        else {
            break;
        };
        if g[piv][col].abs() <= tol * scale {
            continue;
        }
        g.swap(rank, piv);
        for r in rank + 1..m {
            let f = g[r][col] / g[rank][col];
            for k in col..m {
                g[r][k] -= f * g[rank][k];
            }
        }
        rank += 1;
    }
    rank
}

#[test]
fn component_count_estimates() {
    let single = MixtureSpec::new(vec![1.0], vec![pv(&[0.2, 0.3, 0.5])]).unwrap();
    assert_eq!(estimate_num_components(&single, 2, 8, 1e-8).unwrap(), 1);

    let mix = MixtureSpec::reference_three_component();
    assert_eq!(gram_rank_oracle(&mix, 3, 1e-8), 3);
    assert_eq!(gram_rank_oracle(&mix, 1, 1e-8), 2);
    assert_eq!(estimate_num_components(&mix, 3, 8, 1e-8).unwrap(), 3);
    assert_eq!(estimate_num_components(&mix, 1, 8, 1e-8).unwrap(), 2);
    assert_eq!(estimate_num_components(&mix, 3, 2, 1e-8).unwrap(), 2);
    assert!(estimate_num_components(&mix, 0, 8, 1e-8).is_err());

    let ds = GroupedDataset::new(3, 3, &[vec![0, 1, 2]]).unwrap();
    assert!(estimate_num_components(&ds, 2, 8, 1e-8).is_err());
}

#[test]
fn spectral_operator_matches_pipeline() {
    let mix = MixtureSpec::reference_three_component();
    let b = b_map(&DominatingMeasure::new(vec![9.0, 4.0, 1.0]).unwrap());
    let op = spectral_operator(&mix, 3, &b, 1e-8).unwrap();
    let eig = sym_eig(&op).unwrap();
    // The nonzero eigenvalues are the ξ-norms of the components.
    let mut top: Vec<f64> = eig.eigenvalues[..3].to_vec();
    top.sort_by(f64::total_cmp);
    assert!(close(&top, &[0.0727111, 0.2256, 0.4353778], 1e-6));
    assert!(eig.eigenvalues[3] < 1e-10);
}
