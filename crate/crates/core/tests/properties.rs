use concentration::applications::{psa_bound, rademacher_generalization_bound, regression_bound, vector_bound_ii, vector_bound_iii};
use concentration::bounds::{invert_tail, tail, BoundKind, ProxyProfile};
use concentration::dist::{DistributionSpec, VectorSpec};
use concentration::functions::hs::{hs_inner, hs_norm, projection_from_frame, q_operator, random_frame, reconstruction_error};
use concentration::functions::{conditional_version_samples, eval, proxy_profile, FunctionSpec, LipschitzForm, Loss, ProjectionNet};
use concentration::orlicz::{psi_norm_empirical, Alpha};
use concentration::rng;
use proptest::prelude::*;

fn profile_strategy() -> impl Strategy<Value = ProxyProfile> {
    (1usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec(0.01f64..3.0, n),
            prop::collection::vec(0.01f64..3.0, n),
            prop::collection::vec(0.01f64..3.0, n),
            prop::collection::vec(0.01f64..3.0, n),
        )
            .prop_map(|(a, b, c, d)| ProxyProfile::from_psi1(a).with_psi2(b).with_l2p(2.0, c).with_ranges(d))
    })
}

const KINDS: [BoundKind; 5] =
    [BoundKind::Thm1, BoundKind::Thm2, BoundKind::Thm3, BoundKind::Thm3Psi2Variant, BoundKind::BoundedDifference];

fn p_for(kind: BoundKind) -> Option<f64> {
    kind.needs_p().then_some(2.0)
}

proptest! {
    #[test]
    fn tails_shrink_in_t_and_grow_with_proxies(profile in profile_strategy(), t in 0.01f64..20.0, dt in 0.0f64..5.0, grow in 1.0f64..3.0) {
        let bigger = profile.scaled(grow);
        for kind in KINDS {
            let p = p_for(kind);
            let here = tail(kind, &profile, p, t).unwrap().prob;
            prop_assert!(tail(kind, &profile, p, t + dt).unwrap().prob <= here);
            prop_assert!(tail(kind, &bigger, p, t).unwrap().prob >= here);
        }
    }

    #[test]
    fn inversion_recovers_delta(profile in profile_strategy(), delta in 1e-9f64..0.99) {
        for kind in KINDS {
            let inv = invert_tail(kind, &profile, p_for(kind), delta).unwrap();
            let back = tail(kind, &profile, p_for(kind), inv.exact).unwrap().prob;
            prop_assert!((back - delta).abs() <= 1e-10 * delta.max(1e-3), "{kind}: {back} vs {delta}");
            prop_assert!(inv.exact <= inv.additive * (1.0 + 1e-12));
        }
    }

    #[test]
    fn applications_monotone(n in 30usize..5000, extra in 1usize..1000, d1 in 1e-6f64..0.5, shrink in 0.01f64..1.0, psi in 0.01f64..5.0) {
        let d2 = d1 * shrink;
        let m = n + extra;
        type App = fn(usize, f64, f64) -> concentration::Result<f64>;
        let apps: [App; 5] = [
            |n, d, s| vector_bound_ii(s, n, d),
            |n, d, s| vector_bound_iii(0.5 * s, s, 3.0, n, d),
            |n, d, s| psa_bound(s, 4, n, d),
            |n, d, s| rademacher_generalization_bound(0.1, 2.0, s, n, d),
            |n, d, s| regression_bound(1.0, s, 0.3, n, d),
        ];
        for app in apps {
            let base = app(n, d1, psi).unwrap();
            prop_assert!(app(m, d1, psi).unwrap() <= base);
            prop_assert!(app(n, d2, psi).unwrap() >= base);
        }
    }

    #[test]
    fn hs_identities(seed in any::<u64>(), ambient in 2usize..7, x in prop::collection::vec(-3.0f64..3.0, 7)) {
        let d = 1 + (seed as usize) % (ambient - 1);
        let x = &x[..ambient];
        let p = projection_from_frame(&random_frame(ambient, d, &mut rng::stream(seed, 0)));
        let q = q_operator(x);
        let sq: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!((hs_norm(&q) - sq).abs() <= 1e-10 * sq.max(1.0));
        let px = &p * nalgebra::DVector::from_column_slice(x);
        prop_assert!((hs_inner(&p, &q) - px.norm_squared()).abs() <= 1e-10 * sq.max(1.0));
        prop_assert!((reconstruction_error(&p, x) - (hs_norm(&q) - hs_inner(&p, &q))).abs() <= 1e-10 * sq.max(1.0));
    }

    #[test]
    fn sup_linear_loss_is_lipschitz(x in prop::collection::vec(-4.0f64..4.0, 3), y in prop::collection::vec(-4.0f64..4.0, 3), z in -3.0f64..3.0, z2 in -3.0f64..3.0, kappa in 0.1f64..1.0) {
        let lipschitz = 1.5;
        for loss in [Loss::Absolute, Loss::Hinge, Loss::Huber { kappa }] {
            let f = FunctionSpec::SupLinearLoss {
                weights: vec![vec![1.5, 0.0, 0.0], vec![0.6, -0.6, 0.9], vec![0.0, 0.0, -1.2]],
                lipschitz,
                loss,
                input: VectorSpec::iid(3, DistributionSpec::UniformInterval { lo: -1.0, hi: 1.0 }),
                output: DistributionSpec::Gaussian { mean: 0.0, sd: 0.5 },
                n: 1,
            };
            let a = eval(&f, &[x[0], x[1], x[2], z]).unwrap();
            let b = eval(&f, &[y[0], y[1], y[2], z2]).unwrap();
            let dist = x.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            prop_assert!((a - b).abs() <= lipschitz * dist + (z - z2).abs() + 1e-12);
        }
    }
}

fn catalogue() -> Vec<FunctionSpec> {
    let gauss = DistributionSpec::Gaussian { mean: 0.0, sd: 1.0 };
    let unif = DistributionSpec::UniformInterval { lo: -1.0, hi: 2.0 };
    let exp = DistributionSpec::Exponential { rate: 1.0 };
    vec![
        FunctionSpec::Sum { components: vec![exp.clone(), DistributionSpec::Rademacher, unif.clone(), gauss.clone()] },
        FunctionSpec::VectorNormOfSum { vec: VectorSpec::iid(3, gauss.clone()), n: 5, centered: false },
        FunctionSpec::VectorNormOfSum { vec: VectorSpec::iid(2, exp.clone()), n: 4, centered: true },
        FunctionSpec::MetricLipschitz {
            lipschitz: 2.0,
            coordinate_dists: vec![exp.clone(), unif.clone(), gauss.clone()],
            form: LipschitzForm::SumClipped { clip: 1.0 },
        },
        FunctionSpec::MetricLipschitz { lipschitz: 1.0, coordinate_dists: vec![exp.clone(), exp.clone()], form: LipschitzForm::Max },
        FunctionSpec::SupLinearLoss {
            weights: vec![vec![1.0, 0.0], vec![0.0, -1.0], vec![0.7, 0.7]],
            lipschitz: 1.0,
            loss: Loss::Absolute,
            input: VectorSpec::iid(2, unif.clone()),
            output: gauss.clone(),
            n: 3,
        },
        FunctionSpec::PsaReconstruction {
            ambient_dim: 3,
            subspace_dim: 1,
            projection_net: ProjectionNet::Random { count: 4, seed: 8 },
            input: VectorSpec::iid(3, gauss),
            n: 3,
        },
    ]
}

/// Empirical ψ₁ with a batch-means standard error.
fn empirical_psi1(samples: &[f64], batches: usize) -> (f64, f64) {
    let size = samples.len() / batches;
    let p_max = (size as f64).ln();
    let whole = psi_norm_empirical(samples, Alpha::Psi1, Some(p_max)).unwrap().value;
    let parts: Vec<f64> = samples
        .chunks(size)
        .map(|c| psi_norm_empirical(c, Alpha::Psi1, Some(p_max)).unwrap().value)
        .collect();
    let mean = parts.iter().sum::<f64>() / parts.len() as f64;
    let var = parts.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (parts.len() - 1) as f64;
    (whole, (var / parts.len() as f64).sqrt())
}

#[test]
fn conditional_versions_stay_below_the_profile() {
    for (s, fspec) in catalogue().iter().enumerate() {
        let profile = proxy_profile(fspec).unwrap();
        let f = fspec.prepare().unwrap();
        for b in 0..5u64 {
            let mut x = vec![0.0; f.point_len()];
            f.draw_point(&mut rng::stream(1000 + s as u64, b), &mut x);
            for k in [0, fspec.n() - 1] {
                let samples = conditional_version_samples(fspec, k, &x, 31 * b + k as u64, 20_000).unwrap();
                let (psi, se) = empirical_psi1(&samples, 10);
                let bound = profile.psi1_per_coord[k];
                assert!(psi <= bound + 3.0 * se, "spec {s} point {b} coord {k}: empirical {psi} > {bound} + 3·{se}");
            }
        }
    }
}

/// Count of 200 repetitions whose deviation exceeds the bound, against the
/// binomial slack of a δ-level event.
fn exceedances(fspec: &FunctionSpec, scale: f64, bound: f64, seed: u64) -> usize {
    concentration::functions::sample_f(fspec, seed, 200).unwrap().iter().filter(|v| *v * scale > bound).count()
}

#[test]
fn applications_dominate_repetitions() {
    let delta = 0.1;
    // 200 draws of a δ-level event exceed 20 + 3·√18 ≈ 33 with negligible probability
    let allowed = 33;
    let gauss = DistributionSpec::Gaussian { mean: 0.0, sd: 1.0 };

    let vec = VectorSpec::iid(3, DistributionSpec::Exponential { rate: 1.0 });
    let n = 50;
    let mean_dev = FunctionSpec::VectorNormOfSum { vec: vec.clone(), n, centered: true };
    let psi1 = concentration::functions::norm_psi(&vec, true, Alpha::Psi1).unwrap().unwrap();
    let bound = vector_bound_ii(psi1, n, delta).unwrap();
    assert!(exceedances(&mean_dev, 1.0 / n as f64, bound, 1) <= allowed);

    let input = VectorSpec::iid(3, gauss.clone());
    let psa = FunctionSpec::PsaReconstruction {
        ambient_dim: 3,
        subspace_dim: 1,
        projection_net: ProjectionNet::Random { count: 8, seed: 2 },
        input: input.clone(),
        n: 40,
    };
    let psi2 = concentration::functions::norm_psi(&input, false, Alpha::Psi2).unwrap().unwrap();
    assert!(exceedances(&psa, 1.0, psa_bound(psi2, 1, 40, delta).unwrap(), 2) <= allowed);

    let output = DistributionSpec::Gaussian { mean: 0.0, sd: 0.5 };
    let reg = FunctionSpec::SupLinearLoss {
        weights: vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.6, -0.8]],
        lipschitz: 1.0,
        loss: Loss::Absolute,
        input: input.clone(),
        output: output.clone(),
        n: 40,
    };
    let psi1_x = concentration::functions::norm_psi(&input, false, Alpha::Psi1).unwrap().unwrap();
    let psi1_z = concentration::orlicz::psi_norm(&output, Alpha::Psi1, Default::default()).unwrap().value;
    assert!(exceedances(&reg, 1.0, regression_bound(1.0, psi1_x, psi1_z, 40, delta).unwrap(), 3) <= allowed);
}
