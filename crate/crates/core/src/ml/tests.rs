use super::*;
use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::Rng;

fn unit() -> RoadDiagrams {
    RoadDiagrams::unit()
}

#[test]
fn flux_extension_examples() {
    let fds = unit();
    assert_eq!(
        flux_extension(&JunctionTraces::new(0.0, 0.0, 0.0), &fds).unwrap(),
        [0.0; 6]
    );
    assert_eq!(
        flux_extension(&JunctionTraces::new(0.5, 0.5, 0.5), &fds).unwrap(),
        [0.5, 0.5, 0.5, 0.25, 0.25, 0.25]
    );
    let x = flux_extension(&JunctionTraces::new(0.3, 0.7, 1.0), &fds).unwrap();
    for (a, b) in x.iter().zip([0.3, 0.7, 1.0, 0.21, 0.21, 0.0]) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
    }
    assert!(flux_extension(&JunctionTraces::new(1.1, 0.0, 0.0), &fds).is_err());
}

#[test]
fn demand_supply_examples() {
    let fds = unit();
    let g = demand_supply_layer(&JunctionTraces::new(0.0, 0.0, 0.0), &fds).unwrap();
    assert_eq!((g.d1, g.d2, g.s3), (0.0, 0.0, 0.25));
    let g = demand_supply_layer(&JunctionTraces::new(0.7, 0.7, 0.7), &fds).unwrap();
    assert_abs_diff_eq!(g.d1, 0.25);
    assert_abs_diff_eq!(g.d2, 0.25);
    assert_abs_diff_eq!(g.s3, 0.21, epsilon = 1e-15);
    let g = demand_supply_layer(&JunctionTraces::new(0.3, 0.3, 0.3), &fds).unwrap();
    assert_abs_diff_eq!(g.d1, 0.21, epsilon = 1e-15);
    assert_abs_diff_eq!(g.s3, 0.25);
}

#[test]
fn parameter_counts() {
    let fds = unit();
    let id = NormalizationParams::identity();
    assert_eq!(MlCouplingModel::zeroed(Variant::Ml1, fds, id).parameter_count(), 14);
    assert_eq!(MlCouplingModel::zeroed(Variant::Ml2, fds, id).parameter_count(), 6911);
    assert_eq!(MlCouplingModel::zeroed(Variant::Ml3, fds, id).parameter_count(), 6911);
}

#[test]
fn zero_network_gives_half() {
    let m = MlCouplingModel::zeroed(Variant::Ml2, unit(), NormalizationParams::identity());
    assert_eq!(m.ann_forward(&[0.3; 6]).unwrap(), (0.5, 0.5));
    assert!(matches!(m.ann_forward(&[0.0; 5]), Err(Error::Contract(_))));
}

#[test]
fn saturated_bias_gives_one() {
    let mut m = MlCouplingModel::zeroed(Variant::Ml1, unit(), NormalizationParams::identity());
    let p = m.network_mut().params_mut();
    p[12] = 50.0;
    p[13] = 50.0;
    let (a, b) = m.ann_forward(&[1.0; 6]).unwrap();
    assert!((1.0 - a) < 1e-20 && (1.0 - b) < 1e-20);
}

/// Affine+sigmoid chain written out with nested vectors.
fn reference_forward(widths: &[usize], params: &[f64], x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    let mut off = 0;
    for w in widths.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let mut next = Vec::new();
        for o in 0..n_out {
            let mut z = params[off + n_in * n_out + o];
            for i in 0..n_in {
                z += params[off + o * n_in + i] * a[i];
            }
            next.push(1.0 / (1.0 + f64::exp(-z)));
        }
        off += n_out * (n_in + 1);
        a = next;
    }
    a
}

#[test]
fn seeded_network_matches_reference() {
    let m = MlCouplingModel::initialized(Variant::Ml2, unit(), NormalizationParams::identity(), 7);
    let x = [0.1, -0.4, 1.3, 0.25, -2.0, 0.7];
    let (a, b) = m.ann_forward(&x).unwrap();
    let r = reference_forward(Variant::Ml2.widths(), m.network().params(), &x);
    assert_abs_diff_eq!(a, r[0], epsilon = 1e-14);
    assert_abs_diff_eq!(b, r[1], epsilon = 1e-14);
}

#[test]
fn glorot_bounds_and_zero_bias() {
    let m = MlCouplingModel::initialized(Variant::Ml2, unit(), NormalizationParams::identity(), 3);
    for layer in m.network().layers() {
        let r = (6.0 / (layer.shape.inputs + layer.shape.outputs) as f64).sqrt();
        assert!(layer.weights.iter().all(|w| w.abs() <= r));
        assert!(layer.bias.iter().all(|b| *b == 0.0));
    }
    let again = MlCouplingModel::initialized(Variant::Ml2, unit(), NormalizationParams::identity(), 3);
    assert_eq!(m, again);
}

#[test]
fn forward_examples() {
    let fds = unit();
    let m = MlCouplingModel::zeroed(Variant::Ml1, fds, NormalizationParams::identity());
    let f = m.fluxes(&JunctionTraces::new(0.5, 0.5, 0.5)).unwrap();
    assert_eq!(f.as_array(), [0.125, 0.0625, 0.1875]);
    let m = MlCouplingModel::initialized(Variant::Ml2, fds, NormalizationParams::identity(), 1);
    let f = m.fluxes(&JunctionTraces::new(0.0, 0.0, 0.6)).unwrap();
    assert_eq!(f.as_array(), [0.0, 0.0, 0.0]);
}

#[test]
fn normalization_fit_is_zscore() {
    let fds = unit();
    let traces = [
        JunctionTraces::new(0.0, 0.2, 0.5),
        JunctionTraces::new(0.5, 0.2, 0.5),
        JunctionTraces::new(1.0, 0.2, 0.5),
    ];
    let n = NormalizationParams::fit(&fds, &traces).unwrap();
    assert_abs_diff_eq!(n.shift[0], 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(n.scale[0], (1.0f64 / 6.0).sqrt(), epsilon = 1e-15);
    assert_eq!(n.scale[1], MIN_SCALE);
    assert!(NormalizationParams::fit(&fds, &[]).is_err());
    assert!(NormalizationParams::new([0.0; 6], [0.0; 6]).is_err());
}

#[test]
fn zero_error_batch_has_zero_gradient() {
    let fds = unit();
    let m = MlCouplingModel::initialized(Variant::Ml2, fds, NormalizationParams::identity(), 5);
    let batch: Vec<TrainingSample> = [(0.2, 0.6, 0.4), (0.9, 0.1, 0.3)]
        .iter()
        .map(|&(a, b, c)| {
            let traces = JunctionTraces::new(a, b, c);
            TrainingSample::new(traces, m.fluxes(&traces).unwrap())
        })
        .collect();
    let (loss, grad) = m.mse_gradient(&batch).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grad.iter().all(|g| *g == 0.0));
    assert!(m.mse_gradient(&[]).is_err());
}

fn loss_at(m: &MlCouplingModel, batch: &[TrainingSample]) -> f64 {
    batch
        .iter()
        .map(|s| squared_error(&m.fluxes(&s.traces).unwrap(), &s.target).0)
        .sum::<f64>()
        / batch.len() as f64
}

#[test]
fn gradient_matches_finite_differences() {
    let fds = RoadDiagrams::reference_onramp();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sample = |rng: &mut ChaCha8Rng| {
        let t = JunctionTraces::new(
            rng.random::<f64>() * fds.road1.rho_max(),
            rng.random::<f64>() * fds.road2.rho_max(),
            rng.random::<f64>() * fds.road3.rho_max(),
        );
        TrainingSample::new(
            t,
            CouplingFluxes::new(rng.random::<f64>() * 500.0, rng.random::<f64>() * 500.0, 0.0),
        )
    };
    let batch: Vec<_> = (0..4).map(|_| sample(&mut rng)).collect();
    let norm = NormalizationParams::fit(&fds, batch.iter().map(|s| &s.traces)).unwrap();
    for variant in [Variant::Ml1, Variant::Ml2] {
        let mut m = MlCouplingModel::initialized(variant, fds, norm, 2);
        let (_, grad) = m.mse_gradient(&batch).unwrap();
        for k in (0..m.parameter_count()).step_by(97).chain([m.parameter_count() - 1]) {
            let h = 1e-6;
            let p0 = m.network().params()[k];
            m.network_mut().params_mut()[k] = p0 + h;
            let up = loss_at(&m, &batch);
            m.network_mut().params_mut()[k] = p0 - h;
            let down = loss_at(&m, &batch);
            m.network_mut().params_mut()[k] = p0;
            let fd = (up - down) / (2.0 * h);
            let scale = fd.abs().max(grad[k].abs()).max(1e-3);
            assert!(
                (fd - grad[k]).abs() / scale < 1e-5,
                "{variant} param {k}: fd {fd} vs {}",
                grad[k]
            );
        }
    }
}

#[test]
fn theta_derivatives_match_hand_derivation() {
    // One-layer model with zero weights: output = sigmoid(bias). With
    // d2 > s3 - f1 the second clamp is active, so
    // df3/dtheta1 = a - theta2 * a and df3/dtheta2 = s3 - f1.
    let fds = unit();
    let mut m = MlCouplingModel::zeroed(Variant::Ml1, fds, NormalizationParams::identity());
    let traces = JunctionTraces::new(0.6, 0.6, 0.6);
    let mut eval = m.evaluate(&traces).unwrap();
    let mut grad = vec![0.0; 14];
    m.accumulate_gradient(&mut eval, [0.0, 0.0, 1.0], &mut grad);
    let a = 0.24;
    let (t1, t2) = (0.5, 0.5);
    let dt1 = a - t2 * a;
    let dt2 = 0.24 - t1 * a;
    // d theta / d bias = theta (1 - theta) = 0.25
    assert_abs_diff_eq!(grad[12], dt1 * 0.25, epsilon = 1e-15);
    assert_abs_diff_eq!(grad[13], dt2 * 0.25, epsilon = 1e-15);
    m.network_mut().params_mut()[0] = 1.0;
    assert_eq!(m.variant(), Variant::Ml1);
}

#[test]
fn model_file_round_trip() {
    let fds = RoadDiagrams::reference_onramp();
    let norm = NormalizationParams::new([1.0, 2.0, 3.0, 4.0, 5.0, 6.0], [0.5; 6]).unwrap();
    let m = MlCouplingModel::initialized(Variant::Ml3, fds, norm, 9);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let mut meta = std::collections::BTreeMap::new();
    meta.insert("seed".to_string(), "9".to_string());
    write_model(&path, &m, meta).unwrap();
    let back = read_model(&path).unwrap();
    assert_eq!(back, m);
    std::fs::write(&path, "{}").unwrap();
    assert!(matches!(read_model(&path), Err(Error::Parse { .. })));
}

#[test]
fn variant_parsing() {
    assert_eq!("ML2".parse::<Variant>().unwrap(), Variant::Ml2);
    assert!("ml4".parse::<Variant>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn outputs_are_admissible(seed in 0u64..1000, r1 in 0.0..1.0f64, r2 in 0.0..1.0f64, r3 in 0.0..1.0f64) {
        let fds = RoadDiagrams::reference_onramp();
        let m = MlCouplingModel::initialized(Variant::Ml1, fds, NormalizationParams::identity(), seed);
        let t = JunctionTraces::new(r1 * fds.road1.rho_max(), r2 * fds.road2.rho_max(), r3 * fds.road3.rho_max());
        let f = m.fluxes(&t).unwrap();
        let g = demand_supply_layer(&t, &fds).unwrap();
        prop_assert!(g.contains(f.f1, f.f2));
        prop_assert!(f.kirchhoff_residual() <= 1e-12 * f.f3.max(1.0));
        let (a, b) = m.ann_forward(&[r1, r2, r3, 0.0, 0.0, 0.0]).unwrap();
        prop_assert!(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0);
    }
}
