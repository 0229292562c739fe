use boruta_core::synth::{generate_scaling, target_function, COLLINEAR, INFORMATIVE};
use boruta_core::{generate_synthetic, SyntheticSpec, Variant};

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn features_are_uniform_on_unit_interval() {
    let data = generate_synthetic(&SyntheticSpec::new(10_000, 3, Variant::Direct)).unwrap();
    assert_eq!(data.n_features(), 50);
    assert_eq!(data.feature_names()[0], "feature-1");
    assert_eq!(data.feature_names()[49], "feature-50");
    for j in 0..50 {
        let col = data.values().column(j);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        assert!((mean - 0.5).abs() < 0.02, "column {j} mean {mean}");
        assert!(col.iter().all(|&v| (0.0..1.0).contains(&v)));
    }
}

#[test]
fn direct_target_follows_the_generating_function() {
    let data = generate_synthetic(&SyntheticSpec::new(500, 4, Variant::Direct)).unwrap();
    for r in 0..data.n_samples() {
        let x = data.values().row(r);
        let f = 5.0 * x[26].powi(3) + 4.0 * x[48].powi(2) + 5.0 * x[30] * x[45] + 2.0 * x[13] - 2.5 * x[39]
            + 3.5 * x[17].cbrt()
            + x[19].exp()
            + 2.0 * (3.14 * x[25]).sin()
            + 5.0 * (3.14 * x[32]).cos();
        assert!((target_function(x) - f).abs() < 1e-12);
        // noise standard deviation is 1e-5
        assert!((data.target()[r] - f).abs() < 1e-4);
    }
}

#[test]
fn multicollinear_columns_track_their_recipes() {
    let recipes: [(usize, [(usize, f64); 4]); 5] = [
        (13, [(14, 0.1), (40, 0.2), (7, 0.3), (42, 0.4)]),
        (5, [(31, 0.4), (46, 0.2), (47, 0.3), (48, 0.1)]),
        (38, [(18, 0.1), (49, 0.3), (16, 0.2), (10, 0.4)]),
        (9, [(27, 0.4), (26, 0.3), (17, 0.2), (25, 0.1)]),
        (4, [(33, 0.2), (20, 0.4), (35, 0.1), (32, 0.3)]),
    ];
    let n = 3000;
    let direct = generate_synthetic(&SyntheticSpec::new(n, 8, Variant::Direct)).unwrap();
    let multi = generate_synthetic(&SyntheticSpec::new(n, 8, Variant::Multicollinear)).unwrap();
    for (target, sources) in recipes {
        let col = multi.values().column(target - 1);
        let combo: Vec<f64> = (0..n)
            .map(|r| sources.iter().map(|&(s, w)| w * multi.values().get(r, s - 1)).sum())
            .collect();
        assert!(correlation(&col, &combo) > 0.95, "feature-{target}");
    }
    for j in 1..=50 {
        if !COLLINEAR.contains(&j) {
            assert_eq!(
                direct.values().column(j - 1),
                multi.values().column(j - 1),
                "feature-{j}"
            );
        }
    }
    assert_eq!(direct.target(), multi.target());
    assert!(COLLINEAR.iter().all(|c| !INFORMATIVE.contains(c)));
}

#[test]
fn biased_variant_pins_most_of_feature_20() {
    let n = 2000;
    let spec = SyntheticSpec::new(n, 9, Variant::Biased);
    let data = generate_synthetic(&spec).unwrap();
    let direct = generate_synthetic(&SyntheticSpec::new(n, 9, Variant::Direct)).unwrap();
    let pinned = data.values().column(19).iter().filter(|&&v| v == -1.0).count();
    assert_eq!(pinned, (0.99 * n as f64).floor() as usize);
    assert_eq!(data.target(), direct.target());
}

#[test]
fn generation_is_seeded() {
    for variant in [Variant::Direct, Variant::Biased, Variant::Multicollinear] {
        let a = generate_synthetic(&SyntheticSpec::new(100, 1, variant)).unwrap();
        let b = generate_synthetic(&SyntheticSpec::new(100, 1, variant)).unwrap();
        let c = generate_synthetic(&SyntheticSpec::new(100, 2, variant)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), c.values());
    }
}

#[test]
fn scaling_data_has_requested_shape() {
    let data = generate_scaling(300, 17, 1).unwrap();
    assert_eq!((data.n_samples(), data.n_features()), (300, 17));
    assert!(generate_scaling(300, 0, 1).is_err());
}
