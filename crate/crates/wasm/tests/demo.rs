use symae_wasm::{activation_curve, init_sweep, reconstruction};

#[test]
fn curve_inverse_undoes_forward() {
    let c = activation_curve("leakyrelu", 0.5, 3.0, 61).unwrap();
    assert_eq!(c.x.len(), 61);
    assert_eq!(c.x[30], 0.0);
    assert!((c.lip - 1.25).abs() < 1e-15 && (c.lip_inv - 1.2).abs() < 1e-12);
    assert!((c.sharpness - 0.5).abs() < 1e-12);
    // Slope 5/6 on the negative side.
    assert!((c.forward[0] + 2.5).abs() < 1e-12);
    for (y, x) in c.forward.iter().zip(&c.x) {
        let back = c.x.iter().position(|v| (v - y).abs() < 1e-12);
        if let Some(k) = back {
            assert!((c.inverse[k] - x).abs() < 1e-12);
        }
    }
    let h = activation_curve("hypact", 3.0, 2.0, 11).unwrap();
    assert!((h.lip - 2.0).abs() < 1e-12);
    assert!(activation_curve("nope", 0.5, 1.0, 5).is_err());
    assert!(activation_curve("hypact", -1.0, 1.0, 5).is_err());
}

#[test]
fn sweep_rows_cover_every_latent_width() {
    let rows = init_sweep(40, 1, 4, 0.5, 3).unwrap();
    assert_eq!(rows.iter().map(|r| r.n2).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    for r in &rows {
        assert!(r.eys_mse.is_finite() && r.eys_mse >= 0.0);
        assert!(r.eys_mse < r.baseline_best_mse);
    }
}

#[test]
fn reconstruction_sits_inside_its_bounds() {
    let v = reconstruction(40, 2, "hypact", 0.5, 8, 3, 5).unwrap();
    assert_eq!(v.grid.len(), 514);
    assert_eq!(v.original.len(), 514);
    assert_eq!(v.reconstruction.len(), 514);
    assert_eq!(v.latent.len(), 3);
    assert!(v.lower <= v.train_mse + 1e-12 && v.train_mse <= v.upper + 1e-12);
    let lin = reconstruction(40, 2, "identity", 0.0, 8, 3, 5).unwrap();
    assert!((lin.lower - lin.upper).abs() <= 1e-12 * lin.upper);
    assert!((lin.train_mse - lin.upper).abs() <= 1e-9 * lin.upper);
    assert!(reconstruction(40, 2, "hypact", 0.5, 3, 8, 0).is_err());
}
