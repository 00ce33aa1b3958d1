use latent_adjust::rotation::{householder_for, random_orthogonal, rotate_and_split};
use latent_adjust::{DataMatrix, StudyDesign};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

fn normals(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

#[test]
fn three_four_five_matches_closed_form() {
    let g = DVector::from_vec(vec![0.6, 0.8, 0.0]);
    let o = householder_for(&g).unwrap();
    // κ = (g - e₁)/‖g - e₁‖ = (-1, 2, 0)/√5, so I - 2κκᵀ is:
    let expected = DMatrix::from_row_slice(3, 3, &[0.6, 0.8, 0.0, 0.8, -0.6, 0.0, 0.0, 0.0, 1.0]);
    assert!((o.matrix() - &expected).amax() < 1e-12);
    let og = o.matrix() * &g;
    assert!((og - DVector::from_vec(vec![1.0, 0.0, 0.0])).amax() < 1e-10);
    assert!((o.matrix().tr_mul(o.matrix()) - DMatrix::identity(3, 3)).amax() < 1e-10);
}

#[test]
fn random_primaries_map_to_first_axis() {
    for seed in 0..20 {
        let n = 3 + seed as usize;
        let g = normals(n, 1, seed).column(0).normalize();
        let o = householder_for(&g).unwrap();
        let mut e1 = DVector::zeros(n);
        e1[0] = 1.0;
        assert!((o.matrix() * &g - e1).amax() < 1e-10);
        assert!((o.matrix().tr_mul(o.matrix()) - DMatrix::identity(n, n)).amax() < 1e-10);
    }
}

#[test]
fn norms_preserved_and_first_column_is_projection() {
    let (n_genes, n) = (30, 12);
    let y = DataMatrix::new(normals(n_genes, n, 1)).unwrap();
    let x = normals(n, 2, 2);
    let d = StudyDesign::new(normals(n, 1, 3).column(0).normalize(), Some(x.clone()), None);
    let o = householder_for(&d.g).unwrap();
    let alt = o.with_complement(&random_orthogonal(n - 1, 4)).unwrap();

    let yg = y.values() * &d.g;
    for rot in [&o, &alt] {
        let r = rotate_and_split(&y, &d, rot).unwrap();
        assert!((&r.y_first - &yg).amax() < 1e-10);
        for i in 0..n_genes {
            let before = y.values().row(i).norm();
            let after = (r.y_first[i].powi(2) + r.y_rest.row(i).norm_squared()).sqrt();
            assert!((before - after).abs() < 1e-8);
        }
        let total = (r.y_first.norm_squared() + r.y_rest.norm_squared()).sqrt();
        assert!((total - y.values().norm()).abs() < 1e-8);
        // Covariates rotate with the subjects.
        let xr_first = x.tr_mul(&d.g);
        assert!((&r.x_first - xr_first).amax() < 1e-10);
        assert_eq!(r.x_rest.shape(), (n - 1, 2));
    }
}

#[test]
fn rest_block_has_no_primary_effect() {
    let n = 8;
    let g = normals(n, 1, 9).column(0).normalize();
    let gamma = DVector::from_fn(15, |i, _| i as f64 - 4.0);
    let y = DataMatrix::new(&gamma * g.transpose()).unwrap();
    let d = StudyDesign::new(g.clone(), None, None);
    let r = rotate_and_split(&y, &d, &householder_for(&g).unwrap()).unwrap();
    assert!((&r.y_first - &gamma).amax() < 1e-10);
    assert!(r.y_rest.amax() < 1e-10);
}

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn rotated_noise_has_the_original_distribution() {
    let (n_genes, n) = (20, 10);
    let mut before = Vec::new();
    let mut after = Vec::new();
    for seed in 0..50 {
        let sigma = DVector::from_fn(n_genes, |i, _| 0.5 + (i % 4) as f64 * 0.5);
        let e = normals(n_genes, n, 100 + seed);
        let y = DataMatrix::new(DMatrix::from_fn(n_genes, n, |i, j| sigma[i] * e[(i, j)])).unwrap();
        let g = normals(n, 1, 500 + seed).column(0).normalize();
        let d = StudyDesign::new(g.clone(), None, None);
        let r = rotate_and_split(&y, &d, &householder_for(&g).unwrap()).unwrap();
        before.extend(y.values().iter().copied());
        after.extend(r.y_rest.iter().copied());
    }
    let (na, nb) = (before.len() as f64, after.len() as f64);
    let stat = ks_two_sample(&mut before, &mut after);
    let critical = 1.628 * ((na + nb) / (na * nb)).sqrt();
    assert!(stat < critical, "KS {stat} >= {critical}");
}
